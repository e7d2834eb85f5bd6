"""Truncated-lattice fields and the functionals of the delta-DNLS.

Fields live on the box ``{-R, ..., R}^d`` with the defect at the centre site.
The equation of motion is

    i du/dt + (Delta u)_n + gamma |u_n|^(2 sigma) u_n + V0 delta_{n,0} u_n = 0

with the coupling fixed to one.  All scalar functionals are accumulated with
:func:`math.fsum` so that conservation checks are limited by the integrator,
not by the summation.

Gradient convention
-------------------
The squared gradient ``||grad f||^2`` counts one forward bond per axis per
site, including the bonds that join the box to the (zero) exterior for
Dirichlet boundaries.  With this convention ``||grad f||^2 = -<Delta f, f>``
holds exactly on both boundary types, the Hamiltonian reads

    H = ||grad f||^2 - gamma/(sigma+1) sum |f|^(2 sigma + 2) - V0 |f_0|^2,

and ``i du/dt = dH/d(conj u)`` reproduces the equation of motion.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, TextIO

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterError

__all__ = [
    "Boundary",
    "ModelParams",
    "WeightSpec",
    "LatticeField",
    "laplacian",
    "apply_delta",
    "mass",
    "gradient_norm_sq",
    "nonlinear_sum",
    "quadratic_form",
    "hamiltonian",
    "energy",
    "action",
    "nehari",
    "action_gradient",
    "energy_gradient",
    "lp_norm",
    "weighted_l2",
    "inner",
    "tail_mass",
    "site_norm",
    "write_snapshot",
    "read_snapshot",
]


class Boundary(str, enum.Enum):
    DIRICHLET = "D"
    PERIODIC = "P"


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the delta-DNLS.

    Attributes
    ----------
    dim : int
        Lattice dimension d >= 1.
    gamma : float
        Nonlinearity strength; positive is focusing, negative defocusing.
    sigma : float
        Nonlinearity degree, strictly positive.
    v0 : float
        Defect strength; positive is attractive, negative repulsive.
    kappa : float
        Coupling constant.  Only ``kappa == 1`` is supported.
    """

    dim: int = 1
    gamma: float = 1.0
    sigma: float = 1.0
    v0: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError(f"dim must be a positive integer, got {self.dim!r}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma!r}")
        if self.kappa != 1.0:
            raise ParameterError("the coupling is fixed to kappa = 1")
        for name in ("gamma", "sigma", "v0"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        object.__setattr__(self, "dim", int(self.dim))

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class WeightSpec:
    """Exponential site weight ``w_n = exp(beta |n|)`` with ``|n|`` the l1 norm."""

    beta: float = 0.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ParameterError(f"beta must be non-negative, got {self.beta!r}")


@dataclass(frozen=True)
class LatticeField:
    """Amplitudes on the box ``{-R..R}^d``.

    ``values`` has shape ``(2R+1,) * d`` and is indexed so that
    ``values[R, ..., R]`` is the defect site.  Flattening in C order gives the
    row-major site ordering used by the snapshot format.  The array is copied
    on construction and marked read-only.
    """

    values: np.ndarray
    boundary: Boundary = Boundary.DIRICHLET
    _radius: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, copy=True)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.ndim < 1:
            raise ParameterError("a lattice field needs at least one axis")
        n = vals.shape[0]
        if n % 2 != 1 or n < 3 or any(s != n for s in vals.shape):
            raise ParameterError(f"values must have shape (2R+1,)*d with R >= 1, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("lattice field contains non-finite amplitudes")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "_radius", (n - 1) // 2)

    def __eq__(self, other):
        if not isinstance(other, LatticeField):
            return NotImplemented
        return self.boundary == other.boundary and np.array_equal(self.values, other.values)

    __hash__ = None

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def radius(self) -> int:
        return self._radius

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def origin(self) -> tuple[int, ...]:
        return (self._radius,) * self.dim

    @property
    def is_real(self) -> bool:
        return self.values.dtype.kind == "f"

    def at(self, *site: int):
        """Amplitude at lattice site ``n = site`` (origin-centred coordinates)."""
        if len(site) != self.dim:
            raise ParameterError(f"expected {self.dim} coordinates, got {len(site)}")
        return self.values[tuple(s + self._radius for s in site)]

    def with_values(self, values) -> "LatticeField":
        return LatticeField(np.asarray(values).reshape(self.shape), self.boundary)

    def with_boundary(self, boundary: Boundary | str) -> "LatticeField":
        return LatticeField(self.values, Boundary(boundary))

    def scaled(self, s) -> "LatticeField":
        return LatticeField(s * self.values, self.boundary)

    def conj(self) -> "LatticeField":
        return LatticeField(np.conj(self.values), self.boundary)

    def real(self) -> "LatticeField":
        return LatticeField(np.real(self.values), self.boundary)

    @classmethod
    def zeros(cls, dim: int, radius: int, boundary=Boundary.DIRICHLET, dtype=float):
        return cls(np.zeros((2 * radius + 1,) * dim, dtype=dtype), boundary)

    @classmethod
    def delta(cls, dim: int, radius: int, amplitude=1.0, boundary=Boundary.DIRICHLET):
        """Single-site excitation at the defect."""
        dtype = complex if np.iscomplexobj(amplitude) else float
        vals = np.zeros((2 * radius + 1,) * dim, dtype=dtype)
        vals[(radius,) * dim] = amplitude
        return cls(vals, boundary)

    @classmethod
    def from_function(
        cls,
        dim: int,
        radius: int,
        func: Callable[..., np.ndarray],
        boundary=Boundary.DIRICHLET,
    ) -> "LatticeField":
        """Evaluate ``func(n_1, ..., n_d)`` on the broadcast coordinate grid."""
        coords = _coordinates(dim, radius)
        vals = np.broadcast_to(func(*coords), (2 * radius + 1,) * dim)
        return cls(vals, boundary)

    @classmethod
    def geometric(cls, dim: int, radius: int, eta: float, amplitude=1.0,
                  boundary=Boundary.DIRICHLET) -> "LatticeField":
        """Profile ``A * eta**|n|``; a negative ``eta`` gives the staggered profile."""
        norm = site_norm(dim, radius)
        return cls(amplitude * _signed_power(eta, norm), boundary)


def _coordinates(dim: int, radius: int) -> list[np.ndarray]:
    axis = np.arange(-radius, radius + 1)
    return [axis.reshape([-1 if k == j else 1 for k in range(dim)]) for j in range(dim)]


def _signed_power(eta: float, n: np.ndarray) -> np.ndarray:
    # eta**|n| with eta < 0 realised as (-1)**|n| |eta|**|n|
    mag = np.abs(eta) ** n
    if eta < 0:
        mag = np.where(n % 2 == 1, -mag, mag)
    return mag


def site_norm(dim: int, radius: int) -> np.ndarray:
    """l1 norm ``|n| = |n_1| + ... + |n_d|`` of every site in the box."""
    out = np.zeros((2 * radius + 1,) * dim, dtype=np.int64)
    for c in _coordinates(dim, radius):
        out = out + np.abs(c)
    return out


def _fsum(a: np.ndarray) -> float:
    return math.fsum(np.ravel(a).tolist())


def _lap(a: np.ndarray, boundary: Boundary) -> np.ndarray:
    out = -2.0 * a.ndim * a
    if boundary is Boundary.PERIODIC:
        for ax in range(a.ndim):
            out = out + np.roll(a, 1, axis=ax) + np.roll(a, -1, axis=ax)
        return out
    padded = np.pad(a, 1)
    core = tuple(slice(1, -1) for _ in range(a.ndim))
    for ax in range(a.ndim):
        lo = list(core)
        hi = list(core)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out = out + padded[tuple(lo)] + padded[tuple(hi)]
    return out


def _grad_sq(a: np.ndarray, boundary: Boundary) -> float:
    parts = []
    if boundary is Boundary.PERIODIC:
        for ax in range(a.ndim):
            parts.append(np.abs(np.roll(a, -1, axis=ax) - a) ** 2)
    else:
        padded = np.pad(a, 1)
        for ax in range(a.ndim):
            d = np.diff(padded, axis=ax)
            # keep the bonds whose transverse coordinates lie inside the box
            sl = tuple(slice(None) if k == ax else slice(1, -1) for k in range(a.ndim))
            parts.append(np.abs(d[sl]) ** 2)
    return math.fsum(x for p in parts for x in np.ravel(p).tolist())


def _origin_sq(a: np.ndarray) -> float:
    r = (a.shape[0] - 1) // 2
    return float(abs(a[(r,) * a.ndim]) ** 2)


def _power_sum(a: np.ndarray, sigma: float) -> float:
    return _fsum(np.abs(a) ** (2 * sigma + 2))


def laplacian(f: LatticeField) -> LatticeField:
    """Discrete Laplacian ``sum_j (f_{n+j} - 2 f_n + f_{n-j})`` on the field's boundary."""
    return LatticeField(_lap(f.values, f.boundary), f.boundary)


def apply_delta(f: LatticeField, p: ModelParams) -> LatticeField:
    """Rank-one defect potential: ``V0 f_0`` at the origin, zero elsewhere."""
    out = np.zeros_like(f.values)
    out[f.origin] = p.v0 * f.values[f.origin]
    return LatticeField(out, f.boundary)


def mass(f: LatticeField) -> float:
    return _fsum(np.abs(f.values) ** 2)


def gradient_norm_sq(f: LatticeField) -> float:
    """``||grad f||^2``, equal to ``-<Delta f, f>``."""
    return _grad_sq(f.values, f.boundary)


def nonlinear_sum(f: LatticeField, sigma: float) -> float:
    """``sum |f_n|^(2 sigma + 2)``."""
    return _power_sum(f.values, sigma)


def quadratic_form(f: LatticeField, omega: float, p: ModelParams) -> float:
    """Quadratic part of the Nehari functional, ``||grad f||^2 - omega ||f||^2 - V0 |f_0|^2``."""
    return gradient_norm_sq(f) - omega * mass(f) - p.v0 * _origin_sq(f.values)


def hamiltonian(f: LatticeField, p: ModelParams) -> float:
    """Conserved energy H of the time-dependent equation."""
    g = gradient_norm_sq(f)
    nl = nonlinear_sum(f, p.sigma)
    return math.fsum([g, -p.gamma / (p.sigma + 1) * nl, -p.v0 * _origin_sq(f.values)])


def energy(f: LatticeField, p: ModelParams) -> float:
    """Energy minimised on the mass sphere; equals ``hamiltonian(f, p) / 2``."""
    return 0.5 * hamiltonian(f, p)


def action(f: LatticeField, omega: float, p: ModelParams) -> float:
    """Action ``J = E - (omega/2) ||f||^2`` whose critical points are breathers of frequency omega."""
    g = gradient_norm_sq(f)
    nl = nonlinear_sum(f, p.sigma)
    return math.fsum([
        0.5 * g,
        -0.5 * omega * mass(f),
        -p.gamma / (2 * p.sigma + 2) * nl,
        -0.5 * p.v0 * _origin_sq(f.values),
    ])


def nehari(f: LatticeField, omega: float, p: ModelParams) -> float:
    """Nehari functional ``I(f) = <J'(f), f>``."""
    g = gradient_norm_sq(f)
    nl = nonlinear_sum(f, p.sigma)
    return math.fsum([g, -omega * mass(f), -p.gamma * nl, -p.v0 * _origin_sq(f.values)])


def _energy_grad_array(a: np.ndarray, boundary: Boundary, p: ModelParams) -> np.ndarray:
    g = -_lap(a, boundary) - p.gamma * np.abs(a) ** (2 * p.sigma) * a
    r = (a.shape[0] - 1) // 2
    g[(r,) * a.ndim] -= p.v0 * a[(r,) * a.ndim]
    return g


def energy_gradient(f: LatticeField, p: ModelParams) -> LatticeField:
    """``E'(f) = -Delta f - gamma |f|^(2 sigma) f - V0 delta f``."""
    return LatticeField(_energy_grad_array(f.values, f.boundary, p), f.boundary)


def action_gradient(f: LatticeField, omega: float, p: ModelParams) -> LatticeField:
    """``J'(f) = E'(f) - omega f``; vanishes exactly on stationary profiles."""
    return LatticeField(_energy_grad_array(f.values, f.boundary, p) - omega * f.values, f.boundary)


def inner(f: LatticeField, g: LatticeField) -> complex | float:
    """l2 inner product ``sum conj(f_n) g_n``."""
    prod = np.ravel(np.conj(f.values) * g.values)
    if np.iscomplexobj(prod):
        return complex(math.fsum(prod.real.tolist()), math.fsum(prod.imag.tolist()))
    return math.fsum(prod.tolist())


def lp_norm(f: LatticeField, pexp: float) -> float:
    """l^p norm for ``p >= 1``; ``p = inf`` gives the maximum modulus."""
    if not pexp >= 1:
        raise ParameterError(f"l^p norm needs p >= 1, got {pexp!r}")
    mod = np.abs(f.values)
    if math.isinf(pexp):
        return float(mod.max())
    top = float(mod.max())
    if top == 0.0:
        return 0.0
    # scale by the maximum so that large p cannot underflow every term
    return top * _fsum((mod / top) ** pexp) ** (1.0 / pexp)


def weighted_l2(f: LatticeField, w: WeightSpec) -> float:
    """``sqrt(sum exp(beta |n|) |f_n|^2)``, accumulated in log space."""
    mod = np.ravel(np.abs(f.values))
    nz = mod > 0
    if not nz.any():
        return 0.0
    logs = w.beta * np.ravel(site_norm(f.dim, f.radius))[nz] + 2.0 * np.log(mod[nz])
    with np.errstate(over="ignore"):
        return float(np.exp(0.5 * logsumexp(logs)))


def tail_mass(f: LatticeField, margin: int = 2) -> float:
    """Mass on sites closer than ``margin`` to the box wall (max-norm > R - margin)."""
    dist = np.zeros(f.shape, dtype=np.int64)
    for c in _coordinates(f.dim, f.radius):
        dist = np.maximum(dist, np.abs(c))
    return _fsum(np.abs(f.values[dist > f.radius - margin]) ** 2)


# -- snapshot format ---------------------------------------------------------

_HEADER = "dnls-field v1"


def write_snapshot(f: LatticeField, dest: str | Path | TextIO) -> None:
    """Write ``f`` as ASCII: a header line, then ``i1 ... id re im`` per site in row-major order."""
    lines = [f"{_HEADER} d={f.dim} R={f.radius} boundary={f.boundary.value}"]
    idx = np.indices(f.shape).reshape(f.dim, -1).T - f.radius
    vals = np.ravel(f.values)
    for site, v in zip(idx.tolist(), vals.tolist()):
        v = complex(v)
        coords = " ".join(str(i) for i in site)
        lines.append(f"{coords} {v.real:.17g} {v.imag:.17g}")
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text, encoding="ascii")


def read_snapshot(src: str | Path | TextIO) -> LatticeField:
    text = src.read() if hasattr(src, "read") else Path(src).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_HEADER):
        raise ParameterError("not a dnls-field v1 snapshot")
    meta = dict(tok.split("=", 1) for tok in lines[0][len(_HEADER):].split())
    try:
        dim, radius, boundary = int(meta["d"]), int(meta["R"]), Boundary(meta["boundary"])
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"malformed snapshot header: {lines[0]!r}") from exc
    n = 2 * radius + 1
    body = [ln.split() for ln in lines[1:] if ln.strip()]
    if len(body) != n ** dim:
        raise ParameterError(f"expected {n ** dim} site lines, found {len(body)}")
    vals = np.empty(n ** dim, dtype=complex)
    idx = np.indices((n,) * dim).reshape(dim, -1).T - radius
    for k, (row, expect) in enumerate(zip(body, idx.tolist())):
        if len(row) != dim + 2 or [int(x) for x in row[:dim]] != expect:
            raise ParameterError(f"site line {k + 2} out of order or malformed")
        vals[k] = complex(float(row[dim]), float(row[dim + 1]))
    arr = vals.reshape((n,) * dim)
    if not np.any(arr.imag):
        arr = arr.real.copy()
    return LatticeField(arr, boundary)
