"""Time evolution by Strang splitting, plus the experiments built on it.

One step of length ``dt`` is

    u <- u exp(i (gamma |u|^(2 sigma) + V0 delta) dt/2)      pointwise
    u <- IFFT( exp(-i 4 sum_j sin^2(q_j/2) dt) FFT(u) )         linear lattice flow
    u <- u exp(i (gamma |u|^(2 sigma) + V0 delta) dt/2)      pointwise

Both sub-flows are exact and unitary, so the mass is conserved to roundoff and
the energy error is O(dt^2).  The pointwise flow leaves ``|u|`` unchanged, so
the two half steps between consecutive linear steps fuse into one full step.
Dynamics runs on periodic boxes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple

import numpy as np
import scipy.fft as sfft

from .errors import AdmissibilityError, IntegrationError, ParameterError, WindowError
from .lattice import (
    Boundary,
    LatticeField,
    ModelParams,
    hamiltonian,
    lp_norm,
    mass,
    site_norm,
)
from .modes import DefectMode, defect_mode, extremal_eigenpair

__all__ = [
    "SplitStepPropagator",
    "TrajectoryRecord",
    "ScatterFit",
    "PersistenceResult",
    "DichotomyResult",
    "evolve",
    "trajectory",
    "deflate",
    "embed",
    "bound_state_vector",
    "persistence_experiment",
    "linear_dispersive_fit",
    "scatter_experiment",
    "admissible_exponents",
    "dichotomy_experiment",
    "power_law_fit",
    "fft_friendly_radius",
    "CORE_RADIUS",
    "FIT_R2_MIN",
]

CORE_RADIUS = 5
FIT_R2_MIN = 0.99
DEFAULT_NORMS = (2.0, 4.0, math.inf)


def fft_friendly_radius(rmin: int) -> int:
    """Smallest ``R >= rmin`` whose box length ``2R + 1`` factors into 3, 5 and 7."""
    r = max(1, int(rmin))
    while True:
        n = 2 * r + 1
        for f in (3, 5, 7):
            while n % f == 0:
                n //= f
        if n == 1:
            return r
        r += 1


class SplitStepPropagator:
    """Precomputed multipliers for one (params, box, dt) combination."""

    def __init__(self, p: ModelParams, dim: int, radius: int, dt: float):
        if not dt > 0:
            raise ParameterError("dt must be positive")
        if dim != p.dim:
            raise ParameterError("field dimension does not match params")
        self.p = p
        self.dt = dt
        n = 2 * radius + 1
        self.shape = (n,) * dim
        self.origin = (radius,) * dim
        q = 2 * np.pi * sfft.fftfreq(n)
        symbol = np.zeros(self.shape)
        for ax in range(dim):
            sh = [1] * dim
            sh[ax] = n
            symbol = symbol + 4 * np.sin(q / 2).reshape(sh) ** 2
        # the symbol is translation invariant, so the centred storage needs no shift
        self._lin = np.exp(-1j * symbol * dt)
        self._linear_only = p.gamma == 0

    def _diag(self, u: np.ndarray, frac: float) -> np.ndarray:
        h = frac * self.dt
        p = self.p
        if self._linear_only:
            u[self.origin] *= np.exp(1j * p.v0 * h)
            return u
        phase = p.gamma * np.abs(u) ** (2 * p.sigma)
        phase[self.origin] += p.v0
        u *= np.exp(1j * phase * h)
        return u

    def _linear(self, u: np.ndarray) -> np.ndarray:
        return sfft.ifftn(self._lin * sfft.fftn(u))

    def advance(self, u: np.ndarray, nsteps: int) -> np.ndarray:
        """Advance ``u`` (complex array, modified copy returned) by ``nsteps`` full steps."""
        u = np.array(u, dtype=complex)
        if nsteps <= 0:
            return u
        u = self._diag(u, 0.5)
        for k in range(nsteps):
            u = self._linear(u)
            u = self._diag(u, 1.0 if k < nsteps - 1 else 0.5)
        return u


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    mass_series: np.ndarray
    energy_series: np.ndarray
    lp_series: dict
    core_mass_fraction: np.ndarray
    final: LatticeField
    dt: float = 0.0
    steps: int = 0
    states: list = field(default_factory=list, repr=False)

    def mass_drift(self) -> float:
        """``max |m(t) - m(0)| / m(0)``."""
        m0 = self.mass_series[0]
        return float(np.max(np.abs(self.mass_series - m0)) / m0) if m0 else 0.0

    def energy_drift(self, relative: bool = True) -> float:
        """``max |H(t) - H(0)|``, divided by ``|H(0)|`` when ``relative`` and ``H(0) != 0``."""
        h0 = self.energy_series[0]
        dev = float(np.max(np.abs(self.energy_series - h0)))
        return dev / abs(h0) if relative and h0 != 0 else dev

    def rows(self) -> list[tuple]:
        """Rows ``(t, mass, energy, l2, l4, linf, core_fraction)`` for CSV output."""
        cols = [self.lp_series.get(k, np.full(len(self.times), np.nan)) for k in DEFAULT_NORMS]
        return list(zip(self.times.tolist(), self.mass_series.tolist(), self.energy_series.tolist(),
                        *[c.tolist() for c in cols], self.core_mass_fraction.tolist()))


def _check_periodic(u0: LatticeField):
    if u0.boundary is not Boundary.PERIODIC:
        raise ParameterError("time evolution needs a periodic field; use with_boundary('P')")


def _steps(T: float, dt: float) -> int:
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if not T >= dt:
        raise ParameterError("T must be at least dt")
    return int(round(T / dt))


def trajectory(u0: LatticeField, p: ModelParams, T: float, dt: float = 0.01,
               sample_every: int = 10) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(t, u)`` at t = 0 and every ``sample_every`` steps up to the final step.

    Raises :class:`IntegrationError` on the first non-finite sample.
    """
    _check_periodic(u0)
    if sample_every < 1:
        raise ParameterError("sample_every must be >= 1")
    nsteps = _steps(T, dt)
    prop = SplitStepPropagator(p, u0.dim, u0.radius, dt)
    u = np.array(u0.values, dtype=complex)
    done = 0
    yield 0.0, u
    while done < nsteps:
        k = min(sample_every, nsteps - done)
        un = prop.advance(u, k)
        if not np.all(np.isfinite(un)):
            raise IntegrationError(done * dt)
        u = un
        done += k
        yield done * dt, u


def evolve(u0: LatticeField, p: ModelParams, T: float, dt: float = 0.01, sample_every: int = 10,
           norms=DEFAULT_NORMS, keep_states: bool = False,
           callback: Callable[[float, np.ndarray], None] | None = None) -> TrajectoryRecord:
    """Integrate the equation of motion from ``u0`` up to time ``T``.

    Observables are recorded at t = 0 and every ``sample_every`` steps.
    """
    norm1 = site_norm(u0.dim, u0.radius)
    core = norm1 <= CORE_RADIUS
    ts, ms, es, cf = [], [], [], []
    lp = {float(k): [] for k in norms}
    states = []
    u = None
    for t, u in trajectory(u0, p, T, dt, sample_every):
        f = LatticeField(u, Boundary.PERIODIC)
        ts.append(t)
        m = mass(f)
        ms.append(m)
        es.append(hamiltonian(f, p))
        cf.append(math.fsum((np.abs(u[core]) ** 2).tolist()) / m if m else 0.0)
        for k in lp:
            lp[k].append(lp_norm(f, k))
        if keep_states:
            states.append(f)
        if callback is not None:
            callback(t, u)
    return TrajectoryRecord(
        times=np.array(ts),
        mass_series=np.array(ms),
        energy_series=np.array(es),
        lp_series={k: np.array(v) for k, v in lp.items()},
        core_mass_fraction=np.array(cf),
        final=LatticeField(u, Boundary.PERIODIC),
        dt=dt,
        steps=_steps(T, dt),
        states=states,
    )


# -- bound-state removal -----------------------------------------------------


def embed(f: LatticeField, radius: int, boundary=Boundary.PERIODIC) -> LatticeField:
    """Zero-pad (or crop) ``f`` to a box of the given radius, keeping the origin centred."""
    r0 = f.radius
    out = np.zeros((2 * radius + 1,) * f.dim, dtype=f.values.dtype)
    m = min(r0, radius)
    src = tuple(slice(r0 - m, r0 + m + 1) for _ in range(f.dim))
    dst = tuple(slice(radius - m, radius + m + 1) for _ in range(f.dim))
    out[dst] = f.values[src]
    return LatticeField(out, Boundary(boundary))


def bound_state_vector(p: ModelParams, radius: int, boundary=Boundary.PERIODIC) -> LatticeField:
    """Unit-mass defect eigenvector on a box.

    In d = 1 the closed-form mode is exact up to ``eta**R`` wrap terms.  In
    higher dimensions the closed form is not an eigenvector, so the numerical
    eigenvector of the Dirichlet box is used instead.
    """
    if p.dim == 1:
        return defect_mode(p).field(radius, boundary, normalize=True)
    _, vec, _ = extremal_eigenpair(p, radius)
    return LatticeField(vec / np.linalg.norm(vec), Boundary(boundary))


def deflate(u0: LatticeField, mode: DefectMode | LatticeField) -> LatticeField:
    """Remove the component along the normalised defect mode: ``u0 - <phi, u0> phi``."""
    if isinstance(mode, DefectMode):
        if mode.dim != u0.dim:
            raise ParameterError("mode dimension does not match the field")
        phi = mode.field(u0.radius, u0.boundary, normalize=True).values
    else:
        if mode.shape != u0.shape:
            raise ParameterError("mode box does not match the field box")
        phi = np.asarray(mode.values)
        nrm = np.linalg.norm(phi)
        if nrm == 0:
            raise ParameterError("zero mode")
        phi = phi / nrm
    c = np.vdot(phi, u0.values)
    return u0.with_values(u0.values - c * phi)


# -- experiments ---------------------------------------------------------------


class PersistenceResult(NamedTuple):
    sup_error: float
    bound: float


def persistence_experiment(p: ModelParams, eps: float, cT: float = 1.0, R: int | None = None,
                           dt: float = 0.01, sample_every: int = 10) -> PersistenceResult:
    """Compare linear and nonlinear evolution of an eps-normalised defect mode.

    Both runs start from ``w0 = eps phi`` with ``phi`` the unit-mass mode; the
    linear run has gamma forced to 0.  The horizon is ``T = cT eps**(-2 sigma)``.
    Returns ``sup_t ||v(t) - w(t)||`` and ``|gamma| eps**(2 sigma + 1) T``.
    When ``R`` is too small for the horizon (``T > R/2``) the horizon is cut
    to ``R/2`` with a warning; when ``R`` is omitted it is chosen as
    the smallest FFT-friendly radius at or above ``ceil(2T) + 20``.
    """
    if not 0 < eps < 1:
        raise ParameterError("persistence needs 0 < eps < 1")
    if p.v0 == 0:
        raise ParameterError("persistence needs V0 != 0")
    T = cT * eps ** (-2 * p.sigma)
    if R is None:
        R = fft_friendly_radius(int(math.ceil(2 * T)) + 20)
    if T > R / 2:
        warnings.warn(f"horizon {T:g} exceeds the reflection-safe window; shrinking to {R / 2:g}",
                      RuntimeWarning, stacklevel=2)
        T = R / 2
    phi = bound_state_vector(p, R)
    w0 = phi.scaled(eps)
    lin = trajectory(w0, p.replace(gamma=0.0), T, dt, sample_every)
    non = trajectory(w0, p, T, dt, sample_every)
    sup = 0.0
    for (_, v), (_, w) in zip(lin, non):
        sup = max(sup, float(np.linalg.norm(v - w)))
    bound = abs(p.gamma) * eps ** (2 * p.sigma + 1) * T
    return PersistenceResult(sup, bound)


class ScatterFit(NamedTuple):
    p: float
    fitted_exponent: float
    predicted_exponent: float
    fit_window: tuple
    r2: float

    @property
    def ok(self) -> bool:
        return self.r2 >= FIT_R2_MIN


def power_law_fit(t: np.ndarray, y: np.ndarray, window: tuple[float, float]) -> tuple[float, float]:
    """Fit ``y ~ t**(-k)`` on the window; returns ``(k, r2)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = (t >= window[0]) & (t <= window[1]) & (y > 0)
    if sel.sum() < 3:
        raise WindowError("fewer than three samples in the fit window")
    x, z = np.log(t[sel]), np.log(y[sel])
    slope, icept = np.polyfit(x, z, 1)
    res = z - (slope * x + icept)
    tot = z - z.mean()
    ss_tot = float(tot @ tot)
    r2 = 1.0 - float(res @ res) / ss_tot if ss_tot > 0 else 0.0
    return -float(slope), r2


def _check_window(window, R, T):
    t0, t1 = window
    if not 0 < t0 < t1:
        raise WindowError("fit window must satisfy 0 < t_min < t_max")
    if t1 > R / 2:
        raise WindowError(f"t_max = {t1:g} exceeds the reflection-safe bound R/2 = {R / 2:g}")
    if t1 > T + 1e-9:
        raise WindowError("fit window extends beyond the integration horizon")


def linear_dispersive_fit(p: ModelParams, R: int = 4000, T: float = 400.0,
                          window: tuple[float, float] = (20.0, 400.0), dt: float = 0.05,
                          deflate_bound_state: bool = True, sample_every: int = 10) -> ScatterFit:
    """Fit the l^inf decay exponent of the linear flow from a unit delta.

    With ``V0 != 0`` and ``deflate_bound_state`` the defect-mode component is
    removed first; without it the bound state leaves a plateau and the fit
    quality collapses.
    """
    if p.gamma != 0:
        raise ParameterError("linear_dispersive_fit needs gamma = 0")
    _check_window(window, R, T)
    u0 = LatticeField.delta(p.dim, R, amplitude=1.0 + 0j, boundary=Boundary.PERIODIC)
    if p.v0 != 0 and deflate_bound_state:
        u0 = deflate(u0, bound_state_vector(p, R))
    rec = evolve(u0, p, T, dt, sample_every, norms=(math.inf,))
    k, r2 = power_law_fit(rec.times, rec.lp_series[math.inf], window)
    return ScatterFit(math.inf, k, p.dim / 3, tuple(window), r2)


def admissible_exponents(p: ModelParams) -> tuple[float, float]:
    """``(4 d sigma/(2 d sigma - 3), 2 (sigma + 1))``; the lower end is inf when ``2 d sigma <= 3``."""
    ds = p.dim * p.sigma
    lo = 4 * ds / (2 * ds - 3) if 2 * ds > 3 else math.inf
    return lo, 2 * (p.sigma + 1)


def _check_scatter(p: ModelParams, nu: float, pexp: float):
    from .thresholds import threshold_formulas

    d, s = p.dim, p.sigma
    if p.gamma <= 0:
        raise AdmissibilityError("scattering needs gamma > 0")
    if p.v0 > 0:
        raise AdmissibilityError("scattering needs V0 <= 0")
    need = max(1.0, 2.0 / d) if p.v0 < 0 else 2.0 / d
    if s < need:
        raise AdmissibilityError(f"sigma >= {need:g} violated (sigma = {s:g})")
    rep = threshold_formulas(p)
    if rep.nu_lower_single_site is not None and not nu < rep.nu_lower_single_site:
        raise AdmissibilityError(f"nu < {rep.nu_lower_single_site:.6g} violated (nu = {nu:g})")
    lo, hi = admissible_exponents(p)
    if not pexp <= hi:
        raise AdmissibilityError(f"p <= 2(sigma+1) = {hi:g} violated (p = {pexp:g})")
    if not pexp >= lo:
        raise AdmissibilityError(f"p >= 4 d sigma/(2 d sigma - 3) = {lo:g} violated (p = {pexp:g})")


def scatter_experiment(p: ModelParams, nu: float, pexp: float, R: int = 1012, T: float = 400.0,
                       dt: float = 0.01, window: tuple[float, float] | None = None,
                       enforce_admissibility: bool = True, sample_every: int = 10,
                       record: list | None = None) -> ScatterFit:
    """Evolve single-site data of mass ``nu`` and fit the l^p decay exponent.

    The prediction is ``d (p - 2)/(3 p)``.  With ``enforce_admissibility`` the
    hypotheses of the decay bound are checked first and the first violated
    inequality is named in the :class:`AdmissibilityError`.
    """
    if enforce_admissibility:
        _check_scatter(p, nu, pexp)
    if not nu > 0:
        raise ParameterError("nu must be positive")
    if window is None:
        window = (T / 20, T)
    _check_window(window, R, T)
    u0 = LatticeField.delta(p.dim, R, amplitude=complex(math.sqrt(nu)), boundary=Boundary.PERIODIC)
    if p.v0 != 0:
        u0 = deflate(u0, bound_state_vector(p, R))
        u0 = u0.scaled(math.sqrt(nu / mass(u0)))
    rec = evolve(u0, p, T, dt, sample_every, norms=(2.0, 4.0, math.inf, float(pexp)))
    if record is not None:
        record.append(rec)
    k, r2 = power_law_fit(rec.times, rec.lp_series[float(pexp)], window)
    pred = p.dim * (pexp - 2) / (3 * pexp) if math.isfinite(pexp) else p.dim / 3
    return ScatterFit(float(pexp), k, pred, tuple(window), r2)


class DichotomyResult(NamedTuple):
    min_core_fraction: float
    record: TrajectoryRecord
    omega: float


def dichotomy_experiment(p: ModelParams, nu: float = 4.0, R: int = 256, T: float = 100.0,
                         dt: float = 0.01, phase: float = 0.7, solver_radius: int = 30,
                         sample_every: int = 10) -> DichotomyResult:
    """Evolve the phase-rotated M2 ground state of mass ``nu`` and track its core mass fraction."""
    from .groundstate import minimize_energy_m2

    gs = minimize_energy_m2(nu, p, solver_radius)
    if not gs.found:
        raise ParameterError(gs.diagnostic)
    u0 = embed(gs.profile, R).scaled(complex(math.cos(phase), math.sin(phase)))
    rec = evolve(u0, p, T, dt, sample_every)
    return DichotomyResult(float(rec.core_mass_fraction.min()), rec, gs.omega)
