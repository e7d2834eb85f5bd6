"""Excitation thresholds from the exponential trial profile.

The trial field ``x_n = A eta**|n|`` with ``A^2 = ((1 - eta^2)/(1 + eta^2))**d nu``
has mass ``nu`` on the infinite lattice, and its Hamiltonian is

    H(eta, nu) = a(eta) nu - b(eta) nu**(sigma + 1)

with
    a = kinetic(eta) - V0 w,     w = ((1 - eta^2)/(1 + eta^2))**d,
    b = gamma/(sigma + 1) w**(sigma + 1) ((1 + |eta|^(2 sigma + 2))/(1 - |eta|^(2 sigma + 2)))**d.

The lattice kinetic coefficient is ``2 d (1 - eta)^2/(1 + eta^2)``.  Every
threshold below is a statement about the sign of ``H`` (or ``H - 4d`` for
the staggering branch) and is obtained by scanning ``eta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import ParameterError
from .lattice import Boundary, LatticeField, ModelParams, gradient_norm_sq, mass, nonlinear_sum

__all__ = [
    "Regime",
    "TrialProfile",
    "ThresholdReport",
    "power_sum",
    "binomial_quotient",
    "trial_energy",
    "trial_coefficients",
    "threshold_formulas",
    "eta_scan",
    "interpolation_ratio",
    "interpolation_check",
    "necessary_mass_root",
    "critical_sigmas",
]


class Regime(str, enum.Enum):
    NO_THRESHOLD = "NoThreshold"
    THRESHOLD_EXISTS = "ThresholdExists"
    NO_LOCALIZED_STATE = "NoLocalizedState"
    UNCOVERED = "Uncovered"


@dataclass(frozen=True)
class TrialProfile:
    eta: float
    nu: float
    dim: int = 1

    def __post_init__(self):
        if not -1 < self.eta < 1 or self.eta == 0:
            raise ParameterError("trial profile needs 0 < |eta| < 1")
        if not self.nu > 0:
            raise ParameterError("trial profile needs nu > 0")

    @property
    def amplitude(self) -> float:
        return ((1 - self.eta ** 2) / (1 + self.eta ** 2)) ** (self.dim / 2) * math.sqrt(self.nu)

    def field(self, radius: int, boundary=Boundary.DIRICHLET) -> LatticeField:
        return LatticeField.geometric(self.dim, radius, self.eta, self.amplitude, boundary)


@dataclass(frozen=True)
class ThresholdReport:
    """Threshold classification, from closed forms or from a scan.

    ``nu_lower`` and ``nu_upper`` are bounds on ``nu**sigma``; the
    ``*_single_site`` fields are their ``sigma``-th roots, i.e. bounds on the
    mass itself.  Scan-only fields are None for closed-form reports.
    """

    regime: Regime
    nu_lower: float | None = None
    nu_upper: float | None = None
    nu_lower_single_site: float | None = None
    nu_upper_single_site: float | None = None
    branch: str = "breather"
    scan_eta: np.ndarray | None = field(default=None, repr=False)
    scan_value: np.ndarray | None = field(default=None, repr=False)
    inf_eta: float | None = None
    inf_value: float | None = None
    limit_center: float | None = None
    limit_edge: float | None = None
    exists_at_nu: bool | None = None
    note: str = ""

    @property
    def scan_curve(self) -> list[tuple[float, float]]:
        if self.scan_eta is None:
            return []
        return list(zip(self.scan_eta.tolist(), self.scan_value.tolist()))


def power_sum(eta, sigma: float):
    """``1 + eta + ... + eta**(2 sigma + 1)``, i.e. ``(1 - eta**(2 sigma + 2))/(1 - eta)``.

    For integer ``2 sigma + 1`` the finite sum is evaluated; otherwise the
    closed form (which then requires ``eta >= 0``).
    """
    e = np.asarray(eta, dtype=float)
    if np.any(np.abs(e) >= 1):
        raise ParameterError("power_sum needs |eta| < 1")
    top = 2 * sigma + 1
    if float(top).is_integer():
        out = np.zeros_like(e)
        for k in range(int(top), -1, -1):
            out = out * e + 1.0
    else:
        if np.any(e < 0):
            raise ParameterError("non-integer 2 sigma + 1 needs eta >= 0")
        out = (1 - e ** (2 * sigma + 2)) / (1 - e)
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def _quotient_coeffs(d: int) -> tuple[float, ...]:
    num = P.polysub(P.polypow([1.0, 0.0, 1.0], d), np.r_[np.zeros(d), 2.0 ** d])
    q, r = P.polydiv(num, [1.0, -2.0, 1.0])
    if np.any(np.abs(r) > 1e-9 * np.max(np.abs(num))):
        raise ArithmeticError(f"(1 - eta)^2 does not divide the d={d} polynomial")
    return tuple(np.round(q).tolist())


def binomial_quotient(eta, d: int):
    """``((1 + eta^2)**d - (2 eta)**d) / (1 - eta)**2`` as an exact polynomial in eta."""
    if d < 1:
        raise ParameterError("d >= 1 required")
    out = P.polyval(np.asarray(eta, dtype=float), _quotient_coeffs(int(d)))
    return out if np.ndim(out) else float(out)


def _mass_weight(eta, d):
    e2 = np.asarray(eta, dtype=float) ** 2
    return ((1 - e2) / (1 + e2)) ** d


def _nonlinear_factor(eta, sigma, d):
    # sum |eta|^((2 sigma + 2)|n|) over one axis; the sign of eta drops out of |x|
    m = np.abs(np.asarray(eta, dtype=float))
    num = 1 + m ** (2 * sigma + 2)
    den = (1 - m) * power_sum(m, sigma)
    return (num / den) ** d


def _kinetic(eta, d, kinetic):
    e = np.asarray(eta, dtype=float)
    if kinetic == "lattice":
        return 2 * d * (1 - e) ** 2 / (1 + e ** 2)
    if kinetic == "binomial":
        return 2 * binomial_quotient(e, d) * (1 - e) ** 2 / (1 + e ** 2) ** d
    raise ParameterError(f"unknown kinetic form {kinetic!r}")


def trial_coefficients(eta, p: ModelParams, kinetic: str = "lattice"):
    """Coefficients ``(a, b)`` with ``H = a nu - b nu**(sigma + 1)`` on the trial family."""
    d, s = p.dim, p.sigma
    w = _mass_weight(eta, d)
    a = _kinetic(eta, d, kinetic) - p.v0 * w
    b = p.gamma / (s + 1) * w ** (s + 1) * _nonlinear_factor(eta, s, d)
    return a, b


def trial_energy(t: TrialProfile, p: ModelParams, kinetic: str = "lattice") -> float:
    """Hamiltonian of the infinite-lattice trial profile.

    ``kinetic="lattice"`` uses the exact bond sum of the geometric field.
    ``kinetic="binomial"`` uses ``2 ((1 + eta^2)^d - (2 eta)^d)/(1 + eta^2)^d``,
    which coincides with it only for d = 1.
    """
    if t.dim != p.dim:
        raise ParameterError("trial profile and params disagree on dimension")
    a, b = trial_coefficients(t.eta, p, kinetic)
    return float(a * t.nu - b * t.nu ** (p.sigma + 1))


def critical_sigmas(d: int) -> tuple[float, float]:
    """``(min{1, 2/d}, max{1, 2/d})``."""
    return min(1.0, 2.0 / d), max(1.0, 2.0 / d)


def threshold_formulas(p: ModelParams) -> ThresholdReport:
    """Closed-form regime and thresholds.

    The single-site value ``2d - V0`` of the trial coefficient ``a`` replaces
    the one-dimensional ``2 - V0``; the two agree for d = 1.
    """
    d, g, s, v0 = p.dim, p.gamma, p.sigma, p.v0
    lo, hi = critical_sigmas(d)
    edge = 2 * d
    if g > 0:
        if v0 > 0:
            return ThresholdReport(Regime.NO_THRESHOLD)
        if s < lo:
            return ThresholdReport(Regime.NO_THRESHOLD)
        if s >= hi:
            val = (s + 1) / g * (edge - v0)
            return ThresholdReport(Regime.THRESHOLD_EXISTS, nu_lower=val,
                                   nu_lower_single_site=val ** (1 / s))
        return ThresholdReport(Regime.UNCOVERED, note="min{1,2/d} <= sigma < max{1,2/d}")
    if g < 0:
        if s < lo:
            return ThresholdReport(Regime.NO_LOCALIZED_STATE)
        if s >= hi:
            if v0 > edge:
                val = (s + 1) / abs(g) * (v0 - edge)
                return ThresholdReport(Regime.THRESHOLD_EXISTS, nu_upper=val,
                                       nu_upper_single_site=val ** (1 / s))
            return ThresholdReport(Regime.NO_LOCALIZED_STATE, note="V0 <= 2d: upper bound not positive")
        return ThresholdReport(Regime.UNCOVERED, note="min{1,2/d} <= sigma < max{1,2/d}")
    return ThresholdReport(Regime.UNCOVERED, note="gamma = 0 is linear")


def _open_grid(grid: int, staggering: bool) -> np.ndarray:
    eta = np.arange(1, grid + 1) / (grid + 1)
    return -eta[::-1] if staggering else eta


def _breather_bound(eta, p, kinetic):
    a, b = trial_coefficients(eta, p, kinetic)
    return a / b


def _stagger_bound(eta, p, nu, kinetic):
    a, b = trial_coefficients(eta, p, kinetic)
    return (a * nu - 4 * p.dim) / b


def eta_scan(p: ModelParams, nu: float, grid: int = 1000, branch: str = "breather",
             kinetic: str = "lattice") -> ThresholdReport:
    """Scan the trial-family bound over an open eta grid.

    ``branch="breather"`` scans ``(0, 1)``.  For gamma > 0 the value is the
    bound on ``nu**sigma`` above which ``H < 0``; for gamma < 0 it is the bound
    below which ``H <= 0``.  ``branch="staggering"`` scans ``(-1, 0)`` with
    the bound on ``nu**(sigma + 1)`` below which ``H > 4d``.

    Endpoint behaviour is probed at ``|eta| = 10**-k`` and ``1 - 10**-k``.
    A bound that is non-positive somewhere, or that decays to zero at an
    endpoint, means no positive threshold.
    """
    if grid < 100:
        raise ParameterError("eta_scan needs grid >= 100")
    if p.gamma == 0:
        raise ParameterError("eta_scan needs gamma != 0")
    if not nu > 0:
        raise ParameterError("eta_scan needs nu > 0")
    stag = branch == "staggering"
    if branch not in ("breather", "staggering"):
        raise ParameterError(f"unknown branch {branch!r}")
    sgn = -1.0 if stag else 1.0

    if stag:
        def f(e):
            return _stagger_bound(e, p, nu, kinetic)
    else:
        # b < 0 for gamma < 0 flips the inequality but not the ratio
        def f(e):
            return _breather_bound(e, p, kinetic)

    eta = _open_grid(grid, stag)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = np.asarray(f(eta), dtype=float)
        ks = np.arange(2, 9)
        center = np.asarray(f(sgn * 10.0 ** -ks), dtype=float)
        edge = np.asarray(f(sgn * (1 - 10.0 ** -ks)), dtype=float)
    k = int(np.nanargmin(vals))
    inf_val, inf_eta = float(vals[k]), float(eta[k])
    lim_c, lim_e = float(center[-1]), float(edge[-1])
    scale = abs(inf_val) if inf_val != 0 else 1.0
    to_zero = bool(np.all(np.diff(edge) < 0) and 0 <= lim_e < 1e-2 * scale) or \
        bool(np.all(np.diff(center) < 0) and 0 <= lim_c < 1e-2 * scale)
    bound = min(inf_val, lim_c, lim_e)
    nonpositive = bound <= 0 or to_zero

    rep = dict(branch=branch, scan_eta=eta, scan_value=vals, inf_eta=inf_eta,
               inf_value=bound, limit_center=lim_c, limit_edge=lim_e)
    s = p.sigma
    if stag:
        if nonpositive:
            return ThresholdReport(Regime.NO_LOCALIZED_STATE, exists_at_nu=False, **rep)
        return ThresholdReport(Regime.THRESHOLD_EXISTS, exists_at_nu=nu ** (s + 1) < bound,
                               nu_upper=bound, nu_upper_single_site=bound ** (1 / (s + 1)), **rep)
    if p.gamma > 0:
        if nonpositive:
            return ThresholdReport(Regime.NO_THRESHOLD, exists_at_nu=True, **rep)
        return ThresholdReport(Regime.THRESHOLD_EXISTS, exists_at_nu=nu ** s > bound,
                               nu_lower=bound, nu_lower_single_site=bound ** (1 / s), **rep)
    if nonpositive:
        return ThresholdReport(Regime.NO_LOCALIZED_STATE, exists_at_nu=False, **rep)
    return ThresholdReport(Regime.THRESHOLD_EXISTS, exists_at_nu=nu ** s <= bound,
                           nu_upper=bound, nu_upper_single_site=bound ** (1 / s), **rep)


def interpolation_ratio(f: LatticeField, sigma: float) -> float:
    """``sum |u|^(2 sigma + 2) / ((sum |u|^2)^sigma <-Delta u, u>)``."""
    g = gradient_norm_sq(f)
    if g == 0:
        raise ParameterError("field with zero gradient energy")
    return nonlinear_sum(f, sigma) / (mass(f) ** sigma * g)


def interpolation_check(fields, p: ModelParams) -> float:
    """Largest interpolation ratio over a sample: an empirical lower estimate of the constant.

    Fields with vanishing gradient energy are skipped.
    """
    if p.sigma < 2 / p.dim:
        raise ParameterError("the interpolation inequality needs sigma >= 2/d")
    best = -math.inf
    for f in fields:
        if not np.any(f.values):
            raise ParameterError("zero field in interpolation sample")
        if gradient_norm_sq(f) == 0:
            continue
        best = max(best, interpolation_ratio(f, p.sigma))
    if best == -math.inf:
        raise ParameterError("no usable field in interpolation sample")
    return best


def necessary_mass_root(constant: float, p: ModelParams) -> float:
    """Positive root of ``1 - gamma C/(sigma+1) nu^sigma - |V0|/2 nu = 0``.

    Below this mass the interpolation bound forces ``E >= 0``.
    """
    if not constant > 0 or p.gamma <= 0:
        raise ParameterError("need C > 0 and gamma > 0")

    def f(nu):
        return 1 - p.gamma * constant / (p.sigma + 1) * nu ** p.sigma - abs(p.v0) / 2 * nu

    hi = 1.0
    while f(hi) > 0:
        hi *= 2
    return brentq(f, 0.0, hi, xtol=1e-15)
