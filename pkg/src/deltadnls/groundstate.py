"""Variational ground states: action on the Nehari manifold and energy at fixed mass.

Two minimisation problems produce breather profiles ``u_n = x_n exp(-i omega t)``:

* M1 fixes the frequency ``omega < 0`` and minimises the action ``J`` over the
  Nehari manifold ``{x != 0 : I(x) = 0}``.
* M2 fixes the mass ``nu`` and minimises the energy ``E`` over the sphere
  ``||x||^2 = nu``; the frequency is recovered as the Lagrange multiplier.

Both are solved by projected gradient descent with backtracking.  Profiles are
real and live on a Dirichlet box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, NoNehariProjection, ParameterError, SolverCollapse
from .lattice import (
    Boundary,
    LatticeField,
    ModelParams,
    _energy_grad_array,
    action,
    energy,
    mass,
    nehari,
    nonlinear_sum,
    quadratic_form,
    site_norm,
)

__all__ = [
    "GroundState",
    "NehariCertificate",
    "fibering_scale",
    "project_to_nehari",
    "nehari_bounds",
    "fibering_curvature",
    "minimize_action_m1",
    "minimize_energy_m2",
    "decay_fit",
    "certify",
    "m1_m2_crosscheck",
    "CrossCheck",
]

DEFAULT_TOL = 1e-10
DEFAULT_STEP = 0.1
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class NehariCertificate:
    alpha: float
    beta_lb: float


@dataclass(frozen=True)
class GroundState:
    """Outcome of an M1 or M2 run.

    ``found`` is False for an M2 run whose final energy is non-negative; the
    profile is then the best iterate reached and ``diagnostic`` explains why.
    """

    profile: LatticeField
    omega: float
    nu: float
    action: float
    energy: float
    residual: float
    decay_eta: float
    decay_r2: float
    gamma2: float
    iterations: int
    converged: bool
    method: str
    found: bool = True
    diagnostic: str = ""
    nehari_value: float = field(default=0.0)


def _check_real(x: LatticeField):
    if not x.is_real:
        raise ParameterError("stationary profiles are real; pass a real field")


def fibering_scale(x: LatticeField, omega: float, p: ModelParams) -> float:
    """Unique ``s > 0`` with ``I(s x) = 0``.

    Raises
    ------
    NoNehariProjection
        If the quadratic form ``Q(x)`` is not positive.
    """
    if p.gamma <= 0:
        raise ParameterError("the Nehari projection needs gamma > 0")
    n = nonlinear_sum(x, p.sigma)
    if n == 0:
        raise ParameterError("zero field has no Nehari projection")
    q = quadratic_form(x, omega, p)
    if not q > 0:
        raise NoNehariProjection(q)
    return (q / (p.gamma * n)) ** (1.0 / (2 * p.sigma))


def project_to_nehari(x: LatticeField, omega: float, p: ModelParams) -> LatticeField:
    return x.scaled(fibering_scale(x, omega, p))


def fibering_curvature(x: LatticeField, omega: float, p: ModelParams) -> float:
    """Second derivative of ``s -> J(s x)`` at ``s = 1``; equals ``-2 sigma gamma N`` on the manifold."""
    return quadratic_form(x, omega, p) - (2 * p.sigma + 1) * p.gamma * nonlinear_sum(x, p.sigma)


def nehari_bounds(omega: float, p: ModelParams) -> NehariCertificate:
    """Lower bounds on the norm and the action of every point of the Nehari manifold."""
    gap = -(omega + p.v0)
    if not gap > 0:
        raise ParameterError(f"Nehari bounds need V0 < -omega (V0={p.v0}, omega={omega})")
    if p.gamma <= 0:
        raise ParameterError("Nehari bounds need gamma > 0")
    s = p.sigma
    alpha = (gap / p.gamma) ** (1 / (2 * s))
    beta = 0.5 * (1 - 1 / (1 + s)) * gap ** (1 + 1 / (2 * s)) * p.gamma ** (-1 / (2 * s))
    return NehariCertificate(alpha, beta)


# -- decay ---------------------------------------------------------------------


def decay_fit(x: LatticeField, wall_fraction: float = 0.75) -> tuple[float, float]:
    """Least-squares fit of ``log|x_n|`` against ``|n|``.

    Sites below ``1e3`` machine epsilons (relative to the peak) and sites with
    max-norm beyond ``wall_fraction * R`` are excluded, the latter to keep the
    Dirichlet reflection out of the fit.  A profile whose sign alternates with
    the parity of ``|n|`` yields a negative estimate.

    Returns
    -------
    (eta_est, r2)
    """
    a = np.asarray(x.values)
    mod = np.abs(a)
    top = float(mod.max()) if mod.size else 0.0
    if top == 0.0:
        raise ParameterError("decay fit of the zero field")
    norm1 = site_norm(x.dim, x.radius)
    idx = np.indices(x.shape) - x.radius
    maxnorm = np.max(np.abs(idx), axis=0)
    use = (mod > 1e3 * np.finfo(float).eps * top) & (maxnorm <= wall_fraction * x.radius)
    if int(use.sum()) < 5:
        raise ParameterError(f"only {int(use.sum())} usable sites for a decay fit (need 5)")
    n = norm1[use].astype(float)
    y = np.log(mod[use])
    if np.ptp(n) == 0:
        raise ParameterError("decay fit needs sites at more than one distance")
    slope, icept = np.polyfit(n, y, 1)
    pred = slope * n + icept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    eta = math.exp(slope)
    if np.isrealobj(a):
        signs = np.sign(a[use]) * np.where(norm1[use] % 2 == 1, -1, 1)
        if np.all(signs == signs[0]) and np.any(np.sign(a[use]) != np.sign(a[use][0])):
            eta = -eta
    return eta, r2


# -- solvers -------------------------------------------------------------------


def _default_init(p: ModelParams, radius: int) -> LatticeField:
    return LatticeField.delta(p.dim, radius)


def _finish(x: LatticeField, omega: float, p: ModelParams, it: int, converged: bool,
            method: str, found: bool = True, diagnostic: str = "") -> GroundState:
    res = float(np.linalg.norm(_energy_grad_array(x.values, x.boundary, p) - omega * x.values))
    try:
        eta, r2 = decay_fit(x)
    except ParameterError:
        eta, r2 = math.nan, math.nan
    return GroundState(
        profile=x,
        omega=omega,
        nu=mass(x),
        action=action(x, omega, p),
        energy=energy(x, p),
        residual=res,
        decay_eta=eta,
        decay_r2=r2,
        gamma2=fibering_curvature(x, omega, p),
        iterations=it,
        converged=converged,
        method=method,
        found=found,
        diagnostic=diagnostic,
        nehari_value=nehari(x, omega, p),
    )


def _prepare_init(init, p: ModelParams, radius: int) -> LatticeField:
    if init is None:
        return _default_init(p, radius)
    _check_real(init)
    if init.dim != p.dim:
        raise ParameterError("initial field dimension does not match params")
    x = init.real() if np.iscomplexobj(init.values) else init
    if x.boundary is not Boundary.DIRICHLET:
        x = x.with_boundary(Boundary.DIRICHLET)
    if not np.any(x.values):
        raise ParameterError("initial field is zero")
    return x


def _fast_action(a, omega, p, bnd):
    # np.sum is adequate inside the loop; reported values use compensated sums
    g = _energy_grad_array(a, bnd, p)
    lin = g + p.gamma * np.abs(a) ** (2 * p.sigma) * a
    quad = float(np.sum(lin * a)) - omega * float(np.sum(a * a))
    nl = float(np.sum(np.abs(a) ** (2 * p.sigma + 2)))
    return 0.5 * quad - p.gamma / (2 * p.sigma + 2) * nl, g - omega * a, quad, nl


def _accept(f_old, f_new, gnorm, g_new, tau) -> bool:
    """Backtracking acceptance test.

    While the predicted decrease ``tau ||g||^2`` is resolvable in floating
    point the objective must not rise beyond roundoff; below that level the
    objective carries no information and the gradient norm must not grow.
    """
    scale = max(1.0, abs(f_old))
    if tau < 1e-14:
        return True
    if tau * gnorm * gnorm > 1e-11 * scale:
        return f_new <= f_old + 1e-14 * scale
    return f_new <= f_old + 1e-12 * scale and float(np.linalg.norm(g_new)) <= gnorm


def minimize_action_m1(omega: float, p: ModelParams, radius: int, init: LatticeField | None = None,
                       tol: float = DEFAULT_TOL, step: float = DEFAULT_STEP,
                       max_iter: int = DEFAULT_MAX_ITER, max_step: float | None = None,
                       record: list | None = None, strict: bool = True) -> GroundState:
    """Minimise the action at frequency ``omega`` over the Nehari manifold.

    Each iteration takes a gradient step on J and rescales back onto the
    manifold along the ray; steps that raise J are halved.  ``record``, if
    given, receives the action of every accepted iterate.

    With ``strict=False`` the condition ``V0 < -omega`` is not enforced; the
    descent then only needs the quadratic form to stay positive along the
    iterates, which holds whenever omega lies below the linear defect
    eigenvalue.  The collapse check is skipped in that case.

    Raises
    ------
    ParameterError
        ``omega >= 0``, ``gamma <= 0`` or ``V0 >= -omega``.
    SolverCollapse
        An iterate's norm fell below half the Nehari lower bound.
    ConvergenceError
        ``max_iter`` reached before ``||J'|| <= tol``.
    """
    if not omega < 0:
        raise ParameterError("M1 needs omega < 0")
    if p.gamma <= 0:
        raise ParameterError("M1 needs gamma > 0")
    if strict and not p.v0 < -omega:
        raise ParameterError(f"M1 needs V0 < -omega (V0={p.v0}, omega={omega})")
    alpha = nehari_bounds(omega, p).alpha if p.v0 < -omega else 0.0
    x = project_to_nehari(_prepare_init(init, p, radius), omega, p)
    bnd = x.boundary
    a = np.array(x.values, dtype=float)
    tau = step
    tau_max = max_step if max_step is not None else 1.0 / (2 * p.dim)
    j, g, _, _ = _fast_action(a, omega, p, bnd)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm > tol:
        if it >= max_iter:
            raise ConvergenceError("M1 descent did not converge", it, gnorm)
        it += 1
        while True:
            trial = a - tau * g
            _, _, q, nl = _fast_action(trial, omega, p, bnd)
            if not q > 0:
                tau *= 0.5
                if tau < 1e-16:
                    raise NoNehariProjection(q)
                continue
            trial = trial * (q / (p.gamma * nl)) ** (1 / (2 * p.sigma))
            jt, gt, _, _ = _fast_action(trial, omega, p, bnd)
            if _accept(j, jt, gnorm, gt, tau):
                break
            tau *= 0.5
        a, j, g = trial, jt, gt
        gnorm = float(np.linalg.norm(g))
        if record is not None:
            record.append(j)
        if float(np.linalg.norm(a)) < 0.5 * alpha:
            raise SolverCollapse(f"iterate norm {np.linalg.norm(a):.3e} below alpha/2 = {alpha / 2:.3e}")
        tau = min(tau * 1.25, tau_max)
    return _finish(LatticeField(a, bnd), omega, p, it, True, "m1")


def minimize_energy_m2(nu: float, p: ModelParams, radius: int, init: LatticeField | None = None,
                       tol: float = DEFAULT_TOL, step: float = DEFAULT_STEP,
                       max_iter: int = DEFAULT_MAX_ITER, max_step: float | None = None,
                       record: list | None = None, raise_on_maxiter: bool = False) -> GroundState:
    """Minimise the energy over the sphere ``||x||^2 = nu`` by normalised gradient flow.

    The frequency is the Lagrange multiplier ``omega = <E'(x), x> / nu``.  A
    non-negative final energy is reported as ``found=False``, not raised.
    Hitting ``max_iter`` returns ``converged=False`` unless
    ``raise_on_maxiter`` is set.
    """
    if not nu > 0:
        raise ParameterError("M2 needs nu > 0")
    x = _prepare_init(init, p, radius)
    bnd = x.boundary
    a = np.array(x.values, dtype=float)
    a *= math.sqrt(nu / float(np.sum(a * a)))
    tau = step
    tau_max = max_step if max_step is not None else 1.0 / (2 * p.dim)

    def state(b):
        eg = _energy_grad_array(b, bnd, p)
        lin = eg + p.gamma * np.abs(b) ** (2 * p.sigma) * b
        nl = float(np.sum(np.abs(b) ** (2 * p.sigma + 2)))
        e = 0.5 * (float(np.sum(lin * b)) - p.gamma / (p.sigma + 1) * nl)
        w = float(np.sum(eg * b)) / nu
        return e, eg - w * b, w

    e, g, w = state(a)
    gnorm = float(np.linalg.norm(g))
    it = 0
    converged = True
    while gnorm > tol:
        if it >= max_iter:
            if raise_on_maxiter:
                raise ConvergenceError("M2 flow did not converge", it, gnorm)
            converged = False
            break
        it += 1
        while True:
            trial = a - tau * g
            trial *= math.sqrt(nu / float(np.sum(trial * trial)))
            et, gt, wt = state(trial)
            if _accept(e, et, gnorm, gt, tau):
                break
            tau *= 0.5
        a, e, g, w = trial, et, gt, wt
        gnorm = float(np.linalg.norm(g))
        if record is not None:
            record.append(e)
        tau = min(tau * 1.25, tau_max)
    xf = LatticeField(a, bnd)
    found, diag = True, ""
    if energy(xf, p) >= 0:
        found = False
        diag = f"no negative-energy minimizer found at this nu (E = {energy(xf, p):.6g})"
    elif not converged:
        diag = f"max_iter reached with gradient norm {gnorm:.3e}"
    return _finish(xf, w, p, it, converged, "m2", found, diag)


def certify(gs: GroundState, p: ModelParams, residual_tol: float = 1e-8,
            nehari_tol: float = 1e-10) -> dict[str, bool]:
    """Evaluate the ground-state certificates; every value should be True."""
    out = {
        "residual": gs.residual < residual_tol,
        "nehari": abs(gs.nehari_value) < nehari_tol * max(1.0, gs.nu),
        "curvature": gs.gamma2 < 0,
    }
    if p.v0 < -gs.omega and p.gamma > 0:
        cert = nehari_bounds(gs.omega, p)
        out["norm_bound"] = math.sqrt(gs.nu) >= cert.alpha
        out["action_bound"] = gs.action >= cert.beta_lb
    return out


class CrossCheck(NamedTuple):
    distance: float
    mass_mismatch: float
    omega: float


def m1_m2_crosscheck(p: ModelParams, nu: float, radius: int = 40, tol: float = DEFAULT_TOL,
                     return_states: bool = False, **kwargs):
    """Solve M2 at mass ``nu``, re-solve M1 at the recovered frequency, compare profiles.

    The profiles are compared after aligning their overall sign.  M1 starts
    from its default initial field, not from the M2 profile, and runs with
    ``strict=False`` because an attractive defect can put the recovered
    frequency above ``-V0``.
    """
    m2 = minimize_energy_m2(nu, p, radius, tol=tol, raise_on_maxiter=True, **kwargs)
    if not m2.found:
        raise ParameterError(m2.diagnostic)
    m1 = minimize_action_m1(m2.omega, p, radius, tol=tol, strict=False, **kwargs)
    a, b = m1.profile.values, m2.profile.values
    if float(np.sum(a * b)) < 0:
        a = -a
    out = CrossCheck(float(np.linalg.norm(a - b)), abs(m1.nu - nu), m2.omega)
    return (out, m1, m2) if return_states else out
