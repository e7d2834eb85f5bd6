import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltadnls import dynamics
from deltadnls.dynamics import (
    SplitStepPropagator,
    admissible_exponents,
    bound_state_vector,
    deflate,
    dichotomy_experiment,
    embed,
    evolve,
    fft_friendly_radius,
    persistence_experiment,
    power_law_fit,
    scatter_experiment,
    trajectory,
)
from deltadnls.errors import AdmissibilityError, IntegrationError, ParameterError, WindowError
from deltadnls.groundstate import minimize_action_m1
from deltadnls.lattice import Boundary, LatticeField, ModelParams, mass
from deltadnls.modes import defect_mode

P = Boundary.PERIODIC
CUBIC = ModelParams(dim=1, gamma=1.0, sigma=1.0, v0=0.0)


def gaussian(radius, seed=0, dim=1):
    rng = np.random.default_rng(seed)
    shape = (2 * radius + 1,) * dim
    return LatticeField(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), P)


def test_fft_friendly_radius():
    assert fft_friendly_radius(1) == 1
    r = fft_friendly_radius(820)
    n = 2 * r + 1
    for f in (3, 5, 7):
        while n % f == 0:
            n //= f
    assert n == 1 and r >= 820


def test_plane_wave_rotates_exactly():
    R, k = 20, 3
    n = np.arange(-R, R + 1)
    q = 2 * np.pi * k / (2 * R + 1)
    u0 = LatticeField(np.exp(1j * q * n), P)
    T = 5.0
    rec = evolve(u0, ModelParams(dim=1, gamma=0.0, v0=0.0), T, dt=0.01)
    exact = u0.values * np.exp(-1j * 4 * math.sin(q / 2) ** 2 * T)
    assert np.linalg.norm(rec.final.values - exact) < 1e-12


def test_linear_mode_is_stationary():
    p = ModelParams(dim=1, gamma=0.0, v0=1.5)
    u0 = defect_mode(p).field(40, P, normalize=True)
    ref = np.abs(u0.values)
    dev = []
    # the splitting commutator leaves an O(dt^2) breathing of |u|; 5e-5 puts it near 4e-10
    evolve(u0, p, 50.0, dt=5e-5, sample_every=10_000, norms=(),
           callback=lambda t, u: dev.append(np.max(np.abs(np.abs(u) - ref))))
    assert max(dev) < 1e-9


def test_mass_conservation_over_many_steps():
    rec = evolve(gaussian(32), CUBIC, 100.0, dt=0.01, sample_every=500)
    assert rec.steps == 10_000
    assert rec.mass_drift() < 1e-11


def test_energy_drift_is_second_order():
    u0 = gaussian(64).scaled(0.3)
    p = CUBIC.replace(v0=1.0)
    d1 = evolve(u0, p, 5.0, dt=0.02, sample_every=25).energy_drift()
    d2 = evolve(u0, p, 5.0, dt=0.01, sample_every=50).energy_drift()
    assert 3.0 <= d1 / d2 <= 5.0


def test_time_reversal():
    u0 = gaussian(20, seed=4)
    p = CUBIC.replace(v0=0.7, sigma=1.5)
    fwd = evolve(u0, p, 3.0, dt=0.01).final
    back = evolve(fwd.conj(), p, 3.0, dt=0.01).final.conj()
    assert np.max(np.abs(back.values - u0.values)) < 1e-8


@settings(max_examples=10)
@given(st.floats(0, 2 * math.pi))
def test_gauge_covariance(theta):
    u0 = gaussian(10, seed=2)
    rot = np.exp(1j * theta)
    a = evolve(u0, CUBIC, 1.0, dt=0.01).final.values
    b = evolve(u0.with_values(rot * u0.values), CUBIC, 1.0, dt=0.01).final.values
    assert np.max(np.abs(b - rot * a)) < 1e-12


def test_ground_state_is_stationary():
    gs = minimize_action_m1(-1.0, CUBIC, 25, tol=1e-12)
    u0 = gs.profile.with_boundary(P)
    ref = np.abs(u0.values)
    t, phase, dev = [], [], []

    def watch(time, u):
        t.append(time)
        phase.append(np.angle(u[25]))
        dev.append(np.max(np.abs(np.abs(u) - ref)))

    evolve(u0, CUBIC, 20.0, dt=2e-4, sample_every=500, norms=(), callback=watch)
    assert max(dev) < 1e-7
    rate = np.polyfit(t, np.unwrap(phase), 1)[0]
    assert rate == pytest.approx(-gs.omega, rel=1e-2)


def test_trajectory_samples_and_errors():
    u0 = gaussian(5)
    times = [t for t, _ in trajectory(u0, CUBIC, 0.1, dt=0.01, sample_every=3)]
    assert times == pytest.approx([0.0, 0.03, 0.06, 0.09, 0.1])
    with pytest.raises(ParameterError):
        next(trajectory(u0.with_boundary("D"), CUBIC, 1.0))
    with pytest.raises(ParameterError):
        next(trajectory(u0, CUBIC, 1.0, dt=0.0))
    with pytest.raises(ParameterError):
        next(trajectory(u0, CUBIC, 0.001, dt=0.01))
    with pytest.raises(ParameterError):
        next(trajectory(u0, CUBIC, 1.0, sample_every=0))
    with pytest.raises(ParameterError):
        SplitStepPropagator(CUBIC, 2, 5, 0.01)


def test_nan_aborts_with_last_valid_time(monkeypatch):
    real = SplitStepPropagator.advance
    calls = {"n": 0}

    def flaky(self, u, nsteps):
        calls["n"] += 1
        out = real(self, u, nsteps)
        if calls["n"] == 3:
            out[0] = np.nan
        return out

    monkeypatch.setattr(SplitStepPropagator, "advance", flaky)
    with pytest.raises(IntegrationError) as info:
        evolve(gaussian(5), CUBIC, 1.0, dt=0.01, sample_every=10)
    assert info.value.last_valid_time == pytest.approx(0.2)


def test_record_rows_layout():
    rec = evolve(gaussian(5), CUBIC, 0.1, dt=0.01)
    rows = rec.rows()
    assert len(rows) == 2 and len(rows[0]) == 7
    assert rows[0][1] == pytest.approx(mass(gaussian(5)))
    assert rows[0][3] == pytest.approx(math.sqrt(rows[0][1]))


def test_deflate_examples():
    mode = defect_mode(ModelParams(dim=1, v0=1.5))
    phi = mode.field(30, P, normalize=True)
    assert np.max(np.abs(deflate(phi, mode).values)) < 1e-15
    rng = np.random.default_rng(5)
    w = rng.standard_normal(61)
    w -= np.dot(phi.values, w) * phi.values
    u = LatticeField(w, P)
    assert np.allclose(deflate(u, mode).values, w, atol=1e-14)
    g = gaussian(30)
    once = deflate(g, mode)
    assert np.max(np.abs(deflate(once, mode).values - once.values)) < 1e-12
    assert np.allclose(deflate(g, phi.scaled(3.0)).values, once.values, atol=1e-13)


def test_deflate_rejections():
    mode = defect_mode(ModelParams(dim=1, v0=1.5))
    with pytest.raises(ParameterError):
        deflate(gaussian(5, dim=2), mode)
    with pytest.raises(ParameterError):
        deflate(gaussian(5), LatticeField.delta(1, 6, boundary=P))
    with pytest.raises(ParameterError):
        deflate(gaussian(5), LatticeField.zeros(1, 5, P))


def test_embed_and_bound_state_vector():
    f = LatticeField.delta(1, 3)
    big = embed(f, 10)
    assert big.radius == 10 and big.boundary is P and big.values[10] == 1
    assert embed(big, 3).values.tolist() == f.values.tolist()
    v = bound_state_vector(ModelParams(dim=2, v0=3.0), 10)
    assert mass(v) == pytest.approx(1.0, rel=1e-12)
    assert v.values[10, 10] == np.max(np.abs(v.values))


def test_persistence_small_eps():
    p = ModelParams(dim=1, gamma=-1.0, sigma=1.0, v0=1.5)
    res = persistence_experiment(p, 0.1)
    assert res.bound == pytest.approx(0.1, rel=1e-12)
    assert res.sup_error <= res.bound


def test_persistence_linear_is_exact():
    p = ModelParams(dim=1, gamma=0.0, sigma=1.0, v0=1.5)
    assert persistence_experiment(p, 0.1).sup_error < 1e-10


def test_persistence_warns_and_rejects():
    p = ModelParams(dim=1, gamma=-1.0, sigma=1.0, v0=1.5)
    with pytest.warns(RuntimeWarning, match="reflection-safe"):
        persistence_experiment(p, 0.1, R=30)
    with pytest.raises(ParameterError):
        persistence_experiment(p, 1.5)
    with pytest.raises(ParameterError):
        persistence_experiment(p.replace(v0=0.0), 0.1)


def test_power_law_fit_recovers_exponent():
    t = np.linspace(1, 100, 200)
    slope, r2 = power_law_fit(t, 3 * t ** -0.4, (5, 80))
    assert slope == pytest.approx(0.4, rel=1e-12) and r2 == pytest.approx(1.0)
    with pytest.raises(WindowError):
        power_law_fit(t, t, (50, 50.2))


def test_admissibility_messages():
    p = ModelParams(dim=1, gamma=1.0, sigma=2.0, v0=0.0)
    lo, hi = admissible_exponents(p)
    assert hi == 6.0 and lo == pytest.approx(8.0)
    with pytest.raises(AdmissibilityError, match=r"p <= 2\(sigma\+1\)"):
        scatter_experiment(p, 1.0, 8.0, R=50, T=20)
    with pytest.raises(AdmissibilityError, match="nu <"):
        scatter_experiment(p, 4.0, 6.0, R=50, T=20)
    with pytest.raises(AdmissibilityError, match="gamma > 0"):
        scatter_experiment(p.replace(gamma=-1.0), 1.0, 6.0, R=50, T=20)
    with pytest.raises(AdmissibilityError, match="V0 <= 0"):
        scatter_experiment(p.replace(v0=1.0), 1.0, 6.0, R=50, T=20)
    with pytest.raises(AdmissibilityError, match="sigma >="):
        scatter_experiment(p.replace(sigma=1.0), 1.0, 4.0, R=50, T=20)


def test_scatter_window_checks():
    p = ModelParams(dim=1, gamma=1.0, sigma=2.0, v0=0.0)
    with pytest.raises(WindowError):
        scatter_experiment(p, 1.0, 8.0, R=50, T=60, window=(5, 60), enforce_admissibility=False)
    with pytest.raises(WindowError):
        scatter_experiment(p, 1.0, 8.0, R=200, T=20, window=(5, 40), enforce_admissibility=False)
    with pytest.raises(WindowError):
        scatter_experiment(p, 1.0, 8.0, R=200, T=20, window=(10, 5), enforce_admissibility=False)


def test_small_scatter_run_decays():
    p = ModelParams(dim=1, gamma=1.0, sigma=2.0, v0=0.0)
    fit = scatter_experiment(p, 1.0, 8.0, R=150, T=60, window=(6, 60), enforce_admissibility=False)
    assert fit.predicted_exponent == pytest.approx(0.25)
    assert fit.fitted_exponent > 0.15


def test_small_dichotomy_run_keeps_core_mass():
    p = ModelParams(dim=1, gamma=1.0, sigma=2.0, v0=0.0)
    res = dichotomy_experiment(p, nu=4.0, R=64, T=10.0)
    assert res.min_core_fraction > 0.9
    assert res.omega < 0


def test_dichotomy_below_threshold_rejected():
    p = ModelParams(dim=1, gamma=1.0, sigma=2.0, v0=0.0)
    with pytest.raises(ParameterError):
        dichotomy_experiment(p, nu=1.5, R=64, T=10.0)
