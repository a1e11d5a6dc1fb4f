"""RK4 stepping: convergence order, stability search, determinism."""

import numpy as np
import pytest

from ksdisc.errors import BlowUpError, SearchInvalidError, UsageError
from ksdisc.integrate import integrate, linear_stability_dt, max_stable_dt, rk4_step
from ksdisc.models import GalerkinState, GridField, ModelSpec, dispersion_symbol
from ksdisc.odd import OddState
from ksdisc.systems import make_system, system_for_state

TWO_PI = 2.0 * np.pi


def grid(values):
    values = np.asarray(values, dtype=float)
    return GridField(values, TWO_PI / values.size, TWO_PI)


def test_constant_state_is_fixed():
    spec = ModelSpec.centered(2, alpha=5.0)
    f = grid(np.full(12, 1.7))
    out = rk4_step(f, spec, 1e-3)
    np.testing.assert_allclose(out.u, f.u, atol=1e-12)


def test_linear_mode_matches_exponential_at_order_four():
    # single sine mode of the alpha=0 model decays like exp(lambda t)
    n = 16
    spec = ModelSpec.centered(2, alpha=0.0)
    x = TWO_PI * np.arange(n) / n
    k = 2
    f = grid(np.sin(k * x))
    lam = dispersion_symbol(spec, k, f.h)
    t_end = 0.5 / abs(lam)
    errs = []
    dts = []
    for halvings in range(4):
        steps = 8 * 2**halvings
        dt = t_end / steps
        traj = integrate(f, spec, dt, t_end, record_every=steps)
        exact = np.exp(lam * t_end) * f.u
        errs.append(np.max(np.abs(traj.states[-1] - exact)))
        dts.append(dt)
    slopes = np.diff(np.log(errs)) / np.diff(np.log(dts))
    assert np.all(np.abs(slopes - 4.0) < 0.1)


def test_rk4_order_on_nonlinear_galerkin():
    spec = ModelSpec.galerkin(2, alpha=14.0)
    b0 = GalerkinState([0.4, -0.3])
    t_end = 0.02
    ref = integrate(b0, spec, t_end / 2048, t_end, record_every=2048).states[-1]
    errs, dts = [], []
    for steps in (8, 16, 32):
        dt = t_end / steps
        got = integrate(b0, spec, dt, t_end, record_every=steps).states[-1]
        errs.append(np.max(np.abs(got - ref)))
        dts.append(dt)
    slopes = np.diff(np.log(errs)) / np.diff(np.log(dts))
    assert np.all(np.abs(slopes - 4.0) < 0.1)


def test_zero_state_stays_zero():
    spec = ModelSpec.holistic(3, alpha=21.0)
    w = OddState(np.zeros(8), 8)
    traj = integrate(w, spec, 1e-4, 0.01, record_every=10)
    assert np.all(traj.states == 0.0)
    assert traj.times[0] == 0.0 and np.all(np.diff(traj.times) > 0)


def test_divergence_beyond_stability_bound():
    # one stiff mode stepped well beyond the RK4 interval blows up quickly
    n = 16
    spec = ModelSpec.centered(2, alpha=0.0)
    x = TWO_PI * np.arange(n) / n
    f = grid(1e-3 * np.sin(8 * x) + 1.0 * np.sin(x))
    sys = make_system(spec, None if False else system_for_state(f, spec).geometry)
    dt_lin, _ = linear_stability_dt(system_for_state(f, spec), f.u)
    with pytest.raises(BlowUpError):
        integrate(f, spec, 4.0 * dt_lin, 400 * 4.0 * dt_lin, record_every=100)


def test_blowup_reports_step_index():
    spec = ModelSpec.centered(2, alpha=0.0)
    n = 16
    x = TWO_PI * np.arange(n) / n
    f = grid(np.sin(8 * x))
    dt_lin, _ = linear_stability_dt(system_for_state(f, spec), f.u)
    with pytest.raises(BlowUpError) as err:
        integrate(f, spec, 5.0 * dt_lin, 1000 * 5.0 * dt_lin, record_every=1000)
    assert err.value.step is not None and err.value.step < 1000


def test_integrate_validates_arguments():
    spec = ModelSpec.centered(2, alpha=1.0)
    f = grid(np.zeros(12))
    with pytest.raises(UsageError):
        integrate(f, spec, -0.1, 1.0)
    with pytest.raises(UsageError):
        integrate(f, spec, 0.3, 1.0)  # does not divide
    with pytest.raises(UsageError):
        integrate(f, spec, 0.1, 1.0, record_every=0)


def test_determinism_bitwise():
    spec = ModelSpec.holistic(5, alpha=10.0)
    w = OddState(0.1 * np.sin((np.arange(8) + 0.5) * np.pi / 8), 8)
    a = integrate(w, spec, 1e-4, 0.05, record_every=50)
    b = integrate(w, spec, 1e-4, 0.05, record_every=50)
    assert np.array_equal(a.states, b.states)


def test_odd_full_conjugacy():
    # flow of the reduced state embeds to the flow of the embedded state
    from ksdisc.odd import embed, restrict

    spec = ModelSpec.holistic(4, alpha=18.0)
    w = OddState(0.5 * np.sin(2 * (np.arange(8) + 0.5) * np.pi / 8), 8)
    dt, t_end = 2e-4, 0.02
    reduced = integrate(w, spec, dt, t_end, record_every=100)
    full = integrate(embed(w), spec, dt, t_end, record_every=100)
    for wr, uf in zip(reduced.states, full.states):
        embedded = embed(OddState(wr, 8)).u
        np.testing.assert_allclose(embedded, uf, atol=1e-13)


class TestMaxStableDt:
    def test_trivial_state_search_matches_linear_bound(self):
        # at u = 0 the dynamics are linear, so the threshold is 2.785/|lam|
        spec = ModelSpec.centered(2, alpha=1.0)
        w = OddState(np.zeros(8), 8)
        sys = system_for_state(w, spec)
        dt_lin, _ = linear_stability_dt(sys, w.w)
        got = max_stable_dt(w, spec, horizon=1.0)
        assert 0.8 * dt_lin < got < 1.25 * dt_lin

    def test_monotone_under_refinement(self):
        spec = ModelSpec.centered(2, alpha=1.0)
        coarse = max_stable_dt(OddState(np.zeros(8), 8), spec)
        fine = max_stable_dt(OddState(np.zeros(16), 16), spec)
        assert fine < coarse

    def test_unstable_base_state_rejected(self):
        spec = ModelSpec.centered(2, alpha=30.0)  # trivial state unstable
        with pytest.raises(SearchInvalidError):
            max_stable_dt(OddState(np.zeros(8), 8), spec)
