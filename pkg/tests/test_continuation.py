"""Newton solves, signed norms, branch tracing on small models."""

import numpy as np
import pytest

from ksdisc.continuation import (
    StepControl,
    branch_state_at,
    continue_branch,
    newton_solve,
    seed_family_branch,
    signed_norm,
    trivial_pitchfork_alpha,
    trivial_steady,
)
from ksdisc.errors import NewtonDivergenceError
from ksdisc.models import GalerkinState, ModelSpec
from ksdisc.odd import OddState, reflect_negate, rhs_odd
from ksdisc.systems import Geometry


class TestNewton:
    def test_zero_guess_finds_trivial(self):
        spec = ModelSpec.centered(2, alpha=11.0)
        sol = newton_solve(OddState(np.zeros(8), 8), spec)
        assert np.all(sol.x == 0.0)
        assert sol.residual_norm == 0.0
        # alpha = 11: modes 1 and 2 are unstable (4 and 16 boundaries)
        assert sol.n_unstable == 1

    def test_nl_galerkin_m1_roots(self):
        spec = ModelSpec.nl_galerkin(1, alpha=8.0)
        for guess, want in ((3.0, 4.0), (-3.0, -4.0)):
            sol = newton_solve(GalerkinState([guess]), spec)
            assert sol.x[0] == pytest.approx(want, abs=1e-12)
            assert abs(sol.residual_norm) <= 1e-12

    def test_divergence_reports_residual(self):
        spec = ModelSpec.galerkin(2, alpha=30.0)
        with pytest.raises(NewtonDivergenceError) as err:
            newton_solve(GalerkinState([1e7, -1e7]), spec, max_iter=2)
        assert err.value.residual is not None

    def test_converged_point_spectrum_sorted(self):
        spec = ModelSpec.holistic(3, alpha=20.0)
        sol = newton_solve(OddState(np.zeros(8), 8), spec)
        re = sol.eigenvalues.real
        assert np.all(np.diff(re) <= 1e-12)


class TestSignedNorm:
    def test_zero_state(self):
        assert signed_norm(OddState(np.zeros(8), 8)) == 0.0

    def test_scale_factor_sqrt6(self):
        w = np.ones(8)
        got = signed_norm(OddState(w, 8), reference_points=48)
        assert got == pytest.approx(np.sqrt(8.0) * np.sqrt(6.0))

    def test_negation_flips_sign(self):
        rng = np.random.default_rng(1)
        w = rng.standard_normal(8)
        s = OddState(w, 8)
        assert signed_norm(s.with_values(-w)) == -signed_norm(s)

    def test_tie_break_first_nonzero(self):
        w = np.array([0.0, -2.0, 1.0, 0.5, 0.1, 0.0, 0.0, 0.0])
        assert signed_norm(OddState(w, 8)) < 0


class TestTrivialBranch:
    def test_pitchforks_detected_on_coarse_grid(self):
        spec = ModelSpec.centered(2, alpha=0.0)
        geo = Geometry.odd(8)
        seed = trivial_steady(spec, geo, alpha=0.5)
        branch, events = continue_branch(seed, spec, (0.0, 40.0), label="trivial")
        pfs = [e for e in events if e.kind == "pitchfork"]
        assert len(pfs) >= 3
        # detected alphas agree with the exact symbol crossings
        for k, event in enumerate(sorted(pfs, key=lambda e: e.alpha)[:3], start=1):
            want = trivial_pitchfork_alpha(spec, geo, k)
            assert event.alpha == pytest.approx(want, abs=2e-3)
        assert all(np.all(p.x == 0.0) for p in branch.points)

    def test_branch_points_satisfy_residual_contract(self):
        spec = ModelSpec.holistic(3, alpha=0.0)
        geo = Geometry.odd(8)
        bp, (seed, tangent) = seed_family_branch(spec, geo, 1, +1.0)
        branch, _ = continue_branch(seed, spec, (0.0, 12.0), label="unimodal+",
                                    initial_tangent=tangent)
        for p in branch.points:
            assert p.residual_norm <= 1e-10 * max(1.0, np.linalg.norm(p.x))


class TestBranches:
    def test_unimodal_branch_state(self):
        spec = ModelSpec.holistic(3, alpha=0.0)
        geo = Geometry.odd(8)
        sol = branch_state_at(spec, geo, 1, -1.0, 10.0)
        assert sol.alpha == 10.0
        assert signed_norm(sol.state) < 0
        assert sol.n_unstable == 0  # negative unimodal is stable at alpha=10
        # single-signed hump with one interior extremum on (0, pi)
        assert np.all(sol.x < 0)
        slope_signs = np.sign(np.diff(sol.x))
        assert np.sum(np.abs(np.diff(slope_signs))) == 2

    def test_symmetry_pairing(self):
        spec = ModelSpec.centered(4, alpha=0.0)
        geo = Geometry.odd(8)
        sol = branch_state_at(spec, geo, 1, +1.0, 9.0)
        mirrored = reflect_negate(sol.state)
        twin = newton_solve(mirrored, spec, alpha=9.0)
        assert np.linalg.norm(twin.x - mirrored.w) <= 1e-8
        assert abs(signed_norm(twin.state)) == pytest.approx(
            abs(signed_norm(sol.state)), abs=1e-8
        )
        np.testing.assert_allclose(
            np.sort(twin.eigenvalues.real), np.sort(sol.eigenvalues.real),
            atol=1e-8 * max(1.0, np.max(np.abs(sol.eigenvalues.real))),
        )

    def test_half_period_shift_maps_steady_to_steady(self):
        spec = ModelSpec.holistic(4, alpha=0.0)
        geo = Geometry.odd(8)
        sol = branch_state_at(spec, geo, 2, +1.0, 20.0)
        image = reflect_negate(sol.state)
        res = np.linalg.norm(rhs_odd(image, spec.with_alpha(20.0)))
        assert res <= 1e-6

    def test_stability_flags_flip_at_events(self):
        spec = ModelSpec.centered(2, alpha=0.0)
        geo = Geometry.odd(8)
        bp, (seed, tangent) = seed_family_branch(spec, geo, 2, -1.0)
        branch, events = continue_branch(seed, spec, (0.0, 30.0), label="bimodal-",
                                         initial_tangent=tangent, max_points=250)
        alphas = branch.alphas()
        flips = []
        for a, b in zip(branch.points, branch.points[1:]):
            if a.n_unstable != b.n_unstable:
                flips.append(0.5 * (a.alpha + b.alpha))
        # every count flip is witnessed by a detected event nearby
        gaps = np.abs(alphas[:-1] - alphas[1:])
        for falpha in flips:
            assert any(abs(e.alpha - falpha) <= max(1.0, gaps.max())
                       for e in events)

    def test_step_control_defaults(self):
        ctrl = StepControl()
        assert ctrl.initial == 0.1 and ctrl.min_step == 1e-4
        assert ctrl.max_step == 1.0 and ctrl.stall == 1e-8
