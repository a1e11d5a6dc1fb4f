"""Shooting and Floquet machinery on the cheapest model with a Hopf point."""

import numpy as np
import pytest

from ksdisc.continuation import continue_branch, seed_family_branch
from ksdisc.errors import DegenerateHopfError, DegenerateOrbitError
from ksdisc.models import ModelSpec
from ksdisc.odd import OddState
from ksdisc.orbits import (
    OrbitGuess,
    hopf_seed,
    orbit_from_hopf,
    shoot_orbit,
    trace_to_period_doubling,
)
from ksdisc.systems import Geometry

SPEC = ModelSpec.centered(4, alpha=0.0)
GEO = Geometry.odd(8)


@pytest.fixture(scope="module")
def hopf_point():
    bp, (seed, tangent) = seed_family_branch(SPEC, GEO, 2, +1.0)
    _, events = continue_branch(seed, SPEC, (0.0, 30.0), label="bimodal+",
                                initial_tangent=tangent, max_points=300)
    hopfs = [e for e in events if e.kind == "hopf"]
    return min(hopfs, key=lambda e: e.alpha)


@pytest.fixture(scope="module")
def first_orbit(hopf_point):
    return orbit_from_hopf(hopf_point, SPEC, GEO)


def test_hopf_location(hopf_point):
    assert hopf_point.alpha == pytest.approx(27.91, abs=0.05)
    assert hopf_point.omega > 10.0


def test_orbit_contracts(first_orbit):
    scale = max(1.0, np.linalg.norm(first_orbit.x))
    assert first_orbit.residual <= 1e-8 * scale
    assert first_orbit.amplitude > 1.0
    assert first_orbit.stable


def test_trivial_multiplier_within_tolerance(first_orbit):
    assert abs(first_orbit.trivial_multiplier - 1.0) <= 1e-6


def test_period_close_to_hopf_frequency(hopf_point, first_orbit):
    assert first_orbit.period == pytest.approx(
        2 * np.pi / hopf_point.omega, rel=0.15
    )


def test_seed_sign_gives_same_cycle(hopf_point, first_orbit):
    from ksdisc.continuation import newton_solve
    from ksdisc.orbits import _settle_to_cycle
    from ksdisc.systems import make_system

    system = make_system(SPEC, GEO)
    alpha = first_orbit.alpha
    steady = newton_solve(system.to_state(hopf_point.state), SPEC, alpha=alpha)
    scale = max(1.0, np.linalg.norm(steady.x))
    got = []
    for sign in (1.0, -1.0):
        orbit = None
        for eps in (0.05 * scale, 0.2 * scale):
            settled = _settle_to_cycle(
                system, hopf_seed(hopf_point, steady, sign * eps), alpha
            )
            if settled is not None:
                orbit = shoot_orbit(settled, SPEC, alpha=alpha)
                break
        assert orbit is not None
        got.append(orbit)
    assert got[0].period == pytest.approx(got[1].period, abs=1e-6)
    assert got[0].amplitude == pytest.approx(got[1].amplitude, rel=1e-6)


def test_steady_state_guess_rejected(hopf_point):
    from ksdisc.continuation import newton_solve
    from ksdisc.systems import make_system

    system = make_system(SPEC, GEO)
    steady = newton_solve(system.to_state(hopf_point.state), SPEC,
                          alpha=hopf_point.alpha + 0.5)
    guess = OrbitGuess(state=steady.state, period=0.06,
                       alpha=hopf_point.alpha + 0.5)
    with pytest.raises(DegenerateOrbitError):
        shoot_orbit(guess, SPEC)


def test_hopf_seed_validation(hopf_point, first_orbit):
    from ksdisc.continuation import BifurcationPoint, newton_solve
    from ksdisc.systems import make_system

    system = make_system(SPEC, GEO)
    steady = newton_solve(system.to_state(hopf_point.state), SPEC,
                          alpha=hopf_point.alpha + 0.3)
    guess = hopf_seed(hopf_point, steady, eps=0.0)
    np.testing.assert_array_equal(guess.state.w, steady.x)
    fake = BifurcationPoint(kind="hopf", alpha=1.0, branch_label="x",
                            eigenvalue=0.5 + 0j, state=steady.x,
                            eigenvector=np.ones(8))
    with pytest.raises(DegenerateHopfError):
        hopf_seed(fake, steady, 0.1)


def test_full_trace_reaches_period_doubling(hopf_point):
    orbits, events, pd = trace_to_period_doubling(
        hopf_point, SPEC, GEO, hopf_point.alpha + 2.5, label="t"
    )
    assert pd is not None
    assert pd.alpha == pytest.approx(29.57, abs=0.1)
    # crossing multiplier pinned near the circle at the bisected point
    assert pd.eigenvalue.real < 0
    assert abs(pd.eigenvalue.real + 1.0) <= 1e-2
    stable_flags = [o.stable for o in orbits if abs(o.alpha - pd.alpha) < 0.2]
    assert True in stable_flags and False in stable_flags
