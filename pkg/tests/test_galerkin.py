"""Sine-mode Galerkin models against hand-expanded interaction sums."""

import numpy as np
import pytest

from ksdisc.models import (
    GalerkinState,
    ModelSpec,
    beta,
    beta_all,
    galerkin_profile,
    jacobian_dense,
    rhs_galerkin,
)


def beta_oracle(b, k, m):
    """Literal sum with the b_0 = 0, sign(0) = 0, truncation conventions."""

    def get(i):
        return b[i - 1] if 1 <= i <= len(b) else 0.0

    total = 0.0
    for j in range(1, m + 1):
        total += j * get(j) * (get(k + j) + np.sign(k - j) * get(abs(k - j)))
    return 0.5 * total


def test_beta_zero_input():
    assert beta([0.0, 0.0, 0.0], 2, 3) == 0.0


def test_beta_single_mode_vanishes():
    # only term is b1 (b2 + sign(0) b0) = 0
    assert beta([2.0], 1, 1) == 0.0


def test_beta_two_modes_hand_value():
    # m=2, k=1, b=(1,1): 1/2 (1*1*(0+0) ... ) expands to -1/2
    assert beta([1.0, 1.0], 1, 2) == pytest.approx(-0.5, abs=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3, 5, 8])
def test_beta_matches_literal_sum(m):
    rng = np.random.default_rng(m)
    b = rng.standard_normal(m)
    for k in range(1, m + 1):
        assert beta(b, k, m) == pytest.approx(beta_oracle(b, k, m), abs=1e-13)
    # padded evaluation at doubled truncation
    for k in range(1, 2 * m + 1):
        got = beta_all(b, 2 * m)[k - 1]
        assert got == pytest.approx(beta_oracle(b, k, 2 * m), abs=1e-13)


def test_beta_index_errors():
    with pytest.raises(IndexError):
        beta([1.0, 2.0], 0, 2)
    with pytest.raises(IndexError):
        beta([1.0, 2.0], 3, 2)


def test_traditional_m1_is_linear():
    spec = ModelSpec.galerkin(1, alpha=6.0)
    for b1 in (-2.0, 0.5, 3.0):
        got = rhs_galerkin(GalerkinState([b1]), spec)
        assert got[0] == pytest.approx((spec.alpha - 4.0) * b1, rel=1e-14)


def test_trivial_state_is_fixed_point():
    for spec in (ModelSpec.galerkin(4, 25.0), ModelSpec.nl_galerkin(4, 25.0)):
        got = rhs_galerkin(GalerkinState(np.zeros(4)), spec)
        np.testing.assert_array_equal(got, np.zeros(4))


def test_traditional_m2_expansion():
    # beta^2_1 = -(1/2) b1 b2, so db1/dt = (alpha-4) b1 + (alpha/2) b1 b2
    alpha = 9.0
    spec = ModelSpec.galerkin(2, alpha)
    rng = np.random.default_rng(0)
    for _ in range(5):
        b1, b2 = rng.standard_normal(2)
        got = rhs_galerkin(GalerkinState([b1, b2]), spec)
        want1 = (alpha - 4.0) * b1 + 0.5 * alpha * b1 * b2
        want2 = (-4.0 * 16 + alpha * 4.0) * b2 - alpha * beta_oracle([b1, b2], 2, 2)
        assert got[0] == pytest.approx(want1, rel=1e-13, abs=1e-13)
        assert got[1] == pytest.approx(want2, rel=1e-13, abs=1e-13)


def test_nl1_m1_cubic_balance():
    # slaved mode phi_2 = -(alpha/128) b1^2 gives
    # db1/dt = (alpha-4) b1 - alpha^2 b1^3 / 256, root b1 = +-16 sqrt(alpha-4)/alpha
    alpha = 8.0
    spec = ModelSpec.nl_galerkin(1, alpha)
    for b1 in np.linspace(-5, 5, 11):
        got = rhs_galerkin(GalerkinState([b1]), spec)
        want = (alpha - 4.0) * b1 - alpha**2 * b1**3 / 256.0
        assert got[0] == pytest.approx(want, rel=1e-13, abs=1e-13)
    for root in (4.0, -4.0):
        assert abs(rhs_galerkin(GalerkinState([root]), spec)[0]) <= 1e-12


def test_trivial_jacobian_is_diagonal_rates():
    alpha = 10.0
    k = np.arange(1, 5, dtype=float)
    rates = -4.0 * k**4 + alpha * k**2
    for spec in (ModelSpec.galerkin(4, alpha), ModelSpec.nl_galerkin(4, alpha)):
        jac = jacobian_dense(GalerkinState(np.zeros(4)), spec)
        np.testing.assert_allclose(jac, np.diag(rates), atol=1e-9)


def test_galerkin_profile_single_mode():
    x = np.linspace(0, 2 * np.pi, 9, endpoint=False)
    np.testing.assert_allclose(
        galerkin_profile([0.0, 1.5], x), 1.5 * np.sin(2 * x), atol=1e-14
    )
