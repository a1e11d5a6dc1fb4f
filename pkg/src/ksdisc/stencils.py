"""Periodic centered difference and mean operator algebra.

Everything is built from the classical operator pair on a uniform grid,

    delta u_j = u_{j+1/2} - u_{j-1/2},    mu u_j = (u_{j+1/2} + u_{j-1/2}) / 2.

Even powers delta^a land on whole grid offsets; odd powers need one mean
factor, delta^a mu, to do the same.  Weights are generated once per order
from the binomial expansion of (S^{1/2} - S^{-1/2})^a (S the unit shift) and
applied as explicit stencil tables, never by repeated application, so an
application costs O(N) and is exactly reproducible.

Index arithmetic is cyclic with Euclidean modulo (negative offsets wrap).
"""

from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .errors import InvalidOperatorError, GridTooCoarseError

EVEN_ORDERS = (2, 4, 6, 8)
ODD_ORDERS = (1, 3, 5, 7)


@lru_cache(maxsize=None)
def delta_even_weights(a):
    """Exact stencil of delta^a for even a, as (offsets, Fraction weights).

    delta^a = (S^{1/2} - S^{-1/2})^a = sum_i (-1)^i C(a,i) S^{a/2-i}.
    """
    if a not in EVEN_ORDERS:
        raise InvalidOperatorError(f"delta^a needs even a in {EVEN_ORDERS}, got {a}")
    offsets = tuple(a // 2 - i for i in range(a + 1))
    weights = tuple(Fraction((-1) ** i * comb(a, i)) for i in range(a + 1))
    return offsets, weights


@lru_cache(maxsize=None)
def delta_odd_mu_weights(a):
    """Exact stencil of delta^a mu for odd a, as (offsets, Fraction weights).

    Expand (S^{1/2} - S^{-1/2})^a (S^{1/2} + S^{-1/2})/2 over doubled
    offsets so all intermediate exponents stay integral.
    """
    if a not in ODD_ORDERS:
        raise InvalidOperatorError(f"delta^a mu needs odd a in {ODD_ORDERS}, got {a}")
    # polynomial in S^{1/2}: key = doubled offset
    poly = {1: Fraction(1, 2), -1: Fraction(1, 2)}  # mu
    for _ in range(a):
        new = {}
        for off, w in poly.items():
            new[off + 1] = new.get(off + 1, Fraction(0)) + w
            new[off - 1] = new.get(off - 1, Fraction(0)) - w
        poly = new
    items = sorted((off, w) for off, w in poly.items() if w != 0)
    assert all(off % 2 == 0 for off, _ in items)
    offsets = tuple(off // 2 for off, _ in items)
    weights = tuple(w for _, w in items)
    return offsets, weights


def stencil_width(a, odd):
    """Number of grid points touched by delta^a (even) or delta^a mu (odd)."""
    return a + 2 if odd else a + 1


def _check_length(n, width):
    if n < width + 1:
        raise GridTooCoarseError(
            f"need at least {width + 1} grid points for a {width}-point stencil, got {n}"
        )


def apply_stencil(u, offsets, weights):
    """sum_i w_i u_{j+o_i} along the last axis, cyclic indexing."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    for off, w in zip(offsets, weights):
        out += w * np.roll(u, -off, axis=-1)
    return out


def central_diff_even(u, a):
    """Apply delta^a (a even) to a periodic sequence along the last axis."""
    offsets, weights = delta_even_weights(a)
    u = np.asarray(u, dtype=float)
    _check_length(u.shape[-1], stencil_width(a, odd=False))
    return apply_stencil(u, offsets, [float(w) for w in weights])


def central_diff_odd_mu(u, a):
    """Apply delta^a mu (a odd) to a periodic sequence along the last axis."""
    offsets, weights = delta_odd_mu_weights(a)
    u = np.asarray(u, dtype=float)
    _check_length(u.shape[-1], stencil_width(a, odd=True))
    return apply_stencil(u, offsets, [float(w) for w in weights])


def operator_symbol(a, odd, theta):
    """Fourier symbol of the operator at phase theta = k*h.

    For e^{i k x}: delta^2 maps to -4 sin^2(theta/2), so delta^a (a even)
    maps to (-4 sin^2(theta/2))^{a/2}; delta^a mu (a odd) maps to
    i sin(theta) (-4 sin^2(theta/2))^{(a-1)/2}.  Only even operators enter
    linear growth rates of real models; the odd symbol is exposed for
    completeness and testing.
    """
    s2 = 4.0 * np.sin(theta / 2.0) ** 2
    if not odd:
        return (-s2) ** (a // 2)
    return 1j * np.sin(theta) * (-s2) ** ((a - 1) // 2)
