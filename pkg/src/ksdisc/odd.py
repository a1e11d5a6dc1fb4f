"""Odd 2pi-periodic subspace: m elements on [0, pi], embedded in a full grid.

Grid points sit at element centres x_j = (j - 1/2) h, h = pi/m, so the full
periodic grid on [0, 2pi) has 2m points and no point falls on the symmetry
axes.  Oddness u(x) = -u(2pi - x) pairs point j with point 2m+1-j, leaving
the m values on [0, pi] as independent degrees of freedom:

    u = (w_1, ..., w_m, -w_m, ..., -w_1).

All grid models preserve this antisymmetry exactly (up to rounding), so
restricting their right-hand sides loses nothing.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SymmetryViolationError
from .models import GridField, grid_rhs

FULL_LENGTH = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class OddState:
    """Values u(x_j) on the m element centres of [0, pi]."""

    w: np.ndarray
    m: int

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        object.__setattr__(self, "w", w)
        if self.m < 3:
            raise ValueError("need at least 3 elements on [0, pi]")
        if w.shape[-1] != self.m:
            raise ValueError(f"expected {self.m} values, got {w.shape[-1]}")

    @property
    def h(self):
        return np.pi / self.m

    @property
    def x(self):
        return (np.arange(self.m) + 0.5) * self.h

    def with_values(self, w):
        return OddState(np.asarray(w, dtype=float), self.m)


def embed_values(w, m):
    """Full 2m-point antisymmetric field from the [0, pi] values, batched."""
    w = np.asarray(w, dtype=float)
    return np.concatenate([w, -w[..., ::-1]], axis=-1)


def restrict_values(u, m):
    return np.asarray(u, dtype=float)[..., :m]


def embed(state):
    """Full periodic GridField on [0, 2pi) implied by an OddState."""
    return GridField(
        embed_values(state.w, state.m), state.h, FULL_LENGTH, x0=0.5 * state.h
    )


def asymmetry(field):
    """Largest deviation from u_j = -u_{N+1-j} (plain max norm)."""
    u = field.u
    n = u.shape[-1] // 2
    return float(np.max(np.abs(u[..., n:] + u[..., :n][..., ::-1])))


def restrict(field, tol=1e-8):
    """OddState from a full centre-point field; rejects non-odd input.

    tol is absolute; integrator drift stays well below it on desk-scale runs.
    """
    n = field.n
    if n % 2:
        raise SymmetryViolationError("odd restriction needs an even point count")
    gap = asymmetry(field)
    if gap > tol:
        raise SymmetryViolationError(
            f"field is not odd: max asymmetry {gap:.3e} exceeds {tol:.1e}",
            max_asymmetry=gap,
        )
    return OddState(restrict_values(field.u, n // 2), n // 2)


def rhs_odd_values(w, spec, m, alpha=None):
    """restrict(rhs(embed(w))), batched over leading axes."""
    ev = grid_rhs(spec, np.pi / m)
    ev.check_grid(2 * m)
    return restrict_values(ev(embed_values(w, m), alpha), m)


def rhs_odd(state, spec):
    """Model right-hand side restricted to the odd subspace."""
    return rhs_odd_values(state.w, spec, state.m)


def reflect_negate(state):
    """The conjugate steady state u'(x) = -u(pi - x) (swaps branch signs)."""
    return state.with_values(-state.w[..., ::-1])
