"""Uniform view of (model, geometry) pairs as first-order ODE systems.

Continuation, time integration and orbit computation all work on raw state
vectors x with a parametrised right-hand side f(x, alpha).  A System wraps
one model on one geometry and translates between raw vectors and the typed
states (GridField / OddState / GalerkinState).
"""

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .models import (
    GalerkinState,
    GridField,
    galerkin_rhs_values,
    grid_rhs,
    state_values,
)
from .odd import FULL_LENGTH, OddState, embed_values, restrict_values, rhs_odd_values


@dataclass(frozen=True)
class Geometry:
    """full: N points on [0, 2pi]; odd: m elements on [0, pi]; modal: Galerkin."""

    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in ("full", "odd", "modal"):
            raise UsageError(f"unknown geometry kind {self.kind!r}")
        if self.size < 1:
            raise UsageError("geometry size must be positive")

    @classmethod
    def full(cls, n):
        return cls("full", n)

    @classmethod
    def odd(cls, m):
        return cls("odd", m)

    @classmethod
    def modal(cls, m):
        return cls("modal", m)

    @classmethod
    def from_string(cls, text):
        kind, _, num = text.partition(":")
        try:
            size = int(num)
        except ValueError:
            raise UsageError(f"bad geometry selector {text!r}") from None
        if kind not in ("full", "odd"):
            raise UsageError(f"bad geometry selector {text!r}")
        return cls(kind, size)

    def selector(self):
        return f"{self.kind}:{self.size}"

    @property
    def dof(self):
        # odd geometry keeps all m element-centre values on [0, pi]
        return self.size

    @property
    def h(self):
        if self.kind == "full":
            return FULL_LENGTH / self.size
        if self.kind == "odd":
            return np.pi / self.size
        raise UsageError("modal geometry has no grid spacing")


class System:
    """One model on one geometry, seen as dx/dt = f(x, alpha)."""

    def __init__(self, spec, geometry):
        if spec.is_grid:
            if geometry is None or geometry.kind == "modal":
                raise UsageError("grid models need a full or odd geometry")
            self._ev = grid_rhs(spec, geometry.h)
            self._ev.check_grid(
                geometry.size if geometry.kind == "full" else 2 * geometry.size
            )
        else:
            if geometry is not None and geometry.kind != "modal":
                raise UsageError("Galerkin models take no grid geometry")
            geometry = Geometry.modal(spec.modes)
        self.spec = spec
        self.geometry = geometry
        self.dim = geometry.dof

    def f(self, x, alpha=None):
        """Right-hand side on raw vectors, batched over leading axes."""
        if alpha is None:
            alpha = self.spec.alpha
        kind = self.geometry.kind
        if kind == "full":
            return self._ev(x, alpha)
        if kind == "odd":
            return rhs_odd_values(x, self.spec, self.geometry.size, alpha)
        return galerkin_rhs_values(x, self.spec, alpha)

    def f_alpha(self, x, alpha):
        """d f / d alpha by central differences (exact for grid models)."""
        eps = 1e-4 * max(1.0, abs(alpha))
        return (self.f(x, alpha + eps) - self.f(x, alpha - eps)) / (2.0 * eps)

    def jacobian(self, x, alpha=None):
        """Dense d f / d x via batched central differences."""
        x = np.asarray(x, dtype=float)
        eps = 1e-5 * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
        basis = np.eye(self.dim)
        plus = self.f(x[None, :] + eps * basis, alpha)
        minus = self.f(x[None, :] - eps * basis, alpha)
        return (plus - minus).T / (2.0 * eps)

    def residual_floor(self, x, alpha=None):
        """Float64 rounding floor of |f(x)|_2; no solver can push below it."""
        if alpha is None:
            alpha = self.spec.alpha
        x = np.asarray(x, dtype=float)
        u_inf = float(np.max(np.abs(x))) if x.size else 0.0
        if self.spec.is_grid:
            per_entry = self._ev.rounding_scale(max(u_inf, 1e-30), alpha)
        else:
            m = 2 * self.spec.modes
            rate = 4.0 * m**4 + alpha * m**2
            per_entry = np.finfo(float).eps * (
                rate * max(u_inf, 1e-30) + alpha * m**2 * u_inf**2
            )
        return per_entry * np.sqrt(self.dim)

    def to_state(self, x):
        x = np.asarray(x, dtype=float)
        kind = self.geometry.kind
        if kind == "full":
            return GridField(x, self.geometry.h, FULL_LENGTH)
        if kind == "odd":
            return OddState(x, self.geometry.size)
        return GalerkinState(x)

    def to_full_values(self, x):
        """Embed a raw vector into the full periodic grid (grid systems)."""
        if self.geometry.kind == "odd":
            return embed_values(np.asarray(x, dtype=float), self.geometry.size)
        if self.geometry.kind == "full":
            return np.asarray(x, dtype=float)
        raise UsageError("Galerkin states have no grid embedding")

    def from_full_values(self, u):
        if self.geometry.kind == "odd":
            return restrict_values(u, self.geometry.size)
        if self.geometry.kind == "full":
            return np.asarray(u, dtype=float)
        raise UsageError("Galerkin states have no grid embedding")

    @property
    def full_n(self):
        if self.geometry.kind == "odd":
            return 2 * self.geometry.size
        if self.geometry.kind == "full":
            return self.geometry.size
        raise UsageError("Galerkin states have no grid embedding")

    def grid_evaluator(self):
        if not self.spec.is_grid:
            raise UsageError("not a grid system")
        return self._ev


def make_system(spec, geometry=None):
    return System(spec, geometry)


def system_for_state(state, spec):
    """Infer the geometry from a typed state."""
    if isinstance(state, GridField):
        return make_system(spec, Geometry.full(state.n))
    if isinstance(state, OddState):
        return make_system(spec, Geometry.odd(state.m))
    if isinstance(state, GalerkinState):
        return make_system(spec, None)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def vector_of(state):
    if isinstance(state, OddState):
        return state.w
    return np.asarray(state_values(state), dtype=float)
