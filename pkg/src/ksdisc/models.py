"""Right-hand sides du_j/dt = g_j(u; alpha, gamma) for every model family.

The Kuramoto-Sivashinsky equation

    u_t + 4 u_xxxx + alpha (u u_x + u_xx) = 0

is discretised four ways:

* ``holistic``    -- subgrid-resolving coarse-grid models of stencil width
                     5/7/9 controlled by the coupling order p in {3,4,5};
                     every term carries a power of the coupling parameter
                     gamma, and at gamma=0 the elements decouple (rhs = 0).
* ``centered``    -- direct centered differences of order 2/4/6.
* ``galerkin_traditional`` / ``galerkin_nl1``
                  -- sine-mode truncations u = sum b_k(t) sin(kx); the nl1
                     variant slaves modes m+1..2m adiabatically.

Grid formulas are transcribed with exact rational coefficients and evaluated
from precomputed stencil tables, so an evaluation is a fixed sequence of
periodic convolutions and pointwise products (vectorised over any leading
batch axes).  All grid-model right-hand sides are linear in alpha and
polynomial of degree <= 4 in gamma.
"""

from dataclasses import dataclass, replace
from fractions import Fraction as Fr
from functools import lru_cache

import numpy as np

from .errors import GridTooCoarseError, UnsupportedModelError
from .stencils import (
    apply_stencil,
    delta_even_weights,
    delta_odd_mu_weights,
    stencil_width,
)

HOLISTIC_ORDERS = (3, 4, 5)
CENTERED_ORDERS = (2, 4, 6)
GRID_FAMILIES = ("holistic", "centered")
GALERKIN_FAMILIES = ("galerkin_traditional", "galerkin_nl1")
FAMILIES = GRID_FAMILIES + GALERKIN_FAMILIES


@dataclass(frozen=True)
class ModelSpec:
    """Which discretisation to use, plus its parameters.

    Exactly one family's sub-field is set: gamma_order (holistic),
    centered_order (centered) or modes (Galerkin variants).
    """

    family: str
    alpha: float
    gamma: float = 1.0
    gamma_order: int | None = None
    centered_order: int | None = None
    modes: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedModelError(f"unknown model family {self.family!r}")
        sub = (self.gamma_order, self.centered_order, self.modes)
        expected = {
            "holistic": 0,
            "centered": 1,
            "galerkin_traditional": 2,
            "galerkin_nl1": 2,
        }[self.family]
        for i, value in enumerate(sub):
            if (value is None) == (i == expected):
                raise UnsupportedModelError(
                    f"family {self.family!r} incompatible with sub-fields {sub}"
                )
        if self.family == "holistic" and self.gamma_order not in HOLISTIC_ORDERS:
            raise UnsupportedModelError(
                f"holistic coupling order must be in {HOLISTIC_ORDERS}"
            )
        if self.family == "centered" and self.centered_order not in CENTERED_ORDERS:
            raise UnsupportedModelError(
                f"centered order must be in {CENTERED_ORDERS}"
            )
        if self.modes is not None and self.modes < 1:
            raise UnsupportedModelError("Galerkin mode count must be >= 1")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise UnsupportedModelError("alpha must be finite and >= 0")

    @property
    def is_grid(self):
        return self.family in GRID_FAMILIES

    @property
    def stencil_points(self):
        if self.family == "holistic":
            return {3: 5, 4: 7, 5: 9}[self.gamma_order]
        if self.family == "centered":
            return {2: 5, 4: 7, 6: 9}[self.centered_order]
        raise UnsupportedModelError("Galerkin models have no stencil")

    def with_alpha(self, alpha):
        return replace(self, alpha=float(alpha))

    @classmethod
    def holistic(cls, gamma_order, alpha, gamma=1.0):
        return cls("holistic", float(alpha), float(gamma), gamma_order=gamma_order)

    @classmethod
    def centered(cls, order, alpha):
        return cls("centered", float(alpha), centered_order=order)

    @classmethod
    def galerkin(cls, modes, alpha):
        return cls("galerkin_traditional", float(alpha), modes=modes)

    @classmethod
    def nl_galerkin(cls, modes, alpha):
        return cls("galerkin_nl1", float(alpha), modes=modes)

    @classmethod
    def from_string(cls, text, alpha, gamma=1.0):
        """Parse CLI model selectors: hol:5, cd:2, gal:4, nlgal:4."""
        from .errors import UsageError

        try:
            kind, _, num = text.partition(":")
            value = int(num)
        except ValueError:
            raise UsageError(f"bad model selector {text!r}") from None
        try:
            if kind == "hol":
                return cls.holistic(value, alpha, gamma)
            if kind == "cd":
                return cls.centered(value, alpha)
            if kind == "gal":
                return cls.galerkin(value, alpha)
            if kind == "nlgal":
                return cls.nl_galerkin(value, alpha)
        except UnsupportedModelError as exc:
            raise UsageError(str(exc)) from None
        raise UsageError(f"bad model selector {text!r}")

    def selector(self):
        if self.family == "holistic":
            return f"hol:{self.gamma_order}"
        if self.family == "centered":
            return f"cd:{self.centered_order}"
        if self.family == "galerkin_traditional":
            return f"gal:{self.modes}"
        return f"nlgal:{self.modes}"


@dataclass(frozen=True, eq=False)
class GridField:
    """Periodic grid values u_j with spacing h and domain metadata.

    x0 is the coordinate of the first point (element-centred grids from the
    odd reduction start at h/2; plain full-domain grids at 0).
    """

    u: np.ndarray
    h: float
    domain_length: float
    x0: float = 0.0

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        object.__setattr__(self, "u", u)
        n = u.shape[-1]
        if not np.isclose(n * self.h, self.domain_length, rtol=1e-12, atol=0.0):
            raise ValueError(
                f"N*h = {n * self.h!r} does not match domain length {self.domain_length!r}"
            )

    @property
    def n(self):
        return self.u.shape[-1]

    @property
    def x(self):
        return self.x0 + self.h * np.arange(self.n)

    def with_values(self, u):
        return GridField(np.asarray(u, dtype=float), self.h, self.domain_length,
                         self.x0)


@dataclass(frozen=True, eq=False)
class GalerkinState:
    """Sine-mode amplitudes b_1..b_m."""

    b: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        object.__setattr__(self, "b", b)
        if not np.all(np.isfinite(b)):
            raise ValueError("Galerkin amplitudes must be finite")

    @property
    def modes(self):
        return self.b.shape[-1]


# --------------------------------------------------------------------------
# grid model term tables
#
# linear terms: (a, coefficient, h power, gamma power, alpha power)
# nonlinear terms: (even a with 0 = identity, odd b, coefficient, gamma power)
# every nonlinear term is  coef * gamma^g * alpha/h * delta^a u * delta^b mu u
# --------------------------------------------------------------------------

_HOL_LIN = {
    3: (
        (2, Fr(-1), 2, 1, 1),
        (4, Fr(-4), 4, 2, 0),
        (4, Fr(1, 12), 2, 2, 1),
    ),
    4: (
        (6, Fr(2, 3), 4, 3, 0),
        (6, Fr(-1, 90), 2, 3, 1),
    ),
    5: (
        (8, Fr(-7, 60), 4, 4, 0),
        (8, Fr(1, 560), 2, 4, 1),
    ),
}

_HOL_NL = {
    3: (
        (0, 1, Fr(-1), 1),
        (0, 3, Fr(2, 12), 2),
        (2, 3, Fr(1, 12), 2),
        (4, 1, Fr(1, 12), 2),
    ),
    4: (
        (0, 5, Fr(-16, 480), 3),
        (4, 3, Fr(-30, 480), 3),
        (2, 3, Fr(-40, 480), 3),
        (4, 1, Fr(-40, 480), 3),
        (2, 5, Fr(-28, 480), 3),
        (6, 1, Fr(-14, 480), 3),
        (4, 5, Fr(-7, 480), 3),
        (6, 3, Fr(-7, 480), 3),
    ),
    5: (
        (0, 7, Fr(432, 60480), 4),
        (2, 5, Fr(3528, 60480), 4),
        (2, 7, Fr(1507, 60480), 4),
        (4, 3, Fr(3780, 60480), 4),
        (4, 5, Fr(3951, 60480), 4),
        (4, 7, Fr(984, 60480), 4),
        (6, 1, Fr(1764, 60480), 4),
        (6, 3, Fr(3419, 60480), 4),
        (6, 5, Fr(1414, 60480), 4),
        (6, 7, Fr(164, 60480), 4),
        (8, 1, Fr(523, 60480), 4),
        (8, 3, Fr(656, 60480), 4),
        (8, 5, Fr(164, 60480), 4),
    ),
}

_CEN_LIN = {
    2: (
        (2, Fr(-1), 2, 0, 1),
        (4, Fr(-4), 4, 0, 0),
    ),
    4: (
        (2, Fr(-1), 2, 0, 1),
        (4, Fr(1, 12), 2, 0, 1),
        (4, Fr(-4), 4, 0, 0),
        (6, Fr(2, 3), 4, 0, 0),
    ),
    6: (
        (2, Fr(-1), 2, 0, 1),
        (4, Fr(1, 12), 2, 0, 1),
        (6, Fr(-1, 90), 2, 0, 1),
        (4, Fr(-4), 4, 0, 0),
        (6, Fr(2, 3), 4, 0, 0),
        (8, Fr(-7, 60), 4, 0, 0),
    ),
}

_CEN_NL = {
    2: ((0, 1, Fr(-1), 0),),
    4: ((0, 1, Fr(-1), 0), (0, 3, Fr(1, 6), 0)),
    6: ((0, 1, Fr(-1), 0), (0, 3, Fr(1, 6), 0), (0, 5, Fr(-1, 30), 0)),
}


def _grid_terms(spec):
    if spec.family == "holistic":
        lin, nl = [], []
        for p in HOLISTIC_ORDERS:
            if p <= spec.gamma_order:
                lin.extend(_HOL_LIN[p])
                nl.extend(_HOL_NL[p])
        return tuple(lin), tuple(nl)
    if spec.family == "centered":
        return _CEN_LIN[spec.centered_order], _CEN_NL[spec.centered_order]
    raise UnsupportedModelError(f"{spec.family} is not a grid model")


def _combine(weight_map):
    items = sorted((o, w) for o, w in weight_map.items() if w != 0.0)
    offsets = np.array([o for o, _ in items], dtype=np.int64)
    weights = np.array([w for _, w in items], dtype=float)
    return offsets, weights


class GridRhs:
    """Packed evaluator g(u; alpha) for one grid model at fixed gamma and h.

    g(u) = conv(u, base) + alpha * conv(u, alin)
           + alpha * sum_groups conv(u, even) * conv(u, odd)

    where gamma powers and 1/h powers are folded into the weights once.
    """

    def __init__(self, spec, h):
        lin_terms, nl_terms = _grid_terms(spec)
        g = spec.gamma
        base, alin = {}, {}
        width = 5
        for a, coef, hpow, gpow, apow in lin_terms:
            scale = float(coef) * g**gpow / h**hpow
            offs, ws = delta_even_weights(a)
            target = alin if apow else base
            for o, w in zip(offs, ws):
                target[o] = target.get(o, 0.0) + scale * float(w)
            width = max(width, stencil_width(a, odd=False))
        groups = {}
        for a, b, coef, gpow in nl_terms:
            scale = float(coef) * g**gpow / h
            odd_map = groups.setdefault(a, {})
            offs, ws = delta_odd_mu_weights(b)
            for o, w in zip(offs, ws):
                odd_map[o] = odd_map.get(o, 0.0) + scale * float(w)
            width = max(width, stencil_width(b, odd=True))
            if a:
                width = max(width, stencil_width(a, odd=False))

        self.spec = spec
        self.h = h
        self.width = width
        self.base_off, self.base_w = _combine(base)
        self.alin_off, self.alin_w = _combine(alin)
        self.groups = []
        for a in sorted(groups):
            if a == 0:
                e_off = np.array([0], dtype=np.int64)
                e_w = np.array([1.0])
            else:
                offs, ws = delta_even_weights(a)
                e_off = np.array(offs, dtype=np.int64)
                e_w = np.array([float(w) for w in ws])
            o_off, o_w = _combine(groups[a])
            self.groups.append((e_off, e_w, o_off, o_w))

    def check_grid(self, n):
        if n < self.width + 1:
            raise GridTooCoarseError(
                f"{self.spec.selector()} needs at least {self.width + 1} points, got {n}"
            )

    def linear(self, u, alpha):
        out = apply_stencil(u, self.base_off, self.base_w)
        if self.alin_off.size:
            out += alpha * apply_stencil(u, self.alin_off, self.alin_w)
        return out

    def nonlinear(self, u, alpha):
        """The alpha * (quadratic in u) part alone."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for e_off, e_w, o_off, o_w in self.groups:
            out += apply_stencil(u, e_off, e_w) * apply_stencil(u, o_off, o_w)
        return alpha * out

    def __call__(self, u, alpha=None):
        u = np.asarray(u, dtype=float)
        self.check_grid(u.shape[-1])
        if alpha is None:
            alpha = self.spec.alpha
        return self.linear(u, alpha) + self.nonlinear(u, alpha)

    def rounding_scale(self, u_inf, alpha):
        """A priori magnitude of the evaluation's float64 rounding noise."""
        s = np.abs(self.base_w).sum() * u_inf
        s += alpha * np.abs(self.alin_w).sum() * u_inf
        for _, e_w, _, o_w in self.groups:
            s += alpha * np.abs(e_w).sum() * np.abs(o_w).sum() * u_inf**2
        return s * np.finfo(float).eps


@lru_cache(maxsize=128)
def grid_rhs(spec, h):
    return GridRhs(spec, float(h))


def rhs_holistic(field, spec):
    """Holistic model right-hand side on a GridField."""
    if spec.family != "holistic":
        raise UnsupportedModelError("spec is not a holistic model")
    return grid_rhs(spec, field.h)(field.u)


def rhs_centered(field, spec):
    """Centered-difference right-hand side on a GridField."""
    if spec.family != "centered":
        raise UnsupportedModelError("spec is not a centered model")
    return grid_rhs(spec, field.h)(field.u)


def dispersion_symbol(spec, k, h):
    """Growth rate of the mode e^{ikx} under the model's linear part.

    Computed from the operator symbols (delta^2 -> -4 sin^2(kh/2), powers
    thereof), so it is the exact spectrum of the linearisation about u = 0.
    Approaches -4k^4 + alpha k^2 as h -> 0.
    """
    if not spec.is_grid:
        raise UnsupportedModelError(
            "dispersion symbol is defined for grid models only; Galerkin rates "
            "are -4k^4 + alpha k^2 directly"
        )
    lin_terms, _ = _grid_terms(spec)
    s2 = 4.0 * np.sin(np.asarray(k, dtype=float) * h / 2.0) ** 2
    total = 0.0
    for a, coef, hpow, gpow, apow in lin_terms:
        term = float(coef) * spec.gamma**gpow / h**hpow * (-s2) ** (a // 2)
        total = total + (spec.alpha**apow if apow else 1.0) * term
    return total


# --------------------------------------------------------------------------
# Galerkin models
# --------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _beta_tables(m):
    """Index/sign tables for the quadratic interaction sums at truncation m.

    beta_k = 1/2 sum_{j=1..m} j b_j [ b_{k+j} + sign(k-j) b_{|k-j|} ]
    with b_0 = 0, sign(0) = 0 and b_i = 0 for i > m.  Amplitudes are looked
    up in a padded vector bp of length 2m+1 with bp[0] = 0.
    """
    j = np.arange(1, m + 1)
    k = np.arange(1, m + 1)[:, None]
    plus_idx = k + j  # <= 2m, inside the padded vector
    minus_idx = np.abs(k - j)
    sign = np.sign(k - j).astype(float)
    return j.astype(float), plus_idx, minus_idx, sign


def _pad_amplitudes(b, m):
    b = np.asarray(b, dtype=float)
    shape = b.shape[:-1]
    bp = np.zeros(shape + (2 * m + 1,), dtype=float)
    take = min(b.shape[-1], m)
    bp[..., 1 : take + 1] = b[..., :take]
    return bp


def beta_all(b, m):
    """beta_k for k = 1..m, batched over leading axes of b."""
    jw, plus_idx, minus_idx, sign = _beta_tables(m)
    bp = _pad_amplitudes(b, m)
    term = bp[..., plus_idx] + sign * bp[..., minus_idx]
    return 0.5 * np.einsum("...kj,j,...j->...k", term, jw, bp[..., 1 : m + 1])


def beta(b, k, m):
    """Single interaction sum beta^m_k; b is zero-padded beyond its length."""
    if not 1 <= k <= m:
        raise IndexError(f"k must satisfy 1 <= k <= {m}, got {k}")
    return float(beta_all(np.asarray(b, dtype=float), m)[..., k - 1])


def _galerkin_linear_rates(m, alpha):
    k = np.arange(1, m + 1, dtype=float)
    return -4.0 * k**4 + alpha * k**2


def galerkin_rhs_values(b, spec, alpha=None):
    """db_k/dt for either Galerkin variant, batched over leading axes."""
    if spec.family not in GALERKIN_FAMILIES:
        raise UnsupportedModelError("spec is not a Galerkin model")
    if alpha is None:
        alpha = spec.alpha
    m = spec.modes
    b = np.asarray(b, dtype=float)
    lin = _galerkin_linear_rates(m, alpha) * b
    if spec.family == "galerkin_traditional":
        return lin - alpha * beta_all(b, m)
    # first iterate: slave modes m+1..2m to phi_j = -alpha/(4 j^4) beta^{2m}_j(b, 0)
    two_m = 2 * m
    beta_b = beta_all(b, two_m)
    j = np.arange(m + 1, two_m + 1, dtype=float)
    phi = -(alpha / (4.0 * j**4)) * beta_b[..., m:]
    b_phi = np.concatenate([b, phi], axis=-1)
    return lin - alpha * beta_all(b_phi, two_m)[..., :m]


def rhs_galerkin(state, spec):
    """Galerkin right-hand side on a GalerkinState."""
    if state.modes != spec.modes:
        raise UnsupportedModelError(
            f"state has {state.modes} modes but spec declares {spec.modes}"
        )
    return galerkin_rhs_values(state.b, spec)


def galerkin_profile(b, x):
    """Physical field sum_k b_k sin(k x) at points x."""
    b = np.asarray(b, dtype=float)
    k = np.arange(1, b.shape[-1] + 1)
    return np.sin(np.multiply.outer(np.asarray(x, dtype=float), k)) @ b


# --------------------------------------------------------------------------
# generic state plumbing
# --------------------------------------------------------------------------


def rhs(state, spec):
    """Dispatch on the state type; returns plain values."""
    if isinstance(state, GridField):
        if spec.family == "holistic":
            return rhs_holistic(state, spec)
        if spec.family == "centered":
            return rhs_centered(state, spec)
        raise UnsupportedModelError("Galerkin spec cannot act on a GridField")
    if isinstance(state, GalerkinState):
        return rhs_galerkin(state, spec)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _rhs_values_fn(state, spec):
    if isinstance(state, GridField):
        ev = grid_rhs(spec, state.h)
        ev.check_grid(state.n)
        return lambda u, alpha: ev(u, alpha)
    if isinstance(state, GalerkinState):
        return lambda b, alpha: galerkin_rhs_values(b, spec, alpha)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def state_values(state):
    if isinstance(state, GridField):
        return state.u
    if isinstance(state, GalerkinState):
        return state.b
    raise TypeError(f"unsupported state type {type(state).__name__}")


def with_values(state, values):
    if isinstance(state, GridField):
        return state.with_values(values)
    if isinstance(state, GalerkinState):
        return GalerkinState(np.asarray(values, dtype=float))
    raise TypeError(f"unsupported state type {type(state).__name__}")


def jacobian_apply(state, spec, v, eps=None):
    """J(u) v by central differences, exact (to rounding) for quadratic rhs.

    eps defaults to 1e-5 * max(1, |u|_inf); the choice is noncritical
    because the grid models are quadratic.
    """
    u = state_values(state)
    v = np.asarray(v, dtype=float)
    if v.shape != u.shape:
        raise ValueError("direction must match the state shape")
    if eps is None:
        eps = 1e-5 * max(1.0, float(np.max(np.abs(u))) if u.size else 1.0)
    f = _rhs_values_fn(state, spec)
    return (f(u + eps * v, spec.alpha) - f(u - eps * v, spec.alpha)) / (2.0 * eps)


def jacobian_dense(state, spec):
    """Assemble the dense Jacobian column by column (batched centrally)."""
    u = state_values(state)
    n = u.shape[-1]
    eps = 1e-5 * max(1.0, float(np.max(np.abs(u))) if u.size else 1.0)
    f = _rhs_values_fn(state, spec)
    basis = np.eye(n)
    plus = f(u[None, :] + eps * basis, spec.alpha)
    minus = f(u[None, :] - eps * basis, spec.alpha)
    return (plus - minus).T / (2.0 * eps)
