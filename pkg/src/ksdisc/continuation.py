"""Newton steady states, pseudo-arclength continuation, bifurcation detection.

Branches live in (x, alpha) space.  The corrector solves the augmented
system f(x, alpha) = 0, t.(z - z_ref) = ds with a dense bordered Jacobian;
the predictor is the secant.  At every accepted point the full spectrum is
computed; a change in the unstable count between consecutive points starts
an arclength bisection that localises the event to d(alpha) <= 1e-3, after
which the crossing is classified:

* conjugate pair with nonzero imaginary part        -> hopf
* real crossing with a symmetric twin branch found
  by a perturbation restart along the critical
  eigenvector                                       -> pitchfork
* real crossing, no twin, branch tangent reverses
  its alpha direction                               -> fold
"""

from dataclasses import dataclass, field

import numpy as np

from .eigen import count_unstable, eigen_spectrum
from .errors import (
    ContinuationStallError,
    NearBifurcationError,
    NewtonDivergenceError,
)
from .models import dispersion_symbol, state_values
from .odd import OddState
from .systems import system_for_state, vector_of

NEWTON_TOL = 1e-10
MAX_NEWTON_ITER = 50
MAX_CORRECTOR_ITER = 12
EVENT_ALPHA_TOL = 1e-3
ALPHA_MARGIN = 0.5


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Converged equilibrium with its spectrum."""

    state: object
    alpha: float
    residual_norm: float
    eigenvalues: np.ndarray
    n_unstable: int

    @property
    def x(self):
        return vector_of(self.state)


@dataclass(frozen=True, eq=False)
class BifurcationPoint:
    """Classified eigenvalue crossing on a branch."""

    kind: str  # pitchfork | fold | hopf | period_doubling
    alpha: float
    branch_label: str
    eigenvalue: complex
    state: np.ndarray
    eigenvector: np.ndarray | None = None
    note: str = ""

    @property
    def omega(self):
        return abs(self.eigenvalue.imag)


@dataclass(eq=False)
class Branch:
    label: str
    points: list = field(default_factory=list)
    signed_norms: list = field(default_factory=list)

    def alphas(self):
        return np.array([p.alpha for p in self.points])


@dataclass(frozen=True)
class StepControl:
    initial: float = 0.1
    grow: float = 2.0
    shrink: float = 0.5
    min_step: float = 1e-4
    max_step: float = 1.0
    grow_iters: int = 4
    shrink_iters: int = 8
    stall: float = 1e-8


def _residual_tol(system, x, alpha):
    """1e-10 max(1, |x|) or the evaluation's own rounding floor, whichever
    is larger (on fine stiff grids the stencil noise exceeds the nominal
    tolerance; the iterate itself is converged to machine precision)."""
    nominal = NEWTON_TOL * max(1.0, float(np.linalg.norm(x)))
    return max(nominal, system.residual_floor(x, alpha))


def signed_norm(state, reference_points=48):
    """sign(u_1) * |w|_2 * sqrt(reference_points / m) for odd states.

    The scale factor makes norms comparable across grid resolutions
    (sqrt(6) for 8 elements against the 48-point reference).  When the
    first grid value is exactly zero the sign comes from the first
    nonzero component.
    """
    if not isinstance(state, OddState):
        raise TypeError("signed norms are defined for odd-reduced states")
    w = state.w
    sign = 0.0
    for value in w:
        if value != 0.0:
            sign = np.sign(value)
            break
    return float(sign * np.linalg.norm(w) * np.sqrt(reference_points / state.m))


def _spectrum_of(system, x, alpha):
    jac = system.jacobian(x, alpha)
    eigs = eigen_spectrum(jac)
    return eigs, count_unstable(eigs)


def _make_steady(system, x, alpha, with_spectrum=True):
    x = np.asarray(x, dtype=float)
    res = float(np.linalg.norm(system.f(x, alpha)))
    if with_spectrum:
        eigs, nuns = _spectrum_of(system, x, alpha)
    else:
        eigs, nuns = np.zeros(0, dtype=complex), -1
    return SteadyState(system.to_state(x), float(alpha), res, eigs, nuns)


def newton_solve(guess, spec, alpha=None, max_iter=MAX_NEWTON_ITER):
    """Dense-Jacobian Newton to |f|_2 <= 1e-10 max(1, |x|_2), plus spectrum."""
    system = system_for_state(guess, spec)
    alpha = spec.alpha if alpha is None else float(alpha)
    x = vector_of(guess).astype(float).copy()
    residual = None
    for _ in range(max_iter + 1):
        r = system.f(x, alpha)
        residual = float(np.linalg.norm(r))
        if not np.isfinite(residual):
            raise NewtonDivergenceError("non-finite residual", residual=residual)
        if residual <= _residual_tol(system, x, alpha):
            return _make_steady(system, x, alpha)
        jac = system.jacobian(x, alpha)
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NearBifurcationError(f"singular Jacobian: {exc}") from None
        if not np.all(np.isfinite(dx)):
            raise NewtonDivergenceError("non-finite Newton step", residual=residual)
        x = x + dx
    raise NewtonDivergenceError(
        f"no convergence in {max_iter} iterations (residual {residual:.3e})",
        residual=residual,
    )


# --------------------------------------------------------------------------
# pseudo-arclength machinery
# --------------------------------------------------------------------------


def _corrector(system, z_pred, tangent, z_ref, ds):
    """Newton on the augmented system; returns (z, iterations) or None."""
    z = z_pred.astype(float).copy()
    n = system.dim
    for it in range(MAX_CORRECTOR_ITER + 1):
        x, alpha = z[:n], z[n]
        r = system.f(x, alpha)
        c = float(tangent @ (z - z_ref) - ds)
        rn = float(np.linalg.norm(r))
        if not np.isfinite(rn):
            return None
        if rn <= _residual_tol(system, x, alpha) and abs(c) <= 1e-10 * max(1.0, abs(ds)):
            return z, it
        jac = system.jacobian(x, alpha)
        fa = system.f_alpha(x, alpha)
        bordered = np.zeros((n + 1, n + 1))
        bordered[:n, :n] = jac
        bordered[:n, n] = fa
        bordered[n, :] = tangent
        rhs = np.concatenate([-r, [-c]])
        try:
            dz = np.linalg.solve(bordered, rhs)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(dz)):
            return None
        z = z + dz
    return None


def _unit(v):
    return v / np.linalg.norm(v)


def _null_vector(jac, shift=0.0, seed=7):
    """Eigenvector for the eigenvalue nearest `shift` by inverse iteration."""
    n = jac.shape[0]
    complex_shift = bool(np.iscomplexobj(shift) or np.imag(shift) != 0)
    a = np.asarray(jac, dtype=complex if complex_shift else float)
    a = a - shift * np.eye(n, dtype=a.dtype)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(n).astype(a.dtype)
    if complex_shift:
        y = y + 1j * rng.standard_normal(n)
    y = _unit(y)
    for _ in range(6):
        try:
            y_next = np.linalg.solve(a, y)
        except np.linalg.LinAlgError:
            a = a + (1e-12 * np.eye(n, dtype=a.dtype))
            continue
        if not np.all(np.isfinite(y_next)):
            break
        y = _unit(y_next)
    return y


def _orient(v):
    for value in v:
        if value != 0.0:
            return v if value > 0 else -v
    return v


def _closest_crossing(eigs, want_complex):
    imag_tol = 1e-8 * np.maximum(1.0, np.abs(eigs))
    complex_mask = np.abs(eigs.imag) > imag_tol
    pool = eigs[complex_mask] if want_complex else eigs[~complex_mask]
    if pool.size == 0:
        pool = eigs
    lam = pool[np.argmin(np.abs(pool.real))]
    if lam.imag < 0:
        lam = np.conj(lam)
    return lam


def _interp_alpha(alpha_lo, lam_lo, alpha_hi, lam_hi):
    a, b = lam_lo.real, lam_hi.real
    if a == b or a * b > 0:
        return 0.5 * (alpha_lo + alpha_hi)
    frac = -a / (b - a)
    return alpha_lo + frac * (alpha_hi - alpha_lo)


class _Tracer:
    """Continuation state shared by the main march and event bisection."""

    def __init__(self, system, label, control):
        self.system = system
        self.label = label
        self.control = control

    def solve_between(self, z_a, z_b, s):
        """Corrector on the secant between two accepted points at arclength s."""
        gap = z_b - z_a
        tangent = _unit(gap)
        z_pred = z_a + s * tangent
        sol = _corrector(self.system, z_pred, tangent, z_a, s)
        return sol[0] if sol else None

    def localize(self, za, ea, zb, eb):
        """Bisect in arclength until every crossing sits in a tight bracket.

        A midpoint whose unstable count matches neither end splits the
        bracket in two (separate events inside one step).  Returns a list
        of (lo_z, lo_eigs, hi_z, hi_eigs) tuples.
        """
        n = self.system.dim
        total = float(np.linalg.norm(zb - za))
        work = [(0.0, za, ea, total, zb, eb)]
        done = []
        budget = 80
        while work and budget > 0:
            lo_s, lo_z, lo_e, hi_s, hi_z, hi_e = work.pop()
            if count_unstable(lo_e) == count_unstable(hi_e):
                continue
            for _ in range(60):
                budget -= 1
                if abs(hi_z[n] - lo_z[n]) <= EVENT_ALPHA_TOL:
                    break
                mid_s = 0.5 * (lo_s + hi_s)
                z_mid = self.solve_between(za, zb, mid_s)
                if z_mid is None:
                    break
                eig_mid, n_mid = _spectrum_of(self.system, z_mid[:n], z_mid[n])
                if n_mid == count_unstable(lo_e):
                    lo_s, lo_z, lo_e = mid_s, z_mid, eig_mid
                elif n_mid == count_unstable(hi_e):
                    hi_s, hi_z, hi_e = mid_s, z_mid, eig_mid
                else:
                    work.append((mid_s, z_mid, eig_mid, hi_s, hi_z, hi_e))
                    hi_s, hi_z, hi_e = mid_s, z_mid, eig_mid
            done.append((lo_z, lo_e, hi_z, hi_e))
        return done

    def classify_real(self, lam, alpha_star, lo_z, hi_z):
        n = self.system.dim
        jac = self.system.jacobian(hi_z[:n], hi_z[n])
        v = np.real(_null_vector(jac, shift=lam.real))
        v = _orient(_unit(v))
        # a null direction parallel to the branch is a turning point, and
        # restarts along it would only rediscover the branch's own arms
        d = hi_z[:n] - lo_z[:n]
        dn = np.linalg.norm(d)
        if dn > 0 and abs((d / dn) @ v) > 0.8:
            return "fold", v, "null direction tangent to branch"
        x_ev = 0.5 * (lo_z[:n] + hi_z[:n])
        twin = self._find_twin(x_ev, alpha_star, v)
        if twin is not None:
            return "pitchfork", v, ""
        return "pitchfork", v, "no twin found by restart"

    def localize_fold(self, za, zb, going_up):
        """Golden-section search for the alpha extremum along the secant."""
        n = self.system.dim
        total = float(np.linalg.norm(zb - za))
        phi = 0.5 * (np.sqrt(5.0) - 1.0)
        lo, hi = 0.0, total
        cache = {}

        def alpha_at(s):
            if s not in cache:
                z = self.solve_between(za, zb, s)
                cache[s] = z
            z = cache[s]
            if z is None:
                return None, None
            return z[n], z

        sign = 1.0 if going_up else -1.0
        s1 = hi - phi * (hi - lo)
        s2 = lo + phi * (hi - lo)
        a1, z1 = alpha_at(s1)
        a2, z2 = alpha_at(s2)
        best = (za[n], za) if za[n] * sign > zb[n] * sign else (zb[n], zb)
        for _ in range(50):
            if a1 is None or a2 is None:
                break
            if abs(a1 - a2) < 0.2 * EVENT_ALPHA_TOL and abs(hi - lo) < 0.2 * total:
                break
            if sign * a1 < sign * a2:
                lo, s1, a1, z1 = s1, s2, a2, z2
                s2 = lo + phi * (hi - lo)
                a2, z2 = alpha_at(s2)
            else:
                hi, s2, a2, z2 = s2, s1, a1, z1
                s1 = hi - phi * (hi - lo)
                a1, z1 = alpha_at(s1)
        for a, z in ((a1, z1), (a2, z2)):
            if a is not None and sign * a > sign * best[0]:
                best = (a, z)
        alpha_star, z_star = best
        jac = self.system.jacobian(z_star[:n], z_star[n])
        eigs = eigen_spectrum(jac)
        lam = _closest_crossing(eigs, want_complex=False)
        v = _orient(_unit(np.real(_null_vector(jac, shift=lam.real))))
        return BifurcationPoint(
            kind="fold", alpha=float(alpha_star), branch_label=self.label,
            eigenvalue=complex(lam.real), state=z_star[:n].copy(), eigenvector=v,
        )

    def _find_twin(self, x_ev, alpha_star, v):
        scale = max(1.0, float(np.linalg.norm(x_ev)))
        spec = self.system.spec
        for d_alpha in (0.1, -0.1):
            alpha_try = alpha_star + d_alpha
            if alpha_try < 0:
                continue
            for amp in (0.02, 0.1, 0.4):
                for sign in (1.0, -1.0):
                    guess = self.system.to_state(x_ev + sign * amp * scale * v)
                    try:
                        sol = newton_solve(guess, spec, alpha=alpha_try, max_iter=25)
                    except (NewtonDivergenceError, NearBifurcationError):
                        continue
                    dist = float(np.linalg.norm(sol.x - x_ev))
                    if 5e-3 * scale < dist <= 2.0 * scale:
                        return sol
        return None


def continue_branch(seed, spec, alpha_range, step_control=None, label="",
                    max_points=500, initial_tangent=None, detect=True,
                    stop_at_alpha=None):
    """Trace one branch by pseudo-arclength; returns (Branch, events).

    The trace stops when alpha leaves alpha_range (plus a small margin),
    when max_points is reached, or at stop_at_alpha (crossing from below).
    Arclength collapse below the stall threshold raises, with the partial
    branch attached.
    """
    control = step_control or StepControl()
    alpha_lo, alpha_hi = map(float, alpha_range)
    system = system_for_state(seed.state, spec)
    tracer = _Tracer(system, label, control)
    n = system.dim

    branch = Branch(label=label)
    events = []

    def accept(point):
        branch.points.append(point)
        if isinstance(point.state, OddState):
            branch.signed_norms.append(signed_norm(point.state))
        else:
            branch.signed_norms.append(float(np.linalg.norm(point.x)))

    first = seed
    if first.n_unstable < 0 and detect:
        first = _make_steady(system, first.x, first.alpha)
    accept(first)

    z_start = np.concatenate([first.x, [first.alpha]])
    z_prev = z_start
    z_before = None  # accepted point one behind z_prev
    eig_prev = first.eigenvalues
    if initial_tangent is None:
        tangent = np.zeros(n + 1)
        tangent[n] = 1.0
    else:
        tangent = _unit(np.asarray(initial_tangent, dtype=float))
    ds = control.initial
    closure_radius = 0.2
    armed = False  # loop closure only after leaving the start region

    while len(branch.points) < max_points:
        sol = _corrector(system, z_prev + ds * tangent, tangent, z_prev, ds)
        if sol is None:
            ds *= 0.5
            if ds < control.stall:
                raise ContinuationStallError(
                    f"arclength step collapsed on branch {label!r}",
                    branch=branch, bifurcations=events,
                )
            continue
        z_new, iters = sol
        point = _make_steady(system, z_new[:n], z_new[n], with_spectrum=detect)
        accept(point)

        if detect and point.n_unstable != count_unstable(eig_prev):
            events.extend(
                _detect_events(tracer, z_prev, eig_prev, z_new,
                               point.eigenvalues, label)
            )
        if detect and z_before is not None:
            d_in = z_prev[n] - z_before[n]
            d_out = z_new[n] - z_prev[n]
            if d_in * d_out < 0:
                events.append(
                    tracer.localize_fold(z_before, z_new, going_up=d_in > 0)
                )

        if iters < control.grow_iters:
            ds = min(ds * control.grow, control.max_step)
        elif iters > control.shrink_iters:
            ds = max(ds * control.shrink, control.min_step)
        tangent = _unit(z_new - z_prev)
        z_before = z_prev
        z_prev = z_new
        eig_prev = point.eigenvalues

        alpha = z_new[n]
        gap = np.linalg.norm(z_new - z_start)
        if not armed and gap > 5.0 * closure_radius:
            armed = True
        if armed and gap < closure_radius:
            break
        if alpha > alpha_hi + ALPHA_MARGIN or alpha < alpha_lo - ALPHA_MARGIN:
            break
        if stop_at_alpha is not None and alpha >= stop_at_alpha:
            break
    return branch, _dedupe_events(events)


def _dedupe_events(events, alpha_tol=0.02):
    """Merge re-detections: same crossing seen twice, or a turning point
    caught both by the eigenvalue count and by the tangent reversal (the
    fold record wins, its vertex localisation is sharper)."""
    kept = []
    for ev in sorted(events, key=lambda e: (e.alpha, e.kind != "fold")):
        merged = False
        for i, other in enumerate(kept):
            if abs(other.alpha - ev.alpha) > alpha_tol:
                continue
            both_real = "hopf" not in (ev.kind, other.kind)
            if ev.kind == other.kind or (both_real and "fold" in (ev.kind, other.kind)):
                if ev.kind == "fold" and other.kind != "fold":
                    kept[i] = ev
                merged = True
                break
        if not merged:
            kept.append(ev)
    return kept


def _detect_events(tracer, za, ea, zb, eb, label):
    n = tracer.system.dim
    found = []
    for lo_z, lo_e, hi_z, hi_e in tracer.localize(za, ea, zb, eb):
        delta = count_unstable(hi_e) - count_unstable(lo_e)
        if delta == 0:
            continue
        want_complex = abs(delta) >= 2
        lam_lo = _closest_crossing(lo_e, want_complex)
        lam_hi = _closest_crossing(hi_e, want_complex)
        is_complex = abs(lam_hi.imag) > 1e-8 * max(1.0, abs(lam_hi))
        alpha_star = _interp_alpha(lo_z[n], lam_lo, hi_z[n], lam_hi)
        if is_complex:
            jac = tracer.system.jacobian(hi_z[:n], hi_z[n])
            vec = _null_vector(jac, shift=lam_hi)
            found.append(BifurcationPoint(
                kind="hopf", alpha=float(alpha_star), branch_label=label,
                eigenvalue=complex(lam_hi), state=hi_z[:n].copy(),
                eigenvector=vec,
            ))
            continue
        kind, v, note = tracer.classify_real(lam_hi, alpha_star, lo_z, hi_z)
        found.append(BifurcationPoint(
            kind=kind, alpha=float(alpha_star), branch_label=label,
            eigenvalue=complex(lam_hi.real), state=hi_z[:n].copy(),
            eigenvector=v, note=note,
        ))
    return found


# --------------------------------------------------------------------------
# branch seeding
# --------------------------------------------------------------------------

FAMILY_NAMES = {1: "unimodal", 2: "bimodal", 3: "trimodal", 4: "quadrimodal"}


def trivial_steady(spec, geometry, alpha):
    """The u = 0 equilibrium with its spectrum."""
    from .systems import make_system

    system = make_system(spec, geometry)
    return _make_steady(system, np.zeros(system.dim), alpha)


def trivial_pitchfork_alpha(spec, geometry, k):
    """Exact alpha where grid mode k crosses zero on the trivial branch."""
    h = geometry.h
    base = dispersion_symbol(spec.with_alpha(0.0), k, h)
    lam1 = dispersion_symbol(spec.with_alpha(1.0), k, h)
    growth = lam1 - base
    if growth <= 0:
        raise NearBifurcationError(f"mode {k} never destabilises")
    return -base / growth


def switch_seed(bp, spec, system, sign, ds=0.05):
    """First point on a branch emanating at a pitchfork, plus its tangent."""
    if bp.eigenvector is None:
        raise NearBifurcationError("pitchfork carries no eigenvector")
    n = system.dim
    v = _orient(_unit(np.real(bp.eigenvector)))
    z_ref = np.concatenate([bp.state, [bp.alpha]])
    tangent = np.concatenate([sign * v, [0.0]])
    for ds_try in (ds, 0.5 * ds, 2.0 * ds, 0.25 * ds):
        sol = _corrector(system, z_ref + ds_try * tangent, tangent, z_ref, ds_try)
        if sol is None:
            continue
        z_new, _ = sol
        moved = np.linalg.norm(z_new[:n] - bp.state)
        along = abs((z_new[:n] - bp.state) @ (sign * v))
        if moved > 0.2 * ds_try and along > 0.5 * moved:
            steady = _make_steady(system, z_new[:n], z_new[n])
            return steady, _unit(z_new - z_ref)
    raise NewtonDivergenceError("branch switch failed at pitchfork")


def seed_family_branch(spec, geometry, family_k, sign, ds=0.05):
    """Seed the k-th family branch straight off the trivial solution.

    The trivial-branch eigenvector of grid mode k in the odd subspace is the
    sampled sine, so no continuation is needed to construct the pitchfork.
    """
    from .systems import make_system

    system = make_system(spec, geometry)
    alpha_star = trivial_pitchfork_alpha(spec, geometry, family_k)
    if geometry.kind == "odd":
        x = (np.arange(geometry.size) + 0.5) * geometry.h
    else:
        x = geometry.h * np.arange(geometry.size)
    v = np.sin(family_k * x)
    bp = BifurcationPoint(
        kind="pitchfork", alpha=float(alpha_star), branch_label="trivial",
        eigenvalue=0j, state=np.zeros(system.dim), eigenvector=_unit(v),
    )
    return bp, switch_seed(bp, spec, system, sign, ds=ds)


def branch_label(family_k, seed_state):
    name = FAMILY_NAMES.get(family_k, f"mode{family_k}")
    if isinstance(seed_state, OddState):
        sign = "+" if signed_norm(seed_state) >= 0 else "-"
    else:
        first = state_values(seed_state).flat[0]
        sign = "+" if first >= 0 else "-"
    return name + sign


def branch_state_at(spec, geometry, family_k, sign, alpha_target,
                    step_control=None):
    """Walk a family branch from its birth to alpha_target; Newton-polish there."""
    bp, (seed, tangent) = seed_family_branch(spec, geometry, family_k, sign)
    if alpha_target <= bp.alpha:
        raise NewtonDivergenceError(
            f"branch {family_k} does not exist at alpha {alpha_target}"
        )
    branch, _ = continue_branch(
        seed, spec, (0.0, alpha_target + 1.0), step_control=step_control,
        label=branch_label(family_k, seed.state), initial_tangent=tangent,
        detect=False, stop_at_alpha=alpha_target,
    )
    alphas = branch.alphas()
    order = np.argsort(np.abs(alphas - alpha_target))
    last_err = None
    for idx in order[:3]:
        try:
            return newton_solve(branch.points[idx].state, spec, alpha=alpha_target)
        except (NewtonDivergenceError, NearBifurcationError) as exc:
            last_err = exc
    raise last_err
