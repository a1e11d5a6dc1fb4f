"""Limit cycles by single shooting, Floquet analysis, orbit continuation.

An orbit is a fixed point of the period map: F(x, T) = (phi_T(x) - x, f_1(x))
where the phase condition pins the first right-hand-side component of the
anchor to zero (the anchor sits at an extremum of u_1 along the cycle).
The flow map and its state derivative (monodromy) use RK4 with

    n_steps = max(2000, T / (0.7 * dt_stability))

so stiff fine grids stay inside the explicit stability region, and central
finite differences over the batched columns (step 1e-6 max(1, |x|)).
Period doubling is flagged when a real multiplier crosses -1.
"""

from dataclasses import dataclass

import numpy as np

from .continuation import BifurcationPoint, _null_vector, newton_solve
from .eigen import eigen_spectrum
from .errors import (
    BlowUpError,
    DegenerateHopfError,
    DegenerateOrbitError,
    NearBifurcationError,
    NewtonDivergenceError,
    OrbitNotFoundError,
)
from .integrate import flow_map, linear_stability_dt
from .systems import system_for_state, vector_of

SHOOT_TOL = 1e-8
MAX_SHOOT_ITER = 25
MIN_PERIOD = 1e-3
PD_ALPHA_TOL = 5e-3
TRIVIAL_MULTIPLIER_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class OrbitGuess:
    state: object
    period: float
    alpha: float


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    """Converged limit cycle with its Floquet multipliers."""

    anchor_state: object
    period: float
    alpha: float
    floquet: np.ndarray
    stable: bool
    residual: float
    amplitude: float
    spec: object = None
    monodromy: np.ndarray = None

    @property
    def x(self):
        return vector_of(self.anchor_state)

    @property
    def trivial_multiplier(self):
        return self.floquet[np.argmin(np.abs(self.floquet - 1.0))]

    def nontrivial_multipliers(self):
        idx = np.argmin(np.abs(self.floquet - 1.0))
        return np.delete(self.floquet, idx)

    @property
    def pd_indicator(self):
        """Most negative real multiplier plus one; crosses zero at a PD."""
        mus = self.nontrivial_multipliers()
        real = mus[np.abs(mus.imag) <= 1e-8 * np.maximum(1.0, np.abs(mus))].real
        if real.size == 0:
            return 1.0
        return float(real.min() + 1.0)

    @property
    def sb_indicator(self):
        """Largest nontrivial real multiplier minus one; crosses zero when a
        cycle loses stability through +1 (symmetry breaking or cycle fold)."""
        mus = self.nontrivial_multipliers()
        real = mus[np.abs(mus.imag) <= 1e-8 * np.maximum(1.0, np.abs(mus))].real
        if real.size == 0:
            return -1.0
        return float(real.max() - 1.0)


def hopf_seed(hb, steady, eps):
    """Orbit guess near a Hopf point: anchor offset along Re(eigenvector)."""
    if hb.kind != "hopf":
        raise DegenerateHopfError(f"not a Hopf point: {hb.kind}")
    omega = hb.omega
    if omega <= 1e-8:
        raise DegenerateHopfError("Hopf frequency is (near) zero")
    if hb.eigenvector is None:
        raise DegenerateHopfError("Hopf point carries no eigenvector")
    v = np.real(hb.eigenvector)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DegenerateHopfError("degenerate eigenvector")
    anchor = steady.x + eps * v / norm
    return OrbitGuess(state=steady.state.with_values(anchor),
                      period=2.0 * np.pi / omega, alpha=steady.alpha)


def _shoot_steps(system, x, alpha, period):
    dt_stab, _ = linear_stability_dt(system, x, alpha)
    return int(max(2000, np.ceil(period / (0.7 * dt_stab))))


def _phase_gradient(system, x, alpha):
    return system.jacobian(x, alpha)[0, :]


def _monodromy(system, x, alpha, period, n_steps):
    """Flow map phi_T(x) and its state derivative by batched central FD."""
    n = x.size
    eps = 1e-6 * max(1.0, float(np.max(np.abs(x))))
    basis = np.eye(n)
    batch = np.vstack([x[None, :], x[None, :] + eps * basis,
                       x[None, :] - eps * basis])
    out = flow_map(system, batch, alpha, period, n_steps)
    phi = out[0]
    mono = (out[1 : n + 1] - out[n + 1 :]).T / (2.0 * eps)
    return phi, mono


def _orbit_amplitude(system, x, alpha, period, n_steps, samples=32):
    every = max(1, n_steps // samples)
    rounds = n_steps // every
    amp = 0.0
    current = x[None, :].copy()
    for _ in range(rounds):
        current = flow_map(system, current, alpha, period * every / n_steps, every)
        amp = max(amp, float(np.linalg.norm(current[0] - x)))
    return amp


def shoot_orbit(guess, spec, alpha=None, jac0=None):
    """Newton on the shooting system; returns a PeriodicOrbit.

    The monodromy (the expensive part of the Jacobian) starts from jac0
    when a neighbouring orbit supplies one, is refreshed only when the
    residual stops contracting, and is recomputed once at the solution,
    by central differences, for the Floquet multipliers.
    """
    alpha = float(guess.alpha if alpha is None else alpha)
    system = system_for_state(guess.state, spec)
    n = system.dim
    x = vector_of(guess.state).astype(float).copy()
    period = float(guess.period)
    if period <= 0:
        raise DegenerateOrbitError("period guess must be positive")

    n_steps = _shoot_steps(system, x, alpha, period)
    mono = np.asarray(jac0, dtype=float) if jac0 is not None else None
    refreshes = 0
    prev_rn = np.inf
    for _ in range(MAX_SHOOT_ITER):
        if period < MIN_PERIOD:
            raise OrbitNotFoundError(f"period collapsed to {period:.2e}")
        scale = max(1.0, float(np.linalg.norm(x)))
        try:
            if mono is None:
                phi, mono = _monodromy(system, x, alpha, period, n_steps)
            else:
                phi = flow_map(system, x[None, :], alpha, period, n_steps)[0]
        except BlowUpError:
            raise OrbitNotFoundError("flow diverged during shooting") from None
        resid = phi - x
        phase = float(system.f(x, alpha)[0])
        rn = float(np.linalg.norm(resid))
        if rn <= SHOOT_TOL * scale and abs(phase) <= SHOOT_TOL * max(
            1.0, float(np.linalg.norm(system.f(x, alpha)))
        ):
            return _finalize(system, x, alpha, period, n_steps)
        if rn > 0.6 * prev_rn and refreshes < 3:
            # frozen Jacobian stopped contracting: rebuild it here
            try:
                phi, mono = _monodromy(system, x, alpha, period, n_steps)
            except BlowUpError:
                raise OrbitNotFoundError(
                    "flow diverged during shooting") from None
            resid = phi - x
            rn = float(np.linalg.norm(resid))
            refreshes += 1
        prev_rn = rn
        jac = np.zeros((n + 1, n + 1))
        jac[:n, :n] = mono - np.eye(n)
        jac[:n, n] = system.f(phi, alpha)
        jac[n, :n] = _phase_gradient(system, x, alpha)
        rhs = -np.concatenate([resid, [phase]])
        try:
            dz = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError as exc:
            raise OrbitNotFoundError(f"singular shooting system: {exc}") from None
        if not np.all(np.isfinite(dz)):
            raise OrbitNotFoundError("non-finite Newton step")
        limit = 0.5 * scale
        step_norm = float(np.linalg.norm(dz[:n]))
        if step_norm > limit:
            dz = dz * (limit / step_norm)
        d_period = float(np.clip(dz[n], -0.3 * period, 0.3 * period))
        x = x + dz[:n]
        period = period + d_period
    raise OrbitNotFoundError(
        f"no convergence in {MAX_SHOOT_ITER} shooting iterations"
    )


def _finalize(system, x, alpha, period, n_steps):
    phi, mono = _monodromy(system, x, alpha, period, n_steps)
    residual = float(np.linalg.norm(phi - x))
    amplitude = _orbit_amplitude(system, x, alpha, period, n_steps)
    if amplitude < 1e-5 * max(1.0, float(np.linalg.norm(x))):
        raise DegenerateOrbitError(
            "zero-amplitude cycle: anchor is an equilibrium"
        )
    floquet = eigen_spectrum(mono)
    order = np.argsort(-np.abs(floquet))
    floquet = floquet[order]
    trivial_idx = np.argmin(np.abs(floquet - 1.0))
    others = np.delete(floquet, trivial_idx)
    stable = bool(np.all(np.abs(others) < 1.0 + TRIVIAL_MULTIPLIER_TOL))
    return PeriodicOrbit(
        anchor_state=system.to_state(x), period=float(period), alpha=alpha,
        floquet=floquet, stable=stable, residual=residual, amplitude=amplitude,
        spec=system.spec, monodromy=mono,
    )


def _settle_to_cycle(system, guess, alpha, settle_periods=60, samples=96):
    """Relax a perturbed state onto the (stable) cycle near a Hopf point.

    Returns an anchor on the phase section f_1 = 0 and a measured period,
    or None when the oscillation has died out (amplitude fell back to the
    equilibrium) or never settled.
    """
    x = vector_of(guess.state).astype(float).copy()
    period = guess.period
    n_steps = _shoot_steps(system, x, alpha, period)
    chunk = max(50, n_steps // samples)
    dt = period / n_steps
    x = flow_map(system, x[None, :], alpha, settle_periods * period,
                 settle_periods * n_steps)[0]
    # sample two periods, watching the phase component f_1
    crossings = []
    states = []
    first = x.copy()
    spread = 0.0
    prev_phase = float(system.f(x, alpha)[0])
    t = 0.0
    for _ in range(int(np.ceil(2.2 * n_steps / chunk))):
        x = flow_map(system, x[None, :], alpha, chunk * dt, chunk)[0]
        t += chunk * dt
        spread = max(spread, float(np.linalg.norm(x - first)))
        phase = float(system.f(x, alpha)[0])
        if prev_phase < 0.0 <= phase:
            crossings.append(t)
            states.append(x.copy())
        prev_phase = phase
    if len(crossings) < 2:
        return None
    if spread < 1e-3 * max(1.0, float(np.linalg.norm(first))):
        return None  # oscillation died out; x sits at an equilibrium
    anchor = states[0]
    measured = crossings[1] - crossings[0]
    if measured < MIN_PERIOD:
        return None
    return OrbitGuess(state=system.to_state(anchor), period=measured,
                      alpha=alpha)


def orbit_from_hopf(hb, spec, geometry, offsets=(0.3, 0.6, 1.0),
                    eps_factors=(0.05, 0.2)):
    """Converged orbit just past a Hopf point.

    The stable cycle is reached by relaxing a perturbed equilibrium onto
    the attractor before shooting, which avoids the near-singular period
    map right at the Hopf point.
    """
    from .systems import make_system

    system = make_system(spec, geometry)
    last = None
    for offset in offsets:
        alpha = hb.alpha + offset
        try:
            steady = newton_solve(
                system.to_state(hb.state), spec, alpha=alpha
            )
        except (NewtonDivergenceError, NearBifurcationError) as exc:
            last = exc
            continue
        scale = max(1.0, float(np.linalg.norm(steady.x)))
        for factor in eps_factors:
            seed = hopf_seed(hb, steady, eps=factor * scale)
            try:
                settled = _settle_to_cycle(system, seed, alpha)
            except BlowUpError as exc:
                last = exc
                continue
            if settled is None:
                last = DegenerateOrbitError("perturbation died out")
                continue
            try:
                return shoot_orbit(settled, spec, alpha=alpha)
            except (OrbitNotFoundError, DegenerateOrbitError, BlowUpError,
                    NearBifurcationError) as exc:
                last = exc
    raise OrbitNotFoundError(f"no orbit found near Hopf point: {last}")


def continue_orbits(first, spec, alpha_range, step=0.25, stop_at_pd=False,
                    stop_at_event=False, label=""):
    """Secant continuation of an orbit family in alpha.

    Records a period-doubling event when the most negative real Floquet
    multiplier crosses -1 and a cycle pitchfork when a nontrivial real
    multiplier leaves the unit circle through +1 (both bisected in alpha to
    within 5e-3 and until the crossing multiplier sits within 1e-2 of the
    circle).
    """
    alpha_lo, alpha_hi = map(float, alpha_range)
    orbits = [first]
    events = []
    direction = 1.0 if alpha_hi >= first.alpha else -1.0
    d_alpha = direction * abs(step)

    def predict(target_alpha):
        if len(orbits) >= 2:
            a, b = orbits[-2], orbits[-1]
            gap = b.alpha - a.alpha
            frac = 0.0 if gap == 0 else (target_alpha - b.alpha) / gap
            x = b.x + frac * (b.x - a.x)
            period = b.period + frac * (b.period - a.period)
        else:
            x, period = orbits[-1].x, orbits[-1].period
        state = orbits[-1].anchor_state.with_values(x)
        return OrbitGuess(state=state, period=max(period, MIN_PERIOD), alpha=target_alpha)

    def solve(target_alpha):
        return shoot_orbit(predict(target_alpha), spec, alpha=target_alpha,
                           jac0=orbits[-1].monodromy)

    while True:
        prev = orbits[-1]
        target = prev.alpha + d_alpha
        if direction > 0 and target > alpha_hi + 1e-9:
            break
        if direction < 0 and target < alpha_lo - 1e-9:
            break
        try:
            orbit = solve(target)
        except (OrbitNotFoundError, DegenerateOrbitError, BlowUpError):
            d_alpha *= 0.5
            if abs(d_alpha) < 0.01:
                break
            continue
        orbits.append(orbit)
        if abs(d_alpha) < abs(step):
            d_alpha *= 1.5
        hit = False
        if prev.pd_indicator * orbit.pd_indicator < 0:
            events.append(_bisect_multiplier(
                solve, prev, orbit, label, kind="period_doubling",
                indicator=lambda o: o.pd_indicator, circle=-1.0,
            ))
            hit = True
        if prev.sb_indicator * orbit.sb_indicator < 0:
            events.append(_bisect_multiplier(
                solve, prev, orbit, label, kind="cycle_pitchfork",
                indicator=lambda o: o.sb_indicator, circle=1.0,
            ))
            hit = True
        if hit and (stop_at_event or
                    (stop_at_pd and any(e.kind == "period_doubling"
                                        for e in events))):
            break
    return orbits, events


def _bisect_multiplier(solve, lo, hi, label, kind, indicator, circle):
    for _ in range(40):
        tight = abs(hi.alpha - lo.alpha) <= PD_ALPHA_TOL
        close = min(abs(indicator(lo)), abs(indicator(hi))) <= 1e-2
        if tight and close:
            break
        try:
            mid = solve(0.5 * (lo.alpha + hi.alpha))
        except (OrbitNotFoundError, DegenerateOrbitError, BlowUpError):
            break
        if indicator(lo) * indicator(mid) <= 0:
            hi = mid
        else:
            lo = mid
    gap = indicator(hi) - indicator(lo)
    frac = 0.5 if gap == 0 else -indicator(lo) / gap
    alpha_star = lo.alpha + frac * (hi.alpha - lo.alpha)
    closest = lo if abs(indicator(lo)) < abs(indicator(hi)) else hi
    mus = closest.nontrivial_multipliers()
    real = mus[np.abs(mus.imag) <= 1e-8 * np.maximum(1.0, np.abs(mus))].real
    if real.size:
        mu = float(real[np.argmin(np.abs(real - circle))])
    else:
        mu = circle
    return BifurcationPoint(
        kind=kind, alpha=float(alpha_star), branch_label=label,
        eigenvalue=complex(mu), state=closest.x.copy(),
        eigenvector=_crossing_floquet_vector(closest, mu) if circle > 0 else None,
        note=f"period {closest.period:.6g}",
    )


def _crossing_floquet_vector(orbit, mu):
    """Monodromy eigenvector of the multiplier near +1, with the trivial
    flow direction projected out (the emanating cycle pair leaves along it)."""
    if orbit.spec is None or orbit.monodromy is None:
        return None
    system = system_for_state(orbit.anchor_state, orbit.spec)
    x = orbit.x
    v = np.real(_null_vector(orbit.monodromy, shift=mu + 1e-8))
    f = system.f(x, orbit.alpha)
    fn = np.linalg.norm(f)
    if fn > 0:
        fhat = f / fn
        v = v - (v @ fhat) * fhat
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else None


def trace_to_period_doubling(hb, spec, geometry, alpha_max, step=0.25,
                             label="", max_switches=3):
    """Follow cycles from a Hopf point to the first period doubling.

    Whenever the running branch loses stability through +1 (a symmetry
    breaking that births a conjugate cycle pair) the tracer relaxes a small
    perturbation onto the newly stable pair just past the event and carries
    on, so the -1 crossing is found on whichever family it lives.
    """
    from .systems import make_system

    system = make_system(spec, geometry)
    orbit = orbit_from_hopf(hb, spec, geometry)
    all_orbits = []
    all_events = []
    for _ in range(max_switches + 1):
        orbits, events = continue_orbits(
            orbit, spec, (orbit.alpha, alpha_max), step=step,
            stop_at_event=True, label=label,
        )
        all_orbits.extend(orbits)
        all_events.extend(events)
        pd = [e for e in events if e.kind == "period_doubling"]
        if pd:
            return all_orbits, all_events, pd[0]
        sb = [e for e in events if e.kind == "cycle_pitchfork"]
        if not sb:
            return all_orbits, all_events, None
        sb_point = sb[-1]
        orbit = _switch_at_cycle_pitchfork(system, spec, orbits, sb_point)
        if orbit is None:
            return all_orbits, all_events, None
        if orbit.pd_indicator < 0:
            # landed beyond the pair's doubling point: bracket it backwards
            back_step = max(0.02, 0.25 * (orbit.alpha - sb_point.alpha))
            orbits_b, events_b = continue_orbits(
                orbit, spec,
                (sb_point.alpha + 1e-3, sb_point.alpha + 1e-3),
                step=back_step, stop_at_pd=True, label=label,
            )
            all_orbits.extend(orbits_b)
            all_events.extend(events_b)
            pd = [e for e in events_b if e.kind == "period_doubling"]
            if pd:
                return all_orbits, all_events, pd[0]
    return all_orbits, all_events, None


def _switch_at_cycle_pitchfork(system, spec, orbits, sb, seed=11):
    """Settle onto the stable cycle pair emanating at a +1 crossing.

    Kicks follow the crossing Floquet eigenvector (the pair's departure
    direction); random kicks are the fallback.
    """
    rng = np.random.default_rng(seed)
    base = min(orbits, key=lambda o: abs(o.alpha - sb.alpha))
    scale = max(1.0, float(np.linalg.norm(base.x)))
    kicks = []
    if sb.eigenvector is not None:
        for amp in (0.03, 0.1):
            kicks.append(amp * scale * sb.eigenvector)
            kicks.append(-amp * scale * sb.eigenvector)
    for _ in range(3):
        kicks.append(1e-2 * scale * rng.standard_normal(base.x.size)
                     / np.sqrt(base.x.size))
    for offset in (0.05, 0.1, 0.2):
        alpha = sb.alpha + offset
        for kick in kicks:
            guess = OrbitGuess(state=system.to_state(base.x + kick),
                               period=base.period, alpha=alpha)
            try:
                settled = _settle_to_cycle(system, guess, alpha,
                                           settle_periods=60)
                if settled is None:
                    continue
                return shoot_orbit(settled, spec, alpha=alpha)
            except (OrbitNotFoundError, DegenerateOrbitError, BlowUpError):
                continue
    return None
