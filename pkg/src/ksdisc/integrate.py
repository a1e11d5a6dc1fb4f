"""Explicit RK4 trajectories, recording, and maximum-stable-step search.

Grid and odd states are advanced on the full periodic grid (odd fields stay
exactly antisymmetric under every model, so stepping the embedded field and
restricting is bitwise identical to stepping the reduced state).  The inner
loop is a packed-stencil kernel compiled with numba when available; Galerkin
states use a plain numpy loop.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np

from .eigen import eigen_spectrum
from .errors import BlowUpError, SearchInvalidError, UsageError
from .models import GalerkinState, GridField
from .odd import OddState
from .systems import system_for_state, vector_of

INF_LIMIT = 1.0e6  # max-norm blow-up threshold
_CHECK_EVERY = 10

_STATUS_OK = 0
_STATUS_BOUND = 1
_STATUS_BLOWUP = 2


# --------------------------------------------------------------------------
# packed grid kernel
# --------------------------------------------------------------------------


def _rhs_row_impl(u, alpha, base_off, base_w, alin_off, alin_w,
                  e_off, e_w, e_ptr, o_off, o_w, o_ptr, out):
    nn = u.shape[0]
    groups = e_ptr.size - 1
    for j in range(nn):
        acc = 0.0
        for t in range(base_off.size):
            jj = j + base_off[t]
            if jj >= nn:
                jj -= nn
            acc += base_w[t] * u[jj]
        for t in range(alin_off.size):
            jj = j + alin_off[t]
            if jj >= nn:
                jj -= nn
            acc += alpha * alin_w[t] * u[jj]
        nl = 0.0
        for g in range(groups):
            ev = 0.0
            for t in range(e_ptr[g], e_ptr[g + 1]):
                jj = j + e_off[t]
                if jj >= nn:
                    jj -= nn
                ev += e_w[t] * u[jj]
            ov = 0.0
            for t in range(o_ptr[g], o_ptr[g + 1]):
                jj = j + o_off[t]
                if jj >= nn:
                    jj -= nn
                ov += o_w[t] * u[jj]
            nl += ev * ov
        out[j] = acc + alpha * nl


def _rhs_packed_impl(u, alpha, base_off, base_w, alin_off, alin_w,
                     e_off, e_w, e_ptr, o_off, o_w, o_ptr, out):
    for b in range(u.shape[0]):
        _rhs_row(u[b], alpha, base_off, base_w, alin_off, alin_w,
                 e_off, e_w, e_ptr, o_off, o_w, o_ptr, out[b])


def _rk4_kernel_impl(u, nsteps, dt, alpha, base_off, base_w, alin_off, alin_w,
                     e_off, e_w, e_ptr, o_off, o_w, o_ptr,
                     record_every, records, l2_limit, inf_limit):
    nb, nn = u.shape
    k1 = np.empty((nb, nn))
    k2 = np.empty((nb, nn))
    k3 = np.empty((nb, nn))
    k4 = np.empty((nb, nn))
    stage = np.empty((nb, nn))
    nrec = 0
    for step in range(nsteps):
        _rhs_packed(u, alpha, base_off, base_w, alin_off, alin_w,
                    e_off, e_w, e_ptr, o_off, o_w, o_ptr, k1)
        for b in range(nb):
            for j in range(nn):
                stage[b, j] = u[b, j] + 0.5 * dt * k1[b, j]
        _rhs_packed(stage, alpha, base_off, base_w, alin_off, alin_w,
                    e_off, e_w, e_ptr, o_off, o_w, o_ptr, k2)
        for b in range(nb):
            for j in range(nn):
                stage[b, j] = u[b, j] + 0.5 * dt * k2[b, j]
        _rhs_packed(stage, alpha, base_off, base_w, alin_off, alin_w,
                    e_off, e_w, e_ptr, o_off, o_w, o_ptr, k3)
        for b in range(nb):
            for j in range(nn):
                stage[b, j] = u[b, j] + dt * k3[b, j]
        _rhs_packed(stage, alpha, base_off, base_w, alin_off, alin_w,
                    e_off, e_w, e_ptr, o_off, o_w, o_ptr, k4)
        for b in range(nb):
            for j in range(nn):
                u[b, j] = u[b, j] + dt / 6.0 * (
                    k1[b, j] + 2.0 * k2[b, j] + 2.0 * k3[b, j] + k4[b, j]
                )
        done = step + 1
        if record_every > 0 and done % record_every == 0:
            for b in range(nb):
                for j in range(nn):
                    records[nrec, b, j] = u[b, j]
            nrec += 1
        if done % 10 == 0 or done == nsteps:
            worst = 0.0
            ssq = 0.0
            finite = True
            for b in range(nb):
                row = 0.0
                for j in range(nn):
                    v = u[b, j]
                    row += v * v
                    a = abs(v)
                    if a > worst:
                        worst = a
                # NaN escapes ordering comparisons but poisons the sum
                if not np.isfinite(row):
                    finite = False
                if row > ssq:
                    ssq = row
            if not finite or worst > inf_limit:
                return _STATUS_BLOWUP, step, nrec
            if l2_limit > 0.0 and np.sqrt(ssq) > l2_limit:
                return _STATUS_BOUND, step, nrec
    return _STATUS_OK, nsteps - 1, nrec


def _rk4_flow_impl(u, nsteps, dt, alpha, base_off, base_w, alin_off, alin_w,
                   e_off, e_w, e_ptr, o_off, o_w, o_ptr, inf_limit):
    """Row-independent batched flow: each batch member integrates in its own
    thread for the full horizon (monodromy columns are uncoupled)."""
    nb, nn = u.shape
    bad = np.zeros(nb, dtype=np.int64)
    for b in prange(nb):
        k1 = np.empty(nn)
        k2 = np.empty(nn)
        k3 = np.empty(nn)
        k4 = np.empty(nn)
        stage = np.empty(nn)
        row = u[b]
        for step in range(nsteps):
            _rhs_row(row, alpha, base_off, base_w, alin_off, alin_w,
                     e_off, e_w, e_ptr, o_off, o_w, o_ptr, k1)
            for j in range(nn):
                stage[j] = row[j] + 0.5 * dt * k1[j]
            _rhs_row(stage, alpha, base_off, base_w, alin_off, alin_w,
                     e_off, e_w, e_ptr, o_off, o_w, o_ptr, k2)
            for j in range(nn):
                stage[j] = row[j] + 0.5 * dt * k2[j]
            _rhs_row(stage, alpha, base_off, base_w, alin_off, alin_w,
                     e_off, e_w, e_ptr, o_off, o_w, o_ptr, k3)
            for j in range(nn):
                stage[j] = row[j] + dt * k3[j]
            _rhs_row(stage, alpha, base_off, base_w, alin_off, alin_w,
                     e_off, e_w, e_ptr, o_off, o_w, o_ptr, k4)
            for j in range(nn):
                row[j] = row[j] + dt / 6.0 * (
                    k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]
                )
            if (step + 1) % 25 == 0 or step + 1 == nsteps:
                ssq = 0.0
                for j in range(nn):
                    ssq += row[j] * row[j]
                if not np.isfinite(ssq) or ssq > inf_limit * inf_limit * nn:
                    bad[b] = 1
                    break
    return int(bad.max())


try:  # pragma: no cover
    from numba import njit, prange

    _rhs_row = njit(cache=True)(_rhs_row_impl)
    _rhs_packed = njit(cache=True)(_rhs_packed_impl)
    _rk4_kernel = njit(cache=True)(_rk4_kernel_impl)
    _rk4_flow = njit(cache=True, parallel=True)(_rk4_flow_impl)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    prange = range
    _rhs_row = _rhs_row_impl
    _rhs_packed = _rhs_packed_impl
    _rk4_kernel = _rk4_kernel_impl
    _rk4_flow = _rk4_flow_impl
    HAVE_NUMBA = False


@lru_cache(maxsize=64)
def _packed_tables(spec, h, n):
    """Kernel argument tuple for one grid model at one resolution."""
    from .models import grid_rhs

    ev = grid_rhs(spec, h)
    ev.check_grid(n)

    def mod(off):
        return np.ascontiguousarray(off % n, dtype=np.int64)

    e_off, e_w, o_off, o_w = [], [], [], []
    e_ptr, o_ptr = [0], [0]
    for eo, ew, oo, ow in ev.groups:
        e_off.append(mod(eo))
        e_w.append(ew)
        e_ptr.append(e_ptr[-1] + eo.size)
        o_off.append(mod(oo))
        o_w.append(ow)
        o_ptr.append(o_ptr[-1] + oo.size)
    return (
        mod(ev.base_off), np.ascontiguousarray(ev.base_w),
        mod(ev.alin_off), np.ascontiguousarray(ev.alin_w),
        np.concatenate(e_off), np.concatenate(e_w),
        np.asarray(e_ptr, dtype=np.int64),
        np.concatenate(o_off), np.concatenate(o_w),
        np.asarray(o_ptr, dtype=np.int64),
    )


def _run_grid_kernel(spec, h, u, nsteps, dt, alpha, record_every=0,
                     l2_limit=-1.0, inf_limit=INF_LIMIT):
    """Advance batched full-grid values in place; returns (status, step, records)."""
    tables = _packed_tables(spec, float(h), u.shape[-1])
    nrec_total = nsteps // record_every if record_every > 0 else 0
    records = np.empty((max(nrec_total, 1), u.shape[0], u.shape[1]))
    status, step, nrec = _rk4_kernel(
        u, nsteps, dt, alpha, *tables,
        record_every if record_every > 0 else -1,
        records, l2_limit, inf_limit,
    )
    return status, step, records[:nrec]


def _run_galerkin_numpy(system, x, nsteps, dt, alpha, record_every=0,
                        l2_limit=-1.0, inf_limit=INF_LIMIT):
    f = system.f
    records = []
    for step in range(nsteps):
        k1 = f(x, alpha)
        k2 = f(x + 0.5 * dt * k1, alpha)
        k3 = f(x + 0.5 * dt * k2, alpha)
        k4 = f(x + dt * k3, alpha)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        done = step + 1
        if record_every > 0 and done % record_every == 0:
            records.append(x.copy())
        if done % _CHECK_EVERY == 0 or done == nsteps:
            worst = np.max(np.abs(x))
            if not np.isfinite(worst) or worst > inf_limit:
                return _STATUS_BLOWUP, step, records, x
            if l2_limit > 0.0 and np.linalg.norm(x, axis=-1).max() > l2_limit:
                return _STATUS_BOUND, step, records, x
    return _STATUS_OK, nsteps - 1, records, x


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded snapshots of one integration in the state's own coordinates."""

    times: np.ndarray
    states: np.ndarray
    spec: object
    geometry: object

    def __len__(self):
        return self.times.size

    def state_at(self, index):
        from .systems import make_system

        return make_system(self.spec, self.geometry).to_state(self.states[index])

    @property
    def final_state(self):
        return self.state_at(-1)


def _advance(state, spec, dt, nsteps, record_every=0, l2_limit=-1.0):
    """Shared driver: returns (status, step, recorded raw states, final raw)."""
    system = system_for_state(state, spec)
    x0 = vector_of(state)
    if isinstance(state, GalerkinState):
        status, step, recs, xf = _run_galerkin_numpy(
            system, x0, nsteps, dt, spec.alpha, record_every, l2_limit
        )
        return system, status, step, [np.asarray(r) for r in recs], xf
    u = system.to_full_values(x0)[None, :].copy()
    status, step, recs = _run_grid_kernel(
        spec, system.geometry.h, u, nsteps, dt, spec.alpha, record_every, l2_limit
    )
    back = system.from_full_values
    return system, status, step, [back(r[0]) for r in recs], back(u[0])


def rk4_step(state, spec, dt):
    """One classical 4-stage step; raises BlowUpError on a non-finite result."""
    if dt <= 0:
        raise UsageError("dt must be positive")
    _, status, _, _, xf = _advance(state, spec, dt, 1)
    if status == _STATUS_BLOWUP or not np.all(np.isfinite(xf)):
        raise BlowUpError("non-finite state after one RK4 step", step=0, time=dt)
    return state.with_values(xf) if not isinstance(state, GalerkinState) \
        else GalerkinState(xf)


def integrate(state, spec, dt, t_end, record_every=1):
    """RK4 trajectory with snapshots every record_every steps.

    dt must divide t_end within rounding.  Terminates with BlowUpError once
    the max norm exceeds 1e6.
    """
    if dt <= 0 or t_end <= 0:
        raise UsageError("dt and t_end must be positive")
    if record_every < 1:
        raise UsageError("record_every must be a positive integer")
    nsteps = round(t_end / dt)
    if nsteps < 1 or abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise UsageError(f"dt={dt!r} does not divide t_end={t_end!r}")
    system = system_for_state(state, spec)
    _, status, step, recs, _ = _advance(state, spec, dt, nsteps, record_every)
    if status == _STATUS_BLOWUP:
        raise BlowUpError(
            f"trajectory blew up at step {step} (t={step * dt:.6g})",
            step=step, time=step * dt,
        )
    times = [0.0] + [record_every * dt * (i + 1) for i in range(len(recs))]
    states = np.vstack([vector_of(state)[None, :]] + [r[None, :] for r in recs])
    return Trajectory(np.asarray(times), states, spec, system.geometry)


def flow_map(system, x, alpha, t_span, nsteps):
    """phi_T over batched raw states (monodromy plumbing); raises on blow-up.

    Batch rows are uncoupled, so they integrate in parallel threads.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dt = t_span / nsteps
    if system.spec.is_grid:
        u = np.ascontiguousarray(
            np.stack([system.to_full_values(row) for row in x])
        )
        spec = system.spec.with_alpha(alpha)
        tables = _packed_tables(spec, float(system.geometry.h), u.shape[-1])
        status = _rk4_flow(u, nsteps, dt, alpha, *tables, INF_LIMIT)
        if status != 0:
            raise BlowUpError("flow map diverged")
        return np.stack([system.from_full_values(row) for row in u])
    out = x.copy()
    status, step, _, out = _run_galerkin_numpy(system, out, nsteps, dt, alpha)
    if status != _STATUS_OK:
        raise BlowUpError("flow map diverged", step=step, time=step * dt)
    return out


def linear_stability_dt(system, x, alpha=None):
    """Explicit RK4 real-axis bound 2.785/|lambda_min| at the given state."""
    eigs = eigen_spectrum(system.jacobian(np.asarray(x, dtype=float), alpha))
    lam_min = float(np.min(eigs.real))
    if lam_min >= 0.0:
        raise SearchInvalidError("state has no decaying directions")
    return 2.785 / abs(lam_min), eigs


def max_stable_dt(state, spec, horizon=1.0, bound_factor=10.0, seed=0):
    """Largest stable RK4 step near a stable steady state, to 2 figures.

    Stability criterion: a seeded small perturbation of the state keeps
    |u(t)|_2 <= bound_factor * max(1, |u(0)|_2) over the horizon.  The
    bisection bracket starts from the linear bound 2.8/|lambda_min|.
    """
    system = system_for_state(state, spec)
    x0 = vector_of(state).astype(float)
    dt_lin, eigs = linear_stability_dt(system, x0)
    if np.max(eigs.real) > 1e-6:
        raise SearchInvalidError(
            f"base state is unstable (max Re lambda = {np.max(eigs.real):.3e})"
        )
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(x0.size)
    direction /= np.linalg.norm(direction)
    x_start = x0 + 1e-3 * max(1.0, np.linalg.norm(x0)) * direction
    limit = bound_factor * max(1.0, np.linalg.norm(x_start))
    start = system.to_state(x_start)

    def stays_bounded(dt):
        nsteps = max(1, ceil(horizon / dt))
        _, status, _, _, _ = _advance(start, spec, dt, nsteps, 0, l2_limit=limit)
        return status == _STATUS_OK

    lo = hi = dt_lin
    if stays_bounded(lo):
        for _ in range(60):
            hi = lo * 2.0
            if not stays_bounded(hi):
                break
            lo = hi
        else:
            raise SearchInvalidError("no unstable step found below bracket cap")
    else:
        for _ in range(60):
            lo = hi / 2.0
            if stays_bounded(lo):
                break
            hi = lo
        else:
            raise SearchInvalidError("no stable step found above bracket floor")
    while hi / lo > 1.02:
        mid = np.sqrt(lo * hi)
        if stays_bounded(mid):
            lo = mid
        else:
            hi = mid
    return float(f"{lo:.1e}")
