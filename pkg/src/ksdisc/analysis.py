"""Spectral and consistency diagnostics.

* time-averaged power spectra S(k) of trajectories,
* numerically fitted consistency orders against the exact right-hand side
  -4 u'''' - alpha (u'' + u u') on smooth analytic profiles,
* max-norm profile comparison through trigonometric interpolation,
* a fine-grid reference integrator (exponential time differencing on the
  model's circulant linear symbol) for trajectories no explicit scheme can
  reach at desk scale.  Model experiments themselves always use RK4; this
  routine only manufactures reference data.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import InsufficientDataError, UsageError
from .integrate import Trajectory
from .models import GridField, dispersion_symbol, grid_rhs
from .systems import Geometry

_PARSEVAL_TOL = 1e-12


@lru_cache(maxsize=32)
def _dft_matrix(n):
    j = np.arange(n)
    k = np.arange(n // 2 + 1)
    return np.exp(-2j * np.pi * np.outer(k, j) / n) / n


def _power_rows(values):
    """|u_hat_k|^2 for k = 0..N/2 over the last axis (direct O(N^2) DFT)."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n = values.shape[-1]
    coeffs = values @ _dft_matrix(n).T
    power = np.abs(coeffs) ** 2
    # Parseval self-check: sum over all modes equals mean of u^2
    full = power.copy()
    if n % 2 == 0:
        full[..., 1:-1] *= 2.0
    else:
        full[..., 1:] *= 2.0
    total = full.sum(axis=-1)
    mean_sq = (values**2).mean(axis=-1)
    scale = np.maximum(1.0, mean_sq)
    if np.any(np.abs(total - mean_sq) > 100 * _PARSEVAL_TOL * scale):
        raise AssertionError("Parseval check failed in power computation")
    return power


def dft_power(field):
    """Map wavenumber k -> |u_hat_k|^2 for k = 1..N/2-1.

    Convention u_hat_k = (1/N) sum_j u_j exp(-i k x_j); a pure sin(kx)
    sample carries power 1/4 at k.
    """
    if field.n < 4:
        raise UsageError("need at least 4 grid points for a spectrum")
    power = _power_rows(field.u)[0]
    return {k: float(power[k]) for k in range(1, field.n // 2)}


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    wavenumbers: np.ndarray
    power: np.ndarray
    samples_used: int
    transient_skipped: float

    def as_dict(self):
        return {int(k): float(p) for k, p in zip(self.wavenumbers, self.power)}


def time_averaged_spectrum(traj, skip):
    """Mean of dft_power over all snapshots with t > skip."""
    mask = traj.times > skip
    if not np.any(mask):
        raise InsufficientDataError(
            f"no snapshots after the transient (t_end={traj.times[-1]:.3g}, "
            f"skip={skip:.3g})"
        )
    if traj.geometry.kind == "odd":
        from .odd import embed_values

        values = embed_values(traj.states[mask], traj.geometry.size)
    else:
        values = traj.states[mask]
    power = _power_rows(values).mean(axis=0)
    n = values.shape[-1]
    ks = np.arange(1, n // 2)
    return SpectrumResult(
        wavenumbers=ks, power=power[1 : n // 2],
        samples_used=int(mask.sum()), transient_skipped=float(skip),
    )


# --------------------------------------------------------------------------
# consistency orders
# --------------------------------------------------------------------------

TWO_PI = 2.0 * np.pi


def _profile_sin_plus_cos2(x):
    u = np.sin(x) + 0.3 * np.cos(2 * x)
    du = np.cos(x) - 0.6 * np.sin(2 * x)
    d2 = -np.sin(x) - 1.2 * np.cos(2 * x)
    d4 = np.sin(x) + 4.8 * np.cos(2 * x)
    return u, du, d2, d4


def _profile_sin(x):
    u = np.sin(x)
    return u, np.cos(x), -np.sin(x), np.sin(x)


PROFILES = {
    "sin_plus_cos2": _profile_sin_plus_cos2,
    "sin": _profile_sin,
}


def exact_ks_rhs(profile, x, alpha):
    """-4 u'''' - alpha (u'' + u u') for a named analytic profile."""
    u, du, d2, d4 = PROFILES[profile](x)
    return u, -4.0 * d4 - alpha * (d2 + u * du)


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    spec: object
    profile: str
    grid_sizes: np.ndarray
    max_errors: np.ndarray
    fitted_order: float
    fit_mask: np.ndarray  # grids kept (error above the rounding floor)
    monotone: bool


def consistency_order(spec, profile="sin_plus_cos2", alpha=None,
                      grids=(16, 24, 32, 48), domain_length=TWO_PI):
    """Fit the slope of log max-error against log h over refined grids.

    Grids whose truncation error has fallen below the a-priori float64
    rounding floor of the evaluation are excluded from the fit (the two
    coarsest grids are always kept); errors there are pure noise.
    """
    if alpha is None:
        alpha = spec.alpha
    grids = sorted(int(n) for n in grids)
    if len(grids) < 2:
        raise UsageError("need at least two grid sizes")
    spec_g1 = spec if spec.gamma == 1.0 else replace(spec, gamma=1.0)
    errors = []
    floors = []
    for n in grids:
        h = domain_length / n
        ev = grid_rhs(spec_g1, h)
        ev.check_grid(n)
        x = h * np.arange(n)
        u, target = exact_ks_rhs(profile, x, alpha)
        got = ev(u, alpha)
        errors.append(float(np.max(np.abs(got - target))))
        floors.append(32.0 * ev.rounding_scale(float(np.max(np.abs(u))), alpha))
    errors = np.array(errors)
    floors = np.array(floors)
    keep = errors > floors
    keep[:2] = True
    hs = domain_length / np.array(grids, dtype=float)
    slope = np.polyfit(np.log(hs[keep]), np.log(errors[keep]), 1)[0]
    monotone = bool(np.all(np.diff(errors[keep]) < 0))
    return ConsistencyReport(
        spec=spec, profile=profile, grid_sizes=np.array(grids),
        max_errors=errors, fitted_order=float(slope), fit_mask=keep,
        monotone=monotone,
    )


# --------------------------------------------------------------------------
# profile comparison by trigonometric interpolation
# --------------------------------------------------------------------------


def trig_interpolate(field, x_new):
    """Evaluate the band-limited interpolant of a periodic field at x_new."""
    u = field.u
    n = field.n
    length = field.domain_length
    base = 2.0 * np.pi / length
    coeffs = np.fft.rfft(u) / n
    # undo the grid's phase origin so coefficients refer to absolute x
    ks = np.arange(coeffs.size)
    coeffs = coeffs * np.exp(-1j * ks * base * field.x0)
    x_new = np.asarray(x_new, dtype=float)
    result = np.full(x_new.shape, coeffs[0].real)
    for k in range(1, coeffs.size):
        if n % 2 == 0 and k == n // 2:
            result += (coeffs[k] * np.exp(1j * k * base * x_new)).real
        else:
            result += 2.0 * (coeffs[k] * np.exp(1j * k * base * x_new)).real
    return result


def profile_compare(a, b):
    """Relative max-norm discrepancy of field a against a finer reference b.

    b is interpolated to a's nodes trigonometrically; exact for
    band-limited data.
    """
    if not np.isclose(a.domain_length, b.domain_length, rtol=1e-12):
        raise UsageError("fields live on different domains")
    if b.n < a.n:
        raise UsageError("reference field must be at least as fine")
    if b.n == a.n and b.x0 == a.x0:
        interp = b.u
    else:
        interp = trig_interpolate(b, a.x)
    scale = max(float(np.max(np.abs(a.u))), float(np.max(np.abs(interp))))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a.u - interp)) / scale)


# --------------------------------------------------------------------------
# stiff reference trajectories (ETDRK4 on the circulant linear symbol)
# --------------------------------------------------------------------------


def _etdrk4_tables(lam, dt, m_contour=32):
    """Kassam-Trefethen contour evaluation of the ETDRK4 coefficients."""
    lr = dt * lam[:, None] + np.exp(
        2j * np.pi * (np.arange(1, m_contour + 1) - 0.5) / m_contour
    )[None, :]
    e1 = np.exp(dt * lam)
    e2 = np.exp(0.5 * dt * lam)
    q = dt * np.real(np.mean((np.exp(lr / 2) - 1) / lr, axis=1))
    f1 = dt * np.real(
        np.mean((-4 - lr + np.exp(lr) * (4 - 3 * lr + lr**2)) / lr**3, axis=1)
    )
    f2 = dt * np.real(
        np.mean((2 + lr + np.exp(lr) * (-2 + lr)) / lr**3, axis=1)
    )
    f3 = dt * np.real(
        np.mean((-4 - 3 * lr - lr**2 + np.exp(lr) * (4 - lr)) / lr**3, axis=1)
    )
    return e1, e2, q, f1, f2, f3


def reference_trajectory(spec, field, dt, t_end, record_every=1):
    """Reference integration of a grid model on a (possibly stiff) fine grid.

    Fourth-order exponential time differencing: the circulant linear part
    (the model's dispersion symbol) is treated exactly, the quadratic term
    explicitly.  Intended for manufacturing fine-grid reference data only.
    """
    n = field.n
    h = field.h
    ev = grid_rhs(spec, h)
    ev.check_grid(n)
    alpha = spec.alpha
    ks = np.arange(n // 2 + 1)
    lam = np.array([dispersion_symbol(spec, int(k), h) for k in ks])

    nsteps = round(t_end / dt)
    if nsteps < 1 or abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise UsageError(f"dt={dt!r} does not divide t_end={t_end!r}")
    e1, e2, q, f1, f2, f3 = _etdrk4_tables(lam, dt)

    def nonlinear(v_hat):
        u = np.fft.irfft(v_hat, n)
        return np.fft.rfft(ev.nonlinear(u, alpha))

    v = np.fft.rfft(field.u)
    times = [0.0]
    states = [field.u.copy()]
    for step in range(nsteps):
        nv = nonlinear(v)
        a = e2 * v + q * nv
        na = nonlinear(a)
        b = e2 * v + q * na
        nb = nonlinear(b)
        c = e2 * a + q * (2 * nb - nv)
        nc = nonlinear(c)
        v = e1 * v + nv * f1 + 2 * (na + nb) * f2 + nc * f3
        if (step + 1) % record_every == 0:
            u = np.fft.irfft(v, n)
            if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e6:
                from .errors import BlowUpError

                raise BlowUpError("reference trajectory blew up",
                                  step=step, time=(step + 1) * dt)
            times.append((step + 1) * dt)
            states.append(u)
    return Trajectory(
        np.asarray(times), np.vstack([s[None, :] for s in states]), spec,
        Geometry.full(n),
    )
