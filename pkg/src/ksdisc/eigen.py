"""Dense nonsymmetric eigenvalues: Hessenberg reduction + double-shift QR.

Self-contained Francis iteration (no LAPACK on the acceptance path).
Eigenvalues of deflated 2x2 blocks are computed from the discriminant, so
complex pairs come out exactly conjugate.  The inner sweeps are plain loops
compiled with numba when available; the same code runs uncompiled otherwise.
"""

import numpy as np

from .errors import EigenFailureError

_EPS = np.finfo(float).eps


def _hessenberg_impl(h):
    n = h.shape[0]
    for k in range(n - 2):
        scale = 0.0
        for i in range(k + 1, n):
            scale += abs(h[i, k])
        if scale == 0.0:
            continue
        m = n - k - 1
        v = np.empty(m)
        for i in range(m):
            v[i] = h[k + 1 + i, k] / scale
        alpha = np.sqrt((v * v).sum())
        if alpha == 0.0:
            continue
        if v[0] >= 0.0:
            alpha = -alpha
        v[0] -= alpha
        vnorm2 = (v * v).sum()
        if vnorm2 == 0.0:
            continue
        # similarity P H P with P = I - 2 v v^T / (v^T v) on rows/cols k+1..
        for j in range(k, n):
            s = 0.0
            for i in range(m):
                s += v[i] * h[k + 1 + i, j]
            s *= 2.0 / vnorm2
            for i in range(m):
                h[k + 1 + i, j] -= s * v[i]
        for i in range(n):
            s = 0.0
            for j in range(m):
                s += v[j] * h[i, k + 1 + j]
            s *= 2.0 / vnorm2
            for j in range(m):
                h[i, k + 1 + j] -= s * v[j]
        h[k + 1, k] = alpha * scale
        for i in range(k + 2, n):
            h[i, k] = 0.0
    return h


def _two_by_two(a, b, c, d, out, pos):
    mean = 0.5 * (a + d)
    det = a * d - b * c
    disc = mean * mean - det
    if disc >= 0.0:
        q = np.sqrt(disc)
        out[0, pos] = mean + q
        out[0, pos + 1] = mean - q
        out[1, pos] = 0.0
        out[1, pos + 1] = 0.0
    else:
        q = np.sqrt(-disc)
        out[0, pos] = mean
        out[0, pos + 1] = mean
        out[1, pos] = q
        out[1, pos + 1] = -q


def _francis_impl(h, max_sweeps, out):
    """Eigenvalues of an upper Hessenberg matrix into out[0] + i out[1].

    Returns 0 on success, 1 when the sweep budget is exhausted.
    """
    n = h.shape[0]
    hnorm = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += abs(h[i, j])
        if s > hnorm:
            hnorm = s
    if hnorm == 0.0:
        for i in range(n):
            out[0, i] = 0.0
            out[1, i] = 0.0
        return 0

    hi = n - 1
    iters = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            out[0, 0] = h[0, 0]
            out[1, 0] = 0.0
            break
        # deflation scan
        lo = hi
        while lo > 0:
            s = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if s == 0.0:
                s = hnorm
            if abs(h[lo, lo - 1]) <= _EPS * s:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            out[0, hi] = h[hi, hi]
            out[1, hi] = 0.0
            hi -= 1
            iters = 0
            continue
        if lo == hi - 1:
            _two_by_two(h[hi - 1, hi - 1], h[hi - 1, hi],
                        h[hi, hi - 1], h[hi, hi], out, hi - 1)
            hi -= 2
            iters = 0
            continue

        total += 1
        iters += 1
        if total > max_sweeps:
            return 1
        if iters % 10 == 0:
            # exceptional shift breaks rare cycling
            s = abs(h[hi, hi - 1]) + abs(h[hi - 1, hi - 2])
            trace = 1.5 * s
            det = -0.4375 * s * s
        else:
            trace = h[hi - 1, hi - 1] + h[hi, hi]
            det = h[hi - 1, hi - 1] * h[hi, hi] - h[hi - 1, hi] * h[hi, hi - 1]

        # chase the bulge from lo to hi
        p = h[lo, lo] * h[lo, lo] + h[lo, lo + 1] * h[lo + 1, lo] \
            - trace * h[lo, lo] + det
        q = h[lo + 1, lo] * (h[lo, lo] + h[lo + 1, lo + 1] - trace)
        r = h[lo + 2, lo + 1] * h[lo + 1, lo]
        for k in range(lo, hi - 1):
            if k > lo:
                p = h[k, k - 1]
                q = h[k + 1, k - 1]
                r = h[k + 2, k - 1] if k + 2 <= hi else 0.0
            scale = abs(p) + abs(q) + abs(r)
            if scale == 0.0:
                continue
            p /= scale
            q /= scale
            r /= scale
            alpha = np.sqrt(p * p + q * q + r * r)
            if p >= 0.0:
                alpha = -alpha
            v0 = p - alpha
            vnorm2 = v0 * v0 + q * q + r * r
            if vnorm2 == 0.0:
                continue
            beta = 2.0 / vnorm2
            jlo = k - 1 if k > lo else lo
            for j in range(jlo, hi + 1):
                s = v0 * h[k, j] + q * h[k + 1, j] + r * h[k + 2, j]
                s *= beta
                h[k, j] -= s * v0
                h[k + 1, j] -= s * q
                h[k + 2, j] -= s * r
            iup = k + 3 if k + 3 < hi else hi
            for i in range(lo, iup + 1):
                s = v0 * h[i, k] + q * h[i, k + 1] + r * h[i, k + 2]
                s *= beta
                h[i, k] -= s * v0
                h[i, k + 1] -= s * q
                h[i, k + 2] -= s * r
            if k > lo:
                h[k + 1, k - 1] = 0.0
                h[k + 2, k - 1] = 0.0
        # last 2-row reflection at k = hi-1
        k = hi - 1
        p = h[k, k - 1]
        q = h[k + 1, k - 1]
        scale = abs(p) + abs(q)
        if scale > 0.0:
            p /= scale
            q /= scale
            alpha = np.sqrt(p * p + q * q)
            if p >= 0.0:
                alpha = -alpha
            v0 = p - alpha
            vnorm2 = v0 * v0 + q * q
            if vnorm2 > 0.0:
                beta = 2.0 / vnorm2
                for j in range(k - 1, hi + 1):
                    s = v0 * h[k, j] + q * h[k + 1, j]
                    s *= beta
                    h[k, j] -= s * v0
                    h[k + 1, j] -= s * q
                for i in range(lo, hi + 1):
                    s = v0 * h[i, k] + q * h[i, k + 1]
                    s *= beta
                    h[i, k] -= s * v0
                    h[i, k + 1] -= s * q
                h[k + 1, k - 1] = 0.0
    return 0


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _hessenberg = njit(cache=True)(_hessenberg_impl)
    _two_by_two = njit(cache=True)(_two_by_two)
    _francis = njit(cache=True)(_francis_impl)
except ImportError:  # pragma: no cover
    _hessenberg = _hessenberg_impl
    _francis = _francis_impl


def hessenberg(a):
    """Upper Hessenberg form similar to a (copy)."""
    h = np.array(a, dtype=float, order="C", copy=True)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("need a square matrix")
    return _hessenberg(h)


def eigen_spectrum(a):
    """All eigenvalues, sorted by descending real part (then imaginary).

    Complex pairs are exactly conjugate.  Dimension is capped at 256, the
    desk-scale bound everything here is sized for.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("need a square matrix")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n > 256:
        raise ValueError("dimension capped at 256")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    if n == 1:
        return a.astype(complex).reshape(1)
    h = np.array(a, dtype=float, order="C", copy=True)
    if n > 2:
        h = _hessenberg(h)
    out = np.zeros((2, n))
    status = _francis(h, 30 * n, out)
    if status != 0:
        raise EigenFailureError(f"QR iteration exceeded {30 * n} sweeps")
    vals = out[0] + 1j * out[1]
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


def count_unstable(eigenvalues, tol=0.0):
    """Number of eigenvalues with real part > tol."""
    return int(np.sum(np.real(eigenvalues) > tol))
