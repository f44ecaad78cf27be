"""Compiled inner loops: log-domain series evaluation and Aberth iteration.

Coefficients are always passed as ``(L, phi)`` with ``c_k = exp(L_k) e^{i phi_k}``
so that dynamic ranges far beyond double precision never materialize.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, types
from numba.typed import Dict

_EPS = 2.220446049250313e-16


@njit(cache=True, nogil=True)
def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@njit(cache=True, nogil=True)
def eval_log_terms(L, phi, logr, theta):
    """``S = sum exp(L_k + k logr) e^{i(phi_k + k theta)}``, compensated.

    Returns ``(log|S|, arg S, log sum |terms|)``.
    """
    K = L.shape[0]
    M = -np.inf
    for k in range(K):
        a = L[k] + k * logr
        if a > M:
            M = a
    if M == -np.inf:
        return -np.inf, 0.0, -np.inf
    sr = 0.0
    cr = 0.0
    si = 0.0
    ci = 0.0
    sa = 0.0
    for k in range(K):
        a = L[k] + k * logr - M
        if a < -745.0:
            continue
        m = math.exp(a)
        ang = phi[k] + k * theta
        sr, e = _two_sum(sr, m * math.cos(ang))
        cr += e
        si, e = _two_sum(si, m * math.sin(ang))
        ci += e
        sa += m
    re = sr + cr
    im = si + ci
    mod = math.hypot(re, im)
    if mod == 0.0:
        return -np.inf, 0.0, M + math.log(sa)
    return M + math.log(mod), math.atan2(im, re), M + math.log(sa)


@njit(cache=True, nogil=True)
def eval_log_many(L, phi, logr, theta):
    n = logr.shape[0]
    lm = np.empty(n)
    ph = np.empty(n)
    maj = np.empty(n)
    for i in range(n):
        lm[i], ph[i], maj[i] = eval_log_terms(L, phi, logr[i], theta[i])
    return lm, ph, maj


@njit(cache=True, nogil=True)
def scaled_coefficients(L, phi, logrho):
    """``c_k rho^k / max_j |c_j rho^j|`` as complex numbers (underflow to 0)."""
    K = L.shape[0]
    M = -np.inf
    for k in range(K):
        a = L[k] + k * logrho
        if a > M:
            M = a
    out = np.zeros(K, dtype=np.complex128)
    for k in range(K):
        a = L[k] + k * logrho - M
        if a > -745.0:
            m = math.exp(a)
            out[k] = complex(m * math.cos(phi[k]), m * math.sin(phi[k]))
    return out


@njit(cache=True, nogil=True, fastmath=True)
def horner(c, w):
    """Value and derivative of ``sum c_k w^k``."""
    K = c.shape[0]
    p = c[K - 1]
    dp = 0.0 + 0.0j
    for k in range(K - 2, -1, -1):
        dp = dp * w + p
        p = p * w + c[k]
    return p, dp


@njit(cache=True, nogil=True, fastmath=True)
def horner_err(c, w):
    """Value, derivative and running rounding-error sum of Horner's rule.

    The computed value is within about ``2 eps * mu`` of the exact value of
    the floating-point polynomial (Higham's running error bound).
    """
    K = c.shape[0]
    p = c[K - 1]
    dp = 0.0 + 0.0j
    # |re| + |im| of p exceeds |p| by at most sqrt(2) and avoids a hypot per step
    aw = abs(w)
    mu = 0.5 * (abs(p.real) + abs(p.imag))
    for k in range(K - 2, -1, -1):
        dp = dp * w + p
        p = p * w + c[k]
        mu = mu * aw + abs(p.real) + abs(p.imag)
    return p, dp, mu


@njit(cache=True, nogil=True, fastmath=True)
def horner_abs(a, x):
    K = a.shape[0]
    s = a[K - 1]
    for k in range(K - 2, -1, -1):
        s = s * x + a[k]
    return s


@njit(cache=True, nogil=True)
def newton_pair(La, phi, logr, theta, m):
    """``S_{m-1}/S_m`` where ``S_j = sum k(k-1)..(k-j+1) c_k z^k``.

    ``La`` already carries the order ``m-1`` weights; the order ``m`` terms
    are the same terms times ``k - m + 1``.  Returns ``(log|ratio|, arg ratio)``.
    """
    K = La.shape[0]
    M = -np.inf
    for k in range(K):
        a = La[k] + k * logr
        if a > M:
            M = a
    ar = 0.0
    ac = 0.0
    ai = 0.0
    aci = 0.0
    br = 0.0
    bc = 0.0
    bi = 0.0
    bci = 0.0
    for k in range(K):
        a = La[k] + k * logr - M
        if a < -745.0:
            continue
        mag = math.exp(a)
        ang = phi[k] + k * theta
        tr = mag * math.cos(ang)
        ti = mag * math.sin(ang)
        f = k - m + 1.0
        ar, e = _two_sum(ar, tr)
        ac += e
        ai, e = _two_sum(ai, ti)
        aci += e
        br, e = _two_sum(br, f * tr)
        bc += e
        bi, e = _two_sum(bi, f * ti)
        bci += e
    na = complex(ar + ac, ai + aci)
    nb = complex(br + bc, bi + bci)
    if nb == 0.0:
        return np.inf, 0.0
    if na == 0.0:
        return -np.inf, 0.0
    q = na / nb
    return math.log(abs(q)), math.atan2(q.imag, q.real)


@njit(cache=True, nogil=True)
def newton_pair_many(La, phi, logr, theta, m):
    n = logr.shape[0]
    lg = np.empty(n)
    ang = np.empty(n)
    for i in range(n):
        lg[i], ang[i] = newton_pair(La, phi, logr[i], theta[i], m)
    return lg, ang


@njit(cache=True, nogil=True)
def horner_many(c, w):
    out = np.empty(w.shape[0], dtype=np.complex128)
    for i in range(w.shape[0]):
        p, _ = horner(c, w[i])
        out[i] = p
    return out


@njit(cache=True, nogil=True)
def _bin_coeffs(cache, L, phi, b, delta):
    if b in cache:
        return cache[b]
    c = scaled_coefficients(L, phi, b * delta)
    cache[b] = c
    return c


@njit(cache=True, nogil=True, fastmath=True)
def _pair_sum(xr, xi, lo, hi, zr, zim):
    sr = 0.0
    si = 0.0
    for j in range(lo, hi):
        dr = zr - xr[j]
        di = zim - xi[j]
        q = 1.0 / (dr * dr + di * di)
        sr += dr * q
        si -= di * q
    return sr, si


@njit(cache=True, nogil=True)
def aberth(L, phi, z, max_iters, step_tol):
    """Gauss-Seidel Aberth-Ehrlich iteration on all roots in place.

    Values and derivatives come from Horner on coefficients rescaled to the
    radius bin of each iterate, so no term overflows or loses its relevance.
    Returns ``(iterations, converged mask)``.
    """
    K = L.shape[0] - 1
    delta = min(0.5, 60.0 / K)
    cache = Dict.empty(key_type=types.int64, value_type=types.complex128[:])
    conv = np.zeros(K, dtype=np.bool_)
    floor_k = 4.0 * _EPS
    xr = z.real.copy()
    xi = z.imag.copy()
    it = 0
    while it < max_iters:
        it += 1
        active = 0
        for i in range(K):
            if conv[i]:
                continue
            zi = z[i]
            az = abs(zi)
            if az == 0.0 or not np.isfinite(az):
                zi = complex(math.cos(1.0 + i), math.sin(1.0 + i))
                az = 1.0
                xr[i] = zi.real
                xi[i] = zi.imag
            b = int(round(math.log(az) / delta))
            c = _bin_coeffs(cache, L, phi, b, delta)
            rho = math.exp(b * delta)
            w = zi / rho
            p, dp, mu = horner_err(c, w)
            if abs(p) <= floor_k * mu:
                conv[i] = True
                z[i] = zi
                continue
            active += 1
            if dp == 0.0:
                zi = zi * (1.0 + 1e-3j)
                z[i] = zi
                xr[i] = zi.real
                xi[i] = zi.imag
                continue
            N = p / dp * rho
            ar, ai = _pair_sum(xr, xi, 0, i, zi.real, zi.imag)
            br, bi = _pair_sum(xr, xi, i + 1, K, zi.real, zi.imag)
            S = complex(ar + br, ai + bi)
            den = 1.0 - N * S
            step = N / den if (den != 0.0 and np.isfinite(abs(den))) else N
            zn = zi - step
            z[i] = zn
            xr[i] = zn.real
            xi[i] = zn.imag
            if abs(step) <= step_tol * abs(zn):
                conv[i] = True
        if active == 0:
            break
    return it, conv
