"""Numba-compiled grouped kernels (hot path for the per-step samplers)."""

import math

import numpy as np
from numba import njit

_TINY = np.finfo(np.float64).tiny
_SQRT2 = math.sqrt(2.0)


@njit(cache=True)
def grouped_sums(values, offsets):
    k = offsets.shape[0] - 1
    if values.ndim == 1:
        out = np.zeros(k)
        for g in range(k):
            for i in range(offsets[g], offsets[g + 1]):
                out[g] += values[i]
        return out
    q = values.shape[1]
    out2 = np.zeros((k, q))
    for g in range(k):
        for i in range(offsets[g], offsets[g + 1]):
            for j in range(q):
                out2[g, j] += values[i, j]
    return out2


@njit(cache=True)
def _chol_inplace(a):
    # textbook lower Cholesky of a small SPD matrix, in place
    q = a.shape[0]
    for j in range(q):
        s = a[j, j]
        for t in range(j):
            s -= a[j, t] * a[j, t]
        a[j, j] = math.sqrt(s)
        for i in range(j + 1, q):
            s = a[i, j]
            for t in range(j):
                s -= a[i, t] * a[j, t]
            a[i, j] = s / a[j, j]
    for j in range(q):
        for i in range(j + 1, q):
            a[j, i] = 0.0


@njit(cache=True)
def grouped_chol_precision(H, offsets, prec0, inv_noise):
    k = offsets.shape[0] - 1
    q = H.shape[1]
    out = np.empty((k, q, q))
    for g in range(k):
        for i in range(q):
            for j in range(q):
                out[g, i, j] = prec0[i, j]
        for r in range(offsets[g], offsets[g + 1]):
            for i in range(q):
                hi = H[r, i] * inv_noise
                for j in range(q):
                    out[g, i, j] += hi * H[r, j]
        _chol_inplace(out[g])
    return out


@njit(cache=True)
def grouped_mvn_draw(H, resid, offsets, chols, inv_noise, z):
    k = offsets.shape[0] - 1
    q = H.shape[1]
    alpha = np.empty((k, q))
    b = np.empty(q)
    y = np.empty(q)
    for g in range(k):
        for j in range(q):
            b[j] = 0.0
        for r in range(offsets[g], offsets[g + 1]):
            rv = resid[r] * inv_noise
            for j in range(q):
                b[j] += H[r, j] * rv
        L = chols[g]
        # forward solve L y = b
        for i in range(q):
            s = b[i]
            for t in range(i):
                s -= L[i, t] * y[t]
            y[i] = s / L[i, i]
        # back solve L' mu = y and L' x = z, combined: L' alpha = y + z
        for i in range(q - 1, -1, -1):
            s = y[i] + z[g, i]
            for t in range(i + 1, q):
                s -= L[t, i] * alpha[g, t]
            alpha[g, i] = s / L[i, i]
    return alpha


@njit(cache=True)
def _ndtr(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True)
def _ndtri(p):
    # Wichura's PPND16 rational approximations (double precision)
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    if q < 0.0:
        return -val
    return val


@njit(cache=True)
def truncnorm_conditional(eta, positive, u):
    n = eta.shape[0]
    out = np.empty(n)
    for i in range(n):
        e = eta[i]
        if positive[i]:
            sf = _ndtr(e)
            q = (1.0 - u[i]) * sf
            if q < _TINY:
                q = _TINY
            elif q > 1.0 - 1e-16:
                q = 1.0 - 1e-16
            v = e - _ndtri(q)
            out[i] = v if v > _TINY else _TINY
        else:
            cdf = _ndtr(-e)
            q = u[i] * cdf
            if q < _TINY:
                q = _TINY
            elif q > 1.0 - 1e-16:
                q = 1.0 - 1e-16
            v = e + _ndtri(q)
            out[i] = v if v < 0.0 else 0.0
    return out
