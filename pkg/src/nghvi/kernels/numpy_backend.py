"""Pure-numpy reference implementations of the grouped kernels."""

import numpy as np
from scipy.special import ndtr, ndtri

_TINY = np.finfo(np.float64).tiny


def grouped_sums(values, offsets):
    """Per-group sums of ``values`` (rows sorted by group).

    ``values`` may be (n,) or (n, q); returns (K,) or (K, q).
    """
    return np.add.reduceat(values, offsets[:-1], axis=0)


def grouped_chol_precision(H, offsets, prec0, inv_noise):
    """Lower Cholesky factors of ``prec0 + H_k' H_k * inv_noise`` per group.

    H is the stacked (n, q) design, prec0 a (q, q) SPD matrix shared by all
    groups. Returns (K, q, q).
    """
    outer = H[:, :, None] * H[:, None, :]
    hth = np.add.reduceat(outer, offsets[:-1], axis=0)
    prec = prec0[None, :, :] + inv_noise * hth
    return np.linalg.cholesky(prec)


def grouped_mvn_draw(H, resid, offsets, chols, inv_noise, z):
    """Draw alpha_k ~ N(P_k^{-1} b_k, P_k^{-1}) with b_k = H_k' resid_k * inv_noise.

    ``chols`` are the per-group lower Cholesky factors of the precisions P_k
    and ``z`` is (K, q) standard normal. Returns (K, q).
    """
    b = inv_noise * np.add.reduceat(H * resid[:, None], offsets[:-1], axis=0)
    # mean: solve L L' mu = b; draw: mu + L^{-T} z
    y = np.linalg.solve(chols, b[:, :, None])
    lt = np.swapaxes(chols, 1, 2)
    mu = np.linalg.solve(lt, y)
    return (mu + np.linalg.solve(lt, z[:, :, None]))[:, :, 0]


def truncnorm_conditional(eta, positive, u):
    """Inverse-CDF draws from N(eta, 1) truncated to (0, inf) or (-inf, 0].

    ``positive`` is boolean per element, ``u`` uniform(0,1) per element.
    Tail-stable survival/CDF forms; outputs are clamped so the sign
    invariant (positive draws > 0, others <= 0) holds exactly.
    """
    a = -eta  # standardized truncation point
    out = np.empty_like(eta)
    pos = positive
    sf = ndtr(-a[pos])
    q = np.clip((1.0 - u[pos]) * sf, _TINY, 1.0 - 1e-16)
    out[pos] = np.maximum(eta[pos] - ndtri(q), _TINY)
    neg = ~pos
    cdf = ndtr(a[neg])
    q = np.clip(u[neg] * cdf, _TINY, 1.0 - 1e-16)
    out[neg] = np.minimum(eta[neg] + ndtri(q), 0.0)
    return out
