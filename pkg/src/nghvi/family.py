"""Gaussian variational family with factor covariance BB' + D^2.

The family is parameterized by (mu, B, d) with B an (m, p) loading matrix
whose strictly upper triangular entries are pinned to zero, and d the
diagonal of D (sign-unconstrained; only D^2 enters the covariance). The
packed parameter vector is (mu, vec(B), d) of length 2m + mp, column-major
vec, with the pinned entries stored as zeros so dimension counts include
them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

D_FLOOR = 1e-8
_LOG_2PI = np.log(2.0 * np.pi)


def mask_strict_upper(B: np.ndarray) -> np.ndarray:
    """Copy of B with entries (i, j), j > i, set to zero."""
    B = np.array(B, dtype=np.float64)
    p = B.shape[1]
    if p > 1:
        iu = np.triu_indices(p, k=1)
        B[iu] = 0.0
    return B


def masked_positions(m: int, p: int) -> np.ndarray:
    """Packed-vector indices of the pinned B entries."""
    if p <= 1:
        return np.empty(0, dtype=np.int64)
    i, j = np.triu_indices(p, k=1)
    return (m + j * m + i).astype(np.int64)


def floor_d(d: np.ndarray, floor: float = D_FLOOR) -> np.ndarray:
    """Clamp |d_i| >= floor, preserving sign (zeros go positive)."""
    d = np.asarray(d, dtype=np.float64)
    sign = np.where(d < 0.0, -1.0, 1.0)
    return sign * np.maximum(np.abs(d), floor)


@dataclass(frozen=True)
class FactorGaussian:
    """Variational parameters of N(mu, BB' + D^2). Treated as immutable."""

    mu: np.ndarray  # (m,)
    B: np.ndarray   # (m, p), strict upper triangle zero
    d: np.ndarray   # (m,)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        B = np.asarray(self.B, dtype=np.float64)
        d = np.asarray(self.d, dtype=np.float64)
        if mu.ndim != 1 or d.ndim != 1 or B.ndim != 2:
            raise ValueError("mu, d must be vectors and B a matrix")
        m = mu.shape[0]
        if B.shape[0] != m or d.shape[0] != m:
            raise ValueError("mu, B, d row dimensions disagree")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(B))
                and np.all(np.isfinite(d))):
            raise ValueError("non-finite variational parameter")
        p = B.shape[1]
        if p > 1:
            iu = np.triu_indices(p, k=1)
            if np.any(B[iu] != 0.0):
                raise ValueError("strictly upper triangular entries of B must be zero")
        if np.any(np.abs(d) < D_FLOOR):
            raise ValueError(f"|d| entries must be >= {D_FLOOR}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "d", d)

    @property
    def m(self) -> int:
        return self.mu.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def covariance(self) -> np.ndarray:
        return self.B @ self.B.T + np.diag(self.d**2)


def packed_length(m: int, p: int) -> int:
    return 2 * m + m * p


def pack(params: FactorGaussian) -> np.ndarray:
    return np.concatenate([params.mu, params.B.flatten(order="F"), params.d])


def unpack(vec: np.ndarray, m: int, p: int) -> FactorGaussian:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (packed_length(m, p),):
        raise ValueError(
            f"packed vector has length {vec.shape}, expected {packed_length(m, p)}"
        )
    B = vec[m:m + m * p].reshape(m, p, order="F")
    pos = masked_positions(m, p)
    if pos.size and np.any(vec[pos] != 0.0):
        raise ValueError("packed vector has nonzero entries at pinned B positions")
    return FactorGaussian(vec[:m].copy(), B.copy(), vec[m + m * p:].copy())


def init_params(m: int, p: int, rng: np.random.Generator,
                d0: float = 0.1, b_scale: float = 0.01) -> FactorGaussian:
    """Starting point: mu = 0, d = d0, small random B (pinned entries zero).

    A nonzero B keeps the loading block of the Fisher information away
    from its singular point at B = 0.
    """
    B = mask_strict_upper(b_scale * rng.standard_normal((m, p)))
    return FactorGaussian(np.zeros(m), B, np.full(m, d0))


def sample_theta(params: FactorGaussian, eps1: np.ndarray,
                 eps2: np.ndarray) -> np.ndarray:
    """theta = mu + B eps1 + d * eps2 (the generative representation)."""
    if eps1.shape != (params.p,) or eps2.shape != (params.m,):
        raise ValueError("noise dimensions disagree with parameters")
    return params.mu + params.B @ eps1 + params.d * eps2


def sigma_inv_apply(params: FactorGaussian, v: np.ndarray) -> np.ndarray:
    """(BB' + D^2)^{-1} v by the Woodbury identity; no m x m matrix formed."""
    d2 = params.d**2
    t = v / d2
    if params.p == 0:
        return t
    B = params.B
    w = np.linalg.solve(np.eye(params.p) + (B.T / d2) @ B, B.T @ t)
    return t - (B @ w) / d2


def log_det_sigma(params: FactorGaussian) -> float:
    """log|BB' + D^2| via the matrix determinant lemma."""
    d2 = params.d**2
    out = float(np.sum(np.log(d2)))
    if params.p:
        B = params.B
        sign, ld = np.linalg.slogdet(np.eye(params.p) + (B.T / d2) @ B)
        out += float(ld)
    return out


def log_q0(params: FactorGaussian, theta: np.ndarray) -> float:
    """Exact log-density of the factor Gaussian at theta."""
    r = theta - params.mu
    quad = float(r @ sigma_inv_apply(params, r))
    return -0.5 * (params.m * _LOG_2PI + log_det_sigma(params) + quad)


def score_theta(params: FactorGaussian, theta: np.ndarray) -> np.ndarray:
    """Gradient of log q0 in theta: -Sigma^{-1}(theta - mu)."""
    return -sigma_inv_apply(params, theta - params.mu)


def to_json_dict(params: FactorGaussian) -> dict:
    return {
        "m": params.m,
        "p": params.p,
        "mu": params.mu.tolist(),
        "B": params.B.tolist(),  # row-major nested lists
        "d": params.d.tolist(),
    }


def from_json_dict(obj: dict) -> FactorGaussian:
    m, p = int(obj["m"]), int(obj["p"])
    B = np.asarray(obj["B"], dtype=np.float64).reshape(m, p)
    return FactorGaussian(np.asarray(obj["mu"], dtype=np.float64), B,
                          np.asarray(obj["d"], dtype=np.float64))
