"""Damped natural gradient for the factor Gaussian family.

The Fisher information of N(mu, BB' + D^2) in (mu, vec(B), d) is block
sparse: the mu block is Sigma^{-1} and decouples from the covariance
blocks. Writing Si = Sigma^{-1}, A = B'SiB and N = SiB, the covariance
blocks are

    F_bb vec(V) = vec(Si V A) + vec(N V' N)         (loading block)
    F_bd v      = vec((Si * v') (d[:,None] * N))    (cross block, as matrix)
    F_dd v      = d * ((Si*Si) @ (d * v))           (diagonal block)

all realized matrix-free through reshaped products. Tikhonov damping adds
``delta * diag(F_jj)`` plus a small absolute floor to the diagonal blocks.
The mu segment of the damped natural gradient has a closed-form inverse
built from the Woodbury identity; the (vec(B), d) segment is solved with
diagonally preconditioned conjugate gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .family import FactorGaussian, mask_strict_upper, masked_positions

M_DENSE_MAX = 4096


class DenseBudgetError(RuntimeError):
    """Raised when m exceeds the dense Sigma^{-1} budget."""


class CgError(RuntimeError):
    """Conjugate gradients failed to reach tolerance (needs more damping)."""

    def __init__(self, iters: int, residual: float, tol: float):
        self.iters = iters
        self.residual = residual
        super().__init__(
            f"CG did not converge in {iters} iterations "
            f"(relative residual {residual:.3e} > tol {tol:.3e})"
        )


@dataclass(frozen=True)
class DampingSpec:
    delta: float = 1.0
    abs_floor: float = 1e-8
    cg_tol: float = 1e-4
    cg_max_iter: int = 200

    def __post_init__(self):
        if self.delta < 0 or self.abs_floor < 0:
            raise ValueError("damping terms must be nonnegative")
        if self.cg_tol <= 0 or self.cg_max_iter < 1:
            raise ValueError("invalid CG settings")


@dataclass(frozen=True)
class FimContext:
    """Per-step precomputations shared by all FIM applications."""

    params: FactorGaussian
    si: np.ndarray          # (m, m) Sigma^{-1}, symmetric PD
    si2: np.ndarray = field(repr=False)   # Si * Si elementwise
    si_b: np.ndarray = field(repr=False)  # Si @ B             (m, p)
    a_bb: np.ndarray = field(repr=False)  # B' Si B            (p, p)
    d_si_b: np.ndarray = field(repr=False)  # d[:,None] * SiB  (m, p)
    diag_si: np.ndarray = field(repr=False)
    diag_bb: np.ndarray = field(repr=False)  # diag of loading block, (m, p)
    diag_dd: np.ndarray = field(repr=False)  # diag of d block, (m,)


def build_fim_context(params: FactorGaussian) -> FimContext:
    m, p = params.m, params.p
    if m > M_DENSE_MAX:
        raise DenseBudgetError(
            f"m={m} exceeds dense FIM budget M_DENSE_MAX={M_DENSE_MAX}"
        )
    d2 = params.d**2
    B = params.B
    si = np.diag(1.0 / d2)
    if p:
        g = B / d2[:, None]
        inner = np.eye(p) + B.T @ g
        si = si - g @ np.linalg.solve(inner, g.T)
    si = 0.5 * (si + si.T)
    si_b = si @ B
    a_bb = B.T @ si_b
    diag_si = np.diag(si).copy()
    diag_bb = diag_si[:, None] * np.diag(a_bb)[None, :] + si_b**2
    diag_dd = 2.0 * d2 * diag_si**2
    return FimContext(
        params=params,
        si=si,
        si2=si * si,
        si_b=si_b,
        a_bb=a_bb,
        d_si_b=params.d[:, None] * si_b,
        diag_si=diag_si,
        diag_bb=diag_bb,
        diag_dd=diag_dd,
    )


def fim_bd_matvec(ctx: FimContext, spec: DampingSpec, v: np.ndarray) -> np.ndarray:
    """Apply the damped (vec(B), d) block operator to v (length mp + m)."""
    params = ctx.params
    m, p = params.m, params.p
    if v.shape != (m * p + m,):
        raise ValueError(f"operand has length {v.shape}, expected {m * p + m}")
    V = v[:m * p].reshape(m, p, order="F")
    vd = v[m * p:]
    dv = params.d * vd
    out_d = 2.0 * params.d * (ctx.si2 @ dv)
    if p:
        siv = ctx.si @ V
        out_b = siv @ ctx.a_bb + ctx.si_b @ (V.T @ ctx.si_b)
        out_b += 2.0 * (ctx.si * vd[None, :]) @ ctx.d_si_b
        out_d += 2.0 * np.sum(siv * ctx.d_si_b, axis=1)
        out_b += (spec.delta * ctx.diag_bb + spec.abs_floor) * V
        out_b = mask_strict_upper(out_b)
    else:
        out_b = V
    out_d += (spec.delta * ctx.diag_dd + spec.abs_floor) * vd
    return np.concatenate([out_b.flatten(order="F"), out_d])


def f11_damped_inverse_apply(ctx: FimContext, spec: DampingSpec,
                             g_mu: np.ndarray) -> np.ndarray:
    """Apply (Si + delta*diag(Si))^{-1} analytically.

    With Si = D^{-2} - D^{-2} B Sp^{-1} B' D^{-2} (Woodbury, Sp = I + B'D^{-2}B)
    the damped block is H - GG' for a diagonal H and an m x p factor G, so a
    second Woodbury application inverts it using only diagonals and m x p
    arrays. Validated against dense solves in the acceptance suite.
    """
    params = ctx.params
    d2 = params.d**2
    delta = spec.delta
    if params.p == 0:
        return d2 * g_mu / (1.0 + delta)
    B = params.B
    sp = np.eye(params.p) + (B.T / d2) @ B
    r = np.linalg.cholesky(sp)
    mfac = solve_triangular(r, B.T, lower=True).T   # B R^{-T}; M M' = B Sp^{-1} B'
    u = np.sum(mfac**2, axis=1)
    h = (1.0 + delta) / d2 - delta * u / d2**2
    gfac = mfac / d2[:, None]
    t = g_mu / h
    inner = np.eye(params.p) - gfac.T @ (gfac / h[:, None])
    w = np.linalg.solve(inner, gfac.T @ t)
    return t + (gfac @ w) / h


def _pcg(matvec, b, precond_diag, tol, max_iter):
    """Preconditioned CG; relative-residual stopping. Returns (x, iters, rel)."""
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b)
    r = b.copy()
    z = r / precond_diag
    pvec = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        ap = matvec(pvec)
        alpha = rz / (pvec @ ap)
        x += alpha * pvec
        r -= alpha * ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return x, it, rel
        z = r / precond_diag
        rz_new = r @ z
        pvec = z + (rz_new / rz) * pvec
        rz = rz_new
    raise CgError(max_iter, rel, tol)


def natural_gradient(ctx: FimContext, spec: DampingSpec, g_mu: np.ndarray,
                     g_B: np.ndarray, g_d: np.ndarray) -> np.ndarray:
    """Damped natural gradient, packed as (mu, vec(B), d).

    The mu segment uses the analytic inverse; the (vec(B), d) segment is a
    CG solve of the damped block system. Pinned B coordinates stay zero.
    """
    params = ctx.params
    m, p = params.m, params.p
    nat_mu = f11_damped_inverse_apply(ctx, spec, g_mu)
    rhs = np.concatenate([mask_strict_upper(g_B).flatten(order="F"), g_d])
    diag = np.concatenate([
        ((1.0 + spec.delta) * ctx.diag_bb + spec.abs_floor).flatten(order="F"),
        (1.0 + spec.delta) * ctx.diag_dd + spec.abs_floor,
    ])
    diag = np.maximum(diag, np.finfo(np.float64).tiny)
    sol, _, _ = _pcg(lambda v: fim_bd_matvec(ctx, spec, v), rhs, diag,
                     spec.cg_tol, spec.cg_max_iter)
    out = np.concatenate([nat_mu, sol])
    pos = masked_positions(m, p)
    if pos.size:
        out[pos] = 0.0
    return out


def dense_fim(params: FactorGaussian) -> np.ndarray:
    """Dense (2m+mp) x (2m+mp) Fisher information (small-m test oracle).

    Assembled from the covariance-parameter identity
    F[a,b] = 0.5 tr(Si dSigma/da Si dSigma/db) plus the mu block Si,
    independently of the matrix-free operator code.
    """
    m, p = params.m, params.p
    ctx = build_fim_context(params)
    si = ctx.si
    dim = 2 * m + m * p
    out = np.zeros((dim, dim))
    out[:m, :m] = si
    sib = ctx.si_b
    a = ctx.a_bb
    # loading block: A_{jl} Si_{ik} + (SiB)_{il} (SiB)_{kj}
    for j in range(p):
        for l in range(p):
            blk = a[j, l] * si + np.outer(sib[:, l], sib[:, j])
            out[m + j * m:m + (j + 1) * m, m + l * m:m + (l + 1) * m] = blk
    # cross block vec(B) x d: 2 d_k (SiB)_{kj} Si_{ik}
    for j in range(p):
        for k in range(m):
            out[m + j * m:m + (j + 1) * m, m + m * p + k] = (
                2.0 * params.d[k] * sib[k, j] * si[:, k]
            )
            out[m + m * p + k, m + j * m:m + (j + 1) * m] = (
                out[m + j * m:m + (j + 1) * m, m + m * p + k]
            )
    dd = np.outer(params.d, params.d) * si**2 * 2.0
    out[m + m * p:, m + m * p:] = dd
    return out


def dense_damped_fim(params: FactorGaussian, spec: DampingSpec) -> np.ndarray:
    """Dense damped FIM: block-diagonal damping applied to dense_fim."""
    m, p = params.m, params.p
    f = dense_fim(params)
    blocks = [np.arange(m), np.arange(m, m + m * p), np.arange(m + m * p, 2 * m + m * p)]
    for idx in blocks:
        dd = np.diag(f)[idx]
        f[idx, idx] += spec.delta * dd
    f[np.arange(m, 2 * m + m * p), np.arange(m, 2 * m + m * p)] += spec.abs_floor
    return f


def mc_fim(params: FactorGaussian, n_samples: int, seed: int,
           chunk: int = 50_000) -> np.ndarray:
    """Monte-Carlo FIM: average outer product of the analytic score of q0.

    The score in lambda is computed in closed form from the Gaussian
    density at reparameterized draws. Test oracle; small m, p only.
    """
    m, p = params.m, params.p
    ctx = build_fim_context(params)
    si = ctx.si
    si_b = ctx.si_b
    diag_si = ctx.diag_si
    dim = 2 * m + m * p
    acc = np.zeros((dim, dim))
    rng = np.random.default_rng(seed)
    left = n_samples
    while left > 0:
        nb = min(chunk, left)
        left -= nb
        eps = rng.standard_normal((nb, m + p))
        r = eps[:, :p] @ params.B.T + eps[:, p:] * params.d
        t = r @ si
        s_mu = t
        if p:
            u = t @ params.B
            s_b = t[:, :, None] * u[:, None, :] - si_b[None]
            s_b = s_b.transpose(0, 2, 1).reshape(nb, m * p)
        else:
            s_b = np.empty((nb, 0))
        s_d = params.d * (t**2 - diag_si)
        s = np.concatenate([s_mu, s_b, s_d], axis=1)
        acc += s.T @ s
    return acc / n_samples


def mc_fim_score_moments(params: FactorGaussian, n_samples: int, seed: int,
                         chunk: int = 50_000):
    """(mc_fim, per-entry MC standard errors) for tolerance-aware tests."""
    m, p = params.m, params.p
    ctx = build_fim_context(params)
    si, si_b, diag_si = ctx.si, ctx.si_b, ctx.diag_si
    dim = 2 * m + m * p
    acc = np.zeros((dim, dim))
    acc2 = np.zeros((dim, dim))
    rng = np.random.default_rng(seed)
    left = n_samples
    while left > 0:
        nb = min(chunk, left)
        left -= nb
        eps = rng.standard_normal((nb, m + p))
        r = eps[:, :p] @ params.B.T + eps[:, p:] * params.d
        t = r @ si
        if p:
            u = t @ params.B
            s_b = (t[:, :, None] * u[:, None, :] - si_b[None])
            s_b = s_b.transpose(0, 2, 1).reshape(nb, m * p)
        else:
            s_b = np.empty((nb, 0))
        s = np.concatenate([t, s_b, params.d * (t**2 - diag_si)], axis=1)
        acc += s.T @ s
        acc2 += (s**2).T @ (s**2)
    mean = acc / n_samples
    var = acc2 / n_samples - mean**2
    se = np.sqrt(np.maximum(var, 0.0) / n_samples)
    return mean, se
