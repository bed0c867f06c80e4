"""Stochastic training loop: damped natural gradient (or plain gradient)
with normalized-gradient momentum and ADADELTA step sizes."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .family import (
    FactorGaussian,
    floor_d,
    init_params,
    mask_strict_upper,
    masked_positions,
    pack,
    packed_length,
    unpack,
)
from .natgrad import DampingSpec, build_fim_context, natural_gradient
from .reparam import estimate_gradient

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    mode: str = "natural"          # "natural" or "ordinary"
    p: int = 3
    seed: int = 0
    delta: float = 1.0
    abs_floor: float = 1e-8
    cg_tol: float = 1e-4
    cg_max_iter: int = 200
    a_m: float = 0.9               # momentum weight on the running mean
    adadelta_rho: float = 0.95
    adadelta_eps: float = 1e-8
    grad_samples: int = 1          # estimator draws averaged per step
    trace_every: int = 0           # log every k steps (0 = silent)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.mode not in ("natural", "ordinary"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.a_m < 1.0:
            raise ValueError("a_m must be in [0, 1)")
        if self.grad_samples < 1:
            raise ValueError("grad_samples must be >= 1")

    def damping(self) -> DampingSpec:
        return DampingSpec(delta=self.delta, abs_floor=self.abs_floor,
                           cg_tol=self.cg_tol, cg_max_iter=self.cg_max_iter)


@dataclass
class ElboTrace:
    step: np.ndarray
    elapsed_s: np.ndarray
    noisy_elbo: np.ndarray

    @property
    def final_elbo_avg100(self) -> float:
        k = min(100, self.noisy_elbo.shape[0])
        return float(np.mean(self.noisy_elbo[-k:]))

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("step,elapsed_s,noisy_elbo\n")
            for s, t, e in zip(self.step, self.elapsed_s, self.noisy_elbo):
                fh.write(f"{int(s)},{t:.6f},{e:.10g}\n")


@dataclass(frozen=True)
class AdadeltaState:
    eg2: np.ndarray
    edx2: np.ndarray
    rho: float = 0.95
    eps: float = 1e-6

    @staticmethod
    def fresh(n: int, rho: float = 0.95, eps: float = 1e-6) -> "AdadeltaState":
        return AdadeltaState(np.zeros(n), np.zeros(n), rho, eps)


def adadelta_step(state: AdadeltaState, direction: np.ndarray):
    """One ADADELTA update; returns (step_vector, new_state)."""
    if direction.shape != state.eg2.shape:
        raise ValueError("direction length disagrees with accumulator state")
    eg2 = state.rho * state.eg2 + (1.0 - state.rho) * direction**2
    step = np.sqrt((state.edx2 + state.eps) / (eg2 + state.eps)) * direction
    edx2 = state.rho * state.edx2 + (1.0 - state.rho) * step**2
    return step, replace(state, eg2=eg2, edx2=edx2)


def momentum_update(m_bar: np.ndarray, grad: np.ndarray, a_m: float) -> np.ndarray:
    """m_bar <- a_m * m_bar + (1 - a_m) * grad / ||grad||."""
    norm = np.linalg.norm(grad)
    if norm == 0.0:
        log.warning("zero-norm gradient: momentum left unchanged")
        return m_bar
    return a_m * m_bar + (1.0 - a_m) * (grad / norm)


def fit(model, init: FactorGaussian, cfg: TrainConfig,
        init_latents: Any = None):
    """Run cfg.steps optimization steps; returns (params, trace, latents).

    Each step draws the gradient estimate (warm-starting the latent state
    from the previous step), converts it to the damped natural gradient
    when mode="natural" (plain gradient otherwise), applies momentum
    (natural mode only) and an ADADELTA step, and re-applies the B mask
    and d floor to the updated parameters.
    """
    if model.dim_theta != init.m:
        raise ValueError("model and initial parameters disagree on dim(theta)")
    m, p = init.m, init.p
    spec = cfg.damping()
    dim = packed_length(m, p)
    ada = AdadeltaState.fresh(dim, cfg.adadelta_rho, cfg.adadelta_eps)
    m_bar = np.zeros(dim)
    mask_pos = masked_positions(m, p)
    params = init
    latents = init_latents
    steps = np.arange(cfg.steps)
    elapsed = np.empty(cfg.steps)
    elbo = np.empty(cfg.steps)
    t0 = time.perf_counter()
    for t in range(cfg.steps):
        # one child stream per step: draws stay aligned across factor counts
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, t]))
        try:
            est = estimate_gradient(params, model, latents, rng)
            g_mu, g_B, g_d = est.g_mu, est.g_B, est.g_d
            if cfg.grad_samples > 1:
                for _ in range(cfg.grad_samples - 1):
                    extra = estimate_gradient(params, model, est.latents, rng)
                    g_mu = g_mu + extra.g_mu
                    g_B = g_B + extra.g_B
                    g_d = g_d + extra.g_d
                    est = extra
                g_mu /= cfg.grad_samples
                g_B /= cfg.grad_samples
                g_d /= cfg.grad_samples
            latents = est.latents
            if cfg.mode == "natural":
                ctx = build_fim_context(params)
                nat = natural_gradient(ctx, spec, g_mu, g_B, g_d)
                m_bar = momentum_update(m_bar, nat, cfg.a_m)
                direction = m_bar
            else:
                direction = np.concatenate(
                    [g_mu, g_B.flatten(order="F"), g_d]
                )
            step_vec, ada = adadelta_step(ada, direction)
            lam = pack(params) + step_vec
            if mask_pos.size:
                lam[mask_pos] = 0.0
            new = unpack(lam, m, p)
            params = FactorGaussian(new.mu, new.B, floor_d(new.d))
        except Exception as exc:
            raise RuntimeError(f"optimization failed at step {t}: {exc}") from exc
        elapsed[t] = time.perf_counter() - t0
        elbo[t] = est.noisy_elbo
        if cfg.trace_every and (t % cfg.trace_every == 0 or t == cfg.steps - 1):
            log.info("step %d  noisy ELBO %.3f", t, elbo[t])
    trace = ElboTrace(steps, elapsed, elbo)
    return params, trace, latents


def default_init(model, p: int, seed: int) -> FactorGaussian:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11CE]))
    return init_params(model.dim_theta, p, rng)
