"""One-draw reparameterization gradient of the ELBO, and the noisy ELBO.

With theta = mu + B eps1 + d*eps2 and g = grad_theta log g(theta, z), the
closed-form gradient blocks are

    g_mu = g + Si (B eps1 + d*eps2)
    g_B  = (g + Si(...)) eps1'
    g_d  = diag((g + Si(...)) eps2')

evaluated at a single (eps, z) draw; Si(B eps1 + d*eps2) equals minus the
theta-score of q0 at the drawn theta, so one Woodbury solve serves all
three blocks. The noisy ELBO is the single-draw tracker
log p(y|z,theta) + log p(theta) - log q0(theta).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .family import FactorGaussian, log_q0, mask_strict_upper, sample_theta, sigma_inv_apply
from .models.base import ModelHandle, check_finite_grad


@dataclass(frozen=True)
class GradientEstimate:
    g_mu: np.ndarray        # (m,)
    g_B: np.ndarray         # (m, p), pinned entries zero
    g_d: np.ndarray         # (m,)
    noisy_elbo: float
    theta: np.ndarray       # the single theta draw
    latents: Any            # model-owned latent state for warm starts


def estimate_gradient(params: FactorGaussian, model: ModelHandle,
                      prev_latents: Any, rng: np.random.Generator) -> GradientEstimate:
    """Unbiased single-draw estimate of the ELBO gradient at ``params``.

    The latent draw uses a spawned child stream, so the noise consumed by
    the model is aligned across runs that differ only in the factor count.
    """
    m, p = params.m, params.p
    if model.dim_theta != m:
        raise ValueError(f"model has dim_theta={model.dim_theta}, family has m={m}")
    latent_rng = rng.spawn(1)[0]
    eps2 = rng.standard_normal(m)
    eps1 = rng.standard_normal(p)
    theta = sample_theta(params, eps1, eps2)
    latents = model.sample_latents(theta, prev_latents, latent_rng)
    _, grad_theta = model.log_g_and_grad(theta, latents)
    check_finite_grad(grad_theta)
    v = grad_theta + sigma_inv_apply(params, theta - params.mu)
    g_b = mask_strict_upper(np.outer(v, eps1)) if p else np.empty((m, 0))
    return GradientEstimate(
        g_mu=v,
        g_B=g_b,
        g_d=v * eps2,
        noisy_elbo=noisy_elbo(params, model, theta, latents),
        theta=theta,
        latents=latents,
    )


def noisy_elbo(params: FactorGaussian, model: ModelHandle, theta: np.ndarray,
               latents: Any) -> float:
    """Single-draw ELBO tracker: log p(y|z,theta) + log p(theta) - log q0(theta)."""
    loglik, logprior = model.loglik_terms(theta, latents)
    value = loglik + logprior - log_q0(params, theta)
    if not np.isfinite(value):
        raise FloatingPointError("non-finite noisy ELBO")
    return float(value)
