"""Model contract consumed by the gradient estimator and optimizer."""

from __future__ import annotations

from typing import Any, Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class ModelHandle(Protocol):
    """A stochastic model with global parameters theta and latent state z.

    ``log_g_and_grad`` evaluates log g(theta, z) = log p(y|z,theta)
    + log p(z|theta) + log p(theta) and its exact theta-gradient.
    ``sample_latents`` draws z from its conditional posterior given theta
    and the model's training data, optionally warm-started from a previous
    latent state. ``loglik_terms`` returns the pieces of the noisy ELBO:
    (data-fit log-likelihood, log prior of theta).
    """

    dim_theta: int

    def log_g_and_grad(self, theta: np.ndarray, latents: Any) -> tuple[float, np.ndarray]:
        ...

    def sample_latents(self, theta: np.ndarray, prev_latents: Any,
                       rng: np.random.Generator) -> Any:
        ...

    def loglik_terms(self, theta: np.ndarray, latents: Any) -> tuple[float, float]:
        ...


def check_finite_grad(grad: np.ndarray) -> None:
    """Raise with the offending index when a gradient entry is non-finite."""
    bad = np.nonzero(~np.isfinite(grad))[0]
    if bad.size:
        raise FloatingPointError(
            f"non-finite model gradient at component {int(bad[0])}"
        )


def log_ig_transformed(x: float, shape: float, scale: float) -> float:
    """Log prior of x = log(v) when v ~ InverseGamma(shape, scale), with Jacobian."""
    from scipy.special import gammaln

    return float(shape * np.log(scale) - gammaln(shape) - shape * x
                 - scale * np.exp(-x))


def grad_log_ig_transformed(x: float, shape: float, scale: float) -> float:
    """d/dx of ``log_ig_transformed``: -shape + scale * exp(-x)."""
    return float(-shape + scale * np.exp(-x))
