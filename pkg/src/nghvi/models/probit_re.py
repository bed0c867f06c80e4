"""Probit regression with a scalar group random effect.

Binary outcomes are augmented with latent y* whose sign determines y,
so theta = (beta, log sigma_a^2) and the latent state is (alpha, ystar).
The conditional posterior is sampled with a few Gibbs sweeps alternating
exact Gaussian alpha draws and univariate truncated-normal y* draws,
warm-started from the previous optimizer step.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..data import GroupedDataset
from .base import grad_log_ig_transformed, log_ig_transformed

_LOG_2PI = np.log(2.0 * np.pi)


class ProbitREModel:
    def __init__(self, data: GroupedDataset, sweeps: int = 5,
                 beta_prior_var: float = 100.0,
                 ig_shape: float = 1.01, ig_scale: float = 1.01):
        if not np.all(np.isin(data.y, (0.0, 1.0))):
            raise ValueError("probit model requires y in {0, 1}")
        self.data = data
        self.Xd = np.column_stack([np.ones(data.n), data.X])
        self.n_beta = self.Xd.shape[1]
        self.dim_theta = self.n_beta + 1
        self.sweeps = sweeps
        self.beta_prior_var = beta_prior_var
        self.ig_shape = ig_shape
        self.ig_scale = ig_scale
        self._gidx = data.group_index
        self._positive = data.y > 0.5

    def split_theta(self, theta):
        return theta[:self.n_beta], theta[self.n_beta]

    def sample_latents(self, theta, prev_latents, rng):
        beta, th_a = self.split_theta(theta)
        sa2 = np.exp(th_a)
        data = self.data
        xb = self.Xd @ beta
        if prev_latents is None:
            ystar = np.where(self._positive, 0.8, -0.8)
        else:
            _, ystar = prev_latents
            ystar = ystar.copy()
        counts = data.group_sizes
        var = 1.0 / (1.0 / sa2 + counts)  # noise variance fixed at 1
        alpha = np.zeros(data.n_groups)
        for _ in range(self.sweeps):
            sums = kernels.grouped_sums(ystar - xb, data.offsets)
            alpha = var * sums + np.sqrt(var) * rng.standard_normal(data.n_groups)
            eta = xb + alpha[self._gidx]
            ystar = kernels.truncnorm_conditional(
                eta, self._positive, rng.random(data.n)
            )
        return alpha, ystar

    def log_g_and_grad(self, theta, latents):
        beta, th_a = self.split_theta(theta)
        sa2 = np.exp(th_a)
        alpha, ystar = latents
        data = self.data
        n, k = data.n, data.n_groups
        resid = ystar - self.Xd @ beta - alpha[self._gidx]
        ss_r = float(resid @ resid)
        ss_a = float(alpha @ alpha)
        logg = (
            -0.5 * n * _LOG_2PI - 0.5 * ss_r
            - 0.5 * k * (_LOG_2PI + th_a) - 0.5 * ss_a / sa2
            - 0.5 * self.n_beta * (_LOG_2PI + np.log(self.beta_prior_var))
            - 0.5 * float(beta @ beta) / self.beta_prior_var
            + log_ig_transformed(th_a, self.ig_shape, self.ig_scale)
        )
        grad = np.empty(self.dim_theta)
        grad[:self.n_beta] = self.Xd.T @ resid - beta / self.beta_prior_var
        grad[self.n_beta] = (-0.5 * k + 0.5 * ss_a / sa2
                             + grad_log_ig_transformed(th_a, self.ig_shape, self.ig_scale))
        return float(logg), grad

    def loglik_terms(self, theta, latents):
        """Data-fit term is the truncated-normal augmentation density.

        p(y|z,theta) is an indicator equal to one for every sampler draw,
        so the informative likelihood piece of the tracker is the y*
        density given (alpha, theta).
        """
        beta, th_a = self.split_theta(theta)
        alpha, ystar = latents
        resid = ystar - self.Xd @ beta - alpha[self._gidx]
        loglik = -0.5 * self.data.n * _LOG_2PI - 0.5 * float(resid @ resid)
        logprior = (
            -0.5 * self.n_beta * (_LOG_2PI + np.log(self.beta_prior_var))
            - 0.5 * float(beta @ beta) / self.beta_prior_var
            + log_ig_transformed(th_a, self.ig_shape, self.ig_scale)
        )
        return float(loglik), float(logprior)
