"""Linear regression with a scalar group random effect.

theta = (beta, log sigma_a^2, log sigma_e^2); the latent state is the
vector of group effects alpha, whose conditional posterior given theta is
an independent Gaussian per group and is drawn exactly.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..data import GroupedDataset
from .base import grad_log_ig_transformed, log_ig_transformed

_LOG_2PI = np.log(2.0 * np.pi)


class LinearREModel:
    def __init__(self, data: GroupedDataset, beta_prior_var: float = 100.0,
                 ig_shape: float = 1.01, ig_scale: float = 1.01):
        self.data = data
        self.Xd = np.column_stack([np.ones(data.n), data.X])  # intercept first
        self.n_beta = self.Xd.shape[1]
        self.dim_theta = self.n_beta + 2
        self.beta_prior_var = beta_prior_var
        self.ig_shape = ig_shape
        self.ig_scale = ig_scale
        self._gidx = data.group_index

    def split_theta(self, theta):
        return theta[:self.n_beta], theta[self.n_beta], theta[self.n_beta + 1]

    def conditional_alpha_moments(self, theta):
        """Per-group posterior mean and variance of alpha given theta."""
        beta, th_a, th_e = self.split_theta(theta)
        sa2, se2 = np.exp(th_a), np.exp(th_e)
        resid = self.data.y - self.Xd @ beta
        sums = kernels.grouped_sums(resid, self.data.offsets)
        counts = self.data.group_sizes
        var = 1.0 / (1.0 / sa2 + counts / se2)
        mean = var * sums / se2
        return mean, var

    def sample_latents(self, theta, prev_latents, rng):
        mean, var = self.conditional_alpha_moments(theta)
        return mean + np.sqrt(var) * rng.standard_normal(mean.shape[0])

    def log_g_and_grad(self, theta, alpha):
        beta, th_a, th_e = self.split_theta(theta)
        sa2, se2 = np.exp(th_a), np.exp(th_e)
        data = self.data
        n, k = data.n, data.n_groups
        resid = data.y - self.Xd @ beta - alpha[self._gidx]
        ss_r = float(resid @ resid)
        ss_a = float(alpha @ alpha)
        logg = (
            -0.5 * n * (_LOG_2PI + th_e) - 0.5 * ss_r / se2
            - 0.5 * k * (_LOG_2PI + th_a) - 0.5 * ss_a / sa2
            - 0.5 * self.n_beta * (_LOG_2PI + np.log(self.beta_prior_var))
            - 0.5 * float(beta @ beta) / self.beta_prior_var
            + log_ig_transformed(th_a, self.ig_shape, self.ig_scale)
            + log_ig_transformed(th_e, self.ig_shape, self.ig_scale)
        )
        grad = np.empty(self.dim_theta)
        grad[:self.n_beta] = self.Xd.T @ resid / se2 - beta / self.beta_prior_var
        grad[self.n_beta] = (-0.5 * k + 0.5 * ss_a / sa2
                             + grad_log_ig_transformed(th_a, self.ig_shape, self.ig_scale))
        grad[self.n_beta + 1] = (-0.5 * n + 0.5 * ss_r / se2
                                 + grad_log_ig_transformed(th_e, self.ig_shape, self.ig_scale))
        return float(logg), grad

    def loglik_terms(self, theta, alpha):
        beta, th_a, th_e = self.split_theta(theta)
        se2 = np.exp(th_e)
        resid = self.data.y - self.Xd @ beta - alpha[self._gidx]
        loglik = -0.5 * self.data.n * (_LOG_2PI + th_e) - 0.5 * float(resid @ resid) / se2
        logprior = (
            -0.5 * self.n_beta * (_LOG_2PI + np.log(self.beta_prior_var))
            - 0.5 * float(beta @ beta) / self.beta_prior_var
            + log_ig_transformed(th_a, self.ig_shape, self.ig_scale)
            + log_ig_transformed(th_e, self.ig_shape, self.ig_scale)
        )
        return float(loglik), float(logprior)

    # prediction hooks -----------------------------------------------------
    def predict_eta(self, theta, alpha, X_new, group_new):
        beta, _, _ = self.split_theta(theta)
        xd = np.column_stack([np.ones(X_new.shape[0]), X_new])
        return xd @ beta + alpha[np.asarray(group_new) - 1]

    def noise_var(self, theta):
        return float(np.exp(theta[self.n_beta + 1]))

    def mean_output(self, eta):
        return eta
