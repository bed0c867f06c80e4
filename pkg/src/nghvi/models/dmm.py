"""Deep mixed models: ReLU networks whose output-layer coefficients are
beta + alpha_k with group random effects alpha_k.

Gaussian head: y_i ~ N((beta+alpha_k)' h_i, sigma_e^2), full covariance
random effects with a Wishart prior on the precision, re-parameterized
through the Cholesky factor L (log-diagonal) so all of theta lives on the
real line. Bernoulli head: probit augmentation y = 1(y* > 0) with unit
noise variance and diagonal random-effect covariance.
"""

from __future__ import annotations

import numpy as np
from scipy.special import multigammaln, ndtr
from scipy.linalg import solve_triangular

from .. import kernels
from ..data import GroupedDataset
from . import mlp
from .base import grad_log_ig_transformed, log_ig_transformed

_LOG_2PI = np.log(2.0 * np.pi)


# --- half-vectorization with log diagonal -------------------------------

def vech_indices(q: int):
    """Row/column index arrays of the lower triangle in column-stacked order."""
    rows = np.concatenate([np.arange(j, q) for j in range(q)])
    cols = np.concatenate([np.full(q - j, j) for j in range(q)])
    return rows, cols


def vech(mat: np.ndarray) -> np.ndarray:
    r, c = vech_indices(mat.shape[0])
    return mat[r, c]


def diag_positions(q: int) -> np.ndarray:
    """Slots of the diagonal entries inside the half-vectorization."""
    return np.cumsum(np.concatenate(([0], np.arange(q, 1, -1))))


def build_chol(l_vec: np.ndarray, q: int) -> np.ndarray:
    """Lower-triangular L from its half-vectorization with log diagonal."""
    r, c = vech_indices(q)
    L = np.zeros((q, q))
    L[r, c] = l_vec
    di = np.arange(q)
    L[di, di] = np.exp(L[di, di])
    return L


def chol_to_vec(L: np.ndarray) -> np.ndarray:
    q = L.shape[0]
    out = vech(L).copy()
    out[diag_positions(q)] = np.log(np.diag(L))
    return out


def _with_log_diag_jacobian(grad_vech: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Chain rule for the log on diagonal entries: multiply those slots by l_ii."""
    out = grad_vech.copy()
    out[diag_positions(L.shape[0])] *= np.diag(L)
    return out


def chol_l_prior(l_vec: np.ndarray, q: int, nu: float, s_scale: float):
    """Log prior of l (Wishart on LL' plus change of variables) and gradient."""
    L = build_chol(l_vec, q)
    log_diag = np.log(np.diag(L))
    s_inv = np.eye(q) / s_scale
    log_det_w = 2.0 * float(np.sum(log_diag))
    log_wishart = (
        0.5 * (nu - q - 1.0) * log_det_w
        - 0.5 * float(np.trace(s_inv @ (L @ L.T)))
        - 0.5 * nu * q * np.log(2.0) - 0.5 * nu * q * np.log(s_scale)
        - multigammaln(0.5 * nu, q)
    )
    u = q - np.arange(1, q + 1) + 2.0
    logp = log_wishart + q * np.log(2.0) + float(u @ log_diag)
    li_t = solve_triangular(L, np.eye(q), lower=True).T   # L^{-T}
    grad = _with_log_diag_jacobian(vech((nu - q - 1.0) * li_t - s_inv @ L), L)
    grad[diag_positions(q)] += u
    return float(logp), grad


def chol_l_alpha_terms(l_vec: np.ndarray, alphas: np.ndarray):
    """sum_k log N(alpha_k; 0, (LL')^{-1}) and its gradient in l."""
    k, q = alphas.shape
    L = build_chol(l_vec, q)
    log_diag = np.log(np.diag(L))
    lt_a = alphas @ L
    logp = (-0.5 * k * q * _LOG_2PI + k * float(np.sum(log_diag))
            - 0.5 * float(np.sum(lt_a**2)))
    li_t = solve_triangular(L, np.eye(q), lower=True).T
    grad = _with_log_diag_jacobian(vech(k * li_t - (alphas.T @ alphas) @ L), L)
    return float(logp), grad


def cholesky_l_grads(l_vec: np.ndarray, alphas: np.ndarray, nu: float,
                     s_scale: float = 0.01):
    """(log prior of l, prior gradient, data gradient, alpha log-density)."""
    logp_prior, grad_prior = chol_l_prior(l_vec, alphas.shape[1], nu, s_scale)
    logp_alpha, grad_data = chol_l_alpha_terms(l_vec, alphas)
    return logp_prior, grad_prior, grad_data, logp_alpha


# --- Gaussian head -------------------------------------------------------

class GaussianDMM:
    def __init__(self, data: GroupedDataset, hidden=(5, 5),
                 sigma_w2: float = 100.0, sigma_beta2: float = 100.0,
                 ig_shape: float = 1.01, ig_scale: float = 1.01,
                 wishart_scale: float = 0.01):
        self.data = data
        self.arch = mlp.MlpArchitecture(data.n_x, tuple(hidden))
        self.q = self.arch.out_dim
        self.n_w = self.arch.n_weights
        self.n_l = self.q * (self.q + 1) // 2
        self.dim_theta = self.n_w + self.q + 1 + self.n_l
        self.nu = self.q + 1.0
        self.sigma_w2 = sigma_w2
        self.sigma_beta2 = sigma_beta2
        self.ig_shape = ig_shape
        self.ig_scale = ig_scale
        self.wishart_scale = wishart_scale
        self._h0 = mlp.add_offset(data.X)
        self._gidx = data.group_index

    def split_theta(self, theta):
        nw, q = self.n_w, self.q
        return (theta[:nw], theta[nw:nw + q], theta[nw + q],
                theta[nw + q + 1:])

    def design(self, theta, h0=None):
        """Layer activations for the training (or given) inputs."""
        w_list = mlp.split_weights(self.arch, theta[:self.n_w])
        acts = mlp.forward(self.arch, w_list, self._h0 if h0 is None else h0)
        return acts, w_list

    def _alpha_given_theta(self, theta, z):
        """mu_k + chol(Prec_k)^{-T} z_k per group (z = 0 gives the means)."""
        _, beta, th_e, l_vec = self.split_theta(theta)
        H = self.design(theta)[0][-1]
        L = build_chol(l_vec, self.q)
        inv_noise = float(np.exp(-th_e))
        chols = kernels.grouped_chol_precision(H, self.data.offsets, L @ L.T,
                                               inv_noise)
        resid = self.data.y - H @ beta
        return kernels.grouped_mvn_draw(H, resid, self.data.offsets, chols,
                                        inv_noise, z)

    def sample_latents(self, theta, prev_latents, rng):
        z = rng.standard_normal((self.data.n_groups, self.q))
        return self._alpha_given_theta(theta, z)

    def conditional_alpha_mean(self, theta):
        return self._alpha_given_theta(theta, np.zeros((self.data.n_groups, self.q)))

    def _prior_terms(self, w, beta, th_e, l_vec):
        logp_l, grad_prior_l = chol_l_prior(l_vec, self.q, self.nu,
                                            self.wishart_scale)
        logp = (
            -0.5 * self.n_w * (_LOG_2PI + np.log(self.sigma_w2))
            - 0.5 * float(w @ w) / self.sigma_w2
            - 0.5 * self.q * (_LOG_2PI + np.log(self.sigma_beta2))
            - 0.5 * float(beta @ beta) / self.sigma_beta2
            + log_ig_transformed(th_e, self.ig_shape, self.ig_scale)
            + logp_l
        )
        return float(logp), grad_prior_l

    def log_g_and_grad(self, theta, alpha):
        w, beta, th_e, l_vec = self.split_theta(theta)
        se2 = float(np.exp(th_e))
        n = self.data.n
        acts, w_list = self.design(theta)
        H = acts[-1]
        coef = beta[None, :] + alpha[self._gidx]
        resid = self.data.y - np.sum(H * coef, axis=1)
        ss_r = float(resid @ resid)
        log_alpha, grad_data_l = chol_l_alpha_terms(l_vec, alpha)
        log_prior, grad_prior_l = self._prior_terms(w, beta, th_e, l_vec)
        logg = (-0.5 * n * (_LOG_2PI + th_e) - 0.5 * ss_r / se2
                + log_alpha + log_prior)
        upstream = resid / se2
        grad_w_mats = mlp.backprop(self.arch, w_list, acts, coef, upstream)
        grad = np.empty(self.dim_theta)
        grad[:self.n_w] = mlp.flatten_weights(grad_w_mats) - w / self.sigma_w2
        grad[self.n_w:self.n_w + self.q] = H.T @ upstream - beta / self.sigma_beta2
        grad[self.n_w + self.q] = (
            -0.5 * n + 0.5 * ss_r / se2
            + grad_log_ig_transformed(th_e, self.ig_shape, self.ig_scale)
        )
        grad[self.n_w + self.q + 1:] = grad_data_l + grad_prior_l
        return float(logg), grad

    def loglik_terms(self, theta, alpha):
        w, beta, th_e, l_vec = self.split_theta(theta)
        se2 = float(np.exp(th_e))
        H = self.design(theta)[0][-1]
        coef = beta[None, :] + alpha[self._gidx]
        resid = self.data.y - np.sum(H * coef, axis=1)
        loglik = (-0.5 * self.data.n * (_LOG_2PI + th_e)
                  - 0.5 * float(resid @ resid) / se2)
        logprior, _ = self._prior_terms(w, beta, th_e, l_vec)
        return float(loglik), logprior

    # prediction hooks -----------------------------------------------------
    def predict_eta(self, theta, alpha, X_new, group_new):
        acts, _ = self.design(theta, mlp.add_offset(X_new))
        beta = theta[self.n_w:self.n_w + self.q]
        coef = beta[None, :] + alpha[np.asarray(group_new) - 1]
        return np.sum(acts[-1] * coef, axis=1)

    def noise_var(self, theta):
        return float(np.exp(theta[self.n_w + self.q]))

    def mean_output(self, eta):
        return eta


# --- Bernoulli head ------------------------------------------------------

class BernoulliDMM:
    def __init__(self, data: GroupedDataset, hidden=(5, 5), sweeps: int = 5,
                 sigma_w2: float = 50.0, sigma_beta2: float = 5.0,
                 ig_shape: float = 0.1, ig_scale: float = 0.1):
        if not np.all(np.isin(data.y, (0.0, 1.0))):
            raise ValueError("Bernoulli model requires y in {0, 1}")
        self.data = data
        self.arch = mlp.MlpArchitecture(data.n_x, tuple(hidden))
        self.q = self.arch.out_dim
        self.n_w = self.arch.n_weights
        self.dim_theta = self.n_w + 2 * self.q
        self.sweeps = sweeps
        self.sigma_w2 = sigma_w2
        self.sigma_beta2 = sigma_beta2
        self.ig_shape = ig_shape
        self.ig_scale = ig_scale
        self._h0 = mlp.add_offset(data.X)
        self._gidx = data.group_index
        self._positive = data.y > 0.5

    def split_theta(self, theta):
        nw, q = self.n_w, self.q
        return theta[:nw], theta[nw:nw + q], theta[nw + q:]

    def design(self, theta, h0=None):
        w_list = mlp.split_weights(self.arch, theta[:self.n_w])
        acts = mlp.forward(self.arch, w_list, self._h0 if h0 is None else h0)
        return acts, w_list

    def gibbs_sweeps(self, theta, prev_latents, rng, sweeps):
        """Alternate exact alpha | y* and truncated-normal y* | alpha draws."""
        _, beta, log_om = self.split_theta(theta)
        data = self.data
        H = self.design(theta)[0][-1]
        hb = H @ beta
        prec0 = np.diag(np.exp(-log_om))
        chols = kernels.grouped_chol_precision(H, data.offsets, prec0, 1.0)
        if prev_latents is None:
            ystar = np.where(self._positive, 0.8, -0.8)
        else:
            ystar = prev_latents[1].copy()
        alpha = np.zeros((data.n_groups, self.q))
        for _ in range(sweeps):
            z = rng.standard_normal((data.n_groups, self.q))
            alpha = kernels.grouped_mvn_draw(H, ystar - hb, data.offsets,
                                             chols, 1.0, z)
            eta = hb + np.sum(H * alpha[self._gidx], axis=1)
            ystar = kernels.truncnorm_conditional(
                eta, self._positive, rng.random(data.n)
            )
        return alpha, ystar

    def sample_latents(self, theta, prev_latents, rng):
        return self.gibbs_sweeps(theta, prev_latents, rng, self.sweeps)

    def _log_prior(self, w, beta, log_om):
        return float(
            -0.5 * self.n_w * (_LOG_2PI + np.log(self.sigma_w2))
            - 0.5 * float(w @ w) / self.sigma_w2
            - 0.5 * self.q * (_LOG_2PI + np.log(self.sigma_beta2))
            - 0.5 * float(beta @ beta) / self.sigma_beta2
            + sum(log_ig_transformed(x, self.ig_shape, self.ig_scale)
                  for x in log_om)
        )

    def log_g_and_grad(self, theta, latents):
        w, beta, log_om = self.split_theta(theta)
        om = np.exp(log_om)
        alpha, ystar = latents
        n, k = self.data.n, self.data.n_groups
        acts, w_list = self.design(theta)
        H = acts[-1]
        coef = beta[None, :] + alpha[self._gidx]
        resid = ystar - np.sum(H * coef, axis=1)
        ss_a = np.sum(alpha**2, axis=0)
        logg = (
            -0.5 * n * _LOG_2PI - 0.5 * float(resid @ resid)
            - 0.5 * k * float(np.sum(_LOG_2PI + log_om))
            - 0.5 * float(np.sum(ss_a / om))
            + self._log_prior(w, beta, log_om)
        )
        grad_w_mats = mlp.backprop(self.arch, w_list, acts, coef, resid)
        grad = np.empty(self.dim_theta)
        grad[:self.n_w] = mlp.flatten_weights(grad_w_mats) - w / self.sigma_w2
        grad[self.n_w:self.n_w + self.q] = H.T @ resid - beta / self.sigma_beta2
        grad[self.n_w + self.q:] = (
            -0.5 * k + 0.5 * ss_a / om
            + np.array([grad_log_ig_transformed(x, self.ig_shape, self.ig_scale)
                        for x in log_om])
        )
        return float(logg), grad

    def loglik_terms(self, theta, latents):
        """Likelihood piece is the y* augmentation density (the indicator
        p(y|z,theta) is identically one for sign-consistent draws)."""
        w, beta, log_om = self.split_theta(theta)
        alpha, ystar = latents
        H = self.design(theta)[0][-1]
        coef = beta[None, :] + alpha[self._gidx]
        resid = ystar - np.sum(H * coef, axis=1)
        loglik = -0.5 * self.data.n * _LOG_2PI - 0.5 * float(resid @ resid)
        return float(loglik), self._log_prior(w, beta, log_om)

    # prediction hooks -----------------------------------------------------
    def predict_eta(self, theta, alpha, X_new, group_new):
        acts, _ = self.design(theta, mlp.add_offset(X_new))
        beta = theta[self.n_w:self.n_w + self.q]
        coef = beta[None, :] + alpha[np.asarray(group_new) - 1]
        return np.sum(acts[-1] * coef, axis=1)

    def mean_output(self, eta):
        return ndtr(eta)
