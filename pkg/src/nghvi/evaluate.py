"""Posterior predictive evaluation and input-response (Lek) profiles.

Gaussian head: J outer draws of theta from the fitted family, exact
conditional alpha draws given the training data per theta, then per-point
predictive means/densities averaged over draws. Bernoulli head: per theta
draw, R Gibbs sweeps over the training latents before scoring test
probabilities. Metrics follow the usual definitions: R^2 and RMSE on the
averaged mean, log-score as the mean log averaged density, predictive
cross entropy as the negative mean Bernoulli log-likelihood of averaged
probabilities, and F1 on the 0.5-threshold classification.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr

from .data import GroupedDataset
from .family import FactorGaussian, sample_theta

PROB_CLIP = 1e-12
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class MetricsReport:
    J: int
    r2_train: float | None = None
    r2_test: float | None = None
    rmse_test: float | None = None
    ls_train: float | None = None
    ls_test: float | None = None
    pce_train: float | None = None
    pce_test: float | None = None
    f1_train: float | None = None
    f1_test: float | None = None

    def to_json(self, **extra) -> str:
        out = {k: v for k, v in asdict(self).items() if v is not None}
        out.update(extra)
        return json.dumps(out, indent=2, sort_keys=True)


def r2_score(y, yhat) -> float:
    ybar = np.mean(y)
    denom = float(np.sum((y - ybar) ** 2))
    return 1.0 - float(np.sum((y - yhat) ** 2)) / denom


def rmse(y, yhat) -> float:
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def log_score(phat) -> float:
    return float(np.mean(np.log(phat)))


def pce(y, phat) -> float:
    p = np.clip(phat, PROB_CLIP, 1.0 - PROB_CLIP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def f1_score(y, yhat) -> float:
    y = np.asarray(y) > 0.5
    yhat = np.asarray(yhat) > 0.5
    tp = float(np.sum(y & yhat))
    fp = float(np.sum(~y & yhat))
    fn = float(np.sum(y & ~yhat))
    if tp == 0.0:
        return 0.0
    prec = tp / (tp + fp)
    rec = tp / (tp + fn)
    return 2.0 * prec * rec / (prec + rec)


def _draw_theta(params: FactorGaussian, rng) -> np.ndarray:
    return sample_theta(params, rng.standard_normal(params.p),
                        rng.standard_normal(params.m))


def _dump_points(path, y, yhat, phat):
    with open(path, "w") as fh:
        fh.write("i,y,yhat,phat\n")
        for i, (yi, mi, pi) in enumerate(zip(y, yhat, phat)):
            fh.write(f"{i},{yi:.17g},{mi:.17g},{pi:.17g}\n")


def predict_gaussian(params: FactorGaussian, model, test: GroupedDataset,
                     J: int, rng: np.random.Generator,
                     dump_path=None) -> MetricsReport:
    """Averaged predictive mean/density metrics for a Gaussian-output model.

    The model is bound to its training data; alpha is drawn from its exact
    conditional posterior given the training data for every theta draw.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    train = model.data
    eta_te = np.zeros(test.n)
    den_te = np.zeros(test.n)
    eta_tr = np.zeros(train.n)
    den_tr = np.zeros(train.n)
    for _ in range(J):
        theta = _draw_theta(params, rng)
        alpha = model.sample_latents(theta, None, rng)
        se2 = model.noise_var(theta)
        e_te = model.predict_eta(theta, alpha, test.X, test.group)
        e_tr = model.predict_eta(theta, alpha, train.X, train.group)
        eta_te += e_te
        eta_tr += e_tr
        den_te += np.exp(-0.5 * (test.y - e_te) ** 2 / se2) / np.sqrt(2 * np.pi * se2)
        den_tr += np.exp(-0.5 * (train.y - e_tr) ** 2 / se2) / np.sqrt(2 * np.pi * se2)
    eta_te /= J
    eta_tr /= J
    den_te /= J
    den_tr /= J
    if dump_path:
        _dump_points(dump_path, test.y, eta_te, den_te)
    return MetricsReport(
        J=J,
        r2_train=r2_score(train.y, eta_tr),
        r2_test=r2_score(test.y, eta_te),
        rmse_test=rmse(test.y, eta_te),
        ls_train=log_score(den_tr),
        ls_test=log_score(den_te),
    )


def predict_bernoulli(params: FactorGaussian, model, test: GroupedDataset,
                      J: int, R: int, rng: np.random.Generator,
                      dump_path=None) -> MetricsReport:
    """Averaged predictive probability metrics for a probit-output model."""
    if J < 1 or R < 1:
        raise ValueError("J and R must be >= 1")
    train = model.data
    p_te = np.zeros(test.n)
    p_tr = np.zeros(train.n)
    latents = None
    for _ in range(J):
        theta = _draw_theta(params, rng)
        latents = model.gibbs_sweeps(theta, latents, rng, R)
        alpha = latents[0]
        p_te += ndtr(model.predict_eta(theta, alpha, test.X, test.group))
        p_tr += ndtr(model.predict_eta(theta, alpha, train.X, train.group))
    p_te /= J
    p_tr /= J
    yhat_te = (p_te > 0.5).astype(np.float64)
    yhat_tr = (p_tr > 0.5).astype(np.float64)
    if dump_path:
        _dump_points(dump_path, test.y, yhat_te, p_te)
    return MetricsReport(
        J=J,
        pce_train=pce(train.y, p_tr),
        pce_test=pce(test.y, p_te),
        f1_train=f1_score(train.y, yhat_tr),
        f1_test=f1_score(test.y, yhat_te),
    )


def lek_profile(params: FactorGaussian, model, input_index: int,
                grid: np.ndarray, reference_x: np.ndarray,
                group_ids, J: int = 0,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Expected output vs one input, other inputs held at reference values.

    Default uses the posterior mean of theta (= the fitted mu) with the
    conditional posterior mean of each group's alpha; J > 0 instead
    averages over J (theta, alpha) draws. Returns (len(group_ids), len(grid)).
    """
    grid = np.asarray(grid, dtype=np.float64)
    reference_x = np.asarray(reference_x, dtype=np.float64)
    n_x = model.data.n_x
    if reference_x.shape != (n_x,):
        raise ValueError(f"reference_x must have length {n_x}")
    if not 0 <= input_index < n_x:
        raise ValueError("input_index out of range")
    group_ids = np.asarray(group_ids, dtype=np.int64)
    if np.any(group_ids < 1) or np.any(group_ids > model.data.n_groups):
        raise ValueError("unknown group id")
    X = np.tile(reference_x, (grid.shape[0], 1))
    X[:, input_index] = grid
    out = np.zeros((group_ids.shape[0], grid.shape[0]))
    if J <= 0:
        theta = params.mu
        alpha = _alpha_mean(model, theta, rng)
        for gi, gid in enumerate(group_ids):
            eta = model.predict_eta(theta, alpha, X, np.full(grid.shape[0], gid))
            out[gi] = model.mean_output(eta)
        return out
    if rng is None:
        raise ValueError("J > 0 requires an rng")
    for _ in range(J):
        theta = _draw_theta(params, rng)
        alpha = model.sample_latents(theta, None, rng)
        if isinstance(alpha, tuple):
            alpha = alpha[0]
        for gi, gid in enumerate(group_ids):
            eta = model.predict_eta(theta, alpha, X, np.full(grid.shape[0], gid))
            out[gi] += model.mean_output(eta)
    return out / J


def _alpha_mean(model, theta, rng):
    if hasattr(model, "conditional_alpha_mean"):
        return model.conditional_alpha_mean(theta)
    if hasattr(model, "conditional_alpha_moments"):
        return model.conditional_alpha_moments(theta)[0]
    # Gibbs-only models: average a short chain
    chain_rng = rng or np.random.default_rng(0)
    latents = None
    total = None
    for _ in range(50):
        latents = model.sample_latents(theta, latents, chain_rng)
        alpha = latents[0] if isinstance(latents, tuple) else latents
        total = alpha if total is None else total + alpha
    return total / 50.0
