"""Synthetic data generators for the four bundled studies.

Each generator is a pure function of its arguments and seed, and returns
the datasets together with a JSON-serializable truth record carrying every
generating parameter (used by oracle-based tests). Quantities the source
designs leave unspecified (hidden-layer truth weights, some input
covariances) are drawn once from a fixed internal seed and frozen, so they
are identical across user seeds and replicate datasets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import GroupedDataset
from .models import mlp

# input covariance shared by examples 1 and 2(a)
V_X5 = np.array([
    [1.0, 0.0, -0.5, 0.2, 0.0],
    [0.0, 1.0, 0.0, -0.5, 0.2],
    [-0.5, 0.0, 1.0, 0.0, -0.5],
    [0.2, -0.5, 0.0, 1.0, 0.0],
    [0.0, 0.2, -0.5, 0.0, 1.0],
])

BETA_EX1 = np.array([0.8292, -1.3250, 0.9909, 1.6823, -1.7564, 0.0580])
BETA_EX2A = np.array([0.8292, -1.3250, 3.9909, 1.6823, -1.7564, 0.5580])
OMEGA_INV_DIAG_EX2A = np.array([1.0443, 9.0498, 0.4569, 0.5190, 0.2857, 2.7548])

_TRUTH_SEED = 0x5EED


@dataclass(frozen=True)
class SimulationResult:
    train: GroupedDataset
    test: GroupedDataset | None
    validation: GroupedDataset | None
    truth: dict

    @property
    def splits(self) -> dict:
        out = {"train": self.train}
        if self.test is not None:
            out["test"] = self.test
        if self.validation is not None:
            out["validation"] = self.validation
        return out


def _mvn(rng, cov, n):
    return rng.standard_normal((n, cov.shape[0])) @ np.linalg.cholesky(cov).T


def _group_sizes(n: int, k: int) -> np.ndarray:
    sizes = np.full(k, n // k, dtype=np.int64)
    sizes[: n % k] += 1
    return sizes


def dgp_example1(K: int = 1000, ratio: float = 1.0, seed: int = 0,
                 n: int = 5000) -> SimulationResult:
    """Linear random-effects regression: intercept + 5 correlated inputs,
    noise variance 1, random-effect variance ``ratio``."""
    if K < 1 or K > n:
        raise ValueError("need 1 <= K <= n")
    rng = np.random.default_rng(seed)
    sizes = _group_sizes(n, K)
    group = np.repeat(np.arange(1, K + 1), sizes)
    X = _mvn(rng, V_X5, n)
    alpha = np.sqrt(ratio) * rng.standard_normal(K)
    eps = rng.standard_normal(n)
    y = BETA_EX1[0] + X @ BETA_EX1[1:] + alpha[group - 1] + eps
    truth = {
        "example": "ex1",
        "seed": seed,
        "K": K,
        "beta": BETA_EX1.tolist(),
        "sigma_alpha2": float(ratio),
        "sigma_eps2": 1.0,
        "input_cov": V_X5.tolist(),
        "alpha": alpha.tolist(),
    }
    return SimulationResult(GroupedDataset.from_arrays(y, X, group), None, None, truth)


def _dmm_truth_net(n_inputs: int, hidden, w_scale: float,
                   rng: np.random.Generator):
    arch = mlp.MlpArchitecture(n_inputs, tuple(hidden))
    mats = [w_scale * rng.standard_normal(s) for s in arch.weight_shapes]
    return arch, mats


def _split_by_slot(y, X, group, slot, bounds):
    """Partition rows into datasets by within-group slot ranges."""
    out = []
    lo = 0
    for width in bounds:
        sel = (slot >= lo) & (slot < lo + width)
        out.append(GroupedDataset.from_arrays(y[sel], X[sel], group[sel]))
        lo += width
    return out


def _dmm_gaussian_dgp(arch, w_mats, beta, omega, sigma_eps2, cov_x, K,
                      counts, rng):
    tot = sum(counts)
    n = tot * K
    X = _mvn(rng, cov_x, n)
    group = np.repeat(np.arange(1, K + 1), tot)
    slot = np.tile(np.arange(tot), K)
    alpha = _mvn(rng, omega, K)
    acts = mlp.forward(arch, w_mats, mlp.add_offset(X))
    coef = beta[None, :] + alpha[group - 1]
    eta = np.sum(acts[-1] * coef, axis=1)
    y = eta + np.sqrt(sigma_eps2) * rng.standard_normal(n)
    return y, X, group, slot, alpha


def dgp_example2a(seed: int = 0) -> SimulationResult:
    """Gaussian deep mixed model, two hidden layers of 5 neurons; K=1000
    groups with 6 train + 2 test rows each; sigma_e^2 = 20."""
    truth_rng = np.random.default_rng(_TRUTH_SEED)
    arch, w_mats = _dmm_truth_net(5, (5, 5), 0.5, truth_rng)
    omega = np.diag(1.0 / OMEGA_INV_DIAG_EX2A)
    rng = np.random.default_rng(seed)
    y, X, group, slot, alpha = _dmm_gaussian_dgp(
        arch, w_mats, BETA_EX2A, omega, 20.0, V_X5, 1000, (6, 2), rng
    )
    train, test = _split_by_slot(y, X, group, slot, (6, 2))
    truth = {
        "example": "ex2a",
        "seed": seed,
        "K": 1000,
        "hidden": [5, 5],
        "weights": [w.tolist() for w in w_mats],
        "beta": BETA_EX2A.tolist(),
        "omega_alpha_inv_diag": OMEGA_INV_DIAG_EX2A.tolist(),
        "sigma_eps2": 20.0,
        "input_cov": V_X5.tolist(),
        "alpha": alpha.tolist(),
    }
    return SimulationResult(train, test, None, truth)


def dgp_example2b(seed: int = 0) -> SimulationResult:
    """Larger Gaussian deep mixed model: 64 inputs, hidden layers 32 and 16,
    K=1000 groups with 30 train + 10 test rows; sigma_e^2 = 2.25. Inputs use
    an AR(1) correlation with coefficient 0.5."""
    truth_rng = np.random.default_rng(_TRUTH_SEED + 1)
    arch, w_mats = _dmm_truth_net(64, (32, 16), 0.5, truth_rng)
    q = arch.out_dim
    beta = truth_rng.standard_normal(q)
    omega_inv_diag = truth_rng.uniform(0.3, 9.0, q)
    omega = np.diag(1.0 / omega_inv_diag)
    idx = np.arange(64)
    cov_x = 0.5 ** np.abs(idx[:, None] - idx[None, :])
    rng = np.random.default_rng(seed)
    y, X, group, slot, alpha = _dmm_gaussian_dgp(
        arch, w_mats, beta, omega, 2.25, cov_x, 1000, (30, 10), rng
    )
    train, test = _split_by_slot(y, X, group, slot, (30, 10))
    truth = {
        "example": "ex2b",
        "seed": seed,
        "K": 1000,
        "hidden": [32, 16],
        "weights": [w.tolist() for w in w_mats],
        "beta": beta.tolist(),
        "omega_alpha_inv_diag": omega_inv_diag.tolist(),
        "sigma_eps2": 2.25,
        "input_cov_ar1": 0.5,
        "alpha": alpha.tolist(),
    }
    return SimulationResult(train, test, None, truth)


def dgp_example3(seed: int = 0) -> SimulationResult:
    """Binary outcomes from a logistic DGP with a scalar group effect;
    K=1000 groups with 14 train + 3 test + 3 validation rows each. The
    fitted probit-link model is deliberately mis-specified for this DGP."""
    K, counts = 1000, (14, 3, 3)
    tot = sum(counts)
    n = tot * K
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, 5))
    group = np.repeat(np.arange(1, K + 1), tot)
    slot = np.tile(np.arange(tot), K)
    a = rng.standard_normal(K)
    eta = (2.0 + 3.0 * (X[:, 0] - 2.0 * X[:, 1]) ** 2
           - 5.0 * X[:, 2] / (1.0 + X[:, 3]) ** 2
           - 5.0 * X[:, 4] + a[group - 1])
    prob = 1.0 / (1.0 + np.exp(-eta))
    y = (rng.random(n) < prob).astype(np.float64)
    train, test, val = _split_by_slot(y, X, group, slot, counts)
    truth = {
        "example": "ex3",
        "seed": seed,
        "K": K,
        "a": a.tolist(),
        "link": "logistic",
        "eta_formula": "2 + 3*(x1 - 2*x2)^2 - 5*x3/(1+x4)^2 - 5*x5 + a_k",
    }
    return SimulationResult(train, test, val, truth)


GENERATORS = {
    "ex1": dgp_example1,
    "ex2a": dgp_example2a,
    "ex2b": dgp_example2b,
    "ex3": dgp_example3,
}
