"""Feed-forward ReLU network with a pinned offset unit in every layer.

Layer l maps the full previous layer (offset included) to the non-offset
units of layer l, and the offset unit is re-pinned to one afterwards, so
offset positions carry no weights. Weights are exchanged as a flat vector,
column-major per layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpArchitecture:
    n_inputs: int              # raw covariates, excluding the offset
    hidden: tuple[int, ...]    # neurons per hidden layer, excluding offsets

    def __post_init__(self):
        if self.n_inputs < 0 or any(h < 1 for h in self.hidden):
            raise ValueError("invalid layer widths")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def layer_dims(self) -> tuple[int, ...]:
        """Width of every layer including its offset unit."""
        return (self.n_inputs + 1,) + tuple(h + 1 for h in self.hidden)

    @property
    def n_layers(self) -> int:
        return len(self.hidden)

    @property
    def out_dim(self) -> int:
        """Width of the last layer (offset included) = length of beta."""
        return self.layer_dims[-1]

    @property
    def weight_shapes(self) -> list[tuple[int, int]]:
        dims = self.layer_dims
        return [(dims[l + 1] - 1, dims[l]) for l in range(self.n_layers)]

    @property
    def n_weights(self) -> int:
        return sum(r * c for r, c in self.weight_shapes)


def split_weights(arch: MlpArchitecture, w: np.ndarray) -> list[np.ndarray]:
    if w.shape != (arch.n_weights,):
        raise ValueError(f"weight vector has length {w.shape}, expected {arch.n_weights}")
    out, at = [], 0
    for r, c in arch.weight_shapes:
        out.append(w[at:at + r * c].reshape(r, c, order="F"))
        at += r * c
    return out


def flatten_weights(mats: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([m.flatten(order="F") for m in mats]) if mats else np.empty(0)


def add_offset(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


def forward(arch: MlpArchitecture, w_list: list[np.ndarray],
            h0: np.ndarray) -> list[np.ndarray]:
    """All layer activations for a batch; h0 is (n, n_inputs+1) with x[:,0]=1."""
    if h0.shape[1] != arch.layer_dims[0]:
        raise ValueError("input width disagrees with architecture")
    acts = [h0]
    h = h0
    for wl in w_list:
        z = h @ wl.T
        h = np.column_stack([np.ones(z.shape[0]), np.maximum(z, 0.0)])
        acts.append(h)
    return acts


def backprop(arch: MlpArchitecture, w_list: list[np.ndarray],
             acts: list[np.ndarray], coef: np.ndarray,
             upstream: np.ndarray) -> list[np.ndarray]:
    """Gradients of sum_i upstream_i * eta_i in the hidden weights.

    eta_i = coef_i . h_i^(L); ``coef`` is (n, out_dim) (output coefficients
    per row, e.g. beta + alpha of the row's group) and ``upstream`` the
    per-row scalar d(logdensity)/d(eta). Offset rows are excluded from the
    activation derivative since they are pinned.
    """
    grads = [np.zeros_like(wl) for wl in w_list]
    # delta over non-offset units of the last layer
    delta = upstream[:, None] * coef[:, 1:]
    for l in range(arch.n_layers - 1, -1, -1):
        act = acts[l + 1][:, 1:]      # non-offset activations of layer l+1
        delta = delta * (act > 0.0)   # ReLU derivative
        grads[l] = delta.T @ acts[l]
        if l > 0:
            delta = (delta @ w_list[l])[:, 1:]  # drop the pinned offset channel
    return grads
