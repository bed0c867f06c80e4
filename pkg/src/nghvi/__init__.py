"""Natural-gradient hybrid variational inference for latent-variable models."""

from .data import GroupedDataset
from .family import FactorGaussian, init_params, pack, unpack
from .natgrad import DampingSpec, build_fim_context, natural_gradient
from .optimizer import ElboTrace, TrainConfig, fit
from .reparam import GradientEstimate, estimate_gradient, noisy_elbo

__all__ = [
    "GroupedDataset",
    "FactorGaussian",
    "init_params",
    "pack",
    "unpack",
    "DampingSpec",
    "build_fim_context",
    "natural_gradient",
    "ElboTrace",
    "TrainConfig",
    "fit",
    "GradientEstimate",
    "estimate_gradient",
    "noisy_elbo",
]

__version__ = "0.1.0"
