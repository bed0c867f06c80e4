from .base import ModelHandle
from .dmm import BernoulliDMM, GaussianDMM
from .linear_re import LinearREModel
from .probit_re import ProbitREModel

__all__ = [
    "ModelHandle",
    "LinearREModel",
    "ProbitREModel",
    "GaussianDMM",
    "BernoulliDMM",
]
