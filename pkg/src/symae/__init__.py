"""Symmetric autoencoders with orthogonality constraints, iterated-SVD
initialization, and per-layer reconstruction-error bounds."""

from .activations import HypAct, Identity, LeakyReLU, parse_activation
from .architecture import (
    ParamVector,
    Skeleton,
    SymmetricAutoencoder,
    assemble,
    load_model,
    save_model,
)
from .bounds import (
    empirical_mse,
    greedy_upper_bound,
    layerwise_bounds,
    linear_lower_bound,
    pod,
)
from .data_io import SnapshotSet, generate_pga, load_snapshots, save_snapshots
from .initializers import eys_init, he_init, lift, orthogonal_random_init
from .linalg import NumericalError, ThinSVD, covariance_spectrum, pi_orth, thin_svd
from .training import TrainConfig, evaluate, minmax_normalize, split, train

__version__ = "0.1.0"

__all__ = [
    "HypAct",
    "Identity",
    "LeakyReLU",
    "parse_activation",
    "ParamVector",
    "Skeleton",
    "SymmetricAutoencoder",
    "assemble",
    "load_model",
    "save_model",
    "empirical_mse",
    "greedy_upper_bound",
    "layerwise_bounds",
    "linear_lower_bound",
    "pod",
    "SnapshotSet",
    "generate_pga",
    "load_snapshots",
    "save_snapshots",
    "eys_init",
    "he_init",
    "lift",
    "orthogonal_random_init",
    "NumericalError",
    "ThinSVD",
    "covariance_spectrum",
    "pi_orth",
    "thin_svd",
    "TrainConfig",
    "evaluate",
    "minmax_normalize",
    "split",
    "train",
]
