"""deepBASS: active semi-supervised EM training with MC-dropout
uncertainty and oracle label acquisition."""

from .autodiff import Adam, Tape, Tensor
from .data import DataPools, HiddenTruth, generate_yinyang, load_mnist_idx, make_pools
from .errors import (
    ConfigError,
    DeepBassError,
    DimensionError,
    FormatError,
    OracleError,
    ParameterError,
    RequestRejected,
)
from .loop import IterationReport, LoopConfig, em_iteration, initial_train, run
from .mc import McConfig, entropy, ground_truth_threshold, mc_average, pseudo_label
from .models import ModelSpec, build, cnn_mnist_spec, load_model, mlp_yinyang_spec
from .oracle import OracleAnswer, OracleQueue, OracleRequest, SimulatedOracle

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "Tape",
    "Tensor",
    "DataPools",
    "HiddenTruth",
    "generate_yinyang",
    "load_mnist_idx",
    "make_pools",
    "ConfigError",
    "DeepBassError",
    "DimensionError",
    "FormatError",
    "OracleError",
    "ParameterError",
    "RequestRejected",
    "IterationReport",
    "LoopConfig",
    "em_iteration",
    "initial_train",
    "run",
    "McConfig",
    "entropy",
    "ground_truth_threshold",
    "mc_average",
    "pseudo_label",
    "ModelSpec",
    "build",
    "cnn_mnist_spec",
    "load_model",
    "mlp_yinyang_spec",
    "OracleAnswer",
    "OracleQueue",
    "OracleRequest",
    "SimulatedOracle",
    "__version__",
]
