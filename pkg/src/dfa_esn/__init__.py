"""Deep echo state networks trained with direct feedback alignment.

Reservoir stacks with fixed random recurrent pools, a delta-rule linear
readout on the terminal layer, and direct-feedback-alignment updates for
the input matrices of the non-terminal layers.
"""

__version__ = "0.1.0"

from .numerics import SeededRng, Uniform, scale_to_radius, spectral_radius
from .reservoir import DeepEsn, ReservoirLayer, StateTrace, build_layer, run_series
from .training import TrainConfig, evaluate, train_epoch

__all__ = [
    "SeededRng",
    "Uniform",
    "spectral_radius",
    "scale_to_radius",
    "ReservoirLayer",
    "DeepEsn",
    "StateTrace",
    "build_layer",
    "run_series",
    "TrainConfig",
    "train_epoch",
    "evaluate",
    "__version__",
]
