"""Reservoir simulation kernels: compiled extension with numpy fallback.

The compiled backend is selected at import time when the extension built;
otherwise the pure-numpy implementation is used. Both expose the same
``layer_sequence`` contract and agree to float rounding.
"""

from ._forward_np import ACT_LOGISTIC, ACT_TANH
from ._forward_np import layer_sequence as layer_sequence_np

try:
    from ._forward import layer_sequence as _layer_sequence_compiled

    layer_sequence = _layer_sequence_compiled
    BACKEND = "compiled"
except ImportError:  # extension not built; fall back
    layer_sequence = layer_sequence_np
    BACKEND = "numpy"

ACTIVATION_IDS = {"sigmoid": ACT_LOGISTIC, "tanh": ACT_TANH}

__all__ = [
    "layer_sequence",
    "layer_sequence_np",
    "BACKEND",
    "ACT_LOGISTIC",
    "ACT_TANH",
    "ACTIVATION_IDS",
]
