"""Training-free video face-swapping mechanisms at desk scale.

The package provides deterministic DDIM sampling and inversion, attention
feature recording/injection between a reconstruction and a generation
branch, frequency-domain blending of attention features, flow-guided
temporal smoothing, and a synthetic-video evaluation harness, all built on
small analytically tractable denoisers so every mechanism can be verified
against closed-form oracles.
"""

from videoswap.tensor_core import Tensor4, read_tensor, write_tensor

__all__ = ["Tensor4", "read_tensor", "write_tensor"]
__version__ = "0.1.0"
