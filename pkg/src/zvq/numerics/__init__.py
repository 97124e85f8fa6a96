"""Float32 tensor core: tape autodiff, conv primitives, Adam, grad checking."""

from . import ops
from .adam import AdamState, adam_step
from .gradcheck import GradCheckReport, finite_difference_check
from .tensor import Tape, TapeNode, Tensor, backward

__all__ = [
    "AdamState",
    "GradCheckReport",
    "Tape",
    "TapeNode",
    "Tensor",
    "adam_step",
    "backward",
    "finite_difference_check",
    "ops",
]
