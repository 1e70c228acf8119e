"""Array arithmetic and reverse-mode differentiation used by every model."""

from . import tape as ad
from .gradcheck import central_diff, finite_diff_check
from .tape import Graph, Tape, Var, backward, forward_eval, value_and_grad

__all__ = [
    "ad",
    "Graph",
    "Tape",
    "Var",
    "backward",
    "forward_eval",
    "value_and_grad",
    "central_diff",
    "finite_diff_check",
]
