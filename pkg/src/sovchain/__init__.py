"""Separation of variables for classical XXX and XXZ spin chains with
degenerate twist: Lax matrices, quadratic brackets, separated coordinates,
Abel equations, action-angle solutions and N=2 reconstruction maps."""

from ._kernels import BACKEND
from .errors import *  # noqa: F401,F403
from .model import ChainSpec, TwistMatrix

__version__ = "0.1.0"

__all__ = ["BACKEND", "ChainSpec", "TwistMatrix", "__version__"]
