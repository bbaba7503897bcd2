"""
Reverse-mode automatic differentiation over numpy arrays
"""

from . import ops
from .optim import Adam, adam_step, clip_grad_norm, glorot_uniform
from .tensor import Parameter, Tape, Tensor, backward, zero_grad
