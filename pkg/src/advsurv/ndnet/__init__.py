"""Minimal dense-network core: reverse-mode autodiff, layers, Adam, checkpoints."""
from .autograd import NonFiniteError, Parameter, Tensor, concat, grad_of, zero_grad
from .checkpoint import load_arrays, save_arrays
from .layers import MLP, BatchNormLayer, DenseLayer, dropout, xavier_init
from .optim import Adam

__all__ = [
    "Adam",
    "BatchNormLayer",
    "DenseLayer",
    "MLP",
    "NonFiniteError",
    "Parameter",
    "Tensor",
    "concat",
    "dropout",
    "grad_of",
    "load_arrays",
    "save_arrays",
    "xavier_init",
    "zero_grad",
]
