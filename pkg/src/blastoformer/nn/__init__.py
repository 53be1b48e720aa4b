from .autodiff import GraphConsumedError, backprop, zero_grad
from .modules import Conv3x3, LayerNorm, Linear, fan_in_uniform
from .ops import (conv2d, layer_norm, linear, relu, rff_features, rope_apply,
                  softmax_attention, spectral_conv2d)
from .optim import OptimizerState, adamw_step, cosine_lr

__all__ = [
    "GraphConsumedError", "backprop", "zero_grad",
    "Conv3x3", "LayerNorm", "Linear", "fan_in_uniform",
    "conv2d", "layer_norm", "linear", "relu", "rff_features", "rope_apply",
    "softmax_attention", "spectral_conv2d",
    "OptimizerState", "adamw_step", "cosine_lr",
]
