"""
Numeric Engine Module
Autodiff, MLP networks, Adam and the checkpoint codec.
"""

from .autodiff import ComputationGraph, Tensor, backward, forward_op, grad_l2_norm
from .nets import AdamState, MlpSpec, ParamSet, adam_step, build_mlp, mlp_spec
from .nets import forward_discriminator, forward_generator

__all__ = [
    'ComputationGraph',
    'Tensor',
    'backward',
    'forward_op',
    'grad_l2_norm',
    'AdamState',
    'MlpSpec',
    'ParamSet',
    'adam_step',
    'build_mlp',
    'mlp_spec',
    'forward_discriminator',
    'forward_generator',
]
