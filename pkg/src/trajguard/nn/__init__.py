"""Differentiable substrate: model specs, parameters, forward pass, gradients, optimizers"""

from trajguard.nn.autodiff import GradientBundle, gradients
from trajguard.nn.functional import (
    cross_entropy_soft,
    forward,
    loss_from_outputs,
    mse_loss,
    predict_labels,
    softmax,
)
from trajguard.nn.optim import Optimizer, OptimizerConfig, optimizer_step
from trajguard.nn.params import ParamSet, check_params, clone_params, init_params, params_equal
from trajguard.nn.spec import LayerSpec, ModelSpec, build_model_spec

__all__ = [
    "GradientBundle",
    "LayerSpec",
    "ModelSpec",
    "Optimizer",
    "OptimizerConfig",
    "ParamSet",
    "build_model_spec",
    "check_params",
    "clone_params",
    "cross_entropy_soft",
    "forward",
    "gradients",
    "init_params",
    "loss_from_outputs",
    "mse_loss",
    "optimizer_step",
    "params_equal",
    "predict_labels",
    "softmax",
]
