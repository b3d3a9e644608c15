"""
Parameter sets.

A ParamSet is an insertion-ordered ``Dict[str, torch.Tensor]`` whose keys and
shapes follow ``ModelSpec.param_shapes()``.
"""

import math
from typing import Dict, Optional

import torch

from trajguard.constants import LayerKind
from trajguard.exceptions import ShapeMismatchError
from trajguard.nn.spec import LayerSpec, ModelSpec

ParamSet = Dict[str, torch.Tensor]


def _followed_by_relu(spec: ModelSpec, index: int) -> bool:
    for layer in spec.layers[index + 1:]:
        if layer.kind == LayerKind.RELU:
            return True
        if layer.kind != LayerKind.FLATTEN:
            return False
    return False


def _fans(layer: LayerSpec, shape) -> tuple:
    if layer.kind == LayerKind.CONV2D:
        receptive = shape[2] * shape[3]
        return shape[1] * receptive, shape[0] * receptive
    return shape[1], shape[0]


def init_params(
    spec: ModelSpec,
    seed: int = 0,
    dtype: torch.dtype = torch.float32,
    generator: Optional[torch.Generator] = None,
) -> ParamSet:
    """
    Seeded initialization.

    Weights feeding a relu use Kaiming-uniform (bound sqrt(6 / fan_in)), all
    other weights Glorot-uniform (bound sqrt(6 / (fan_in + fan_out))). Biases
    start at zero.

    Args:
        spec: Model layout
        seed: PRNG seed (ignored when a generator is given)
        dtype: Parameter dtype
        generator: Optional torch.Generator to draw from

    Returns:
        Freshly initialized ParamSet
    """
    gen = generator if generator is not None else torch.Generator().manual_seed(seed)
    params: ParamSet = {}
    for index, layer in enumerate(spec.layers):
        relu_next = _followed_by_relu(spec, index)
        for name, shape in layer.param_shapes().items():
            tensor = torch.zeros(shape, dtype=dtype)
            if not name.endswith("bias"):
                fan_in, fan_out = _fans(layer, shape)
                if relu_next:
                    bound = math.sqrt(6.0 / fan_in)
                else:
                    bound = math.sqrt(6.0 / (fan_in + fan_out))
                tensor.uniform_(-bound, bound, generator=gen)
            params[name] = tensor
    return params


def check_params(spec: ModelSpec, params: ParamSet) -> None:
    """
    Verify a ParamSet against its ModelSpec.

    Raises:
        ShapeMismatchError: missing, unexpected or misshapen tensors
    """
    expected = spec.param_shapes()
    unexpected = sorted(set(params) - set(expected))
    if unexpected:
        raise ShapeMismatchError(f"unexpected parameters {unexpected}", layer=unexpected[0].split(".")[0])
    for name, shape in expected.items():
        if name not in params:
            raise ShapeMismatchError(f"missing parameter {name}", layer=name.split(".")[0])
        if tuple(params[name].shape) != tuple(shape):
            raise ShapeMismatchError(
                f"{name} has shape {tuple(params[name].shape)}, expected {tuple(shape)}",
                layer=name.split(".")[0],
            )


def clone_params(params: ParamSet) -> ParamSet:
    """Detached deep copy preserving key order."""
    return {name: tensor.detach().clone() for name, tensor in params.items()}


def params_equal(a: ParamSet, b: ParamSet) -> bool:
    """Bitwise equality of two ParamSets (same keys, order-insensitive)."""
    if a.keys() != b.keys():
        return False
    return all(
        a[name].dtype == b[name].dtype
        and a[name].shape == b[name].shape
        and a[name].detach().contiguous().numpy().tobytes()
        == b[name].detach().contiguous().numpy().tobytes()
        for name in a
    )
