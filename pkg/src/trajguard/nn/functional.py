"""
Functional forward pass and losses.

``forward`` is pure with respect to its parameters: it reads the ParamSet and
never mutates it, so one ParamSet can serve concurrent callers.
"""

import math
from typing import Optional

import torch
import torch.nn.functional as F

from trajguard.constants import LOG_CLAMP_FLOOR, LayerKind, LossKind
from trajguard.exceptions import NonFiniteError, ShapeMismatchError
from trajguard.nn.params import ParamSet
from trajguard.nn.spec import LayerSpec, ModelSpec

_LOG_FLOOR = math.log(LOG_CLAMP_FLOOR)


def _param(params: ParamSet, layer: LayerSpec, suffix: str) -> torch.Tensor:
    name = f"{layer.name}.{suffix}"
    tensor = params.get(name)
    if tensor is None:
        raise ShapeMismatchError(f"missing parameter {name}", layer=layer.name)
    expected = layer.param_shapes()[name]
    if tuple(tensor.shape) != tuple(expected):
        raise ShapeMismatchError(
            f"{name} has shape {tuple(tensor.shape)}, expected {tuple(expected)}",
            layer=layer.name,
        )
    return tensor


def _lstm_cell(layer: LayerSpec, params: ParamSet, x: torch.Tensor) -> torch.Tensor:
    w_ih = _param(params, layer, "weight_ih")
    w_hh = _param(params, layer, "weight_hh")
    bias = _param(params, layer, "bias")
    batch, steps = x.shape[0], x.shape[1]
    hidden = layer.out_features
    h = x.new_zeros((batch, hidden))
    c = x.new_zeros((batch, hidden))
    for t in range(steps):
        gates = F.linear(x[:, t], w_ih, bias) + F.linear(h, w_hh)
        i, f, g, o = gates.chunk(4, dim=1)
        c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h = torch.sigmoid(o) * torch.tanh(c)
    return h


def _apply_layer(layer: LayerSpec, params: ParamSet, x: torch.Tensor) -> torch.Tensor:
    if layer.kind == LayerKind.DENSE:
        return F.linear(x, _param(params, layer, "weight"), _param(params, layer, "bias"))
    if layer.kind == LayerKind.CONV2D:
        return F.conv2d(
            x,
            _param(params, layer, "weight"),
            _param(params, layer, "bias"),
            stride=layer.stride,
            padding=layer.padding,
        )
    if layer.kind == LayerKind.LSTM:
        return _lstm_cell(layer, params, x)
    if layer.kind == LayerKind.RELU:
        return F.relu(x)
    if layer.kind == LayerKind.FLATTEN:
        return torch.flatten(x, start_dim=1)
    raise ShapeMismatchError(f"unsupported layer kind {layer.kind}", layer=layer.name)


def forward(spec: ModelSpec, params: ParamSet, x: torch.Tensor) -> torch.Tensor:
    """
    Evaluate the model.

    Args:
        spec: Model layout
        params: Parameters matching ``spec``
        x: One example shaped ``spec.input_shape`` or a batch ``(N, *input_shape)``

    Returns:
        Pre-softmax logits (classification) or predictions (regression),
        shaped ``(C,)`` or ``(N, C)`` to match the input

    Raises:
        ShapeMismatchError: input or parameter shapes disagree with ``spec``
        NonFiniteError: a layer produced NaN/Inf
    """
    input_shape = tuple(spec.input_shape)
    single = tuple(x.shape) == input_shape
    if not single and tuple(x.shape[1:]) != input_shape:
        raise ShapeMismatchError(
            f"input shape {tuple(x.shape)} does not match {input_shape} or (N, *{input_shape})",
            layer="input",
        )
    out = x.unsqueeze(0) if single else x
    for layer in spec.layers:
        out = _apply_layer(layer, params, out)
        if not bool(torch.isfinite(out).all()):
            raise NonFiniteError("non-finite activation", location=layer.name)
    return out.squeeze(0) if single else out


def softmax(logits: torch.Tensor) -> torch.Tensor:
    """
    Max-stabilized softmax over the last axis.

    Raises:
        ValueError: empty logits
    """
    if logits.numel() == 0 or logits.shape[-1] == 0:
        raise ValueError("softmax of an empty vector")
    shifted = logits - logits.max(dim=-1, keepdim=True).values.detach()
    return torch.softmax(shifted, dim=-1)


def cross_entropy_soft(target_probs: torch.Tensor, predicted_probs: torch.Tensor) -> torch.Tensor:
    """
    Soft-label cross-entropy ``-sum_c p_c ln(max(q_c, 1e-12))`` over the last axis.

    Accumulates in float64. Returns a 0-d tensor for vectors, ``(N,)`` for batches.

    Raises:
        ShapeMismatchError: length mismatch
    """
    if target_probs.shape != predicted_probs.shape:
        raise ShapeMismatchError(
            f"cross-entropy operands differ: {tuple(target_probs.shape)} vs "
            f"{tuple(predicted_probs.shape)}",
            layer="loss",
        )
    p = target_probs.to(torch.float64)
    q = predicted_probs.to(torch.float64).clamp_min(LOG_CLAMP_FLOOR)
    return -(p * torch.log(q)).sum(dim=-1)


def mse_loss(target: torch.Tensor, predicted: torch.Tensor, dim: Optional[int] = None) -> torch.Tensor:
    """
    Mean squared error, accumulated in float64.

    Args:
        target: Reference values
        predicted: Predictions, same shape as ``target``
        dim: Reduce only this axis (per-example losses); all elements when None

    Raises:
        ShapeMismatchError: shape mismatch
    """
    if target.shape != predicted.shape:
        raise ShapeMismatchError(
            f"mse operands differ: {tuple(target.shape)} vs {tuple(predicted.shape)}",
            layer="loss",
        )
    diff = predicted.to(torch.float64) - target.to(torch.float64)
    if dim is None:
        return (diff * diff).mean()
    return (diff * diff).mean(dim=dim)


def loss_from_outputs(
    kind: LossKind,
    outputs: torch.Tensor,
    target: torch.Tensor,
    reduction: str = "mean",
) -> torch.Tensor:
    """
    Per-batch loss on raw model outputs.

    Args:
        kind: hard (integer labels), soft (probability targets) or mse
        outputs: Logits or predictions, ``(C,)`` or ``(N, C)``
        target: Labels ``()``/``(N,)``, probabilities, or regression targets
        reduction: "mean" or "sum" over the batch

    Returns:
        0-d float64 tensor
    """
    if outputs.dim() == 1:
        outputs = outputs.unsqueeze(0)
        target = target.unsqueeze(0)

    if kind == LossKind.HARD:
        if target.dim() != 1 or target.shape[0] != outputs.shape[0]:
            raise ShapeMismatchError(
                f"hard labels {tuple(target.shape)} do not match outputs {tuple(outputs.shape)}",
                layer="loss",
            )
        log_probs = F.log_softmax(outputs.to(torch.float64), dim=-1).clamp_min(_LOG_FLOOR)
        per_example = -log_probs.gather(1, target.long().unsqueeze(1)).squeeze(1)
    elif kind == LossKind.SOFT:
        per_example = cross_entropy_soft(target, softmax(outputs))
    elif kind == LossKind.MSE:
        per_example = mse_loss(target.reshape(outputs.shape), outputs, dim=-1)
    else:
        raise ValueError(f"Unknown loss kind {kind}")

    if reduction == "sum":
        return per_example.sum()
    if reduction == "mean":
        return per_example.mean()
    raise ValueError(f"Unknown reduction {reduction}")


def predict_labels(spec: ModelSpec, params: ParamSet, x: torch.Tensor) -> torch.Tensor:
    """argmax class per example (batched input)."""
    with torch.no_grad():
        return forward(spec, params, x).argmax(dim=-1)
