"""Reverse-mode gradients of a loss with respect to parameters and/or input."""

from dataclasses import dataclass, field
from typing import Optional, Union

import torch

from trajguard.constants import GradTarget, LossKind
from trajguard.exceptions import NonFiniteError
from trajguard.nn.functional import forward, loss_from_outputs
from trajguard.nn.params import ParamSet
from trajguard.nn.spec import ModelSpec


@dataclass
class GradientBundle:
    """Gradients mirroring their targets: same keys/shapes as the ParamSet, same shape as x."""

    params: ParamSet = field(default_factory=dict)
    input: Optional[torch.Tensor] = None
    loss: float = 0.0


def gradients(
    spec: ModelSpec,
    params: ParamSet,
    x: torch.Tensor,
    loss_kind: Union[LossKind, str],
    loss_target: torch.Tensor,
    wrt: Union[GradTarget, str] = GradTarget.PARAMS,
    reduction: str = "mean",
) -> GradientBundle:
    """
    Differentiate ``loss(forward(spec, params, x), loss_target)``.

    ``params`` and ``x`` are never modified; gradients are taken on detached
    copies.

    Args:
        spec: Model layout
        params: Parameters
        x: Single example or batch
        loss_kind: hard, soft or mse
        loss_target: Labels, probability targets or regression targets
        wrt: params, input or both
        reduction: Batch reduction of the loss ("mean" or "sum")

    Returns:
        GradientBundle with the requested gradients and the loss value

    Raises:
        NonFiniteError: non-finite loss or gradient
    """
    loss_kind = LossKind(loss_kind)
    wrt = GradTarget(wrt)
    want_params = wrt in (GradTarget.PARAMS, GradTarget.BOTH)
    want_input = wrt in (GradTarget.INPUT, GradTarget.BOTH)

    leaves = {name: tensor.detach().requires_grad_(want_params) for name, tensor in params.items()}
    x_leaf = x.detach().clone().requires_grad_(want_input)

    with torch.enable_grad():
        outputs = forward(spec, leaves, x_leaf)
        loss = loss_from_outputs(loss_kind, outputs, loss_target, reduction=reduction)
        if not bool(torch.isfinite(loss)):
            raise NonFiniteError(f"loss is {loss.item()}", location=spec.layers[-1].name)

        targets = []
        if want_params:
            targets.extend(leaves.values())
        if want_input:
            targets.append(x_leaf)
        grads = torch.autograd.grad(loss, targets, allow_unused=True)

    bundle = GradientBundle(loss=float(loss.item()))
    names = list(leaves) if want_params else []
    for name, grad in zip(names, grads):
        bundle.params[name] = torch.zeros_like(leaves[name]) if grad is None else grad.detach()
    if want_input:
        grad = grads[-1]
        bundle.input = torch.zeros_like(x_leaf) if grad is None else grad.detach()

    for name, grad in bundle.params.items():
        if not bool(torch.isfinite(grad).all()):
            raise NonFiniteError("non-finite parameter gradient", location=name.split(".")[0])
    if bundle.input is not None and not bool(torch.isfinite(bundle.input).all()):
        raise NonFiniteError("non-finite input gradient", location="input")
    return bundle
