"""SGD/Adam steps over a ParamSet, backed by torch.optim."""

import copy
import logging
from typing import Optional, Tuple

import torch
from pydantic import BaseModel, ConfigDict, Field

from trajguard.constants import OptimizerKind
from trajguard.exceptions import NonFiniteError, ShapeMismatchError
from trajguard.nn.autodiff import GradientBundle
from trajguard.nn.params import ParamSet

logger = logging.getLogger(__name__)


class OptimizerConfig(BaseModel):
    """Optimizer hyperparameters"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    method: OptimizerKind = OptimizerKind.ADAM
    lr: float = Field(default=1e-2, ge=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(default=1e-8, gt=0)
    weight_decay: float = Field(default=0.0, ge=0)


class Optimizer:
    """
    Stateful optimizer bound to one ParamSet.

    The ParamSet tensors are updated in place; callers snapshot with
    ``clone_params`` when they need an immutable copy.
    """

    def __init__(self, params: ParamSet, config: OptimizerConfig):
        self.config = config
        self.params = params
        for tensor in params.values():
            tensor.requires_grad_(False)
        tensors = list(params.values())
        if config.method == OptimizerKind.SGD:
            self._inner = torch.optim.SGD(
                tensors, lr=config.lr, weight_decay=config.weight_decay, foreach=False
            )
        else:
            self._inner = torch.optim.Adam(
                tensors,
                lr=config.lr,
                betas=config.betas,
                eps=config.eps,
                weight_decay=config.weight_decay,
                foreach=False,
            )
        self.step_count = 0

    def step(self, grads: GradientBundle) -> ParamSet:
        """
        Apply one update.

        A non-finite update is rolled back: parameters, moments and
        ``step_count`` keep their values from before the call.

        Raises:
            ShapeMismatchError: gradient keys/shapes differ from the parameters
            NonFiniteError: the update produced NaN/Inf
        """
        for name, tensor in self.params.items():
            grad = grads.params.get(name)
            if grad is None or grad.shape != tensor.shape:
                raise ShapeMismatchError(f"no matching gradient for {name}", layer=name.split(".")[0])

        previous = {name: tensor.detach().clone() for name, tensor in self.params.items()}
        state = copy.deepcopy(self._inner.state_dict())
        for name, tensor in self.params.items():
            tensor.grad = grads.params[name].detach().to(tensor.dtype).clone()
        with torch.no_grad():
            self._inner.step()
        self._inner.zero_grad(set_to_none=True)

        for name, tensor in self.params.items():
            if not bool(torch.isfinite(tensor).all()):
                with torch.no_grad():
                    for key, value in previous.items():
                        self.params[key].copy_(value)
                self._inner.load_state_dict(state)
                raise NonFiniteError(
                    f"non-finite parameters at step {self.step_count + 1}",
                    location=name.split(".")[0],
                )
        self.step_count += 1
        return self.params

    def state_dict(self) -> dict:
        return self._inner.state_dict()


def optimizer_step(
    params: ParamSet,
    grads: GradientBundle,
    config: OptimizerConfig,
    optimizer: Optional[Optimizer] = None,
) -> Tuple[ParamSet, Optimizer]:
    """
    One optimizer step that leaves the input ParamSet untouched.

    Args:
        params: Current parameters (not modified when ``optimizer`` is None)
        grads: Gradients for ``params``
        config: Optimizer hyperparameters
        optimizer: State from a previous call; bound to its own ParamSet

    Returns:
        (updated ParamSet, optimizer carrying the moment estimates)
    """
    if optimizer is None:
        optimizer = Optimizer({name: t.detach().clone() for name, t in params.items()}, config)
    else:
        with torch.no_grad():
            for name, tensor in optimizer.params.items():
                tensor.copy_(params[name])
    updated = optimizer.step(grads)
    return {name: t.detach().clone() for name, t in updated.items()}, optimizer
