"""Shared attack types: configuration, results, loss direction and projection."""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from trajguard.constants import (
    BALL_TOLERANCE,
    DEFAULT_PGD_STEPS,
    DEFAULT_REGRESSION_TOLERANCE,
    AttackMethod,
    GradTarget,
    TaskKind,
)
from trajguard.exceptions import AttackError
from trajguard.nn.autodiff import gradients
from trajguard.nn.functional import forward
from trajguard.nn.params import ParamSet
from trajguard.nn.spec import ModelSpec
from trajguard.training.trainer import loss_kind_for

IterateHook = Callable[[int, torch.Tensor], None]


class AttackSpec(BaseModel):
    """How one adversarial example is crafted"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    method: AttackMethod = AttackMethod.PGD
    epsilon: float = Field(default=0.1, ge=0, description="L-inf budget in feature scale")
    alpha: Optional[float] = Field(default=None, gt=0, description="step size, epsilon/4 when unset")
    steps: int = Field(default=DEFAULT_PGD_STEPS, ge=1)
    random_start: Optional[bool] = None
    targeted: bool = False
    target: Optional[float] = None
    seed: int = 0
    tolerance: float = Field(default=DEFAULT_REGRESSION_TOLERANCE, gt=0)
    boundary_steps: int = Field(default=2000, ge=0)
    boundary_draws: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def _check_target(self) -> "AttackSpec":
        if self.targeted and self.target is None:
            raise ValueError("targeted attacks need a target label or value")
        return self

    @property
    def step_size(self) -> float:
        return self.alpha if self.alpha is not None else self.epsilon / 4.0

    @property
    def uses_random_start(self) -> bool:
        if self.random_start is not None:
            return self.random_start
        return self.method in (AttackMethod.PGD, AttackMethod.ADAPTIVE)


@dataclass
class AttackResult:
    """Outcome of one attack on one example"""

    x_adv: torch.Tensor
    success: bool
    reason: Optional[str] = None
    queries: int = 0
    distances: List[float] = field(default_factory=list)


def project(candidate: torch.Tensor, x: torch.Tensor, epsilon: float) -> torch.Tensor:
    """Clip into the L-inf ball around ``x`` and then into [0, 1]."""
    return torch.clamp(torch.clamp(candidate, x - epsilon, x + epsilon), 0.0, 1.0)


def projected_step(
    x_adv: torch.Tensor, direction: torch.Tensor, x: torch.Tensor, alpha: float, epsilon: float
) -> torch.Tensor:
    """One signed ascent step followed by projection."""
    return project(x_adv + alpha * torch.sign(direction), x, epsilon)


def within_ball(x_adv: torch.Tensor, x: torch.Tensor, epsilon: float) -> bool:
    if x.numel() == 0:
        return True
    inside = float((x_adv - x).abs().max()) <= epsilon + BALL_TOLERANCE
    return inside and float(x_adv.min()) >= 0.0 and float(x_adv.max()) <= 1.0


def label_tensor(spec: ModelSpec, value: Union[int, float, torch.Tensor]) -> torch.Tensor:
    if spec.task == TaskKind.CLASSIFICATION:
        return torch.as_tensor(value, dtype=torch.int64).reshape(())
    return torch.as_tensor(value, dtype=torch.float32).reshape((spec.output_dim,))


def ascent_direction(
    spec: ModelSpec,
    params: ParamSet,
    x_adv: torch.Tensor,
    y: Union[int, float, torch.Tensor],
    attack: AttackSpec,
) -> torch.Tensor:
    """
    Gradient whose sign moves ``x_adv`` toward a successful attack.

    Untargeted: ascend the loss on the true label/value. Targeted: descend the
    loss on the target, returned negated so callers always step along +sign.
    Losses are summed, never averaged.
    """
    kind = loss_kind_for(spec.task)
    reference = label_tensor(spec, attack.target if attack.targeted else y)
    bundle = gradients(spec, params, x_adv, kind, reference, wrt=GradTarget.INPUT, reduction="sum")
    return -bundle.input if attack.targeted else bundle.input


def is_adversarial(
    spec: ModelSpec,
    params: ParamSet,
    x: torch.Tensor,
    x_adv: torch.Tensor,
    y: Union[int, float, torch.Tensor],
    attack: AttackSpec,
    clean_output: Optional[torch.Tensor] = None,
) -> bool:
    """
    Success rule of every attack.

    Classification: argmax differs from ``y`` (targeted: equals the target).
    Regression: prediction moved by more than ``tolerance`` relative to the
    clean prediction (targeted: lands within ``tolerance`` of the target).
    """
    with torch.no_grad():
        out = forward(spec, params, x_adv)
        if spec.task == TaskKind.CLASSIFICATION:
            predicted = int(out.argmax(dim=-1))
            if attack.targeted:
                return predicted == int(attack.target)
            return predicted != int(label_tensor(spec, y))
        if attack.targeted:
            goal = torch.full_like(out, float(attack.target))
            band = attack.tolerance * goal.abs().clamp_min(1e-8)
            return bool(((out - goal).abs() <= band).all())
        clean = clean_output if clean_output is not None else forward(spec, params, x)
        band = attack.tolerance * clean.abs().clamp_min(1e-8)
        return bool(((out - clean).abs() > band).any())


def random_start(x: torch.Tensor, epsilon: float, generator: torch.Generator) -> torch.Tensor:
    noise = torch.empty_like(x).uniform_(-epsilon, epsilon, generator=generator)
    return project(x + noise, x, epsilon)


def check_input(spec: ModelSpec, x: torch.Tensor) -> None:
    if tuple(x.shape) != tuple(spec.input_shape):
        raise AttackError(f"attacks take one example shaped {tuple(spec.input_shape)}, got {tuple(x.shape)}")
