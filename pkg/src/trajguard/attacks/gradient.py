"""White-box L-inf gradient attacks: FGSM, BIM and PGD."""

from typing import Optional, Union

import torch

from trajguard.attacks.base import (
    AttackSpec,
    IterateHook,
    ascent_direction,
    check_input,
    projected_step,
    random_start,
)
from trajguard.constants import AttackMethod
from trajguard.nn.params import ParamSet
from trajguard.nn.spec import ModelSpec


def fgsm(
    spec: ModelSpec,
    params: ParamSet,
    x: torch.Tensor,
    y: Union[int, float, torch.Tensor],
    epsilon: float,
    attack: Optional[AttackSpec] = None,
) -> torch.Tensor:
    """
    One-step attack ``clip01(x + epsilon * sign(grad_x L(x, y)))``.

    Args:
        spec: Model layout
        params: Target model parameters
        x: Clean example in [0, 1]
        y: True label (or regression target)
        epsilon: L-inf budget
        attack: Optional spec carrying targeted settings

    Returns:
        Adversarial example
    """
    check_input(spec, x)
    attack = attack or AttackSpec(method=AttackMethod.FGSM, epsilon=epsilon)
    x = x.detach()
    direction = ascent_direction(spec, params, x, y, attack)
    return projected_step(x, direction, x, epsilon, epsilon)


def pgd_attack(
    spec: ModelSpec,
    params: ParamSet,
    x: torch.Tensor,
    y: Union[int, float, torch.Tensor],
    attack: AttackSpec,
    on_iterate: Optional[IterateHook] = None,
) -> torch.Tensor:
    """
    Projected gradient descent in the L-inf ball (BIM without random start).

    Every iterate is projected into the ball intersected with [0, 1].
    ``on_iterate(step, x_adv)`` sees the start point (step 0) and each iterate.

    Args:
        spec: Model layout
        params: Target model parameters
        x: Clean example in [0, 1]
        y: True label (or regression target)
        attack: epsilon, alpha, steps, random start, targeting and seed

    Returns:
        Final iterate
    """
    check_input(spec, x)
    x = x.detach()
    x_adv = x.clone()
    if attack.uses_random_start and attack.epsilon > 0:
        generator = torch.Generator().manual_seed(attack.seed)
        x_adv = random_start(x, attack.epsilon, generator)
    if on_iterate is not None:
        on_iterate(0, x_adv)
    for step in range(1, attack.steps + 1):
        direction = ascent_direction(spec, params, x_adv, y, attack)
        x_adv = projected_step(x_adv, direction, x, attack.step_size, attack.epsilon)
        if on_iterate is not None:
            on_iterate(step, x_adv)
    return x_adv


def bim(
    spec: ModelSpec,
    params: ParamSet,
    x: torch.Tensor,
    y: Union[int, float, torch.Tensor],
    attack: AttackSpec,
    on_iterate: Optional[IterateHook] = None,
) -> torch.Tensor:
    """Iterative FGSM: PGD with the random start disabled."""
    return pgd_attack(spec, params, x, y, attack.model_copy(update={"random_start": False}), on_iterate)
