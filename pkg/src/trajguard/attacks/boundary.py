"""
Decision-based boundary attack.

Uses label queries only. Starts from a random adversarial draw pulled toward
the clean input by binary search, then walks along the decision boundary with
an orthogonal (spherical) step followed by a step toward the clean input.
"""

import logging
from typing import Optional, Union

import torch

from trajguard.attacks.base import AttackResult, AttackSpec, check_input, is_adversarial
from trajguard.constants import AttackMethod
from trajguard.exceptions import NoAdversarialStartError
from trajguard.nn.functional import forward
from trajguard.nn.params import ParamSet
from trajguard.nn.spec import ModelSpec

logger = logging.getLogger(__name__)

SPHERICAL_STEP = 0.01
SOURCE_STEP = 0.01
SOURCE_STEP_GROWTH = 1.1
MAX_SOURCE_STEP = 0.5
REJECTION_STREAK = 10
BINARY_SEARCH_ROUNDS = 10


class _Oracle:
    """Counts label queries."""

    def __init__(self, spec, params, x, y, attack):
        self.spec = spec
        self.params = params
        self.x = x
        self.y = y
        self.attack = attack
        self.queries = 0
        with torch.no_grad():
            self.clean_output = forward(spec, params, x)

    def __call__(self, candidate: torch.Tensor) -> bool:
        self.queries += 1
        return is_adversarial(
            self.spec, self.params, self.x, candidate, self.y, self.attack, self.clean_output
        )


def _starting_point(oracle: _Oracle, draws: int, generator: torch.Generator) -> torch.Tensor:
    x = oracle.x
    for _ in range(draws):
        candidate = torch.rand(x.shape, generator=generator, dtype=x.dtype)
        if oracle(candidate):
            break
    else:
        raise NoAdversarialStartError(f"no adversarial point among {draws} random draws")

    low, high = 0.0, 1.0  # blend weight on the candidate
    for _ in range(BINARY_SEARCH_ROUNDS):
        mid = (low + high) / 2.0
        if oracle((1.0 - mid) * x + mid * candidate):
            high = mid
        else:
            low = mid
    return ((1.0 - high) * x + high * candidate).clamp(0.0, 1.0)


def boundary_attack(
    spec: ModelSpec,
    params: ParamSet,
    x: torch.Tensor,
    y: Union[int, float, torch.Tensor],
    steps: int,
    seed: int,
    attack: Optional[AttackSpec] = None,
) -> AttackResult:
    """
    Minimize the L2 distance to ``x`` while staying adversarial.

    A candidate is accepted only when it is adversarial and no farther from
    ``x`` than the current point. Both step sizes halve after
    ``REJECTION_STREAK`` consecutive rejections; the source step grows on
    acceptance.

    Args:
        spec: Model layout
        params: Target model parameters
        x: Clean example
        y: True label (or regression target)
        steps: Walk iterations; 0 returns the starting point
        seed: Seeds start draws and spherical directions
        attack: Optional spec for targeting, tolerance and start-draw budget

    Returns:
        AttackResult with the accepted-iterate distance history; success=False
        and a reason when no adversarial start exists
    """
    check_input(spec, x)
    attack = attack or AttackSpec(method=AttackMethod.BOUNDARY, boundary_steps=steps, seed=seed)
    x = x.detach()
    oracle = _Oracle(spec, params, x, y, attack)
    generator = torch.Generator().manual_seed(seed)

    try:
        current = _starting_point(oracle, attack.boundary_draws, generator)
    except NoAdversarialStartError as e:
        logger.debug("Boundary attack found no start: %s", e)
        return AttackResult(x_adv=x.clone(), success=False, reason=str(e), queries=oracle.queries)

    distance = float(torch.linalg.vector_norm(current - x))
    distances = [distance]
    spherical, source = SPHERICAL_STEP, SOURCE_STEP
    streak = 0
    for _ in range(steps):
        diff = x - current
        norm = float(torch.linalg.vector_norm(diff))
        if norm == 0.0:
            break
        unit = diff / norm

        eta = torch.randn(x.shape, generator=generator, dtype=x.dtype)
        eta = eta - (eta * unit).sum() * unit
        eta_norm = float(torch.linalg.vector_norm(eta))
        if eta_norm > 0.0:
            eta = eta * (spherical * norm / eta_norm)
        candidate = current + eta
        offset = candidate - x
        candidate = x + offset * (norm / float(torch.linalg.vector_norm(offset)))
        candidate = (candidate + source * (x - candidate)).clamp(0.0, 1.0)

        candidate_distance = float(torch.linalg.vector_norm(candidate - x))
        if candidate_distance <= distance and oracle(candidate):
            current, distance = candidate, candidate_distance
            distances.append(distance)
            source = min(source * SOURCE_STEP_GROWTH, MAX_SOURCE_STEP)
            streak = 0
        else:
            streak += 1
            if streak >= REJECTION_STREAK:
                spherical /= 2.0
                source /= 2.0
                streak = 0

    return AttackResult(x_adv=current, success=True, queries=oracle.queries, distances=distances)
