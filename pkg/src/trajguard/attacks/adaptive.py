"""
Trajectory-regularized adaptive attack.

Minimizes ``-L_adv(x') + lambda * D(x')`` inside the epsilon ball, where
``L_adv`` is the target model's loss on the true label and ``D`` is the
squared distance between the trajectories of ``x'`` and the clean ``x``.
Gradients of ``D`` flow exactly through every intermediate-model forward.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field

from trajguard.attacks.base import (
    AttackSpec,
    IterateHook,
    ascent_direction,
    check_input,
    is_adversarial,
    label_tensor,
    project,
    projected_step,
    random_start,
)
from trajguard.attacks.gradient import fgsm
from trajguard.constants import (
    DEFAULT_LAMBDA,
    DEFAULT_TAU,
    DistanceNormalization,
    ImSource,
    SyntheticLabel,
    TrajectoryMode,
)
from trajguard.exceptions import AttackError, DegenerateNormalizationError, NonFiniteError
from trajguard.nn.functional import forward, loss_from_outputs
from trajguard.storage.checkpoints import CheckpointSet
from trajguard.training.trainer import loss_kind_for
from trajguard.trajectory.extract import LossTrajectory, synthetic_losses

logger = logging.getLogger(__name__)

TrajectoryLike = Union[LossTrajectory, np.ndarray, Sequence[float], torch.Tensor]


class AdaptiveConfig(BaseModel):
    """Regularization settings of the adaptive attack"""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    lambda_: float = Field(default=DEFAULT_LAMBDA, ge=0, alias="lambda")
    tau: float = Field(default=DEFAULT_TAU, gt=0, description="acceptance threshold on raw distance")
    im_source: ImSource = ImSource.DEFENDER
    inner_iterations: Optional[int] = Field(default=None, ge=1, description="overrides attack.steps")
    normalization: DistanceNormalization = DistanceNormalization.MINMAX
    corner_samples: int = Field(default=4, ge=0)
    mode: TrajectoryMode = TrajectoryMode.TARGET_ANCHORED
    label: SyntheticLabel = SyntheticLabel.SOFT


@dataclass
class AdaptiveResult:
    """Adaptive attack outcome"""

    x_adv: torch.Tensor
    success: bool
    raw_distance: float
    normalized_distance: Optional[float] = None
    reason: Optional[str] = None
    objectives: List[float] = field(default_factory=list)
    accepted_steps: List[int] = field(default_factory=list)
    iterates: List[torch.Tensor] = field(default_factory=list)
    defender_raw_distance: Optional[float] = None


def _values(t: TrajectoryLike) -> np.ndarray:
    if isinstance(t, LossTrajectory):
        return t.values
    if isinstance(t, torch.Tensor):
        return t.detach().to(torch.float64).numpy()
    return np.asarray(t, dtype=np.float64)


def trajectory_distance(
    t1: TrajectoryLike,
    t2: TrajectoryLike,
    normalization: DistanceNormalization = DistanceNormalization.RAW,
    stats: Optional[Tuple[float, float]] = None,
) -> float:
    """
    Squared trajectory distance, optionally min-max normalized.

    Args:
        t1, t2: Trajectories of equal length
        normalization: raw or minmax
        stats: (Dist_min, Dist_max) of the current run, required for minmax

    Raises:
        AttackError: length mismatch or missing statistics
        DegenerateNormalizationError: Dist_max == Dist_min
    """
    a, b = _values(t1), _values(t2)
    if a.shape != b.shape:
        raise AttackError(f"trajectory lengths differ: {a.shape[0]} vs {b.shape[0]}")
    raw = float(np.sum((a - b) ** 2))
    if DistanceNormalization(normalization) == DistanceNormalization.RAW:
        return raw
    if stats is None:
        raise AttackError("minmax normalization needs (Dist_min, Dist_max) statistics")
    low, high = stats
    if high == low:
        raise DegenerateNormalizationError(f"Dist_max == Dist_min == {low}")
    return (raw - low) / (high - low)


def minmax_stats(raw_distances: Sequence[float]) -> Tuple[float, float]:
    """
    (min, max) of a candidate set.

    Raises:
        DegenerateNormalizationError: all candidates at the same distance
    """
    values = np.asarray(raw_distances, dtype=np.float64)
    if values.size == 0:
        raise AttackError("no candidate distances")
    low, high = float(values.min()), float(values.max())
    if high == low:
        raise DegenerateNormalizationError(f"all {values.size} candidates at distance {low}")
    return low, high


def normalize_distances(raw_distances: Sequence[float]) -> np.ndarray:
    """Min-max normalize a batch of raw distances into [0, 1]."""
    low, high = minmax_stats(raw_distances)
    return (np.asarray(raw_distances, dtype=np.float64) - low) / (high - low)


class _Objective:
    """J(x') = -L_adv(x') + lambda * D(x') with frozen normalization."""

    def __init__(self, defender, source, x, y, attack, cfg):
        self.spec = defender.spec
        self.params = defender.target
        self.source = source
        self.attack = attack
        self.cfg = cfg
        self.kind = loss_kind_for(self.spec.task)
        self.reference_label = label_tensor(self.spec, attack.target if attack.targeted else y)
        with torch.no_grad():
            self.reference = synthetic_losses(source, x, cfg.mode, cfg.label)
        self.stats: Optional[Tuple[float, float]] = None

    def raw_distance(self, x_adv: torch.Tensor) -> torch.Tensor:
        diff = synthetic_losses(self.source, x_adv, self.cfg.mode, self.cfg.label) - self.reference
        return (diff * diff).sum()

    def distance_term(self, raw: torch.Tensor) -> torch.Tensor:
        if self.stats is None:
            return raw
        low, high = self.stats
        return (raw - low) / (high - low)

    def adversarial_loss(self, x_adv: torch.Tensor) -> torch.Tensor:
        outputs = forward(self.spec, self.params, x_adv)
        loss = loss_from_outputs(self.kind, outputs, self.reference_label, reduction="sum")
        return -loss if self.attack.targeted else loss

    def value(self, x_adv: torch.Tensor) -> Tuple[float, float]:
        """(J, raw distance) without gradients"""
        with torch.no_grad():
            raw = self.raw_distance(x_adv)
            total = -self.adversarial_loss(x_adv)
            if self.cfg.lambda_ > 0:
                total = total + self.cfg.lambda_ * self.distance_term(raw)
        if not bool(torch.isfinite(total)):
            raise NonFiniteError("combined objective is not finite", location="adaptive")
        return float(total), float(raw)

    def descent_direction(self, x_adv: torch.Tensor, y) -> torch.Tensor:
        """-grad J, so steps follow +sign like every other attack."""
        if self.cfg.lambda_ == 0:
            return ascent_direction(self.spec, self.params, x_adv, y, self.attack)
        leaf = x_adv.detach().clone().requires_grad_(True)
        with torch.enable_grad():
            total = -self.adversarial_loss(leaf) + self.cfg.lambda_ * self.distance_term(self.raw_distance(leaf))
            if not bool(torch.isfinite(total)):
                raise NonFiniteError("combined objective is not finite", location="adaptive")
            (grad,) = torch.autograd.grad(total, leaf)
        if not bool(torch.isfinite(grad).all()):
            raise NonFiniteError("non-finite gradient of the combined objective", location="input")
        return -grad


def _freeze_normalization(objective: _Objective, x: torch.Tensor, y, attack, generator) -> None:
    candidates = [x, fgsm(objective.spec, objective.params, x, y, attack.epsilon, attack)]
    for _ in range(objective.cfg.corner_samples):
        signs = torch.randint(0, 2, x.shape, generator=generator).to(x.dtype) * 2 - 1
        candidates.append(project(x + attack.epsilon * signs, x, attack.epsilon))
    with torch.no_grad():
        raw = [float(objective.raw_distance(c)) for c in candidates]
    try:
        objective.stats = minmax_stats(raw)
    except DegenerateNormalizationError as e:
        logger.warning("Falling back to raw trajectory distance: %s", e)
        objective.stats = None


def adaptive_attack(
    checkpoints: CheckpointSet,
    x: torch.Tensor,
    y: Union[int, float, torch.Tensor],
    attack: AttackSpec,
    cfg: AdaptiveConfig,
    target_checkpoints: Optional[CheckpointSet] = None,
    on_iterate: Optional[IterateHook] = None,
) -> AdaptiveResult:
    """
    Craft an adversarial example whose trajectory mimics the clean one.

    The iterate walk is a PGD walk on the combined objective (random start
    and step schedule as ``pgd_attack``). An iterate is accepted only when the
    objective drops below every previously accepted value. The returned point
    is the latest accepted iterate that fools the defender's target model with
    raw distance <= tau; otherwise the best accepted iterate with
    ``success=False``. With ``lambda=0`` the walk is plain PGD and the final
    iterate is returned, bitwise equal to ``pgd_attack``; success then only
    requires fooling the target model.

    Args:
        checkpoints: IMs the attacker differentiates through (defender's or surrogate)
        x: Clean, correctly classified example
        y: True label (or regression target)
        attack: epsilon, alpha, steps, random start, seed
        cfg: lambda, tau, normalization
        target_checkpoints: Defender's set when ``checkpoints`` are surrogate IMs

    Raises:
        NonFiniteError: combined objective or its gradient not finite
    """
    defender = target_checkpoints or checkpoints
    spec = defender.spec
    check_input(spec, x)
    x = x.detach()
    steps = cfg.inner_iterations or attack.steps
    objective = _Objective(defender, checkpoints, x, y, attack, cfg)

    generator = torch.Generator().manual_seed(attack.seed)
    x_adv = x.clone()
    if attack.uses_random_start and attack.epsilon > 0:
        x_adv = random_start(x, attack.epsilon, generator)
    if cfg.lambda_ > 0 and cfg.normalization == DistanceNormalization.MINMAX:
        _freeze_normalization(objective, x, y, attack, torch.Generator().manual_seed(attack.seed + 1))

    def succeeded(candidate: torch.Tensor, raw: float) -> bool:
        return raw <= cfg.tau and is_adversarial(spec, defender.target, x, candidate, y, attack)

    iterates = [x_adv]
    if on_iterate is not None:
        on_iterate(0, x_adv)
    best_value, best_raw = objective.value(x_adv)
    accepted = [(0, x_adv, best_value, best_raw)]
    chosen = accepted[0] if succeeded(x_adv, best_raw) else None

    for step in range(1, steps + 1):
        direction = objective.descent_direction(x_adv, y)
        x_adv = projected_step(x_adv, direction, x, attack.step_size, attack.epsilon)
        iterates.append(x_adv)
        if on_iterate is not None:
            on_iterate(step, x_adv)
        value, raw = objective.value(x_adv)
        if value < best_value:
            best_value = value
            accepted.append((step, x_adv, value, raw))
            if succeeded(x_adv, raw):
                chosen = accepted[-1]

    if cfg.lambda_ == 0:
        _, raw = objective.value(x_adv)
        success = is_adversarial(spec, defender.target, x, x_adv, y, attack)
        step_taken, point = steps, x_adv
        reason = None if success else "final iterate does not fool the target model"
    else:
        success = chosen is not None
        step_taken, point, _, raw = chosen if success else accepted[-1]
        reason = None if success else "budget exhausted without a successful iterate"
    normalized = objective.distance_term(torch.tensor(raw)).item() if objective.stats else None
    result = AdaptiveResult(
        x_adv=point,
        success=success,
        raw_distance=raw,
        normalized_distance=normalized,
        reason=reason,
        objectives=[entry[2] for entry in accepted],
        accepted_steps=[entry[0] for entry in accepted],
        iterates=iterates,
    )
    if target_checkpoints is not None and target_checkpoints is not checkpoints:
        with torch.no_grad():
            reference = synthetic_losses(defender, x, cfg.mode, cfg.label)
            diff = synthetic_losses(defender, point, cfg.mode, cfg.label) - reference
        result.defender_raw_distance = float((diff * diff).sum())
    logger.debug(
        "adaptive attack: success=%s raw=%.6f accepted=%d/%d (step %d)",
        success, raw, len(accepted), steps + 1, step_taken,
    )
    return result
