"""Adversarial example crafting"""

from trajguard.attacks.adaptive import (
    AdaptiveConfig,
    AdaptiveResult,
    adaptive_attack,
    minmax_stats,
    normalize_distances,
    trajectory_distance,
)
from trajguard.attacks.base import AttackResult, AttackSpec, is_adversarial, project, within_ball
from trajguard.attacks.batch import AdversarialSet, craft_adversarial_set
from trajguard.attacks.boundary import boundary_attack
from trajguard.attacks.gradient import bim, fgsm, pgd_attack

__all__ = [
    "AdaptiveConfig",
    "AdaptiveResult",
    "AdversarialSet",
    "AttackResult",
    "AttackSpec",
    "adaptive_attack",
    "bim",
    "boundary_attack",
    "craft_adversarial_set",
    "fgsm",
    "is_adversarial",
    "minmax_stats",
    "normalize_distances",
    "pgd_attack",
    "project",
    "trajectory_distance",
    "within_ball",
]
