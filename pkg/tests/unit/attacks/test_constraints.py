"""Budget and box constraints over randomized models, inputs and budgets."""

import numpy as np
import pytest
import torch

from trajguard.attacks.adaptive import AdaptiveConfig, adaptive_attack
from trajguard.attacks.base import AttackSpec, within_ball
from trajguard.attacks.gradient import bim, fgsm, pgd_attack
from trajguard.constants import AttackMethod, DistanceNormalization, TaskKind
from trajguard.nn.params import init_params
from trajguard.nn.spec import build_model_spec
from trajguard.storage.checkpoints import CheckpointSet

TRIPLES = 500


def _random_triple(seed: int):
    """(checkpoints, x, y, epsilon) from a random untrained MLP run"""
    rng = np.random.default_rng(seed)
    width, classes = int(rng.integers(1, 7)), int(rng.integers(2, 5))
    hidden = int(rng.integers(2, 9))
    spec = build_model_spec(f"mlp:{hidden}", (width,), classes, TaskKind.CLASSIFICATION)
    snapshots = {k: init_params(spec, seed=seed * 10 + k) for k in range(1, 4)}
    checkpoints = CheckpointSet(spec=spec, snapshots=snapshots, target_index=3)
    x = torch.from_numpy(rng.uniform(0.0, 1.0, size=width).astype(np.float32))
    epsilon = 0.0 if seed % 50 == 0 else float(rng.uniform(1e-3, 0.5))
    return checkpoints, x, int(rng.integers(0, classes)), epsilon


class TestAttackConstraints:
    """Every returned point and every iterate stays in the eps-ball and the unit box."""

    @pytest.mark.parametrize("seed", range(TRIPLES))
    def test_all_attacks_respect_budget(self, seed):
        checkpoints, x, y, epsilon = _random_triple(seed)
        spec, params = checkpoints.spec, checkpoints.target
        attack = AttackSpec(method=AttackMethod.PGD, epsilon=epsilon, steps=4, seed=seed)
        seen = []

        def record(_, iterate):
            seen.append(iterate)

        assert within_ball(fgsm(spec, params, x, y, epsilon), x, epsilon)
        assert within_ball(pgd_attack(spec, params, x, y, attack, on_iterate=record), x, epsilon)
        assert within_ball(bim(spec, params, x, y, attack, on_iterate=record), x, epsilon)
        result = adaptive_attack(
            checkpoints, x, y, attack.model_copy(update={"method": AttackMethod.ADAPTIVE}),
            AdaptiveConfig(lambda_=1.0, normalization=DistanceNormalization.RAW),
            on_iterate=record,
        )
        assert within_ball(result.x_adv, x, epsilon)
        assert len(seen) == 3 * (attack.steps + 1)
        assert all(within_ball(iterate, x, epsilon) for iterate in seen)

    @pytest.mark.parametrize("seed", range(0, TRIPLES, 5))
    def test_fgsm_is_single_full_step_pgd(self, seed):
        """FGSM equals PGD with one step of size eps and no random start."""
        checkpoints, x, y, epsilon = _random_triple(seed)
        one_step = AttackSpec(
            method=AttackMethod.PGD,
            epsilon=epsilon,
            steps=1,
            alpha=epsilon if epsilon > 0 else None,
            random_start=False,
            seed=seed,
        )
        spec, params = checkpoints.spec, checkpoints.target
        assert torch.equal(fgsm(spec, params, x, y, epsilon), pgd_attack(spec, params, x, y, one_step))
