"""Tests for FGSM, BIM and PGD."""

import pytest
import torch

from trajguard.attacks.base import AttackSpec, is_adversarial, project, within_ball
from trajguard.attacks.gradient import bim, fgsm, pgd_attack
from trajguard.constants import AttackMethod
from trajguard.exceptions import AttackError


class TestProjection:
    """Test the L-inf ball projection."""

    def test_clips_to_ball_and_unit_box(self):
        x = torch.tensor([0.05, 0.5, 0.95])
        candidate = torch.tensor([-1.0, 0.9, 2.0])
        projected = project(candidate, x, 0.1)
        assert torch.allclose(projected, torch.tensor([0.0, 0.6, 1.0]))
        assert within_ball(projected, x, 0.1)

    def test_outside_ball(self):
        assert not within_ball(torch.tensor([0.5]), torch.tensor([0.2]), 0.1)


class TestFgsm:
    """Test the one-step attack."""

    def test_step_is_signed_epsilon(self, blobs_checkpoints, clean_examples):
        """Every coordinate moves by exactly epsilon unless clipped at the box."""
        spec, params = blobs_checkpoints.spec, blobs_checkpoints.target
        x, y = clean_examples.x[0], clean_examples.y[0]
        x_adv = fgsm(spec, params, x, y, 0.05)
        delta = (x_adv - x).abs()
        clipped = (x_adv == 0.0) | (x_adv == 1.0)
        assert torch.all(clipped | torch.isclose(delta, torch.tensor(0.05), atol=1e-6))
        assert within_ball(x_adv, x, 0.05)

    def test_zero_epsilon(self, blobs_checkpoints, clean_examples):
        x = clean_examples.x[0]
        x_adv = fgsm(blobs_checkpoints.spec, blobs_checkpoints.target, x, clean_examples.y[0], 0.0)
        assert torch.equal(x_adv, x)

    def test_batch_input_rejected(self, blobs_checkpoints, clean_examples):
        with pytest.raises(AttackError):
            fgsm(blobs_checkpoints.spec, blobs_checkpoints.target, clean_examples.x, clean_examples.y, 0.1)


class TestPgd:
    """Test the iterative attacks."""

    def test_every_iterate_in_ball(self, blobs_checkpoints, clean_examples):
        """Start point and iterates all respect the budget."""
        attack = AttackSpec(method=AttackMethod.PGD, epsilon=0.1, steps=8, seed=3)
        x = clean_examples.x[1]
        seen = []
        pgd_attack(
            blobs_checkpoints.spec, blobs_checkpoints.target, x, clean_examples.y[1], attack,
            on_iterate=lambda step, it: seen.append((step, it)),
        )
        assert [step for step, _ in seen] == list(range(9))
        assert all(within_ball(it, x, 0.1) for _, it in seen)

    def test_seeded(self, blobs_checkpoints, clean_examples):
        attack = AttackSpec(method=AttackMethod.PGD, epsilon=0.1, steps=4, seed=3)
        args = (blobs_checkpoints.spec, blobs_checkpoints.target, clean_examples.x[2], clean_examples.y[2], attack)
        assert torch.equal(pgd_attack(*args), pgd_attack(*args))

    def test_bim_is_pgd_without_random_start(self, blobs_checkpoints, clean_examples):
        attack = AttackSpec(method=AttackMethod.BIM, epsilon=0.1, steps=4)
        spec, params = blobs_checkpoints.spec, blobs_checkpoints.target
        x, y = clean_examples.x[0], clean_examples.y[0]
        expected = pgd_attack(spec, params, x, y, attack.model_copy(update={"random_start": False}))
        assert torch.equal(bim(spec, params, x, y, attack), expected)

    def test_iterative_strictly_stronger(self, moons_model):
        """On a curved boundary PGD fools the model on strictly more examples than FGSM."""
        checkpoints, examples = moons_model
        spec, params = checkpoints.spec, checkpoints.target
        attack = AttackSpec(method=AttackMethod.PGD, epsilon=0.1, steps=10, seed=0)
        fgsm_hits = pgd_hits = 0
        for i in range(len(examples)):
            x, y = examples.x[i], examples.y[i]
            fgsm_hits += is_adversarial(spec, params, x, fgsm(spec, params, x, y, 0.1), y, attack)
            pgd_hits += is_adversarial(spec, params, x, pgd_attack(spec, params, x, y, attack), y, attack)
        assert len(examples) >= 100
        assert pgd_hits > fgsm_hits

    def test_targeted_needs_target(self):
        with pytest.raises(ValueError):
            AttackSpec(targeted=True)


class TestRegressionSuccess:
    """Test the relative-tolerance rule for regressors."""

    def test_small_change_is_not_adversarial(self, sine_checkpoints, sine_data):
        spec, params = sine_checkpoints.spec, sine_checkpoints.target
        split = sine_data.split("test")
        x, y = split.x[0], split.y[0]
        attack = AttackSpec(tolerance=0.04)
        assert not is_adversarial(spec, params, x, x.clone(), y, attack)

    def test_attack_stays_in_ball(self, sine_checkpoints, sine_data):
        spec, params = sine_checkpoints.spec, sine_checkpoints.target
        split = sine_data.split("test")
        attack = AttackSpec(method=AttackMethod.PGD, epsilon=0.05, steps=5, seed=1)
        x_adv = pgd_attack(spec, params, split.x[0], split.y[0], attack)
        assert within_ball(x_adv, split.x[0], 0.05)
