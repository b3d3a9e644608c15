"""Tests for the forward pass and losses."""

import math

import numpy as np
import pytest
import torch

from trajguard.constants import LossKind
from trajguard.exceptions import ShapeMismatchError
from trajguard.nn.functional import (
    cross_entropy_soft,
    forward,
    loss_from_outputs,
    mse_loss,
    predict_labels,
    softmax,
)
from trajguard.nn.params import clone_params, init_params, params_equal


class TestSoftmax:
    """Test stabilized softmax."""

    def test_uniform_logits(self):
        """Equal logits give a uniform distribution."""
        probs = softmax(torch.zeros(3))
        assert torch.allclose(probs, torch.full((3,), 1.0 / 3.0))

    def test_large_logits_do_not_overflow(self):
        """[1000, 0] stays finite."""
        probs = softmax(torch.tensor([1000.0, 0.0]))
        assert torch.isfinite(probs).all()
        assert probs[0].item() == pytest.approx(1.0)
        assert probs[1].item() == pytest.approx(0.0, abs=1e-12)

    def test_matches_direct_evaluation(self):
        """[1, 2, 3] agrees with exp/sum in float64."""
        logits = np.array([1.0, 2.0, 3.0])
        expected = np.exp(logits) / np.exp(logits).sum()
        probs = softmax(torch.tensor(logits, dtype=torch.float64)).numpy()
        np.testing.assert_allclose(probs, expected, rtol=1e-12)

    def test_shift_invariance(self, rng):
        """Adding a constant to every logit changes nothing."""
        logits = torch.from_numpy(rng.normal(size=(10, 6)))
        assert torch.allclose(softmax(logits), softmax(logits + 17.5), atol=1e-6)

    def test_rows_sum_to_one(self, rng):
        """Batched outputs are positive and normalized per row."""
        probs = softmax(torch.from_numpy(rng.normal(scale=5.0, size=(8, 5))))
        assert (probs > 0).all()
        assert torch.allclose(probs.sum(dim=-1), torch.ones(8, dtype=probs.dtype), atol=1e-6)

    def test_empty_logits(self):
        """Empty input is rejected."""
        with pytest.raises(ValueError):
            softmax(torch.zeros(0))


class TestCrossEntropy:
    """Test soft-label cross-entropy."""

    def test_perfect_one_hot(self):
        """One-hot target predicted exactly costs nothing."""
        p = torch.tensor([0.0, 1.0, 0.0])
        assert cross_entropy_soft(p, p).item() == pytest.approx(0.0, abs=1e-12)

    def test_self_entropy(self):
        """CE(p, p) is the entropy of p."""
        p = torch.tensor([0.5, 0.5])
        assert cross_entropy_soft(p, p).item() == pytest.approx(math.log(2.0), abs=1e-6)

    def test_known_value(self):
        """p=[0.5, 0.5], q=[0.9, 0.1] gives about 1.2040."""
        value = cross_entropy_soft(torch.tensor([0.5, 0.5]), torch.tensor([0.9, 0.1])).item()
        assert value == pytest.approx(-0.5 * (math.log(0.9) + math.log(0.1)), abs=1e-6)
        assert value == pytest.approx(1.2040, abs=1e-4)

    def test_zero_probability_is_clamped(self):
        """q_c = 0 stays finite through the log floor."""
        value = cross_entropy_soft(torch.tensor([1.0, 0.0]), torch.tensor([0.0, 1.0])).item()
        assert value == pytest.approx(-math.log(1e-12), rel=1e-9)

    def test_gibbs_inequality(self, rng):
        """CE(p, q) >= CE(p, p) on random pairs."""
        for _ in range(50):
            p = rng.dirichlet(np.ones(4))
            q = rng.dirichlet(np.ones(4))
            cross = cross_entropy_soft(torch.from_numpy(p), torch.from_numpy(q)).item()
            own = cross_entropy_soft(torch.from_numpy(p), torch.from_numpy(p)).item()
            assert cross >= own - 1e-9

    def test_length_mismatch(self):
        """Different lengths raise."""
        with pytest.raises(ShapeMismatchError):
            cross_entropy_soft(torch.tensor([0.5, 0.5]), torch.tensor([0.2, 0.3, 0.5]))


class TestMse:
    """Test mean squared error."""

    def test_identical(self):
        """Identical tensors give zero."""
        t = torch.tensor([1.0, -2.0, 3.0])
        assert mse_loss(t, t).item() == 0.0

    def test_single_element(self):
        """target 0, predicted 2 gives 4."""
        assert mse_loss(torch.tensor([0.0]), torch.tensor([2.0])).item() == pytest.approx(4.0)

    def test_matches_elementwise_sum(self, rng):
        """Random pair agrees with a plain Python sum."""
        a, b = rng.normal(size=20), rng.normal(size=20)
        expected = sum((x - y) ** 2 for x, y in zip(a, b)) / 20
        assert mse_loss(torch.from_numpy(a), torch.from_numpy(b)).item() == pytest.approx(expected, abs=1e-6)

    def test_shape_mismatch(self):
        """Different shapes raise."""
        with pytest.raises(ShapeMismatchError):
            mse_loss(torch.zeros(2), torch.zeros(3))


class TestForward:
    """Test the functional forward pass."""

    def test_single_and_batch_shapes(self, mlp_spec):
        """One example gives (C,), a batch gives (N, C)."""
        params = init_params(mlp_spec, seed=0)
        assert forward(mlp_spec, params, torch.zeros(3)).shape == (4,)
        assert forward(mlp_spec, params, torch.zeros(7, 3)).shape == (7, 4)

    def test_params_untouched(self, mlp_spec):
        """forward never mutates its parameters."""
        params = init_params(mlp_spec, seed=0)
        before = clone_params(params)
        forward(mlp_spec, params, torch.rand(5, 3))
        assert params_equal(params, before)

    def test_wrong_input_shape(self, mlp_spec):
        """Inputs not matching the model layout raise with a layer name."""
        params = init_params(mlp_spec, seed=0)
        with pytest.raises(ShapeMismatchError) as info:
            forward(mlp_spec, params, torch.zeros(2, 5))
        assert info.value.layer == "input"

    def test_missing_parameter(self, mlp_spec):
        """A ParamSet without a tensor raises naming the layer."""
        params = init_params(mlp_spec, seed=0)
        del params["fc2.bias"]
        with pytest.raises(ShapeMismatchError) as info:
            forward(mlp_spec, params, torch.zeros(3))
        assert info.value.layer == "fc2"

    def test_lstm_forward(self, lstm_spec):
        """lstm-cell consumes (T, F) windows."""
        params = init_params(lstm_spec, seed=0)
        assert forward(lstm_spec, params, torch.rand(3, 2)).shape == (1,)
        assert forward(lstm_spec, params, torch.rand(6, 3, 2)).shape == (6, 1)

    def test_predict_labels(self, mlp_spec):
        """argmax of the logits per example."""
        params = init_params(mlp_spec, seed=0)
        x = torch.rand(6, 3)
        expected = forward(mlp_spec, params, x).argmax(dim=-1)
        assert torch.equal(predict_labels(mlp_spec, params, x), expected)


class TestLossFromOutputs:
    """Test batch losses on raw outputs."""

    def test_hard_labels_match_soft_one_hot(self):
        """Hard cross-entropy equals soft CE against the one-hot target."""
        logits = torch.tensor([[1.0, 2.0, 0.5]], dtype=torch.float64)
        hard = loss_from_outputs(LossKind.HARD, logits, torch.tensor([1]))
        soft = loss_from_outputs(LossKind.SOFT, logits, torch.tensor([[0.0, 1.0, 0.0]], dtype=torch.float64))
        assert hard.item() == pytest.approx(soft.item(), abs=1e-9)

    def test_sum_reduction(self):
        """sum is N times mean for identical rows."""
        outputs = torch.ones(4, 1)
        target = torch.zeros(4, 1)
        total = loss_from_outputs(LossKind.MSE, outputs, target, reduction="sum")
        mean = loss_from_outputs(LossKind.MSE, outputs, target, reduction="mean")
        assert total.item() == pytest.approx(4 * mean.item())

    def test_unknown_reduction(self):
        """Only mean and sum exist."""
        with pytest.raises(ValueError):
            loss_from_outputs(LossKind.MSE, torch.ones(2, 1), torch.zeros(2, 1), reduction="max")
