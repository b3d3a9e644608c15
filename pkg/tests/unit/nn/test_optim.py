"""Tests for optimizer steps."""

import copy

import pytest
import torch

from trajguard.constants import OptimizerKind
from trajguard.exceptions import NonFiniteError, ShapeMismatchError
from trajguard.nn.autodiff import GradientBundle
from trajguard.nn.optim import Optimizer, OptimizerConfig, optimizer_step


def _one(value: float):
    return {"w": torch.tensor([value])}


class TestOptimizerStep:
    """Test SGD and Adam updates."""

    def test_sgd_arithmetic(self):
        """lr=0.1, p=1, g=1 gives p=0.9."""
        config = OptimizerConfig(method=OptimizerKind.SGD, lr=0.1)
        updated, _ = optimizer_step(_one(1.0), GradientBundle(params=_one(1.0)), config)
        assert updated["w"].item() == pytest.approx(0.9)

    def test_sgd_weight_decay(self):
        """p <- p - lr (g + wd p)."""
        config = OptimizerConfig(method=OptimizerKind.SGD, lr=0.1, weight_decay=0.5)
        updated, _ = optimizer_step(_one(2.0), GradientBundle(params=_one(1.0)), config)
        assert updated["w"].item() == pytest.approx(2.0 - 0.1 * (1.0 + 0.5 * 2.0))

    @pytest.mark.parametrize("method", [OptimizerKind.SGD, OptimizerKind.ADAM])
    def test_zero_gradient(self, method):
        """No gradient, no weight decay: nothing moves."""
        config = OptimizerConfig(method=method, lr=0.1)
        updated, _ = optimizer_step(_one(1.5), GradientBundle(params=_one(0.0)), config)
        assert updated["w"].item() == 1.5

    @pytest.mark.parametrize("scale", [1.0, 1000.0, 1e-3])
    def test_adam_first_step_is_lr(self, scale):
        """Adam's first update is about lr whatever the gradient scale."""
        config = OptimizerConfig(method=OptimizerKind.ADAM, lr=0.01)
        updated, _ = optimizer_step(_one(1.0), GradientBundle(params=_one(scale)), config)
        assert 1.0 - updated["w"].item() == pytest.approx(0.01, rel=1e-3)

    def test_input_untouched(self):
        """optimizer_step returns new tensors."""
        params = _one(1.0)
        optimizer_step(params, GradientBundle(params=_one(1.0)), OptimizerConfig(method=OptimizerKind.SGD, lr=0.1))
        assert params["w"].item() == 1.0

    def test_state_carries_over(self):
        """Passing the optimizer back continues the Adam moments."""
        config = OptimizerConfig(method=OptimizerKind.ADAM, lr=0.01)
        grads = GradientBundle(params=_one(1.0))
        first, optimizer = optimizer_step(_one(1.0), grads, config)
        second, optimizer = optimizer_step(first, grads, config, optimizer)
        assert optimizer.step_count == 2
        assert second["w"].item() < first["w"].item()

    def test_non_finite_update(self):
        """An infinite gradient aborts the step."""
        config = OptimizerConfig(method=OptimizerKind.SGD, lr=0.1)
        with pytest.raises(NonFiniteError):
            optimizer_step(_one(1.0), GradientBundle(params=_one(float("inf"))), config)

    @pytest.mark.parametrize("method", [OptimizerKind.SGD, OptimizerKind.ADAM])
    def test_failed_step_leaves_state(self, method):
        """After a non-finite update the parameters and moments are unchanged."""
        params = {"w": torch.tensor([1.0, -2.0]), "b": torch.tensor([0.5])}
        optimizer = Optimizer(params, OptimizerConfig(method=method, lr=0.1))
        optimizer.step(GradientBundle(params={"w": torch.tensor([0.3, 0.1]), "b": torch.tensor([0.2])}))
        before = {name: t.clone() for name, t in params.items()}
        moments = copy.deepcopy(optimizer.state_dict()["state"])

        bad = {"w": torch.tensor([0.1, float("nan")]), "b": torch.tensor([0.2])}
        with pytest.raises(NonFiniteError) as info:
            optimizer.step(GradientBundle(params=bad))
        assert info.value.location == "w"
        for name in params:
            assert torch.equal(params[name], before[name])
        assert optimizer.step_count == 1
        for index, entry in optimizer.state_dict()["state"].items():
            for key, value in entry.items():
                assert torch.equal(torch.as_tensor(value), torch.as_tensor(moments[index][key]))

        optimizer.step(GradientBundle(params={"w": torch.tensor([0.3, 0.1]), "b": torch.tensor([0.2])}))
        assert optimizer.step_count == 2

    def test_missing_gradient(self):
        """Gradients must cover every parameter."""
        optimizer = Optimizer({"w": torch.zeros(2), "b": torch.zeros(1)}, OptimizerConfig())
        with pytest.raises(ShapeMismatchError):
            optimizer.step(GradientBundle(params={"w": torch.zeros(2)}))
