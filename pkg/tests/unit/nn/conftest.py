"""
Pytest fixtures for nn tests.
"""

import pytest
import torch

from trajguard.constants import LayerKind, TaskKind
from trajguard.nn.params import init_params
from trajguard.nn.spec import LayerSpec, ModelSpec, build_model_spec


@pytest.fixture
def mlp_spec():
    """3 -> 5 -> 4 classifier"""
    return build_model_spec("mlp:5", (3,), 4, TaskKind.CLASSIFICATION)


@pytest.fixture
def mlp_params64(mlp_spec):
    return init_params(mlp_spec, seed=1, dtype=torch.float64)


@pytest.fixture
def lstm_spec():
    """(T=3, F=2) windows -> 1 regression output"""
    return build_model_spec("lstm:3", (3, 2), 1, TaskKind.REGRESSION)


@pytest.fixture
def scalar_spec():
    """f(x) = w * x + b"""
    layer = LayerSpec(name="fc1", kind=LayerKind.DENSE, in_features=1, out_features=1)
    return ModelSpec(
        name="scalar", input_shape=(1,), layers=(layer,), task=TaskKind.REGRESSION, output_dim=1
    )
