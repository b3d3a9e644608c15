"""Tests for model specs and parameter sets."""

import math

import pytest
import torch

from trajguard.constants import LayerKind, TaskKind
from trajguard.exceptions import ConfigError, ShapeMismatchError
from trajguard.nn.params import check_params, init_params, params_equal
from trajguard.nn.spec import LayerSpec, ModelSpec, build_model_spec


class TestBuildModelSpec:
    """Test compact model ids."""

    def test_mlp_layers(self):
        """mlp:8,8 is dense-relu-dense-relu-dense."""
        spec = build_model_spec("mlp:8,8", (4,), 3, TaskKind.CLASSIFICATION)
        kinds = [layer.kind for layer in spec.layers]
        assert kinds == [LayerKind.DENSE, LayerKind.RELU, LayerKind.DENSE, LayerKind.RELU, LayerKind.DENSE]
        assert spec.output_shape() == (3,)
        assert spec.param_count() == (4 * 8 + 8) + (8 * 8 + 8) + (8 * 3 + 3)

    def test_mlp_flattens_images(self):
        """Multi-dimensional inputs get a flatten layer."""
        spec = build_model_spec("mlp:16", (1, 4, 4), 10, TaskKind.CLASSIFICATION)
        assert spec.layers[0].kind == LayerKind.FLATTEN
        assert spec.layers[1].in_features == 16

    def test_cnn(self):
        """cnn ends in a dense head sized from the conv output."""
        spec = build_model_spec("cnn:4", (1, 8, 8), 10, TaskKind.CLASSIFICATION)
        assert spec.layers[-1].in_features == 8 * 4 * 4
        assert spec.output_shape() == (10,)

    def test_cnn_needs_images(self):
        with pytest.raises(ConfigError):
            build_model_spec("cnn:4", (8,), 2, TaskKind.CLASSIFICATION)

    def test_lstm(self):
        """lstm:<hidden> over (T, F)."""
        spec = build_model_spec("lstm:6", (3, 4), 1, TaskKind.REGRESSION)
        assert spec.param_shapes()["lstm1.weight_ih"] == (24, 4)

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            build_model_spec("transformer:4", (4,), 2, TaskKind.CLASSIFICATION)

    def test_descriptor_round_trip(self):
        """The descriptor text rebuilds an equal spec."""
        spec = build_model_spec("mlp:8", (4,), 3, TaskKind.CLASSIFICATION)
        assert ModelSpec.from_descriptor(spec.descriptor()) == spec


class TestModelSpecValidation:
    """Test shape propagation at construction."""

    def test_incompatible_chain(self):
        """A dense layer expecting the wrong width is rejected."""
        layer = LayerSpec(name="fc1", kind=LayerKind.DENSE, in_features=3, out_features=2)
        with pytest.raises(ShapeMismatchError):
            ModelSpec(name="bad", input_shape=(4,), layers=(layer,), task=TaskKind.CLASSIFICATION, output_dim=2)

    def test_dense_needs_extents(self):
        with pytest.raises(ValueError):
            LayerSpec(name="fc1", kind=LayerKind.DENSE, in_features=3)


class TestParams:
    """Test seeded initialization and checks."""

    def test_seeded_and_reproducible(self):
        spec = build_model_spec("mlp:8", (4,), 3, TaskKind.CLASSIFICATION)
        assert params_equal(init_params(spec, seed=3), init_params(spec, seed=3))
        assert not params_equal(init_params(spec, seed=3), init_params(spec, seed=4))

    def test_biases_zero_and_bounds(self):
        """Kaiming bound before a relu, Glorot bound at the head."""
        spec = build_model_spec("mlp:8", (4,), 3, TaskKind.CLASSIFICATION)
        params = init_params(spec, seed=0)
        assert torch.count_nonzero(params["fc1.bias"]) == 0
        assert params["fc1.weight"].abs().max() <= math.sqrt(6.0 / 4)
        assert params["fc2.weight"].abs().max() <= math.sqrt(6.0 / (8 + 3))

    def test_check_params(self):
        spec = build_model_spec("mlp:8", (4,), 3, TaskKind.CLASSIFICATION)
        params = init_params(spec, seed=0)
        check_params(spec, params)
        params["fc1.weight"] = torch.zeros(2, 2)
        with pytest.raises(ShapeMismatchError):
            check_params(spec, params)
