"""
Pytest fixtures for attack tests.
"""

import pytest

from trajguard.data.datasets import load_or_synthesize_dataset
from trajguard.harness.pipeline import correct_examples
from trajguard.nn.optim import OptimizerConfig
from trajguard.training.trainer import TrainConfig, train_with_checkpoints


@pytest.fixture(scope="module")
def clean_examples(blobs_checkpoints, blobs_data):
    """First 12 correctly classified test examples"""
    correct = correct_examples(blobs_checkpoints, blobs_data.split("test"))
    return correct.subset(range(min(12, len(correct))))


@pytest.fixture(scope="module")
def moons_model():
    """(checkpoints, correct test examples) for an MLP on the two moons"""
    data = load_or_synthesize_dataset("moons", seed=2, samples_per_class=500)
    config = TrainConfig(
        epochs=20,
        batch_size=32,
        optimizer=OptimizerConfig(lr=0.01),
        seed=4,
        dataset_id="moons",
        model_spec="mlp:32,32",
    )
    checkpoints = train_with_checkpoints(config, data)
    return checkpoints, correct_examples(checkpoints, data.split("test"))
