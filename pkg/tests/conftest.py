"""Pytest configuration and fixtures"""

import numpy as np
import pytest

from trajguard.config import load_settings
from trajguard.data.datasets import load_or_synthesize_dataset
from trajguard.monitoring.metrics import reset_collector
from trajguard.nn.optim import OptimizerConfig
from trajguard.training.trainer import TrainConfig, train_with_checkpoints
from trajguard.trajectory.extract import batch_extract, select_benign_pool, stack_imprints

# Small enough for every stage to finish in seconds on CPU.
TINY_OVERRIDES = {
    "dataset.id": "blobs-3x4",
    "dataset.samples_per_class": 150,
    "model.spec": "mlp:16",
    "train.epochs": 6,
    "train.lr": 0.05,
    "attack.method": "fgsm,pgd",
    "attack.epsilon": 0.2,
    "attack.steps": 5,
    "attack.max_examples": 20,
    "trajectory.pool_size": 48,
    "ae.epochs": 2,
    "ae.hidden": 8,
    "ae.bottleneck": 4,
    "svdd.epochs": 5,
    "svdd.hidden": 8,
    "svdd.output_dim": 4,
    "svdd.frr_grid": "0.01,0.05",
    "runtime.log_format": "text",
}


@pytest.fixture(autouse=True)
def _fresh_collector():
    """Every test starts with an empty global latency collector."""
    reset_collector()
    yield
    reset_collector()


@pytest.fixture(scope="session")
def blobs_data():
    """Three 4-D Gaussian blobs, 150 examples per class"""
    return load_or_synthesize_dataset("blobs-3x4", seed=3, samples_per_class=150)


@pytest.fixture(scope="session")
def blobs_checkpoints(blobs_data):
    """K=6 snapshots of a one-hidden-layer MLP on the blobs"""
    config = TrainConfig(
        epochs=6,
        batch_size=32,
        optimizer=OptimizerConfig(lr=0.05),
        seed=5,
        dataset_id="blobs-3x4",
        model_spec="mlp:16",
    )
    return train_with_checkpoints(config, blobs_data)


@pytest.fixture(scope="session")
def sine_data():
    """Sine-forecast windows (regression), 100 windows"""
    return load_or_synthesize_dataset("sine-forecast", seed=3, samples_per_class=25)


@pytest.fixture(scope="session")
def sine_checkpoints(sine_data):
    """K=3 snapshots of a small LSTM regressor"""
    config = TrainConfig(
        epochs=3,
        batch_size=16,
        optimizer=OptimizerConfig(lr=0.01),
        seed=5,
        dataset_id="sine-forecast",
        model_spec="lstm:4",
    )
    return train_with_checkpoints(config, sine_data)


@pytest.fixture(scope="session")
def benign_trajectories(blobs_checkpoints, blobs_data):
    """(40, 5) trajectories of correctly classified validation examples"""
    val = blobs_data.split("val")
    ids = select_benign_pool(blobs_checkpoints, val, 40, seed=0)
    pool = val.subset([val.position_of(i) for i in ids])
    return stack_imprints(batch_extract(blobs_checkpoints, pool))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_settings(tmp_path):
    """Settings for end-to-end runs writing under tmp_path"""
    return load_settings(None, {**TINY_OVERRIDES, "runtime.out_dir": str(tmp_path / "run")})


@pytest.fixture
def tiny_overrides():
    """TINY_OVERRIDES as CLI --set arguments"""
    args = []
    for key, value in TINY_OVERRIDES.items():
        args += ["--set", f"{key}={value}"]
    return args
