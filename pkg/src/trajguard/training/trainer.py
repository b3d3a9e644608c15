"""
Training with one intermediate model per epoch.

Each epoch visits the training split in a permutation seeded by
``(seed, epoch)``, takes one optimizer step per mini-batch and snapshots the
parameters after the last step.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field

from trajguard.constants import LossKind, TaskKind
from trajguard.data.datasets import DatasetHandle, Split
from trajguard.exceptions import ConfigError, DatasetError, NonFiniteError, TaskMismatchError
from trajguard.nn.autodiff import gradients
from trajguard.nn.functional import forward, mse_loss
from trajguard.nn.optim import Optimizer, OptimizerConfig
from trajguard.nn.params import ParamSet, clone_params, init_params
from trajguard.nn.spec import ModelSpec, build_model_spec
from trajguard.storage.checkpoints import CheckpointSet

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """One training run"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(default=30, ge=2, description="K; at least one IM besides the target")
    batch_size: int = Field(default=32, ge=1)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    seed: int = 42
    dataset_id: str = "blobs-4"
    model_spec: str = "mlp:32,32"
    checkpoint_dir: Optional[Path] = None
    target_index: Optional[int] = Field(default=None, ge=1)


def loss_kind_for(task: TaskKind) -> LossKind:
    return LossKind.HARD if task == TaskKind.CLASSIFICATION else LossKind.MSE


def evaluate_model(
    spec: ModelSpec, params: ParamSet, split: Split, metric: Optional[str] = None
) -> float:
    """
    Accuracy (classification) or MSE (regression) over a split.

    Args:
        spec: Model layout
        params: Parameters
        split: Examples to score
        metric: "accuracy" or "mse"; inferred from the task when omitted

    Raises:
        TaskMismatchError: metric or labels do not fit the model's task
        DatasetError: empty split
    """
    expected = "accuracy" if spec.task == TaskKind.CLASSIFICATION else "mse"
    if metric is not None and metric != expected:
        raise TaskMismatchError(f"{metric} requested for a {spec.task.value} model")
    if len(split) == 0:
        raise DatasetError("cannot evaluate on an empty split")

    with torch.no_grad():
        outputs = forward(spec, params, split.x)
    if spec.task == TaskKind.CLASSIFICATION:
        if split.y.is_floating_point():
            raise TaskMismatchError("classification model evaluated against real-valued targets")
        correct = (outputs.argmax(dim=-1) == split.y).sum().item()
        return float(correct) / len(split)
    if not split.y.is_floating_point():
        raise TaskMismatchError("regression model evaluated against integer labels")
    return float(mse_loss(split.y.reshape(outputs.shape), outputs).item())


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    """Shuffle order of epoch ``epoch`` (1-based)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def train_with_checkpoints(
    config: TrainConfig,
    data: DatasetHandle,
    spec: Optional[ModelSpec] = None,
) -> CheckpointSet:
    """
    Train for K epochs keeping every epoch's parameters.

    Args:
        config: Training configuration
        data: Dataset with a non-empty train split
        spec: Model layout; built from ``config.model_spec`` when omitted

    Returns:
        CheckpointSet with exactly K snapshots (written to
        ``config.checkpoint_dir`` when set)

    Raises:
        ConfigError: target index beyond the trained epochs
        NonFiniteError: loss or update became non-finite (location names epoch and batch)
        CheckpointError: checkpoint write failure
    """
    train = data.split("train")
    if len(train) == 0:
        raise DatasetError(f"Dataset {data.name} has an empty train split")
    spec = spec or build_model_spec(config.model_spec, data.input_shape, data.output_dim, data.task)
    target_index = config.target_index or config.epochs
    if target_index > config.epochs:
        raise ConfigError(f"target index {target_index} exceeds {config.epochs} epochs")

    params = init_params(spec, seed=config.seed)
    optimizer = Optimizer(params, config.optimizer)
    kind = loss_kind_for(spec.task)
    val = data.splits.get("val")

    snapshots: Dict[int, ParamSet] = {}
    train_loss: List[float] = []
    val_metric: List[float] = []
    n = len(train)
    for epoch in range(1, config.epochs + 1):
        order = epoch_permutation(config.seed, epoch, n)
        total = 0.0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            positions = torch.from_numpy(order[start:start + config.batch_size])
            xb, yb = train.x[positions], train.y[positions]
            try:
                bundle = gradients(spec, params, xb, kind, yb, wrt="params", reduction="mean")
                optimizer.step(bundle)
            except NonFiniteError as e:
                raise NonFiniteError(
                    f"training diverged: {e}", location=f"epoch {epoch}, batch {batch_index + 1}"
                ) from e
            total += bundle.loss * len(positions)
        snapshots[epoch] = clone_params(params)
        train_loss.append(total / n)
        if val is not None and len(val):
            val_metric.append(evaluate_model(spec, params, val))
        logger.debug(
            "epoch %d/%d loss %.6f", epoch, config.epochs, train_loss[-1],
            extra={"epoch": epoch, "train_loss": train_loss[-1]},
        )

    checkpoints = CheckpointSet(
        spec=spec,
        snapshots=snapshots,
        target_index=target_index,
        train_loss=train_loss,
        val_metric=val_metric,
        metadata={
            "dataset": data.name,
            "seed": config.seed,
            "metric": "accuracy" if spec.task == TaskKind.CLASSIFICATION else "mse",
            "optimizer": config.optimizer.model_dump(mode="json"),
            "batch_size": config.batch_size,
        },
    )
    logger.info(
        "Trained %s on %s for %d epochs (final loss %.6f)",
        spec.name, data.name, config.epochs, train_loss[-1],
    )
    if config.checkpoint_dir is not None:
        checkpoints.save(config.checkpoint_dir)
    return checkpoints
