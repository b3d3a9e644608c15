"""Per-epoch checkpointed training"""

from trajguard.training.trainer import (
    TrainConfig,
    epoch_permutation,
    evaluate_model,
    loss_kind_for,
    train_with_checkpoints,
)

__all__ = [
    "TrainConfig",
    "epoch_permutation",
    "evaluate_model",
    "loss_kind_for",
    "train_with_checkpoints",
]
