"""
Synthetic-loss trajectories across intermediate models.

For an input x and target model f_K, the target-anchored trajectory is
``[Loss(f_k(x), f_K(x)) for k in IM epochs]`` with the target's own epoch left
out. Classification uses soft-label cross-entropy against softmax(f_K(x));
regression uses MSE against f_K(x).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from trajguard.constants import SyntheticLabel, TaskKind, TrajectoryMode
from trajguard.data.datasets import Split
from trajguard.exceptions import (
    InsufficientBenignError,
    TaskMismatchError,
    TrajectoryError,
    TrajGuardError,
)
from trajguard.nn.functional import cross_entropy_soft, forward, mse_loss, softmax
from trajguard.storage.checkpoints import CheckpointSet

logger = logging.getLogger(__name__)

Label = Optional[Union[int, float]]


@dataclass(frozen=True)
class LossTrajectory:
    """Epoch-ordered synthetic losses of one example"""

    values: np.ndarray
    example_id: int
    mode: TrajectoryMode
    task: TaskKind
    n_used: int
    epochs: Tuple[int, ...]
    label: Label = None

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ImprintMatrix:
    """C x L softmax outputs of one example; column j belongs to ``epochs[j]``"""

    matrix: np.ndarray
    example_id: int
    n_used: int
    epochs: Tuple[int, ...]
    label: Label = None

    def __len__(self) -> int:
        return int(self.matrix.shape[1])


def _synthetic_target(target_out: torch.Tensor, label: SyntheticLabel) -> torch.Tensor:
    probs = softmax(target_out)
    if label == SyntheticLabel.HARD:
        return F.one_hot(probs.argmax(dim=-1), probs.shape[-1]).to(probs.dtype)
    return probs


def _pair_loss(task: TaskKind, reference: torch.Tensor, output: torch.Tensor, label: SyntheticLabel):
    if task == TaskKind.CLASSIFICATION:
        return cross_entropy_soft(_synthetic_target(reference, label), softmax(output))
    return mse_loss(reference, output, dim=-1)


def synthetic_losses(
    checkpoints: CheckpointSet,
    x: torch.Tensor,
    mode: TrajectoryMode = TrajectoryMode.TARGET_ANCHORED,
    label: SyntheticLabel = SyntheticLabel.SOFT,
) -> torch.Tensor:
    """
    Differentiable trajectory values.

    Args:
        checkpoints: Intermediate models and target
        x: One example or a batch
        mode: target-anchored or consecutive
        label: soft (full target distribution) or hard (its argmax)

    Returns:
        float64 tensor ``(L,)`` or ``(N, L)`` with L = K - 1
    """
    spec = checkpoints.spec
    mode = TrajectoryMode(mode)
    if mode == TrajectoryMode.TARGET_ANCHORED:
        reference = forward(spec, checkpoints.target, x)
        terms = [
            _pair_loss(spec.task, reference, forward(spec, checkpoints.params_for(k), x), label)
            for k in checkpoints.im_epochs
        ]
    elif mode == TrajectoryMode.CONSECUTIVE:
        outputs = [forward(spec, checkpoints.params_for(k), x) for k in range(1, checkpoints.epochs + 1)]
        terms = [
            _pair_loss(spec.task, outputs[k], outputs[k - 1], label)
            for k in range(1, checkpoints.epochs)
        ]
    else:
        raise TrajectoryError(f"mode {mode.value} has no scalar trajectory; use extract_softmax_imprint")
    return torch.stack(terms, dim=-1)


def _epochs_for(checkpoints: CheckpointSet, mode: TrajectoryMode) -> Tuple[int, ...]:
    if mode == TrajectoryMode.CONSECUTIVE:
        return tuple(range(1, checkpoints.epochs))
    return tuple(checkpoints.im_epochs)


def extract_trajectory(
    checkpoints: CheckpointSet,
    x: torch.Tensor,
    mode: TrajectoryMode = TrajectoryMode.TARGET_ANCHORED,
    label: SyntheticLabel = SyntheticLabel.SOFT,
    example_id: int = 0,
    y: Label = None,
) -> LossTrajectory:
    """
    Trajectory of one example.

    Raises:
        MissingCheckpointError: an epoch snapshot is absent
        ShapeMismatchError: x does not fit the model
    """
    mode = TrajectoryMode(mode)
    with torch.no_grad():
        values = synthetic_losses(checkpoints, x, mode, label).numpy().astype(np.float64)
    return LossTrajectory(
        values=values,
        example_id=int(example_id),
        mode=mode,
        task=checkpoints.spec.task,
        n_used=int(values.shape[0]),
        epochs=_epochs_for(checkpoints, mode),
        label=y,
    )


def extract_softmax_imprint(
    checkpoints: CheckpointSet, x: torch.Tensor, example_id: int = 0, y: Label = None
) -> ImprintMatrix:
    """
    Softmax outputs of every IM as columns of a C x (K-1) matrix.

    Raises:
        TaskMismatchError: regression model
    """
    spec = checkpoints.spec
    if spec.task != TaskKind.CLASSIFICATION:
        raise TaskMismatchError("softmax imprints need a classification model")
    with torch.no_grad():
        columns = [
            softmax(forward(spec, checkpoints.params_for(k), x)).to(torch.float64)
            for k in checkpoints.im_epochs
        ]
    matrix = torch.stack(columns, dim=-1).numpy()
    return ImprintMatrix(
        matrix=matrix,
        example_id=int(example_id),
        n_used=int(matrix.shape[-1]),
        epochs=tuple(checkpoints.im_epochs),
        label=y,
    )


Imprint = Union[LossTrajectory, ImprintMatrix]


def truncate_epochs(item: Imprint, first_n: int) -> Imprint:
    """
    Keep the first ``first_n`` epochs.

    Raises:
        TrajectoryError: first_n outside 1..current length
    """
    length = len(item)
    if not 1 <= first_n <= length:
        raise TrajectoryError(f"cannot truncate a length-{length} trajectory to {first_n}")
    if isinstance(item, ImprintMatrix):
        return replace(item, matrix=item.matrix[:, :first_n].copy(), n_used=first_n, epochs=item.epochs[:first_n])
    return replace(item, values=item.values[:first_n].copy(), n_used=first_n, epochs=item.epochs[:first_n])


def select_benign_pool(
    checkpoints: CheckpointSet, split: Split, n: int, seed: int = 0
) -> List[int]:
    """
    Sample ``n`` example ids the target model gets right.

    Regression splits have no correctness notion; every example is eligible.

    Returns:
        Sorted example ids

    Raises:
        InsufficientBenignError: fewer than n eligible examples
    """
    if n < 0:
        raise TrajectoryError(f"pool size must be >= 0, got {n}")
    if n == 0:
        return []
    spec = checkpoints.spec
    if spec.task == TaskKind.CLASSIFICATION:
        with torch.no_grad():
            predicted = forward(spec, checkpoints.target, split.x).argmax(dim=-1)
        eligible = split.ids[(predicted == split.y).numpy()]
    else:
        eligible = split.ids.copy()
    if n > eligible.size:
        raise InsufficientBenignError(requested=n, available=int(eligible.size))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(eligible.size, size=n, replace=False)
    return sorted(int(i) for i in eligible[chosen])


def _label_of(split_y: torch.Tensor, position: int) -> Label:
    value = split_y[position]
    if value.is_floating_point():
        return float(value.reshape(-1)[0])
    return int(value)


def batch_extract(
    checkpoints: CheckpointSet,
    examples: Split,
    mode: TrajectoryMode = TrajectoryMode.TARGET_ANCHORED,
    parallelism: int = 1,
    label: SyntheticLabel = SyntheticLabel.SOFT,
    truncate: Optional[int] = None,
) -> List[Imprint]:
    """
    Extract every example, in input order.

    Each example goes through the same single-example routine whatever the
    parallelism, so results are bitwise independent of it.

    Raises:
        TrajectoryError: first failing example (input order), naming its id
    """
    mode = TrajectoryMode(mode)

    def one(position: int) -> Imprint:
        example_id = int(examples.ids[position])
        y = _label_of(examples.y, position)
        try:
            if mode == TrajectoryMode.SOFTMAX:
                item = extract_softmax_imprint(checkpoints, examples.x[position], example_id, y)
            else:
                item = extract_trajectory(checkpoints, examples.x[position], mode, label, example_id, y)
            return truncate_epochs(item, truncate) if truncate else item
        except TrajGuardError as e:
            raise TrajectoryError(f"example {example_id}: {e}") from e

    positions = range(len(examples))
    if parallelism <= 1 or len(examples) <= 1:
        return [one(p) for p in positions]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, positions))


def stack_imprints(items: Sequence[Imprint]) -> np.ndarray:
    """(n, L) for trajectories, (n, L, C) for softmax imprints."""
    if not items:
        raise TrajectoryError("nothing to stack")
    if isinstance(items[0], ImprintMatrix):
        return np.stack([item.matrix.T for item in items])
    return np.stack([item.values for item in items])
