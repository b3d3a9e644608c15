"""
Per-epoch checkpoints and checkpoint sets.

A checkpoint directory holds ``ckpt_0001.trck ... ckpt_KKKK.trck`` plus a
``manifest.json`` with the training metadata.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from trajguard.constants import CHECKPOINT_PATTERN, MANIFEST_NAME
from trajguard.exceptions import (
    CheckpointError,
    CheckpointShapeError,
    MissingCheckpointError,
    ShapeMismatchError,
)
from trajguard.nn.params import ParamSet, check_params
from trajguard.nn.spec import ModelSpec
from trajguard.storage.container import read_container, write_container
from trajguard.storage.serialization import CanonicalJSON

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckpointMeta:
    spec: ModelSpec
    epoch: int


def checkpoint_path(directory: Union[str, Path], epoch: int) -> Path:
    return Path(directory) / CHECKPOINT_PATTERN.format(epoch=epoch)


def save_checkpoint(
    path: Union[str, Path], spec: ModelSpec, params: ParamSet, epoch: int
) -> Path:
    """
    Persist one ParamSet with its model descriptor.

    Raises:
        ShapeMismatchError: params do not match spec
        CheckpointError: write failure
    """
    check_params(spec, params)
    ordered = {name: params[name] for name in spec.param_shapes()}
    return write_container(path, spec.descriptor(), epoch, ordered)


def load_checkpoint(
    path: Union[str, Path], spec: Optional[ModelSpec] = None
) -> Tuple[ParamSet, CheckpointMeta]:
    """
    Load a checkpoint file.

    Args:
        path: Checkpoint file
        spec: Expected layout; the stored descriptor is used when omitted

    Returns:
        (ParamSet, CheckpointMeta)

    Raises:
        BadMagicError, VersionMismatchError, TruncatedCheckpointError:
            container-level failures
        CheckpointShapeError: tensors disagree with the model layout
    """
    container = read_container(path)
    try:
        stored_spec = ModelSpec.from_descriptor(container.descriptor)
    except ValueError as e:
        raise CheckpointError(f"{path}: unreadable model descriptor: {e}") from e
    if spec is not None and spec != stored_spec:
        raise CheckpointShapeError(f"{path}: stored model {stored_spec.name!r} differs from {spec.name!r}")
    spec = stored_spec
    params: ParamSet = dict(container.tensors)
    try:
        check_params(spec, params)
    except ShapeMismatchError as e:
        raise CheckpointShapeError(f"{path}: {e}") from e
    return params, CheckpointMeta(spec=spec, epoch=container.epoch)


@dataclass
class CheckpointSet:
    """
    K epoch snapshots of one training run.

    Snapshots are immutable once loaded; concurrent readers may share them.
    """

    spec: ModelSpec
    snapshots: Dict[int, ParamSet]
    target_index: int
    train_loss: List[float] = field(default_factory=list)
    val_metric: List[float] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    directory: Optional[Path] = None

    def __post_init__(self):
        epochs = sorted(self.snapshots)
        if epochs != list(range(1, len(epochs) + 1)):
            missing = next(k for k in range(1, len(epochs) + 2) if k not in self.snapshots)
            raise MissingCheckpointError(missing)
        if not 1 <= self.target_index <= len(epochs):
            raise CheckpointError(f"target index {self.target_index} outside 1..{len(epochs)}")

    @property
    def epochs(self) -> int:
        """K"""
        return len(self.snapshots)

    @property
    def target(self) -> ParamSet:
        return self.snapshots[self.target_index]

    @property
    def im_epochs(self) -> List[int]:
        """Epochs contributing trajectory elements: 1..K without the target, in order."""
        return [k for k in range(1, self.epochs + 1) if k != self.target_index]

    def params_for(self, epoch: int) -> ParamSet:
        try:
            return self.snapshots[epoch]
        except KeyError:
            raise MissingCheckpointError(epoch) from None

    def with_target(self, target_index: int) -> "CheckpointSet":
        """Same snapshots, different target model."""
        return CheckpointSet(
            spec=self.spec,
            snapshots=self.snapshots,
            target_index=target_index,
            train_loss=self.train_loss,
            val_metric=self.val_metric,
            metadata=self.metadata,
            directory=self.directory,
        )

    def manifest(self) -> Dict[str, Any]:
        return {
            **self.metadata,
            "model": self.spec.name,
            "epochs": self.epochs,
            "target_index": self.target_index,
            "train_loss": self.train_loss,
            "val_metric": self.val_metric,
            "files": [CHECKPOINT_PATTERN.format(epoch=k) for k in range(1, self.epochs + 1)],
        }

    def save(self, directory: Union[str, Path]) -> Path:
        """Write every snapshot and the manifest."""
        directory = Path(directory)
        for epoch in range(1, self.epochs + 1):
            save_checkpoint(checkpoint_path(directory, epoch), self.spec, self.snapshots[epoch], epoch)
        CanonicalJSON.write(directory / MANIFEST_NAME, self.manifest())
        self.directory = directory
        logger.info("Saved %d checkpoints to %s", self.epochs, directory)
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path], target_index: Optional[int] = None) -> "CheckpointSet":
        """
        Rebuild a set from a checkpoint directory.

        Raises:
            MissingCheckpointError: a listed epoch file is absent
            CheckpointError: manifest unreadable or checkpoints inconsistent
        """
        directory = Path(directory)
        manifest_file = directory / MANIFEST_NAME
        if not manifest_file.is_file():
            raise CheckpointError(f"No {MANIFEST_NAME} in {directory}")
        try:
            manifest = CanonicalJSON.read(manifest_file)
        except Exception as e:
            raise CheckpointError(f"Unreadable manifest {manifest_file}: {e}") from e

        spec: Optional[ModelSpec] = None
        snapshots: Dict[int, ParamSet] = {}
        for epoch in range(1, int(manifest["epochs"]) + 1):
            path = checkpoint_path(directory, epoch)
            if not path.is_file():
                raise MissingCheckpointError(epoch)
            params, meta = load_checkpoint(path, spec)
            if meta.epoch != epoch:
                raise CheckpointError(f"{path} records epoch {meta.epoch}")
            spec = meta.spec
            snapshots[epoch] = params

        known = {"model", "epochs", "target_index", "train_loss", "val_metric", "files"}
        return cls(
            spec=spec,
            snapshots=snapshots,
            target_index=target_index or int(manifest["target_index"]),
            train_loss=list(manifest.get("train_loss", [])),
            val_metric=list(manifest.get("val_metric", [])),
            metadata={k: v for k, v in manifest.items() if k not in known},
            directory=directory,
        )
