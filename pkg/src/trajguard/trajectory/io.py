"""CSV files of trajectories and softmax imprints (9 significant digits)."""

import csv
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from trajguard.constants import TRAJECTORY_DIGITS, TaskKind, TrajectoryMode
from trajguard.exceptions import TrajectoryError
from trajguard.trajectory.extract import ImprintMatrix, LossTrajectory


def _fmt(value: float) -> str:
    return f"{value:.{TRAJECTORY_DIGITS}g}"


def _label(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def write_trajectories_csv(path: Union[str, Path], trajectories: Sequence[LossTrajectory]) -> Path:
    """
    One row per example: ``example_id,label,mode,n_used,l_001,...``.

    Raises:
        TrajectoryError: trajectories of unequal length
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    length = len(trajectories[0]) if trajectories else 0
    if any(len(t) != length for t in trajectories):
        raise TrajectoryError("cannot tabulate trajectories of unequal length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["example_id", "label", "mode", "n_used"] + [f"l_{k:03d}" for k in range(1, length + 1)])
        for t in trajectories:
            writer.writerow(
                [t.example_id, _label(t.label), t.mode.value, t.n_used] + [_fmt(v) for v in t.values]
            )
    return path


def write_imprints_csv(path: Union[str, Path], imprints: Sequence[ImprintMatrix]) -> Path:
    """One row per example with ``c{c}_e{k}`` columns (class-major)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not imprints:
        path.write_text("example_id,label,mode,n_used\n", encoding="utf-8")
        return path
    classes, length = imprints[0].matrix.shape
    epochs = imprints[0].epochs
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["example_id", "label", "mode", "n_used"]
        header += [f"c{c}_e{epochs[j]}" for c in range(classes) for j in range(length)]
        writer.writerow(header)
        for imprint in imprints:
            if imprint.matrix.shape != (classes, length):
                raise TrajectoryError("cannot tabulate imprints of unequal shape")
            writer.writerow(
                [imprint.example_id, _label(imprint.label), TrajectoryMode.SOFTMAX.value, imprint.n_used]
                + [_fmt(v) for v in imprint.matrix.reshape(-1)]
            )
    return path


def read_trajectories_csv(path: Union[str, Path], task: TaskKind = TaskKind.CLASSIFICATION) -> List[LossTrajectory]:
    """Parse a file written by ``write_trajectories_csv``; epochs are renumbered 1..L."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["example_id", "label", "mode", "n_used"]:
            raise TrajectoryError(f"{path}: not a trajectory file")
        rows = list(reader)
    trajectories = []
    for row in rows:
        label = None
        if row[1]:
            label = int(row[1]) if task == TaskKind.CLASSIFICATION else float(row[1])
        values = np.asarray([float(v) for v in row[4:]], dtype=np.float64)
        trajectories.append(
            LossTrajectory(
                values=values,
                example_id=int(row[0]),
                mode=TrajectoryMode(row[2]),
                task=task,
                n_used=int(row[3]),
                epochs=tuple(range(1, values.shape[0] + 1)),
                label=label,
            )
        )
    return trajectories
