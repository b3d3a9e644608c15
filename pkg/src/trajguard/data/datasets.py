"""
Dataset lookup and synthesis.

Supported ids:
    blobs-<k>[x<d>]             k Gaussian class blobs in d dimensions (default d=8)
    moons                       two interleaving half circles
    rings                       two concentric circles
    sine-forecast               4-channel noisy sines, 3-step window -> next value
    idx-file:<images>[,<labels>] MNIST-style IDX files
    csv-file:<path>             rows ``label,f1,...,fd``, optional header

Classification features are min-max scaled to [0, 1] so attack budgets are
expressed in that scale.
"""

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import torch
from sklearn.datasets import make_blobs, make_circles, make_moons
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import MinMaxScaler

from trajguard.constants import TaskKind
from trajguard.exceptions import DatasetError, DatasetFormatError

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")

_BLOBS = re.compile(r"^blobs-(\d+)(?:x(\d+))?$")
_IDX_MAGIC_LABELS = 0x00000801
_IDX_MAGIC_IMAGES = 0x00000803

BLOBS_DEFAULT_DIM = 8
BLOBS_CLUSTER_STD = 2.0
MOONS_NOISE = 0.15
RINGS_NOISE = 0.08
RINGS_FACTOR = 0.5
SINE_CHANNELS = 4
SINE_WINDOW = 3
SINE_NOISE = 0.05


@dataclass
class Split:
    """One split: features, labels/targets and stable example ids."""

    x: torch.Tensor
    y: torch.Tensor
    ids: np.ndarray

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def subset(self, positions) -> "Split":
        positions = np.asarray(positions, dtype=np.int64)
        index = torch.from_numpy(positions)
        return Split(x=self.x[index], y=self.y[index], ids=self.ids[positions])

    def position_of(self, example_id: int) -> int:
        matches = np.flatnonzero(self.ids == example_id)
        if matches.size == 0:
            raise DatasetError(f"example id {example_id} not in split")
        return int(matches[0])


@dataclass
class DatasetHandle:
    """Examples tagged train/val/test plus task metadata."""

    name: str
    task: TaskKind
    input_shape: Tuple[int, ...]
    output_dim: int
    splits: Dict[str, Split] = field(default_factory=dict)

    def split(self, name: str) -> Split:
        try:
            return self.splits[name]
        except KeyError:
            raise DatasetError(f"Dataset {self.name} has no split {name!r}") from None

    @property
    def num_classes(self) -> Optional[int]:
        return self.output_dim if self.task == TaskKind.CLASSIFICATION else None


def _stratified_splits(
    features: np.ndarray, labels: np.ndarray, seed: int
) -> Dict[str, np.ndarray]:
    """60/20/20 stratified positions, deterministic in ``seed``."""
    positions = np.arange(len(labels))
    try:
        train, rest = train_test_split(
            positions, test_size=0.4, random_state=seed, stratify=labels
        )
        val, test = train_test_split(
            rest, test_size=0.5, random_state=seed, stratify=labels[rest]
        )
    except ValueError:
        logger.warning("Stratified split impossible, falling back to a plain shuffle")
        train, rest = train_test_split(positions, test_size=0.4, random_state=seed)
        val, test = train_test_split(rest, test_size=0.5, random_state=seed)
    return {"train": np.sort(train), "val": np.sort(val), "test": np.sort(test)}


def _classification_handle(
    name: str, features: np.ndarray, labels: np.ndarray, seed: int,
    input_shape: Optional[Tuple[int, ...]] = None,
) -> DatasetHandle:
    if features.shape[0] == 0:
        raise DatasetError(f"Dataset {name} is empty")
    classes, labels = np.unique(labels, return_inverse=True)
    flat = features.reshape(features.shape[0], -1).astype(np.float64)
    scaled = MinMaxScaler().fit_transform(flat).astype(np.float32)
    shape = input_shape or tuple(features.shape[1:])
    scaled = scaled.reshape((features.shape[0],) + shape)

    splits = {}
    for split_name, positions in _stratified_splits(scaled, labels, seed).items():
        splits[split_name] = Split(
            x=torch.from_numpy(np.ascontiguousarray(scaled[positions])),
            y=torch.from_numpy(labels[positions].astype(np.int64)),
            ids=positions.astype(np.int64),
        )
    return DatasetHandle(
        name=name,
        task=TaskKind.CLASSIFICATION,
        input_shape=shape,
        output_dim=int(len(classes)),
        splits=splits,
    )


def _sine_forecast(seed: int, samples: int) -> DatasetHandle:
    rng = np.random.default_rng(seed)
    length = samples + SINE_WINDOW
    t = np.arange(length, dtype=np.float64)
    periods = np.array([24.0, 17.0, 11.0, 37.0])[:SINE_CHANNELS]
    phases = rng.uniform(0.0, 2 * np.pi, size=SINE_CHANNELS)
    series = np.sin(2 * np.pi * t[:, None] / periods[None, :] + phases[None, :])
    series += SINE_NOISE * rng.standard_normal(series.shape)
    series = MinMaxScaler().fit_transform(series).astype(np.float32)

    windows = np.stack([series[i:i + SINE_WINDOW] for i in range(samples)])
    targets = series[SINE_WINDOW:SINE_WINDOW + samples, :1]

    n_train = int(0.6 * samples)
    n_val = int(0.2 * samples)
    bounds = {"train": (0, n_train), "val": (n_train, n_train + n_val), "test": (n_train + n_val, samples)}
    splits = {
        name: Split(
            x=torch.from_numpy(np.ascontiguousarray(windows[lo:hi])),
            y=torch.from_numpy(np.ascontiguousarray(targets[lo:hi])),
            ids=np.arange(lo, hi, dtype=np.int64),
        )
        for name, (lo, hi) in bounds.items()
    }
    return DatasetHandle(
        name="sine-forecast",
        task=TaskKind.REGRESSION,
        input_shape=(SINE_WINDOW, SINE_CHANNELS),
        output_dim=1,
        splits=splits,
    )


def read_idx(path: Path) -> np.ndarray:
    """
    Read an unsigned-byte IDX file (labels 0x801 or images 0x803).

    Raises:
        DatasetFormatError: unknown magic or truncated payload
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise DatasetError(f"Cannot read {path}: {e}") from e
    if len(data) < 4:
        raise DatasetFormatError(f"{path}: too short for an IDX header")
    magic = int.from_bytes(data[:4], "big")
    if magic not in (_IDX_MAGIC_LABELS, _IDX_MAGIC_IMAGES):
        raise DatasetFormatError(f"{path}: bad IDX magic 0x{magic:08x}")
    rank = magic & 0xFF
    header = 4 + 4 * rank
    if len(data) < header:
        raise DatasetFormatError(f"{path}: truncated IDX header")
    dims = tuple(int.from_bytes(data[4 + 4 * i:8 + 4 * i], "big") for i in range(rank))
    expected = int(np.prod(dims))
    payload = np.frombuffer(data, dtype=np.uint8, offset=header)
    if payload.size != expected:
        raise DatasetFormatError(f"{path}: payload has {payload.size} bytes, header says {expected}")
    return payload.reshape(dims)


def _labels_path_for(images: Path) -> Path:
    name = images.name.replace("images-idx3", "labels-idx1").replace("images", "labels")
    if name == images.name:
        raise DatasetError(f"Cannot derive a labels file for {images}; pass idx-file:<images>,<labels>")
    return images.with_name(name)


def _idx_dataset(spec: str, seed: int) -> DatasetHandle:
    parts = [part for part in spec.split(",") if part]
    images_path = Path(parts[0])
    labels_path = Path(parts[1]) if len(parts) > 1 else _labels_path_for(images_path)
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3:
        raise DatasetFormatError(f"{images_path}: expected a 3-D image array, got rank {images.ndim}")
    if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
        raise DatasetFormatError(f"{labels_path}: {labels.shape} labels for {images.shape[0]} images")
    features = images.astype(np.float32) / 255.0
    handle = _classification_handle(
        f"idx-file:{images_path.name}", features, labels, seed,
        input_shape=(1, images.shape[1], images.shape[2]),
    )
    return handle


def _csv_dataset(path: str, seed: int) -> DatasetHandle:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as e:
        raise DatasetError(f"Cannot read {path}: {e}") from e
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    width = len(rows[0])
    if width < 2 or any(len(row) != width for row in rows):
        raise DatasetFormatError(f"{path}: rows must all have the form label,f1,...,fd")
    try:
        table = np.asarray(rows, dtype=np.float64)
    except ValueError as e:
        raise DatasetFormatError(f"{path}: non-numeric value: {e}") from e
    labels = table[:, 0]
    if not np.all(labels == np.round(labels)):
        raise DatasetFormatError(f"{path}: labels must be integers")
    return _classification_handle(f"csv-file:{Path(path).name}", table[:, 1:], labels.astype(np.int64), seed)


def load_or_synthesize_dataset(
    dataset_id: str, seed: int, samples_per_class: int = 250
) -> DatasetHandle:
    """
    Load or synthesize a dataset by id.

    Args:
        dataset_id: See module docstring
        seed: Controls synthesis noise and the split shuffle
        samples_per_class: Examples per class (windows for sine-forecast
            are ``4 * samples_per_class``)

    Returns:
        DatasetHandle with train/val/test splits

    Raises:
        DatasetError: unknown id
        DatasetFormatError: malformed file
    """
    match = _BLOBS.match(dataset_id)
    if match:
        k = int(match.group(1))
        d = int(match.group(2) or BLOBS_DEFAULT_DIM)
        if k < 2 or d < 1:
            raise DatasetError(f"blobs needs k >= 2 and d >= 1, got {dataset_id}")
        features, labels = make_blobs(
            n_samples=[samples_per_class] * k,
            n_features=d,
            cluster_std=BLOBS_CLUSTER_STD,
            center_box=(-5.0, 5.0),
            random_state=seed,
        )
        return _classification_handle(dataset_id, features, labels, seed)
    if dataset_id == "moons":
        features, labels = make_moons(n_samples=2 * samples_per_class, noise=MOONS_NOISE, random_state=seed)
        return _classification_handle(dataset_id, features, labels, seed)
    if dataset_id == "rings":
        features, labels = make_circles(
            n_samples=2 * samples_per_class, noise=RINGS_NOISE, factor=RINGS_FACTOR, random_state=seed
        )
        return _classification_handle(dataset_id, features, labels, seed)
    if dataset_id == "sine-forecast":
        return _sine_forecast(seed, 4 * samples_per_class)
    if dataset_id.startswith("idx-file:"):
        return _idx_dataset(dataset_id[len("idx-file:"):], seed)
    if dataset_id.startswith("csv-file:"):
        return _csv_dataset(dataset_id[len("csv-file:"):], seed)
    raise DatasetError(f"Unknown dataset id {dataset_id!r}")
