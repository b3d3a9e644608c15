"""Per-position z-scoring with statistics fitted on benign trajectories.

Loss trajectories are non-negative and heavy-tailed: confidently classified
inputs sit near zero while inputs close to a decision boundary reach O(1).
With ``log_offset`` set, values go through ``log(v + log_offset)`` before the
z-score so both ends keep their resolution.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from trajguard.constants import STD_FLOOR
from trajguard.exceptions import IntensifierError


def _log_condition(data: np.ndarray, offset: Optional[float]) -> np.ndarray:
    if offset is None:
        return data
    if np.any(data < 0):
        raise IntensifierError("log conditioning needs non-negative trajectory values")
    return np.log(data + offset)


@dataclass(frozen=True)
class Standardizer:
    """
    Mean/std per position (and channel), optionally in log space.

    Works on ``(n, L)`` trajectories and ``(n, L, C)`` imprint sequences.
    """

    mean: np.ndarray
    std: np.ndarray
    log_offset: Optional[float] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.mean.shape)

    @classmethod
    def fit(cls, data: np.ndarray, log_offset: Optional[float] = None) -> "Standardizer":
        """
        Args:
            data: ``(n, L)`` or ``(n, L, C)`` benign values
            log_offset: Fit on ``log(data + log_offset)`` when given

        Raises:
            IntensifierError: fewer than 2 rows, non-finite or (with
                ``log_offset``) negative values
        """
        data = np.asarray(data, dtype=np.float64)
        if data.ndim < 2 or data.shape[0] < 2:
            raise IntensifierError(f"standardization needs >= 2 trajectories, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise IntensifierError("non-finite values in trajectories")
        if log_offset is not None and log_offset <= 0:
            raise IntensifierError(f"log offset must be positive, got {log_offset}")
        data = _log_condition(data, log_offset)
        return cls(mean=data.mean(axis=0), std=np.maximum(data.std(axis=0), STD_FLOOR), log_offset=log_offset)

    def apply(self, data: np.ndarray) -> np.ndarray:
        """
        z-score with the stored statistics; never refits.

        Raises:
            IntensifierError: per-example shape differs from the fitted one
        """
        data = np.asarray(data, dtype=np.float64)
        single = data.shape == self.shape
        if not single and tuple(data.shape[1:]) != self.shape:
            raise IntensifierError(f"trajectory shape {data.shape} does not match fitted {self.shape}")
        return (_log_condition(data, self.log_offset) - self.mean) / self.std

    def to_dict(self) -> Dict[str, Any]:
        """Exact JSON form (float64 values survive orjson round trips)."""
        return {
            "shape": list(self.shape),
            "mean": self.mean.reshape(-1).tolist(),
            "std": self.std.reshape(-1).tolist(),
            "log_offset": self.log_offset,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Standardizer":
        shape = tuple(data["shape"])
        mean = np.asarray(data["mean"], dtype=np.float64).reshape(shape)
        std = np.asarray(data["std"], dtype=np.float64).reshape(shape)
        if np.any(std < STD_FLOOR):
            raise IntensifierError("stored std below the floor")
        log_offset = data.get("log_offset")
        return cls(mean=mean, std=std, log_offset=None if log_offset is None else float(log_offset))


def standardize(
    data: np.ndarray, stats: Optional[Standardizer] = None, log_offset: Optional[float] = None
) -> Tuple[np.ndarray, Standardizer]:
    """
    Fit (``stats`` None) or apply standardization.

    ``log_offset`` only matters when fitting; applied statistics carry their own.

    Returns:
        (standardized data, statistics used)
    """
    if stats is None:
        stats = Standardizer.fit(data, log_offset)
    return stats.apply(data), stats
