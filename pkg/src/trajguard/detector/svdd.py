"""
One-class Deep-SVDD detector over spectrum signatures.

The mapping network has no bias terms; the hypersphere center is the mean of
the initial network outputs over the training set and stays fixed while the
mean squared distance to it is minimized. The threshold is the nearest-rank
(1 - FRR) quantile of benign calibration scores.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import orjson
import torch
from pydantic import BaseModel, ConfigDict, Field
from torch import nn

from trajguard.constants import (
    DEFAULT_PRESET_FRR,
    DEFAULT_SVDD_HIDDEN,
    DEFAULT_SVDD_OUTPUT,
    DETECTOR_DESCRIPTOR,
    CalibrationSource,
    Verdict,
)
from trajguard.exceptions import CheckpointError, DetectorError, NonFiniteError, SvddCollapseError
from trajguard.intensifier.standardize import Standardizer
from trajguard.storage.container import read_container, write_container

logger = logging.getLogger(__name__)

MIN_TRAINING_SPECTRA = 32
COLLAPSE_DISTANCE = 1e-9
COLLAPSE_OBJECTIVE = 1e-12


class SvddConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    hidden: int = Field(default=DEFAULT_SVDD_HIDDEN, ge=1)
    output_dim: int = Field(default=DEFAULT_SVDD_OUTPUT, ge=1)
    epochs: int = Field(default=100, ge=0)
    lr: float = Field(default=1e-3, gt=0)
    weight_decay: float = Field(default=1e-6, ge=0)
    batch_size: int = Field(default=64, ge=1)
    calibration: CalibrationSource = CalibrationSource.TRAIN
    seed: int = 42


class SvddNet(nn.Module):
    """phi: Linear -> leaky_relu -> Linear, all without bias."""

    def __init__(self, input_dim: int, hidden: int, output_dim: int):
        super().__init__()
        self.input_dim = input_dim
        self.fc1 = nn.Linear(input_dim, hidden, bias=False)
        self.fc2 = nn.Linear(hidden, output_dim, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(nn.functional.leaky_relu(self.fc1(x)))


@dataclass(frozen=True)
class DetectionVerdict:
    verdict: Verdict
    score: float
    threshold: float

    @property
    def is_adversarial(self) -> bool:
        return self.verdict == Verdict.ADVERSARIAL

    def to_dict(self):
        return {"verdict": self.verdict.value, "score": self.score, "threshold": self.threshold}


@dataclass
class SvddModel:
    """Mapping network, fixed center and calibrated threshold"""

    net: SvddNet
    center: torch.Tensor
    threshold: float
    preset_frr: float
    config: SvddConfig = field(default_factory=SvddConfig)
    standardizer: Optional[Standardizer] = None
    calibration_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    loss_history: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.threshold < 0:
            raise DetectorError(f"threshold must be >= 0, got {self.threshold}")
        if self.center.shape != (self.net.fc2.out_features,):
            raise DetectorError(
                f"center has shape {tuple(self.center.shape)}, network outputs {self.net.fc2.out_features}"
            )
        if any(module.bias is not None for module in (self.net.fc1, self.net.fc2)):
            raise DetectorError("SVDD mapping network must not have bias terms")

    @property
    def input_dim(self) -> int:
        return self.net.input_dim

    def with_frr(self, preset_frr: float) -> "SvddModel":
        """Copy recalibrated from the stored calibration scores."""
        if self.calibration_scores.size == 0:
            raise DetectorError("no calibration scores stored; cannot recalibrate")
        return replace(
            self, threshold=calibrate_threshold(self.calibration_scores, preset_frr), preset_frr=preset_frr
        )


def _prepare(model: SvddModel, spectra: np.ndarray) -> torch.Tensor:
    spectra = np.asarray(spectra, dtype=np.float64)
    if spectra.ndim != 2 or spectra.shape[1] != model.input_dim:
        raise DetectorError(f"spectrum dimension {spectra.shape[1:]} does not match detector input {model.input_dim}")
    if model.standardizer is not None:
        spectra = model.standardizer.apply(spectra)
    return torch.from_numpy(np.ascontiguousarray(spectra, dtype=np.float32))


def scores(model: SvddModel, spectra: np.ndarray) -> np.ndarray:
    """Squared distances ``||phi(s) - c||^2`` in float64 for an ``(n, d)`` batch."""
    x = _prepare(model, spectra)
    model.net.eval()
    with torch.no_grad():
        out = model.net(x).double()
    return ((out - model.center.double()) ** 2).sum(dim=1).numpy()


def anomaly_score(model: SvddModel, spectrum: np.ndarray) -> float:
    """
    Raises:
        DetectorError: spectrum dimension differs from the detector input
    """
    spectrum = np.asarray(spectrum, dtype=np.float64)
    if spectrum.ndim != 1:
        raise DetectorError(f"expected a single spectrum, got shape {spectrum.shape}")
    return float(scores(model, spectrum[None])[0])


def calibrate_threshold(benign_scores: Sequence[float], preset_frr: float) -> float:
    """
    Nearest-rank (1 - preset_frr) quantile.

    With n scores sorted ascending, theta is the r-th smallest where
    ``r = n - floor(preset_frr * n)``; at most ``ceil(preset_frr * n)`` scores
    lie strictly above it.

    Raises:
        DetectorError: empty scores or preset_frr outside [0, 1)
    """
    values = np.sort(np.asarray(benign_scores, dtype=np.float64).reshape(-1))
    if values.size == 0:
        raise DetectorError("cannot calibrate a threshold on zero scores")
    if not 0 <= preset_frr < 1:
        raise DetectorError(f"preset FRR must lie in [0, 1), got {preset_frr}")
    n = values.size
    rank = n - int(math.floor(preset_frr * n + 1e-9))
    return float(values[max(rank, 1) - 1])


def _verdict(score: float, threshold: float) -> DetectionVerdict:
    verdict = Verdict.ADVERSARIAL if score > threshold else Verdict.BENIGN
    return DetectionVerdict(verdict=verdict, score=score, threshold=threshold)


def classify(model: SvddModel, spectrum: np.ndarray) -> DetectionVerdict:
    return _verdict(anomaly_score(model, spectrum), model.threshold)


def classify_batch(model: SvddModel, spectra: np.ndarray) -> List[DetectionVerdict]:
    return [_verdict(float(s), model.threshold) for s in scores(model, spectra)]


def fit_svdd(
    spectra: np.ndarray,
    preset_frr: float = DEFAULT_PRESET_FRR,
    config: Optional[SvddConfig] = None,
    holdout: Optional[np.ndarray] = None,
) -> SvddModel:
    """
    Train the one-class detector on benign spectra and calibrate its threshold.

    Args:
        spectra: ``(n, d)`` benign spectrum signatures, n >= 32
        preset_frr: Tolerated benign rejection rate, in [0, 1)
        config: Network and training settings
        holdout: Benign spectra for ``calibration=holdout``

    Returns:
        SvddModel with theta from the training (or holdout) scores

    Raises:
        DetectorError: too few spectra, bad FRR, missing holdout
        SvddCollapseError: all outputs collapsed onto the center
    """
    config = config or SvddConfig()
    spectra = np.asarray(spectra, dtype=np.float64)
    if spectra.ndim != 2 or spectra.shape[0] < MIN_TRAINING_SPECTRA:
        raise DetectorError(f"Deep-SVDD needs >= {MIN_TRAINING_SPECTRA} spectra, got shape {spectra.shape}")
    if not 0 <= preset_frr < 1:
        raise DetectorError(f"preset FRR must lie in [0, 1), got {preset_frr}")
    if config.calibration == CalibrationSource.HOLDOUT and holdout is None:
        raise DetectorError("holdout calibration requested but no holdout spectra given")

    standardizer = Standardizer.fit(spectra)
    x = torch.from_numpy(standardizer.apply(spectra).astype(np.float32))
    n = x.shape[0]

    history: List[float] = []
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        net = SvddNet(spectra.shape[1], config.hidden, config.output_dim)
        with torch.no_grad():
            center = net(x).mean(dim=0)
        optimizer = torch.optim.Adam(net.parameters(), lr=config.lr, weight_decay=config.weight_decay)
        shuffle = torch.Generator().manual_seed(config.seed)
        for epoch in range(1, config.epochs + 1):
            order = torch.randperm(n, generator=shuffle)
            total = 0.0
            for start in range(0, n, config.batch_size):
                batch = x[order[start:start + config.batch_size]]
                optimizer.zero_grad()
                loss = torch.mean(torch.sum((net(batch) - center) ** 2, dim=1))
                if not bool(torch.isfinite(loss)):
                    raise NonFiniteError("SVDD objective diverged", location=f"epoch {epoch}")
                loss.backward()
                optimizer.step()
                total += float(loss.item()) * batch.shape[0]
            history.append(total / n)
    net.eval()

    with torch.no_grad():
        distances = torch.sum((net(x).double() - center.double()) ** 2, dim=1)
    if float(distances.sqrt().max()) < COLLAPSE_DISTANCE and float(distances.mean()) < COLLAPSE_OBJECTIVE:
        raise SvddCollapseError("all training outputs collapsed onto the hypersphere center")

    model = SvddModel(
        net=net,
        center=center.detach().clone(),
        threshold=0.0,
        preset_frr=preset_frr,
        config=config,
        standardizer=standardizer,
        loss_history=history,
    )
    if config.calibration == CalibrationSource.HOLDOUT:
        model.calibration_scores = scores(model, holdout)
    else:
        model.calibration_scores = distances.numpy()
    model.threshold = calibrate_threshold(model.calibration_scores, preset_frr)
    logger.info(
        "Fitted Deep-SVDD on %d spectra (d=%d), theta=%.6g at preset FRR %.3f",
        n, spectra.shape[1], model.threshold, preset_frr,
        extra={"preset_frr": preset_frr, "threshold": model.threshold},
    )
    return model


def save_detector(model: SvddModel, path: Union[str, Path]) -> Path:
    """TRCK container with descriptor ``trait-svdd-v1``; phi tensors, c, theta and FRR."""
    meta = {
        "config": model.config.model_dump(mode="json"),
        "input_dim": model.input_dim,
        "threshold": model.threshold,
        "preset_frr": model.preset_frr,
        "standardizer": model.standardizer.to_dict() if model.standardizer else None,
        "calibration_scores": model.calibration_scores.tolist(),
        "loss_history": model.loss_history,
    }
    descriptor = DETECTOR_DESCRIPTOR + "\n" + orjson.dumps(meta, option=orjson.OPT_SORT_KEYS).decode("utf-8")
    tensors = dict(model.net.state_dict())
    tensors["center"] = model.center
    tensors["threshold"] = torch.tensor([model.threshold], dtype=torch.float32)
    tensors["preset_frr"] = torch.tensor([model.preset_frr], dtype=torch.float32)
    return write_container(path, descriptor, 0, tensors)


def load_detector(path: Union[str, Path]) -> SvddModel:
    container = read_container(path)
    kind, _, payload = container.descriptor.partition("\n")
    if kind != DETECTOR_DESCRIPTOR:
        raise CheckpointError(f"{path}: descriptor {kind!r} is not {DETECTOR_DESCRIPTOR!r}")
    meta = orjson.loads(payload)
    config = SvddConfig(**meta["config"])
    net = SvddNet(meta["input_dim"], config.hidden, config.output_dim)
    try:
        net.load_state_dict({k: container.tensors[k] for k in ("fc1.weight", "fc2.weight")}, strict=True)
        center = container.tensors["center"]
    except (KeyError, RuntimeError) as e:
        raise CheckpointError(f"{path}: {e}") from e
    net.eval()
    return SvddModel(
        net=net,
        center=center,
        threshold=float(meta["threshold"]),
        preset_frr=float(meta["preset_frr"]),
        config=config,
        standardizer=Standardizer.from_dict(meta["standardizer"]) if meta["standardizer"] else None,
        calibration_scores=np.asarray(meta["calibration_scores"], dtype=np.float64),
        loss_history=list(meta["loss_history"]),
    )
