"""
Offline and online detection phases.

Offline: train (or load) the checkpoint set, pick a benign pool, extract its
trajectories, fit the standardizer and autoencoder, turn embeddings into
spectra and fit the Deep-SVDD detector. The result is a PipelineBundle, which
can be persisted to a directory and reloaded.

Online: one input goes through trajectory synthesis, reduction, spectrum and
detection; each stage is timed by the latency collector.
"""

import csv
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import torch

from trajguard.config import Settings
from trajguard.constants import (
    AUTOENCODER_FILE,
    BUNDLE_MANIFEST_NAME,
    DETECTOR_FILE,
    MANIFEST_NAME,
    TRAJECTORY_DIGITS,
    AblationVariant,
    CalibrationSource,
    SpectrumMode,
    SyntheticLabel,
    TaskKind,
    TrajectoryMode,
)
from trajguard.data.datasets import DatasetHandle, Split, load_or_synthesize_dataset
from trajguard.detector.svdd import (
    DetectionVerdict,
    SvddConfig,
    SvddModel,
    classify,
    fit_svdd,
    load_detector,
    save_detector,
)
from trajguard.exceptions import PipelineStageError, ReportError, TrajGuardError
from trajguard.intensifier.autoencoder import (
    AutoencoderConfig,
    AutoencoderModel,
    encode_standardized,
    fit_autoencoder,
    load_autoencoder,
    save_autoencoder,
)
from trajguard.intensifier.spectrum import spectra
from trajguard.intensifier.standardize import Standardizer
from trajguard.monitoring.metrics import LatencyCollector, get_collector
from trajguard.nn.functional import forward
from trajguard.nn.optim import OptimizerConfig
from trajguard.storage.checkpoints import CheckpointSet
from trajguard.storage.serialization import CanonicalJSON
from trajguard.training.trainer import TrainConfig, train_with_checkpoints
from trajguard.trajectory.extract import (
    Imprint,
    batch_extract,
    extract_softmax_imprint,
    extract_trajectory,
    select_benign_pool,
    stack_imprints,
    truncate_epochs,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

CHECKPOINT_DIR = "checkpoints"
SURROGATE_DIR = "surrogate"
BUNDLE_DIR = "bundle"
FEATURES_FILE = "features.csv"
HOLDOUT_FRACTION = 0.2


def run_stage(stage: str, fn: Callable[[], T]) -> T:
    """Run ``fn`` re-raising any trajguard error as PipelineStageError(stage)."""
    try:
        return fn()
    except PipelineStageError:
        raise
    except TrajGuardError as e:
        raise PipelineStageError(stage, e) from e


@dataclass
class FeatureMap:
    """
    Trajectories to detector inputs, per ablation variant.

    full: standardize, embed, spectrum. no-noise-reduction: standardize,
    spectrum. no-fft: standardize, embed. neither: standardize only. The
    standardizer applies log conditioning when it was fitted with an offset.
    """

    standardizer: Standardizer
    autoencoder: Optional[AutoencoderModel] = None
    variant: AblationVariant = AblationVariant.FULL
    spectrum_mode: SpectrumMode = SpectrumMode.VECTOR

    def __post_init__(self):
        self.variant = AblationVariant(self.variant)
        self.spectrum_mode = SpectrumMode(self.spectrum_mode)
        if self.uses_autoencoder and self.autoencoder is None:
            raise TrajGuardError(f"variant {self.variant.value} needs an autoencoder")
        if self.autoencoder is not None and self.autoencoder.length != self.n_used:
            raise TrajGuardError(
                f"autoencoder length {self.autoencoder.length} does not match trajectories of length {self.n_used}"
            )

    @property
    def uses_autoencoder(self) -> bool:
        return self.variant in (AblationVariant.FULL, AblationVariant.NO_FFT)

    @property
    def uses_fft(self) -> bool:
        return self.variant in (AblationVariant.FULL, AblationVariant.NO_NOISE_REDUCTION)

    @property
    def n_used(self) -> int:
        return self.standardizer.shape[0]

    @property
    def channels(self) -> int:
        return self.standardizer.shape[1] if len(self.standardizer.shape) > 1 else 1

    @property
    def feature_dim(self) -> int:
        length, channels = self.n_used, self.channels
        sequence = self.spectrum_mode == SpectrumMode.SEQUENCE
        if self.uses_autoencoder:
            m = self.autoencoder.bottleneck
            if self.uses_fft:
                return (length // 2 + 1) * m if sequence else m // 2 + 1
            return m * length if sequence else m
        if self.uses_fft:
            return (length // 2 + 1) * channels
        return length * channels

    def reduce(self, stacked: np.ndarray) -> np.ndarray:
        """Standardize and, with noise reduction, embed."""
        standardized = self.standardizer.apply(stacked)
        if not self.uses_autoencoder:
            return standardized
        sequence = self.spectrum_mode == SpectrumMode.SEQUENCE
        return encode_standardized(self.autoencoder, standardized, sequence=sequence)

    def transform(self, reduced: np.ndarray) -> np.ndarray:
        """Spectra when the variant has FFT; always flattened to ``(n, feature_dim)``."""
        n = reduced.shape[0]
        if self.uses_fft:
            return spectra(reduced).reshape(n, -1)
        return reduced.reshape(n, -1)

    def features(self, stacked: np.ndarray) -> np.ndarray:
        return self.transform(self.reduce(stacked))


@dataclass
class PipelineBundle:
    """
    Persisted output of the offline phase.

    The chain trajectory length -> autoencoder L -> feature dim -> detector
    input dim is checked on construction.
    """

    checkpoints: CheckpointSet
    feature_map: FeatureMap
    detector: SvddModel
    mode: TrajectoryMode = TrajectoryMode.TARGET_ANCHORED
    label: SyntheticLabel = SyntheticLabel.SOFT
    config_hash: str = ""
    stage_hashes: Dict[str, str] = field(default_factory=dict)
    pool_ids: List[int] = field(default_factory=list)
    directory: Optional[Path] = None

    def __post_init__(self):
        self.mode = TrajectoryMode(self.mode)
        self.label = SyntheticLabel(self.label)
        full = _full_length(self.checkpoints, self.mode)
        if not 1 <= self.n_used <= full:
            raise TrajGuardError(f"trajectory length {self.n_used} outside 1..{full}")
        if self.feature_map.feature_dim != self.detector.input_dim:
            raise TrajGuardError(
                f"feature dimension {self.feature_map.feature_dim} does not match "
                f"detector input {self.detector.input_dim}"
            )

    @property
    def n_used(self) -> int:
        return self.feature_map.n_used

    @property
    def variant(self) -> AblationVariant:
        return self.feature_map.variant

    @property
    def autoencoder(self) -> Optional[AutoencoderModel]:
        return self.feature_map.autoencoder

    @property
    def preset_frr(self) -> float:
        return self.detector.preset_frr

    def with_frr(self, preset_frr: float) -> "PipelineBundle":
        """Same components, detector recalibrated to another preset FRR."""
        return PipelineBundle(
            checkpoints=self.checkpoints,
            feature_map=self.feature_map,
            detector=self.detector.with_frr(preset_frr),
            mode=self.mode,
            label=self.label,
            config_hash=self.config_hash,
            stage_hashes=self.stage_hashes,
            pool_ids=self.pool_ids,
            directory=self.directory,
        )

    def extract(self, x: torch.Tensor, example_id: int = 0) -> Imprint:
        if self.mode == TrajectoryMode.SOFTMAX:
            item = extract_softmax_imprint(self.checkpoints, x, example_id)
        else:
            item = extract_trajectory(self.checkpoints, x, self.mode, self.label, example_id)
        return truncate_epochs(item, self.n_used) if self.n_used < len(item) else item

    def extract_split(self, examples: Split, parallelism: int = 1) -> np.ndarray:
        """Stacked trajectories of a split, truncated like the pool."""
        full = _full_length(self.checkpoints, self.mode)
        truncate = self.n_used if self.n_used < full else None
        items = batch_extract(self.checkpoints, examples, self.mode, parallelism, self.label, truncate)
        return stack_imprints(items)

    def features(self, stacked: np.ndarray) -> np.ndarray:
        return self.feature_map.features(stacked)

    def manifest(self, directory: Path) -> Dict[str, Any]:
        checkpoint_ref = self.checkpoints.directory
        return {
            "checkpoints": os.path.relpath(checkpoint_ref, directory) if checkpoint_ref else None,
            "target_index": self.checkpoints.target_index,
            "mode": self.mode.value,
            "label": self.label.value,
            "n_used": self.n_used,
            "variant": self.variant.value,
            "spectrum_mode": self.feature_map.spectrum_mode.value,
            "preset_frr": self.preset_frr,
            "feature_dim": self.feature_map.feature_dim,
            "config_hash": self.config_hash,
            "stage_hashes": self.stage_hashes,
            "pool_ids": self.pool_ids,
            "standardizer": self.feature_map.standardizer.to_dict(),
            "autoencoder": AUTOENCODER_FILE if self.autoencoder is not None else None,
            "detector": DETECTOR_FILE,
        }

    def save(self, directory: Union[str, Path]) -> Path:
        """Write bundle.json, the detector and (if any) the autoencoder."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if self.checkpoints.directory is None:
            self.checkpoints.save(directory / CHECKPOINT_DIR)
        if self.autoencoder is not None:
            save_autoencoder(self.autoencoder, directory / AUTOENCODER_FILE)
        save_detector(self.detector, directory / DETECTOR_FILE)
        CanonicalJSON.write(directory / BUNDLE_MANIFEST_NAME, self.manifest(directory))
        self.directory = directory
        logger.info("Saved pipeline bundle to %s", directory)
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "PipelineBundle":
        """
        Raises:
            ReportError: unreadable bundle.json
            CheckpointError: missing or malformed model files
        """
        directory = Path(directory)
        manifest = CanonicalJSON.read(directory / BUNDLE_MANIFEST_NAME)
        if manifest.get("checkpoints") is None:
            raise ReportError(f"{directory / BUNDLE_MANIFEST_NAME} does not reference a checkpoint directory")
        checkpoints = CheckpointSet.load(directory / manifest["checkpoints"], manifest["target_index"])
        autoencoder = load_autoencoder(directory / manifest["autoencoder"]) if manifest["autoencoder"] else None
        feature_map = FeatureMap(
            standardizer=Standardizer.from_dict(manifest["standardizer"]),
            autoencoder=autoencoder,
            variant=AblationVariant(manifest["variant"]),
            spectrum_mode=SpectrumMode(manifest["spectrum_mode"]),
        )
        return cls(
            checkpoints=checkpoints,
            feature_map=feature_map,
            detector=load_detector(directory / manifest["detector"]),
            mode=TrajectoryMode(manifest["mode"]),
            label=SyntheticLabel(manifest["label"]),
            config_hash=manifest["config_hash"],
            stage_hashes=dict(manifest["stage_hashes"]),
            pool_ids=list(manifest["pool_ids"]),
            directory=directory,
        )


def _full_length(checkpoints: CheckpointSet, mode: TrajectoryMode) -> int:
    if mode == TrajectoryMode.CONSECUTIVE:
        return checkpoints.epochs - 1
    return len(checkpoints.im_epochs)


def load_dataset(settings: Settings) -> DatasetHandle:
    return load_or_synthesize_dataset(
        settings.dataset.id, settings.seeds.data, settings.dataset.samples_per_class
    )


def train_config(
    settings: Settings, seed: Optional[int] = None, checkpoint_dir: Optional[Path] = None
) -> TrainConfig:
    train = settings.train
    return TrainConfig(
        epochs=train.epochs,
        batch_size=train.batch_size,
        optimizer=OptimizerConfig(method=train.optimizer, lr=train.lr, weight_decay=train.weight_decay),
        seed=settings.seeds.train if seed is None else seed,
        dataset_id=settings.dataset.id,
        model_spec=settings.model.spec,
        checkpoint_dir=checkpoint_dir,
        target_index=train.target_index,
    )


def obtain_checkpoints(
    settings: Settings,
    data: DatasetHandle,
    directory: Optional[Path] = None,
    seed: Optional[int] = None,
) -> CheckpointSet:
    """Load the checkpoint set from ``directory`` if it holds one, else train it there."""
    if directory is not None and (Path(directory) / MANIFEST_NAME).is_file():
        logger.info("Reusing checkpoints in %s", directory)
        return CheckpointSet.load(directory, settings.train.target_index)
    return train_with_checkpoints(train_config(settings, seed, directory), data)


def correct_examples(checkpoints: CheckpointSet, split: Split) -> Split:
    """Examples the target model gets right (all of them for regression)."""
    if checkpoints.spec.task != TaskKind.CLASSIFICATION or len(split) == 0:
        return split
    with torch.no_grad():
        predicted = forward(checkpoints.spec, checkpoints.target, split.x).argmax(dim=-1)
    return split.subset(np.flatnonzero((predicted == split.y).numpy()))


def autoencoder_config(settings: Settings) -> AutoencoderConfig:
    ae = settings.ae
    return AutoencoderConfig(
        bottleneck=ae.bottleneck,
        hidden=ae.hidden,
        dropout=ae.dropout,
        epochs=ae.epochs,
        lr=ae.lr,
        batch_size=ae.batch_size,
        seed=settings.seeds.ae,
    )


def svdd_config(settings: Settings) -> SvddConfig:
    svdd = settings.svdd
    return SvddConfig(
        hidden=svdd.hidden,
        output_dim=svdd.output_dim,
        epochs=svdd.epochs,
        lr=svdd.lr,
        weight_decay=svdd.weight_decay,
        batch_size=svdd.batch_size,
        calibration=svdd.calibration,
        seed=settings.seeds.svdd,
    )


def _split_calibration(stacked: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    cut = len(stacked) - max(1, int(round(HOLDOUT_FRACTION * len(stacked))))
    return stacked[:cut], stacked[cut:]


def run_offline(
    settings: Settings,
    out_dir: Optional[Union[str, Path]] = None,
    data: Optional[DatasetHandle] = None,
    checkpoints: Optional[CheckpointSet] = None,
) -> PipelineBundle:
    """
    Build the detector from benign data.

    Stages: checkpoints -> pool -> trajectories -> autoencoder -> features ->
    detector. The pool is drawn from the validation split. With
    ``calibration=holdout`` its last fifth is kept out of training and
    calibrates the threshold.

    Args:
        settings: Validated settings
        out_dir: Run directory; checkpoints go to ``<out_dir>/checkpoints`` and
            the bundle to ``<out_dir>/bundle``
        data: Dataset (loaded from settings when omitted)
        checkpoints: Pre-trained checkpoint set

    Returns:
        PipelineBundle (saved when out_dir is given)

    Raises:
        PipelineStageError: any stage failure, naming the stage
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    variant = settings.intensifier.variant
    log_offset = settings.intensifier.log_offset if settings.intensifier.log_scale else None
    trajectory = settings.trajectory
    data = data or run_stage("dataset", lambda: load_dataset(settings))
    if checkpoints is None:
        directory = out_dir / CHECKPOINT_DIR if out_dir else None
        checkpoints = run_stage("checkpoints", lambda: obtain_checkpoints(settings, data, directory))

    val = data.split("val")
    pool_ids = run_stage(
        "pool", lambda: select_benign_pool(checkpoints, val, trajectory.pool_size, settings.seeds.pool)
    )
    pool = val.subset([val.position_of(i) for i in pool_ids])

    def extract() -> np.ndarray:
        items = batch_extract(
            checkpoints, pool, trajectory.mode, settings.runtime.parallelism, trajectory.loss, trajectory.truncate
        )
        return stack_imprints(items)

    stacked = run_stage("trajectories", extract)
    calibration = None
    if settings.svdd.calibration == CalibrationSource.HOLDOUT:
        stacked, calibration = _split_calibration(stacked)

    def fit_reduction() -> FeatureMap:
        standardizer = Standardizer.fit(stacked, log_offset)
        autoencoder = None
        if variant in (AblationVariant.FULL, AblationVariant.NO_FFT):
            autoencoder = fit_autoencoder(stacked, autoencoder_config(settings), standardizer)
        return FeatureMap(standardizer, autoencoder, variant, settings.ae.spectrum_mode)

    feature_map = run_stage("autoencoder", fit_reduction)
    features = run_stage("features", lambda: feature_map.features(stacked))
    holdout = None
    if calibration is not None:
        holdout = run_stage("features", lambda: feature_map.features(calibration))
    detector = run_stage(
        "detector", lambda: fit_svdd(features, settings.svdd.frr, svdd_config(settings), holdout)
    )

    bundle = run_stage(
        "bundle",
        lambda: PipelineBundle(
            checkpoints=checkpoints,
            feature_map=feature_map,
            detector=detector,
            mode=trajectory.mode,
            label=trajectory.loss,
            config_hash=settings.config_hash(),
            stage_hashes=settings.stage_hashes(),
            pool_ids=pool_ids,
        ),
    )
    if out_dir is not None:
        run_stage("bundle", lambda: bundle.save(out_dir / BUNDLE_DIR))
    logger.info(
        "Offline phase done: %d benign trajectories, L=%d, variant %s",
        len(pool_ids), bundle.n_used, variant.value,
        extra={"variant": variant.value, "config_hash": bundle.config_hash},
    )
    return bundle


def run_online(
    bundle: PipelineBundle,
    x: torch.Tensor,
    example_id: int = 0,
    collector: Optional[LatencyCollector] = None,
) -> DetectionVerdict:
    """
    Classify one input as benign or adversarial.

    Raises:
        PipelineStageError: stage "synthesis" for inputs that do not fit the
            model, or whichever later stage failed
    """
    collector = collector or get_collector()
    feature_map = bundle.feature_map
    with collector.time("synthesis"):
        item = run_stage("synthesis", lambda: bundle.extract(x, example_id))
    stacked = stack_imprints([item])
    with collector.time("reduction"):
        reduced = run_stage("reduction", lambda: feature_map.reduce(stacked))
    with collector.time("spectrum"):
        features = run_stage("spectrum", lambda: feature_map.transform(reduced))
    with collector.time("detection"):
        verdict = run_stage("detection", lambda: classify(bundle.detector, features[0]))
    logger.debug("example %d: %s (score %.6g)", example_id, verdict.verdict.value, verdict.score)
    return verdict


def write_features_csv(
    path: Union[str, Path], groups: Dict[str, Tuple[Sequence[int], np.ndarray]]
) -> Path:
    """
    Detector inputs for external plotting: ``source,example_id,f1,...,fd``.

    Args:
        groups: {source name: (example ids, (n, d) features)}, written in order
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    width = next((np.asarray(f).shape[1] for _, f in groups.values() if len(f)), 0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source", "example_id"] + [f"f{j + 1}" for j in range(width)])
        for source, (ids, feats) in groups.items():
            for example_id, row in zip(ids, np.asarray(feats)):
                writer.writerow([source, int(example_id)] + [f"{v:.{TRAJECTORY_DIGITS}g}" for v in row])
    return path
