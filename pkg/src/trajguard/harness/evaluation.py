"""
Detection evaluation, end-to-end experiments and component ablation.

Detection accuracy is the fraction of successful adversarial examples the
detector flags; online FRR is the fraction of a benign holdout it rejects.
Both are reported for every (attack, preset FRR) pair.
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from trajguard.attacks.adaptive import AdaptiveConfig
from trajguard.attacks.base import AttackSpec
from trajguard.attacks.batch import AdversarialSet, craft_adversarial_set
from trajguard.config import Settings
from trajguard.constants import AblationVariant, AttackMethod, ImSource, ReportFormat, TrajectoryMode
from trajguard.data.datasets import DatasetHandle, Split
from trajguard.detector.svdd import calibrate_threshold, scores
from trajguard.exceptions import DetectorError
from trajguard.harness.pipeline import (
    CHECKPOINT_DIR,
    FEATURES_FILE,
    SURROGATE_DIR,
    PipelineBundle,
    correct_examples,
    load_dataset,
    obtain_checkpoints,
    run_offline,
    run_online,
    run_stage,
    write_features_csv,
)
from trajguard.harness.report import EvalReport, EvalRow, emit_report
from trajguard.monitoring.metrics import LatencyCollector
from trajguard.storage.checkpoints import CheckpointSet
from trajguard.storage.serialization import CanonicalJSON

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
RUNTIME_JSON = "runtime.json"
ATTACKS_DIR = "attacks"
LATENCY_SAMPLE = 32

AdversarialInput = Union[AdversarialSet, Split]


def _successful(adversarial: AdversarialInput) -> Split:
    if isinstance(adversarial, AdversarialSet):
        return adversarial.successful()
    return adversarial


def evaluate_detection(
    bundle: PipelineBundle,
    benign_holdout: Split,
    adversarial: Union[AdversarialInput, Mapping[str, AdversarialInput]],
    frr_grid: Optional[Sequence[float]] = None,
    parallelism: int = 1,
    config: Optional[Dict[str, Any]] = None,
    features_path: Optional[Union[str, Path]] = None,
) -> EvalReport:
    """
    Classify every benign and adversarial example and tabulate the rates.

    Only successful adversarial examples count; a plain Split is taken as
    all-adversarial.

    Args:
        bundle: Offline-phase output
        benign_holdout: Benign examples disjoint from the training pool
        adversarial: One set, or {attack name: set}
        frr_grid: Preset FRRs to report; the bundle's own FRR is always included
        parallelism: Trajectory extraction workers
        config: Configuration echo for the report
        features_path: Also write the detector inputs as CSV here

    Raises:
        DetectorError: empty benign holdout, or no adversarial example at all
    """
    if isinstance(adversarial, (AdversarialSet, Split)):
        name = adversarial.method.value if isinstance(adversarial, AdversarialSet) else "adversarial"
        adversarial = {name: adversarial}
    if len(benign_holdout) == 0:
        raise DetectorError("benign holdout is empty")
    successful = {name: _successful(item) for name, item in adversarial.items()}
    if not successful or all(len(split) == 0 for split in successful.values()):
        raise DetectorError("no successful adversarial examples to evaluate")

    detector = bundle.detector
    grid = sorted(set(frr_grid or ()) | {bundle.preset_frr})
    thresholds = {
        frr: detector.threshold if frr == bundle.preset_frr else calibrate_threshold(detector.calibration_scores, frr)
        for frr in grid
    }

    def featurize(split: Split) -> np.ndarray:
        return bundle.features(bundle.extract_split(split, parallelism))

    benign_features = run_stage("evaluation", lambda: featurize(benign_holdout))
    benign_scores = scores(detector, benign_features)
    groups = {"benign-holdout": (benign_holdout.ids, benign_features)}

    rows: List[EvalRow] = []
    for name, split in successful.items():
        adv_features = featurize(split) if len(split) else np.zeros((0, benign_features.shape[1]))
        adv_scores = scores(detector, adv_features) if len(split) else np.zeros(0)
        groups[name] = (split.ids, adv_features)
        source = adversarial[name]
        success_rate = source.success_rate if isinstance(source, AdversarialSet) else None
        for frr, theta in thresholds.items():
            detected = int((adv_scores > theta).sum())
            rejected = int((benign_scores > theta).sum())
            rows.append(
                EvalRow(
                    attack=name,
                    preset_frr=float(frr),
                    threshold=float(theta),
                    adversarial_count=int(len(split)),
                    detected=detected,
                    detection_accuracy=detected / len(split) if len(split) else None,
                    benign_count=int(len(benign_holdout)),
                    rejected=rejected,
                    online_frr=rejected / len(benign_holdout),
                    attack_success_rate=success_rate,
                )
            )
            logger.info(
                "%s @ FRR %.3f: detection %s, online FRR %.4f",
                name, frr, "n/a" if not len(split) else f"{detected / len(split):.4f}",
                rejected / len(benign_holdout),
                extra={"attack": name, "preset_frr": frr},
            )

    if features_path is not None:
        write_features_csv(features_path, groups)
    return EvalReport(
        rows=rows,
        variant=bundle.variant.value,
        preset_frr=bundle.preset_frr,
        n_used=bundle.n_used,
        config_hash=bundle.config_hash,
        config=config or {},
    )


def attack_spec(settings: Settings, method: AttackMethod) -> AttackSpec:
    attack = settings.attack
    return AttackSpec(
        method=method,
        epsilon=attack.epsilon,
        alpha=attack.alpha,
        steps=attack.steps,
        seed=settings.seeds.attack,
        tolerance=attack.tolerance,
        boundary_steps=attack.boundary_steps,
    )


def adaptive_config(settings: Settings) -> AdaptiveConfig:
    """Adaptive settings; a softmax-imprint defender is attacked through target-anchored losses."""
    mode = settings.trajectory.mode
    if mode == TrajectoryMode.SOFTMAX:
        mode = TrajectoryMode.TARGET_ANCHORED
    return AdaptiveConfig(
        lambda_=settings.attack.lambda_,
        tau=settings.attack.tau,
        im_source=settings.attack.im_source,
        mode=mode,
        label=settings.trajectory.loss,
    )


def attack_sources(settings: Settings, checkpoints: CheckpointSet, data: DatasetHandle) -> Split:
    """Correctly handled test examples, capped at ``attack.max_examples``."""
    sources = correct_examples(checkpoints, data.split("test"))
    cap = settings.attack.max_examples
    if cap is not None and len(sources) > cap:
        sources = sources.subset(np.arange(cap))
    return sources


def craft_all(
    settings: Settings,
    checkpoints: CheckpointSet,
    data: DatasetHandle,
    out_dir: Optional[Path] = None,
) -> Dict[str, AdversarialSet]:
    """One adversarial set per configured method, in configuration order."""
    sources = attack_sources(settings, checkpoints, data)
    adaptive = adaptive_config(settings)
    surrogate = None
    methods = settings.attack.method
    if AttackMethod.ADAPTIVE in methods and adaptive.im_source == ImSource.SURROGATE:
        directory = out_dir / SURROGATE_DIR if out_dir else None
        surrogate = run_stage(
            "surrogate",
            lambda: obtain_checkpoints(settings, data, directory, seed=settings.seeds.surrogate),
        )
    sets: Dict[str, AdversarialSet] = {}
    for method in methods:
        target_dir = out_dir / ATTACKS_DIR / method.value if out_dir else None
        sets[method.value] = run_stage(
            f"attack:{method.value}",
            lambda: craft_adversarial_set(
                checkpoints,
                sources,
                attack_spec(settings, method),
                adaptive if method == AttackMethod.ADAPTIVE else None,
                surrogate,
                settings.runtime.parallelism,
                target_dir,
            ),
        )
    return sets


def run_experiment(
    settings: Settings,
    out_dir: Optional[Union[str, Path]] = None,
    data: Optional[DatasetHandle] = None,
    checkpoints: Optional[CheckpointSet] = None,
    adversarial: Optional[Mapping[str, AdversarialSet]] = None,
) -> EvalReport:
    """
    Offline phase, attacks, evaluation over the preset-FRR grid, reports.

    The benign holdout is the correctly handled test split; adversarial
    examples are crafted from it. With ``out_dir``, writes report.json,
    report.csv, runtime.json and features.csv there.

    Raises:
        PipelineStageError: naming the failing stage
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    wall: Dict[str, float] = {}
    started = time.perf_counter()
    data = data or run_stage("dataset", lambda: load_dataset(settings))
    if checkpoints is None:
        directory = out_dir / CHECKPOINT_DIR if out_dir else None
        checkpoints = run_stage("checkpoints", lambda: obtain_checkpoints(settings, data, directory))
    wall["checkpoints"] = time.perf_counter() - started

    mark = time.perf_counter()
    bundle = run_offline(settings, out_dir, data, checkpoints)
    wall["offline"] = time.perf_counter() - mark

    mark = time.perf_counter()
    if adversarial is None:
        adversarial = craft_all(settings, checkpoints, data, out_dir)
    wall["attacks"] = time.perf_counter() - mark

    mark = time.perf_counter()
    holdout = correct_examples(checkpoints, data.split("test"))
    report = evaluate_detection(
        bundle,
        holdout,
        dict(adversarial),
        settings.svdd.frr_grid,
        settings.runtime.parallelism,
        config=settings.section_dump(),
        features_path=out_dir / FEATURES_FILE if out_dir else None,
    )
    wall["evaluation"] = time.perf_counter() - mark

    collector = LatencyCollector()
    for position in range(min(LATENCY_SAMPLE, len(holdout))):
        run_online(bundle, holdout.x[position], int(holdout.ids[position]), collector)

    if out_dir is not None:
        emit_report(report, ReportFormat.JSON, out_dir / REPORT_JSON)
        emit_report(report, ReportFormat.CSV, out_dir / REPORT_CSV)
        CanonicalJSON.write(
            out_dir / RUNTIME_JSON,
            {
                "wall_seconds": wall,
                "online_latency": {stage: s.to_dict() for stage, s in collector.stats().items()},
            },
        )
    return report


def run_ablation(
    settings: Settings,
    variant: Union[AblationVariant, str],
    out_dir: Optional[Union[str, Path]] = None,
    data: Optional[DatasetHandle] = None,
    checkpoints: Optional[CheckpointSet] = None,
    adversarial: Optional[Mapping[str, AdversarialSet]] = None,
) -> EvalReport:
    """
    run_experiment with one intensifier variant; everything else held fixed.

    ``variant=full`` is the plain experiment.
    """
    variant = AblationVariant(variant)
    intensifier = settings.intensifier.model_copy(update={"variant": variant})
    settings = settings.model_copy(update={"intensifier": intensifier})
    return run_experiment(settings, out_dir, data, checkpoints, adversarial)


def run_ablation_suite(
    settings: Settings,
    variants: Iterable[Union[AblationVariant, str]] = tuple(AblationVariant),
    out_dir: Optional[Union[str, Path]] = None,
) -> Dict[str, EvalReport]:
    """
    Every variant on shared checkpoints and adversarial sets.

    Results go to ``<out_dir>/<variant>/``; checkpoints and attacks to
    ``<out_dir>/checkpoints`` and ``<out_dir>/attacks``.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    data = run_stage("dataset", lambda: load_dataset(settings))
    directory = out_dir / CHECKPOINT_DIR if out_dir else None
    checkpoints = run_stage("checkpoints", lambda: obtain_checkpoints(settings, data, directory))
    adversarial = craft_all(settings, checkpoints, data, out_dir)
    reports: Dict[str, EvalReport] = {}
    for variant in variants:
        variant = AblationVariant(variant)
        target = out_dir / variant.value if out_dir else None
        reports[variant.value] = run_ablation(settings, variant, target, data, checkpoints, adversarial)
        logger.info("Ablation variant %s done", variant.value)
    return reports
