"""Offline/online phases, evaluation, ablation and reports"""

from trajguard.harness.evaluation import (
    craft_all,
    evaluate_detection,
    run_ablation,
    run_ablation_suite,
    run_experiment,
)
from trajguard.harness.pipeline import (
    FeatureMap,
    PipelineBundle,
    correct_examples,
    obtain_checkpoints,
    run_offline,
    run_online,
    write_features_csv,
)
from trajguard.harness.report import EvalReport, EvalRow, emit_report, load_report

__all__ = [
    "EvalReport",
    "EvalRow",
    "FeatureMap",
    "PipelineBundle",
    "correct_examples",
    "craft_all",
    "emit_report",
    "evaluate_detection",
    "load_report",
    "obtain_checkpoints",
    "run_ablation",
    "run_ablation_suite",
    "run_experiment",
    "run_offline",
    "run_online",
    "write_features_csv",
]
