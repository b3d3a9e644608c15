"""trajguard CLI - command line interface

Subcommands follow the pipeline: ``train``, ``attack``, ``extract``, ``fit``
(offline phase), ``detect`` (one input), ``eval`` and ``ablate``. Exit code 0
on success, 2 on configuration errors, 3 on runtime errors.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import torch

from trajguard import __version__
from trajguard.config import SeedsSection, Settings, load_settings
from trajguard.constants import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_RUNTIME_ERROR,
    AblationVariant,
    TrajectoryMode,
)
from trajguard.exceptions import ConfigError, TrajGuardError
from trajguard.harness.evaluation import ATTACKS_DIR, craft_all, run_ablation_suite, run_experiment
from trajguard.harness.pipeline import (
    BUNDLE_DIR,
    CHECKPOINT_DIR,
    PipelineBundle,
    load_dataset,
    obtain_checkpoints,
    run_offline,
    run_online,
    run_stage,
)
from trajguard.monitoring.logs import configure_logging
from trajguard.storage.serialization import CanonicalJSON
from trajguard.trajectory.extract import batch_extract, select_benign_pool
from trajguard.trajectory.io import write_imprints_csv, write_trajectories_csv

logger = logging.getLogger(__name__)


def _emit(payload: Dict[str, Any]) -> None:
    sys.stdout.write(CanonicalJSON.dumps(payload).decode("utf-8"))


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        for name in SeedsSection.model_fields:
            overrides[f"seeds.{name}"] = args.seed
    if args.out_dir is not None:
        overrides["runtime.out_dir"] = args.out_dir
    if args.parallelism is not None:
        overrides["runtime.parallelism"] = args.parallelism
    if args.log_level is not None:
        overrides["runtime.log_level"] = args.log_level
    return overrides


def cmd_train(settings: Settings, args: argparse.Namespace) -> Dict[str, Any]:
    out_dir = settings.runtime.out_dir
    data = run_stage("dataset", lambda: load_dataset(settings))
    checkpoints = run_stage("checkpoints", lambda: obtain_checkpoints(settings, data, out_dir / CHECKPOINT_DIR))
    result = {"checkpoints": str(out_dir / CHECKPOINT_DIR), "epochs": checkpoints.epochs, "val_metric": checkpoints.val_metric}
    if args.surrogate:
        surrogate = run_stage(
            "surrogate",
            lambda: obtain_checkpoints(settings, data, out_dir / "surrogate", seed=settings.seeds.surrogate),
        )
        result["surrogate_epochs"] = surrogate.epochs
    return result


def cmd_attack(settings: Settings, args: argparse.Namespace) -> Dict[str, Any]:
    out_dir = settings.runtime.out_dir
    data = run_stage("dataset", lambda: load_dataset(settings))
    checkpoints = run_stage("checkpoints", lambda: obtain_checkpoints(settings, data, out_dir / CHECKPOINT_DIR))
    sets = craft_all(settings, checkpoints, data, out_dir)
    return {
        "attacks": str(out_dir / ATTACKS_DIR),
        "success_rate": {name: adversarial.success_rate for name, adversarial in sets.items()},
    }


def cmd_extract(settings: Settings, args: argparse.Namespace) -> Dict[str, Any]:
    out_dir = settings.runtime.out_dir
    trajectory = settings.trajectory
    data = run_stage("dataset", lambda: load_dataset(settings))
    checkpoints = run_stage("checkpoints", lambda: obtain_checkpoints(settings, data, out_dir / CHECKPOINT_DIR))
    split = data.split(args.split)
    if args.split == "val":
        ids = run_stage(
            "pool", lambda: select_benign_pool(checkpoints, split, trajectory.pool_size, settings.seeds.pool)
        )
        split = split.subset([split.position_of(i) for i in ids])
    items = run_stage(
        "trajectories",
        lambda: batch_extract(
            checkpoints, split, trajectory.mode, settings.runtime.parallelism, trajectory.loss, trajectory.truncate
        ),
    )
    path = out_dir / f"trajectories_{args.split}.csv"
    if trajectory.mode == TrajectoryMode.SOFTMAX:
        write_imprints_csv(path, items)
    else:
        write_trajectories_csv(path, items)
    return {"trajectories": str(path), "count": len(items)}


def cmd_fit(settings: Settings, args: argparse.Namespace) -> Dict[str, Any]:
    bundle = run_offline(settings, settings.runtime.out_dir)
    return {
        "bundle": str(bundle.directory),
        "n_used": bundle.n_used,
        "preset_frr": bundle.preset_frr,
        "threshold": bundle.detector.threshold,
        "config_hash": bundle.config_hash,
    }


def _parse_input(text: str, shape: Sequence[int]) -> torch.Tensor:
    try:
        values = np.asarray([float(v) for v in text.split(",") if v.strip()], dtype=np.float32)
    except ValueError as e:
        raise ConfigError(f"--input must be comma-separated numbers: {e}") from e
    if values.size == int(np.prod(shape)):
        values = values.reshape(tuple(shape))
    return torch.from_numpy(values)


def cmd_detect(settings: Settings, args: argparse.Namespace) -> Dict[str, Any]:
    directory = Path(args.bundle) if args.bundle else settings.runtime.out_dir / BUNDLE_DIR
    bundle = run_stage("bundle", lambda: PipelineBundle.load(directory))
    if args.input is not None:
        x = _parse_input(args.input, bundle.checkpoints.spec.input_shape)
        example_id = 0
    else:
        split = run_stage("dataset", lambda: load_dataset(settings)).split(args.split)
        position = run_stage("dataset", lambda: split.position_of(args.example_id))
        x, example_id = split.x[position], args.example_id
    verdict = run_online(bundle, x, example_id)
    return {"example_id": example_id, **verdict.to_dict()}


def cmd_eval(settings: Settings, args: argparse.Namespace) -> Dict[str, Any]:
    report = run_experiment(settings, settings.runtime.out_dir)
    return {
        "report": str(settings.runtime.out_dir / "report.json"),
        "accuracy": {
            f"{row.attack}@{row.preset_frr}": row.detection_accuracy for row in report.rows
        },
    }


def cmd_ablate(settings: Settings, args: argparse.Namespace) -> Dict[str, Any]:
    variants = args.variant or [v.value for v in AblationVariant]
    reports = run_ablation_suite(settings, variants, settings.runtime.out_dir)
    frr = settings.svdd.frr
    return {
        variant: {attack: report.accuracy(attack, frr) for attack in report.attacks}
        for variant, report in reports.items()
    }


COMMANDS = {
    "train": (cmd_train, "Train and keep one checkpoint per epoch"),
    "attack": (cmd_attack, "Craft adversarial sets for the configured methods"),
    "extract": (cmd_extract, "Write synthetic-loss trajectories as CSV"),
    "fit": (cmd_fit, "Run the offline phase and persist the detection bundle"),
    "detect": (cmd_detect, "Classify one input with a persisted bundle"),
    "eval": (cmd_eval, "Offline phase, attacks and detection report"),
    "ablate": (cmd_ablate, "Run intensifier ablation variants"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajguard", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"trajguard {__version__}")
    parser.add_argument("--config", type=Path, help="plain-text key=value config file")
    parser.add_argument("--seed", type=int, help="override every seeds.* key")
    parser.add_argument("--out-dir", type=Path, help="run directory")
    parser.add_argument("--parallelism", type=int, help="worker threads")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="extra config override")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")

    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        if name == "train":
            cmd.add_argument("--surrogate", action="store_true", help="also train the surrogate checkpoint set")
        if name == "extract":
            cmd.add_argument("--split", choices=["train", "val", "test"], default="val")
        if name == "detect":
            cmd.add_argument("--bundle", type=Path, help="bundle directory (default <out-dir>/bundle)")
            source = cmd.add_mutually_exclusive_group(required=True)
            source.add_argument("--input", help="comma-separated feature values")
            source.add_argument("--example-id", type=int, help="example id from the dataset")
            cmd.add_argument("--split", choices=["train", "val", "test"], default="test")
        if name == "ablate":
            cmd.add_argument(
                "--variant", action="append", choices=[v.value for v in AblationVariant],
                help="variant to run (repeatable; all by default)",
            )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.config, _overrides(args))
        configure_logging(settings.runtime.log_level, settings.runtime.log_format)
    except ConfigError as e:
        sys.stderr.write(f"config error: {e}\n")
        return EXIT_CONFIG_ERROR
    except ValueError as e:
        sys.stderr.write(f"config error: {e}\n")
        return EXIT_CONFIG_ERROR

    handler, _ = COMMANDS[args.command]
    try:
        _emit(handler(settings, args))
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG_ERROR
    except (TrajGuardError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_RUNTIME_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
