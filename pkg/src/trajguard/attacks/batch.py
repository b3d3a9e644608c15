"""Crafting adversarial sets over a split, and persisting them."""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import torch

from trajguard.attacks.adaptive import AdaptiveConfig, adaptive_attack
from trajguard.attacks.base import AttackResult, AttackSpec, is_adversarial
from trajguard.attacks.boundary import boundary_attack
from trajguard.attacks.gradient import bim, fgsm, pgd_attack
from trajguard.constants import (
    ADV_FEATURES_NAME,
    ADV_MANIFEST_NAME,
    TRAJECTORY_DIGITS,
    AttackMethod,
    ImSource,
)
from trajguard.data.datasets import Split
from trajguard.exceptions import AttackError, TrajGuardError
from trajguard.storage.checkpoints import CheckpointSet
from trajguard.storage.serialization import CanonicalJSON

logger = logging.getLogger(__name__)


@dataclass
class AdversarialSet:
    """Crafted examples of one attack, aligned with their clean sources"""

    method: AttackMethod
    x_adv: torch.Tensor
    labels: torch.Tensor
    ids: np.ndarray
    success: np.ndarray
    linf: np.ndarray
    l2: np.ndarray
    raw_distances: Optional[np.ndarray] = None
    normalized_distances: Optional[np.ndarray] = None
    reasons: Optional[List[Optional[str]]] = None

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def success_rate(self) -> float:
        return float(self.success.mean()) if len(self) else 0.0

    def successful(self) -> Split:
        """Successful examples only, labelled with their clean labels."""
        positions = np.flatnonzero(self.success)
        index = torch.from_numpy(positions.astype(np.int64))
        return Split(x=self.x_adv[index], y=self.labels[index], ids=self.ids[positions])

    def manifest(self, attack: AttackSpec, adaptive: Optional[AdaptiveConfig] = None) -> Dict[str, Any]:
        examples = []
        for i in range(len(self)):
            entry: Dict[str, Any] = {
                "example_id": int(self.ids[i]),
                "success": bool(self.success[i]),
                "linf": float(self.linf[i]),
                "l2": float(self.l2[i]),
            }
            if self.raw_distances is not None:
                entry["raw_distance"] = float(self.raw_distances[i])
            if self.normalized_distances is not None and not np.isnan(self.normalized_distances[i]):
                entry["normalized_distance"] = float(self.normalized_distances[i])
            if self.reasons and self.reasons[i]:
                entry["reason"] = self.reasons[i]
            examples.append(entry)
        return {
            "method": self.method.value,
            "attack": attack.model_dump(mode="json"),
            "adaptive": adaptive.model_dump(mode="json", by_alias=True) if adaptive else None,
            "count": len(self),
            "successes": int(self.success.sum()),
            "success_rate": self.success_rate,
            "examples": examples,
        }

    def save(
        self, directory: Union[str, Path], attack: AttackSpec, adaptive: Optional[AdaptiveConfig] = None
    ) -> Path:
        """Write ``adv_manifest.json`` and ``adv_features.csv`` (label,f1,...,fd)."""
        directory = Path(directory)
        CanonicalJSON.write(directory / ADV_MANIFEST_NAME, self.manifest(attack, adaptive))
        flat = self.x_adv.reshape(len(self), -1).numpy()
        with open(directory / ADV_FEATURES_NAME, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["label"] + [f"f{j + 1}" for j in range(flat.shape[1])])
            for label, row in zip(self.labels.reshape(len(self), -1).tolist(), flat):
                writer.writerow([label[0]] + [f"{v:.{TRAJECTORY_DIGITS}g}" for v in row])
        return directory


def _craft_one(
    method: AttackMethod,
    defender: CheckpointSet,
    x: torch.Tensor,
    y,
    attack: AttackSpec,
    adaptive: Optional[AdaptiveConfig],
    source: CheckpointSet,
) -> Dict[str, Any]:
    spec, params = defender.spec, defender.target
    if method == AttackMethod.ADAPTIVE:
        result = adaptive_attack(source, x, y, attack, adaptive or AdaptiveConfig(), target_checkpoints=defender)
        return {
            "x_adv": result.x_adv,
            "success": result.success,
            "raw": result.raw_distance,
            "normalized": result.normalized_distance,
            "reason": result.reason,
        }
    if method == AttackMethod.BOUNDARY:
        outcome: AttackResult = boundary_attack(spec, params, x, y, attack.boundary_steps, attack.seed, attack)
        return {"x_adv": outcome.x_adv, "success": outcome.success, "reason": outcome.reason}
    if method == AttackMethod.FGSM:
        x_adv = fgsm(spec, params, x, y, attack.epsilon, attack)
    elif method == AttackMethod.BIM:
        x_adv = bim(spec, params, x, y, attack)
    else:
        x_adv = pgd_attack(spec, params, x, y, attack)
    success = is_adversarial(spec, params, x, x_adv, y, attack)
    return {"x_adv": x_adv, "success": success, "reason": None if success else "prediction unchanged"}


def craft_adversarial_set(
    defender: CheckpointSet,
    split: Split,
    attack: AttackSpec,
    adaptive: Optional[AdaptiveConfig] = None,
    surrogate: Optional[CheckpointSet] = None,
    parallelism: int = 1,
    out_dir: Optional[Union[str, Path]] = None,
) -> AdversarialSet:
    """
    Attack every example of ``split`` against the defender's target model.

    Each example gets its own seed (``attack.seed + example_id``) so results do
    not depend on parallelism.

    Args:
        defender: Defender's checkpoints; the target model is attacked
        split: Clean examples with their labels/targets
        attack: Method and budget
        adaptive: Adaptive settings (method=adaptive)
        surrogate: Attacker-trained IMs used when ``adaptive.im_source`` is surrogate
        parallelism: Worker threads
        out_dir: Persist manifest and features here when given

    Raises:
        AttackError: first failing example, naming its id
    """
    method = attack.method
    source = defender
    if method == AttackMethod.ADAPTIVE and adaptive and adaptive.im_source == ImSource.SURROGATE:
        if surrogate is None:
            raise AttackError("surrogate IM source requested but no surrogate checkpoints given")
        source = surrogate

    def one(position: int) -> Dict[str, Any]:
        example_id = int(split.ids[position])
        y = split.y[position]
        per_example = attack.model_copy(update={"seed": attack.seed + example_id})
        try:
            return _craft_one(method, defender, split.x[position], y, per_example, adaptive, source)
        except TrajGuardError as e:
            raise AttackError(f"example {example_id}: {e}") from e

    positions = range(len(split))
    if parallelism <= 1 or len(split) <= 1:
        outcomes = [one(p) for p in positions]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(one, positions))

    if outcomes:
        x_adv = torch.stack([o["x_adv"] for o in outcomes])
    else:
        x_adv = split.x[:0].clone()
    delta = (x_adv - split.x).reshape(len(split), -1)
    adversarial = AdversarialSet(
        method=method,
        x_adv=x_adv,
        labels=split.y.clone(),
        ids=split.ids.copy(),
        success=np.asarray([bool(o["success"]) for o in outcomes], dtype=bool),
        linf=delta.abs().max(dim=1).values.numpy().astype(np.float64) if len(split) else np.zeros(0),
        l2=torch.linalg.vector_norm(delta, dim=1).numpy().astype(np.float64),
        reasons=[o.get("reason") for o in outcomes],
    )
    if method == AttackMethod.ADAPTIVE:
        adversarial.raw_distances = np.asarray([o["raw"] for o in outcomes], dtype=np.float64)
        adversarial.normalized_distances = np.asarray(
            [np.nan if o["normalized"] is None else o["normalized"] for o in outcomes], dtype=np.float64
        )
    logger.info(
        "%s: %d/%d successful", method.value, int(adversarial.success.sum()), len(adversarial),
        extra={"attack": method.value, "success_rate": adversarial.success_rate},
    )
    if out_dir is not None:
        adversarial.save(out_dir, attack, adaptive)
    return adversarial
