"""Evaluation report types and their JSON/CSV files"""

import csv
import io
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from trajguard.constants import ReportFormat
from trajguard.exceptions import ReportError
from trajguard.storage.serialization import CanonicalJSON


@dataclass
class EvalRow:
    """One (attack, preset FRR) cell"""

    attack: str
    preset_frr: float
    threshold: float
    adversarial_count: int
    detected: int
    detection_accuracy: Optional[float]
    benign_count: int
    rejected: int
    online_frr: float
    attack_success_rate: Optional[float] = None


CSV_COLUMNS = [f.name for f in fields(EvalRow)]


@dataclass
class EvalReport:
    """Rates per attack and preset FRR, with the configuration that produced them"""

    rows: List[EvalRow]
    variant: str
    preset_frr: float
    n_used: int
    config_hash: str = ""
    config: Dict[str, Any] = field(default_factory=dict)

    def row(self, attack: str, preset_frr: Optional[float] = None) -> EvalRow:
        preset_frr = self.preset_frr if preset_frr is None else preset_frr
        for row in self.rows:
            if row.attack == attack and np.isclose(row.preset_frr, preset_frr):
                return row
        raise KeyError(f"no row for attack {attack!r} at preset FRR {preset_frr}")

    def accuracy(self, attack: str, preset_frr: Optional[float] = None) -> Optional[float]:
        return self.row(attack, preset_frr).detection_accuracy

    @property
    def attacks(self) -> List[str]:
        return list(dict.fromkeys(row.attack for row in self.rows))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "preset_frr": self.preset_frr,
            "n_used": self.n_used,
            "config_hash": self.config_hash,
            "config": self.config,
            "rows": [asdict(row) for row in self.rows],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvalReport":
        try:
            return cls(
                rows=[EvalRow(**row) for row in data["rows"]],
                variant=data["variant"],
                preset_frr=data["preset_frr"],
                n_used=data["n_used"],
                config_hash=data.get("config_hash", ""),
                config=dict(data.get("config", {})),
            )
        except (KeyError, TypeError) as e:
            raise ReportError(f"malformed report: {e}") from e


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_csv(report: EvalReport) -> str:
    """One row per (attack, preset FRR) in report order."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        values = asdict(row)
        writer.writerow([_cell(values[name]) for name in CSV_COLUMNS])
    return buffer.getvalue()


def emit_report(
    report: EvalReport, fmt: Union[ReportFormat, str], path: Union[str, Path]
) -> Path:
    """
    Write the report as canonical JSON or CSV.

    Raises:
        ReportError: unknown format or IO failure
    """
    try:
        fmt = ReportFormat(fmt)
    except ValueError as e:
        raise ReportError(f"unknown report format {fmt!r}") from e
    path = Path(path)
    try:
        if fmt == ReportFormat.JSON:
            return CanonicalJSON.write(path, report.to_dict())
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report_csv(report), encoding="utf-8")
    except OSError as e:
        raise ReportError(f"cannot write {path}: {e}") from e
    return path


def load_report(path: Union[str, Path]) -> EvalReport:
    """Parse a JSON report written by emit_report."""
    return EvalReport.from_dict(CanonicalJSON.read(path))
