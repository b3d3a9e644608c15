"""Stage latency metrics for trajguard.

Records wall-clock durations of the online detection stages:
- trajectory synthesis (all intermediate-model forwards)
- reduction (standardization + autoencoder embedding)
- spectrum transformation
- detection (Deep-SVDD scoring)
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional

import numpy as np
from prometheus_client import CollectorRegistry, Summary, generate_latest

logger = logging.getLogger(__name__)

STAGES = ("synthesis", "reduction", "spectrum", "detection")


@dataclass
class StageStats:
    """Summary statistics of one stage, in milliseconds."""

    count: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    max_ms: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "count": self.count,
            "mean_ms": self.mean_ms,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "max_ms": self.max_ms,
        }


@dataclass
class LatencyCollector:
    """Collects per-stage latencies into a private Prometheus registry."""

    registry: CollectorRegistry = field(default_factory=CollectorRegistry)
    samples: Dict[str, List[float]] = field(default_factory=dict)

    def __post_init__(self):
        self._summary = Summary(
            "trajguard_stage_latency_seconds",
            "Latency of online detection stages (seconds)",
            ["stage"],
            registry=self.registry,
        )

    def record(self, stage: str, seconds: float) -> None:
        """Record one duration.

        Args:
            stage: Stage name
            seconds: Duration in seconds
        """
        self._summary.labels(stage=stage).observe(seconds)
        self.samples.setdefault(stage, []).append(seconds)

    @contextmanager
    def time(self, stage: str) -> Iterator[None]:
        """Context manager timing the enclosed block under ``stage``."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record(stage, time.perf_counter() - start)

    def stats(self) -> Dict[str, StageStats]:
        """Per-stage summary statistics.

        Returns:
            Mapping stage -> StageStats for stages with at least one sample
        """
        result = {}
        for stage, values in self.samples.items():
            ms = np.asarray(values, dtype=np.float64) * 1000.0
            result[stage] = StageStats(
                count=int(ms.size),
                mean_ms=float(ms.mean()),
                p50_ms=float(np.percentile(ms, 50)),
                p95_ms=float(np.percentile(ms, 95)),
                max_ms=float(ms.max()),
            )
        return result

    def export_prometheus(self) -> str:
        """Export metrics in Prometheus text format."""
        return generate_latest(self.registry).decode("utf-8")

    def reset(self) -> None:
        self.samples.clear()


# Global collector instance
_collector: Optional[LatencyCollector] = None


def get_collector() -> LatencyCollector:
    """Get or create global latency collector.

    Returns:
        Global LatencyCollector instance
    """
    global _collector
    if _collector is None:
        _collector = LatencyCollector()
        logger.debug("Initialized global latency collector")
    return _collector


def reset_collector():
    """Reset global latency collector (for testing)."""
    global _collector
    _collector = None
