"""One-class Deep-SVDD detection"""

from trajguard.detector.svdd import (
    DetectionVerdict,
    SvddConfig,
    SvddModel,
    SvddNet,
    anomaly_score,
    calibrate_threshold,
    classify,
    classify_batch,
    fit_svdd,
    load_detector,
    save_detector,
    scores,
)

__all__ = [
    "DetectionVerdict",
    "SvddConfig",
    "SvddModel",
    "SvddNet",
    "anomaly_score",
    "calibrate_threshold",
    "classify",
    "classify_batch",
    "fit_svdd",
    "load_detector",
    "save_detector",
    "scores",
]
