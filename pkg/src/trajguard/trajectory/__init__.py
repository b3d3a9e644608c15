"""Synthetic-loss trajectories and softmax imprints"""

from trajguard.trajectory.extract import (
    Imprint,
    ImprintMatrix,
    LossTrajectory,
    batch_extract,
    extract_softmax_imprint,
    extract_trajectory,
    select_benign_pool,
    stack_imprints,
    synthetic_losses,
    truncate_epochs,
)
from trajguard.trajectory.io import read_trajectories_csv, write_imprints_csv, write_trajectories_csv

__all__ = [
    "Imprint",
    "ImprintMatrix",
    "LossTrajectory",
    "batch_extract",
    "extract_softmax_imprint",
    "extract_trajectory",
    "read_trajectories_csv",
    "select_benign_pool",
    "stack_imprints",
    "synthetic_losses",
    "truncate_epochs",
    "write_imprints_csv",
    "write_trajectories_csv",
]
