"""Datasets"""

from trajguard.data.datasets import SPLITS, DatasetHandle, Split, load_or_synthesize_dataset, read_idx

__all__ = ["SPLITS", "DatasetHandle", "Split", "load_or_synthesize_dataset", "read_idx"]
