"""
Pytest fixtures for harness tests.
"""

import pytest

from trajguard.constants import AblationVariant
from trajguard.detector.svdd import SvddConfig, fit_svdd
from trajguard.harness.pipeline import FeatureMap, PipelineBundle, correct_examples
from trajguard.intensifier.autoencoder import AutoencoderConfig, fit_autoencoder
from trajguard.intensifier.standardize import Standardizer


@pytest.fixture(scope="module")
def untrained_autoencoder(benign_trajectories):
    return fit_autoencoder(benign_trajectories, AutoencoderConfig(bottleneck=4, hidden=8, epochs=0))


@pytest.fixture(scope="module")
def plain_bundle(blobs_checkpoints, benign_trajectories):
    """Bundle without noise reduction or FFT, on an unsaved copy of the checkpoints"""
    feature_map = FeatureMap(Standardizer.fit(benign_trajectories), variant=AblationVariant.NEITHER)
    detector = fit_svdd(
        feature_map.features(benign_trajectories), 0.05, SvddConfig(hidden=8, output_dim=4, epochs=5)
    )
    checkpoints = blobs_checkpoints.with_target(blobs_checkpoints.target_index)
    return PipelineBundle(checkpoints=checkpoints, feature_map=feature_map, detector=detector)


@pytest.fixture(scope="module")
def holdout(blobs_checkpoints, blobs_data):
    return correct_examples(blobs_checkpoints, blobs_data.split("test"))
