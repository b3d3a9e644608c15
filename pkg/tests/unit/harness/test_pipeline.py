"""Tests for feature maps, bundles and the online phase."""

import numpy as np
import pytest
import torch

from trajguard.constants import BUNDLE_MANIFEST_NAME, AblationVariant, SpectrumMode, Verdict
from trajguard.exceptions import DetectorError, PipelineStageError, TrajGuardError
from trajguard.harness.pipeline import FeatureMap, PipelineBundle, run_online, run_stage, write_features_csv
from trajguard.intensifier.standardize import Standardizer
from trajguard.monitoring.metrics import STAGES, LatencyCollector
from trajguard.storage.serialization import CanonicalJSON


class TestRunStage:
    def test_wraps_domain_errors(self):
        def fail():
            raise DetectorError("boom")

        with pytest.raises(PipelineStageError) as info:
            run_stage("detector", fail)
        assert info.value.stage == "detector"

    def test_other_errors_pass_through(self):
        with pytest.raises(ZeroDivisionError):
            run_stage("detector", lambda: 1 / 0)


class TestFeatureMap:
    """Test detector input widths per ablation variant."""

    @pytest.mark.parametrize(
        "variant, mode, dim",
        [
            (AblationVariant.FULL, SpectrumMode.VECTOR, 3),
            (AblationVariant.FULL, SpectrumMode.SEQUENCE, 12),
            (AblationVariant.NO_NOISE_REDUCTION, SpectrumMode.VECTOR, 3),
            (AblationVariant.NO_FFT, SpectrumMode.VECTOR, 4),
            (AblationVariant.NO_FFT, SpectrumMode.SEQUENCE, 20),
            (AblationVariant.NEITHER, SpectrumMode.VECTOR, 5),
        ],
    )
    def test_feature_dim(self, benign_trajectories, untrained_autoencoder, variant, mode, dim):
        feature_map = FeatureMap(
            untrained_autoencoder.standardizer, untrained_autoencoder, variant, mode
        )
        assert feature_map.feature_dim == dim
        assert feature_map.features(benign_trajectories).shape == (40, dim)

    def test_imprint_dims(self, rng):
        standardizer = Standardizer.fit(rng.random((10, 5, 3)))
        assert FeatureMap(standardizer, variant=AblationVariant.NEITHER).feature_dim == 15
        assert FeatureMap(standardizer, variant=AblationVariant.NO_NOISE_REDUCTION).feature_dim == 9

    def test_autoencoder_required(self, benign_trajectories):
        with pytest.raises(TrajGuardError):
            FeatureMap(Standardizer.fit(benign_trajectories), variant=AblationVariant.FULL)

    def test_neither_is_standardization(self, benign_trajectories):
        standardizer = Standardizer.fit(benign_trajectories)
        feature_map = FeatureMap(standardizer, variant=AblationVariant.NEITHER)
        np.testing.assert_array_equal(feature_map.features(benign_trajectories), standardizer.apply(benign_trajectories))


class TestPipelineBundle:
    """Test bundle consistency and persistence."""

    def test_dimension_chain_checked(self, plain_bundle, untrained_autoencoder):
        wide = FeatureMap(untrained_autoencoder.standardizer, untrained_autoencoder, AblationVariant.NO_FFT)
        with pytest.raises(TrajGuardError):
            PipelineBundle(plain_bundle.checkpoints, wide, plain_bundle.detector)

    def test_extract_split_shape(self, plain_bundle, holdout):
        assert plain_bundle.extract_split(holdout.subset(range(3))).shape == (3, 5)

    def test_save_and_load(self, plain_bundle, holdout, tmp_path):
        checkpoints = plain_bundle.checkpoints.with_target(plain_bundle.checkpoints.target_index)
        bundle = PipelineBundle(checkpoints, plain_bundle.feature_map, plain_bundle.detector)
        directory = bundle.save(tmp_path / "bundle")
        assert (directory / "checkpoints" / "manifest.json").is_file()
        manifest = CanonicalJSON.read(directory / BUNDLE_MANIFEST_NAME)
        assert manifest["variant"] == "neither"
        assert manifest["autoencoder"] is None
        assert manifest["feature_dim"] == 5
        loaded = PipelineBundle.load(directory)
        for position in range(5):
            x = holdout.x[position]
            assert run_online(loaded, x).score == run_online(plain_bundle, x).score

    def test_with_frr(self, plain_bundle):
        strict = plain_bundle.with_frr(0.0)
        assert strict.preset_frr == 0.0
        assert strict.detector.threshold >= plain_bundle.detector.threshold


class TestRunOnline:
    """Test the single-input detection path."""

    def test_verdict_and_timing(self, plain_bundle, holdout):
        collector = LatencyCollector()
        verdict = run_online(plain_bundle, holdout.x[0], int(holdout.ids[0]), collector)
        assert verdict.verdict in (Verdict.BENIGN, Verdict.ADVERSARIAL)
        assert verdict.threshold == plain_bundle.detector.threshold
        assert set(collector.stats()) == set(STAGES)

    def test_bad_input_names_synthesis(self, plain_bundle):
        with pytest.raises(PipelineStageError) as info:
            run_online(plain_bundle, torch.zeros(7))
        assert info.value.stage == "synthesis"


class TestFeaturesCsv:
    def test_layout(self, tmp_path):
        path = write_features_csv(
            tmp_path / "features.csv",
            {"benign-holdout": ([4, 9], np.array([[1.0, 0.5], [2.0, 1 / 3]])), "fgsm": ([4], np.array([[0.0, 1.0]]))},
        )
        assert path.read_text().splitlines() == [
            "source,example_id,f1,f2",
            "benign-holdout,4,1,0.5",
            "benign-holdout,9,2,0.333333333",
            "fgsm,4,0,1",
        ]
