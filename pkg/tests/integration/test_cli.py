"""
Tests for the command line interface.
"""

import logging

import orjson
import pytest

from trajguard.cli import main
from trajguard.constants import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_ERROR

pytestmark = pytest.mark.integration


@pytest.fixture(autouse=True)
def restore_logger():
    root = logging.getLogger("trajguard")
    handlers, level, propagate = list(root.handlers), root.level, root.propagate
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
    root.propagate = propagate


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, orjson.loads(out) if out.strip() else None


class TestCli:
    """Test subcommands and exit codes."""

    @pytest.mark.slow
    def test_fit_then_detect(self, capsys, tmp_path, tiny_overrides):
        code, fitted = run(capsys, "--out-dir", str(tmp_path), *tiny_overrides, "fit")
        assert code == EXIT_OK
        assert fitted["n_used"] == 5
        code, verdict = run(capsys, "--out-dir", str(tmp_path), *tiny_overrides, "detect", "--input", "0.5,0.5,0.5,0.5")
        assert code == EXIT_OK
        assert verdict["verdict"] in ("benign", "adversarial")
        assert verdict["threshold"] == fitted["threshold"]

    @pytest.mark.slow
    def test_eval(self, capsys, tmp_path, tiny_overrides):
        code, result = run(capsys, "--out-dir", str(tmp_path), "--seed", "3", *tiny_overrides, "eval")
        assert code == EXIT_OK
        assert set(result["accuracy"]) == {"fgsm@0.01", "fgsm@0.05", "pgd@0.01", "pgd@0.05"}
        assert (tmp_path / "report.json").is_file()

    @pytest.mark.slow
    def test_extract(self, capsys, tmp_path, tiny_overrides):
        code, result = run(capsys, "--out-dir", str(tmp_path), *tiny_overrides, "extract")
        assert code == EXIT_OK
        assert result["count"] == 48
        assert (tmp_path / "trajectories_val.csv").is_file()

    def test_unknown_key(self, capsys, tmp_path):
        code, _ = run(capsys, "--out-dir", str(tmp_path), "--set", "train.bogus=1", "fit")
        assert code == EXIT_CONFIG_ERROR

    def test_malformed_set(self, capsys, tmp_path):
        code, _ = run(capsys, "--out-dir", str(tmp_path), "--set", "train.epochs", "fit")
        assert code == EXIT_CONFIG_ERROR

    def test_missing_bundle(self, capsys, tmp_path):
        code, _ = run(capsys, "--out-dir", str(tmp_path), "detect", "--input", "0.1,0.2")
        assert code == EXIT_RUNTIME_ERROR

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2
