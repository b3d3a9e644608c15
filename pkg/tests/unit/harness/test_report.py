"""Tests for report files."""

import pytest

from trajguard.exceptions import ReportError
from trajguard.harness.report import CSV_COLUMNS, EvalReport, EvalRow, emit_report, load_report, report_csv


@pytest.fixture
def report():
    rows = [
        EvalRow("fgsm", 0.05, 1.5, 10, 9, 0.9, 40, 2, 0.05, 0.5),
        EvalRow("boundary", 0.05, 1.5, 0, 0, None, 40, 2, 0.05, 0.0),
    ]
    return EvalReport(rows=rows, variant="full", preset_frr=0.05, n_used=5, config_hash="abc")


class TestEvalReport:
    def test_lookup(self, report):
        assert report.accuracy("fgsm") == 0.9
        assert report.attacks == ["fgsm", "boundary"]
        with pytest.raises(KeyError):
            report.row("pgd")

    def test_dict_round_trip(self, report):
        assert EvalReport.from_dict(report.to_dict()) == report

    def test_malformed(self):
        with pytest.raises(ReportError):
            EvalReport.from_dict({"rows": []})


class TestEmitReport:
    """Test JSON and CSV output."""

    def test_csv_columns_and_cells(self, report):
        lines = report_csv(report).splitlines()
        assert lines[0].split(",") == CSV_COLUMNS
        assert lines[1] == "fgsm,0.05,1.5,10,9,0.9,40,2,0.05,0.5"
        assert lines[2] == "boundary,0.05,1.5,0,0,,40,2,0.05,0.0"

    def test_json_reload(self, report, tmp_path):
        path = emit_report(report, "json", tmp_path / "report.json")
        assert load_report(path) == report

    def test_deterministic_bytes(self, report, tmp_path):
        a = emit_report(report, "json", tmp_path / "a.json").read_bytes()
        b = emit_report(report, "json", tmp_path / "b.json").read_bytes()
        assert a == b

    def test_unknown_format(self, report, tmp_path):
        with pytest.raises(ReportError):
            emit_report(report, "xml", tmp_path / "report.xml")
