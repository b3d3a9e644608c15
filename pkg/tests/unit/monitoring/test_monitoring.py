"""
Tests for latency metrics and logging setup.
"""

import io
import logging

import orjson
import pytest

from trajguard.monitoring.logs import configure_logging
from trajguard.monitoring.metrics import LatencyCollector, get_collector, reset_collector


@pytest.fixture
def restore_logger():
    root = logging.getLogger("trajguard")
    handlers, level, propagate = list(root.handlers), root.level, root.propagate
    yield root
    root.handlers[:] = handlers
    root.setLevel(level)
    root.propagate = propagate


class TestLatencyCollector:
    """Test LatencyCollector"""

    def test_stats(self):
        collector = LatencyCollector()
        for seconds in (0.001, 0.002, 0.003):
            collector.record("synthesis", seconds)
        stats = collector.stats()["synthesis"]
        assert stats.count == 3
        assert stats.mean_ms == pytest.approx(2.0)
        assert stats.p50_ms == pytest.approx(2.0)
        assert stats.max_ms == pytest.approx(3.0)
        assert set(stats.to_dict()) == {"count", "mean_ms", "p50_ms", "p95_ms", "max_ms"}

    def test_time_context(self):
        collector = LatencyCollector()
        with collector.time("detection"):
            pass
        assert collector.stats()["detection"].count == 1

    def test_time_records_on_error(self):
        collector = LatencyCollector()
        with pytest.raises(RuntimeError):
            with collector.time("spectrum"):
                raise RuntimeError("stage failed")
        assert collector.stats()["spectrum"].count == 1

    def test_prometheus_export(self):
        collector = LatencyCollector()
        collector.record("reduction", 0.5)
        text = collector.export_prometheus()
        assert "trajguard_stage_latency_seconds" in text
        assert 'stage="reduction"' in text

    def test_private_registries(self):
        """Two collectors never share samples."""
        a, b = LatencyCollector(), LatencyCollector()
        a.record("synthesis", 0.1)
        assert b.stats() == {}

    def test_reset(self):
        collector = LatencyCollector()
        collector.record("synthesis", 0.1)
        collector.reset()
        assert collector.stats() == {}


class TestGlobalCollector:
    def test_singleton_and_reset(self):
        first = get_collector()
        assert get_collector() is first
        reset_collector()
        assert get_collector() is not first


class TestConfigureLogging:
    """Test configure_logging"""

    def test_json_records(self, restore_logger):
        stream = io.StringIO()
        configure_logging("INFO", "json", stream)
        logging.getLogger("trajguard.test").info("fitted", extra={"threshold": 1.5})
        record = orjson.loads(stream.getvalue().splitlines()[-1])
        assert record["message"] == "fitted"
        assert record["level"] == "INFO"
        assert record["logger"] == "trajguard.test"
        assert record["threshold"] == 1.5

    def test_text_records(self, restore_logger):
        stream = io.StringIO()
        configure_logging("DEBUG", "text", stream)
        logging.getLogger("trajguard").debug("hello")
        assert " - trajguard - DEBUG - hello" in stream.getvalue()

    def test_level_filters(self, restore_logger):
        stream = io.StringIO()
        configure_logging("WARNING", "text", stream)
        logging.getLogger("trajguard").info("quiet")
        assert stream.getvalue() == ""

    def test_single_handler(self, restore_logger):
        configure_logging("INFO", "text", io.StringIO())
        configure_logging("INFO", "text", io.StringIO())
        assert len(restore_logger.handlers) == 1

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            configure_logging("INFO", "yaml")
