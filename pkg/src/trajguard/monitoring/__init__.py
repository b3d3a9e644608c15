"""Monitoring module - logging setup and stage latency metrics"""

from .logs import configure_logging
from .metrics import LatencyCollector, get_collector, reset_collector

__all__ = ["configure_logging", "LatencyCollector", "get_collector", "reset_collector"]
