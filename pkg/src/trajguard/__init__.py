"""
trajguard - adversarial example detection from training-trajectory imprints.

Trains small models while keeping every epoch's parameters, crafts adversarial
examples, turns each input's synthetic-loss trajectory across those epochs into
a spectrum signature, and flags outliers with a one-class Deep-SVDD.
"""

__version__ = "0.1.0"

from trajguard.config import Settings, get_settings, load_settings
from trajguard.exceptions import TrajGuardError

__all__ = [
    "Settings",
    "TrajGuardError",
    "__version__",
    "get_settings",
    "load_settings",
]
