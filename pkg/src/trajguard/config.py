"""Configuration management for trajguard

Settings are grouped into sections that mirror the pipeline stages. A plain
``key=value`` file (dotted keys) or ``TRAJGUARD_<SECTION>__<KEY>`` environment
variables populate them.
"""

import hashlib
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from trajguard.constants import (
    DEFAULT_AE_DROPOUT,
    DEFAULT_AE_EPOCHS,
    DEFAULT_AE_HIDDEN,
    DEFAULT_BOTTLENECK,
    DEFAULT_FRR_GRID,
    DEFAULT_LAMBDA,
    DEFAULT_LOG_OFFSET,
    DEFAULT_LOG_LEVEL,
    DEFAULT_PGD_STEPS,
    DEFAULT_POOL_SIZE,
    DEFAULT_PRESET_FRR,
    DEFAULT_REGRESSION_TOLERANCE,
    DEFAULT_SVDD_HIDDEN,
    DEFAULT_SVDD_OUTPUT,
    DEFAULT_TAU,
    LOG_FORMAT_JSON,
    AblationVariant,
    AttackMethod,
    CalibrationSource,
    ImSource,
    OptimizerKind,
    SpectrumMode,
    SyntheticLabel,
    TrajectoryMode,
)
from trajguard.exceptions import ConfigError


class Section(BaseModel):
    """Base class for config sections"""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class DatasetSection(Section):
    id: str = "blobs-4"
    samples_per_class: int = Field(default=250, ge=1)


class ModelSection(Section):
    spec: str = "mlp:32,32"


class TrainSection(Section):
    epochs: int = Field(default=30, ge=2)
    batch_size: int = Field(default=32, ge=1)
    optimizer: OptimizerKind = OptimizerKind.ADAM
    lr: float = Field(default=1e-2, ge=0)
    weight_decay: float = Field(default=0.0, ge=0)
    target_index: Optional[int] = Field(default=None, ge=1)


class AttackSection(Section):
    method: List[AttackMethod] = Field(
        default_factory=lambda: [AttackMethod.FGSM, AttackMethod.PGD]
    )
    epsilon: float = Field(default=0.1, ge=0)
    steps: int = Field(default=DEFAULT_PGD_STEPS, ge=1)
    alpha: Optional[float] = Field(default=None, gt=0)
    lambda_: float = Field(default=DEFAULT_LAMBDA, ge=0, alias="lambda")
    tau: float = Field(default=DEFAULT_TAU, gt=0)
    im_source: ImSource = ImSource.DEFENDER
    boundary_steps: int = Field(default=2000, ge=0)
    tolerance: float = Field(default=DEFAULT_REGRESSION_TOLERANCE, gt=0)
    max_examples: Optional[int] = Field(default=None, ge=1)

    @field_validator("method", mode="before")
    @classmethod
    def _split_methods(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value


class TrajectorySection(Section):
    mode: TrajectoryMode = TrajectoryMode.TARGET_ANCHORED
    truncate: Optional[int] = Field(default=None, ge=1)
    pool_size: int = Field(default=DEFAULT_POOL_SIZE, ge=0)
    loss: SyntheticLabel = SyntheticLabel.SOFT


class AutoencoderSection(Section):
    bottleneck: int = Field(default=DEFAULT_BOTTLENECK, ge=2)
    hidden: int = Field(default=DEFAULT_AE_HIDDEN, ge=1)
    epochs: int = Field(default=DEFAULT_AE_EPOCHS, ge=0)
    lr: float = Field(default=1e-3, gt=0)
    dropout: float = Field(default=DEFAULT_AE_DROPOUT, ge=0, lt=1)
    batch_size: int = Field(default=32, ge=1)
    spectrum_mode: SpectrumMode = SpectrumMode.VECTOR


class IntensifierSection(Section):
    variant: AblationVariant = AblationVariant.FULL
    log_scale: bool = True
    log_offset: float = Field(default=DEFAULT_LOG_OFFSET, gt=0)


class SvddSection(Section):
    frr: float = Field(default=DEFAULT_PRESET_FRR, ge=0, lt=1)
    frr_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_FRR_GRID))
    hidden: int = Field(default=DEFAULT_SVDD_HIDDEN, ge=1)
    output_dim: int = Field(default=DEFAULT_SVDD_OUTPUT, ge=1)
    epochs: int = Field(default=100, ge=0)
    lr: float = Field(default=1e-3, gt=0)
    weight_decay: float = Field(default=1e-6, ge=0)
    batch_size: int = Field(default=64, ge=1)
    calibration: CalibrationSource = CalibrationSource.TRAIN

    @field_validator("frr_grid", mode="before")
    @classmethod
    def _split_grid(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [float(item) for item in value.split(",") if item.strip()]
        return value

    @field_validator("frr_grid")
    @classmethod
    def _check_grid(cls, value: List[float]) -> List[float]:
        for frr in value:
            if not 0 <= frr < 1:
                raise ValueError(f"preset FRR must lie in [0, 1), got {frr}")
        return value


class SeedsSection(Section):
    data: int = 7
    train: int = 42
    attack: int = 1234
    pool: int = 11
    ae: int = 42
    svdd: int = 42
    surrogate: int = 4242


class RuntimeSection(Section):
    parallelism: int = Field(default=1, ge=1)
    log_level: str = DEFAULT_LOG_LEVEL
    log_format: str = LOG_FORMAT_JSON
    out_dir: Path = Path("runs")


class Settings(BaseSettings):
    """Main application settings"""

    model_config = SettingsConfigDict(
        env_prefix="TRAJGUARD_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="forbid",
    )

    dataset: DatasetSection = Field(default_factory=DatasetSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    attack: AttackSection = Field(default_factory=AttackSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    ae: AutoencoderSection = Field(default_factory=AutoencoderSection)
    intensifier: IntensifierSection = Field(default_factory=IntensifierSection)
    svdd: SvddSection = Field(default_factory=SvddSection)
    seeds: SeedsSection = Field(default_factory=SeedsSection)
    runtime: RuntimeSection = Field(default_factory=RuntimeSection)

    def section_dump(self, *names: str) -> Dict[str, Any]:
        """JSON-ready dump of the named sections (all but runtime when empty)"""
        data = self.model_dump(mode="json", by_alias=True)
        if not names:
            names = tuple(key for key in data if key != "runtime")
        return {name: data[name] for name in names}

    def config_hash(self, *names: str) -> str:
        """sha256 over the canonical JSON of the named sections"""
        payload = orjson.dumps(self.section_dump(*names), option=orjson.OPT_SORT_KEYS)
        return hashlib.sha256(payload).hexdigest()

    def stage_hashes(self) -> Dict[str, str]:
        """Hashes of the inputs each offline stage depends on"""
        data = self.section_dump()
        stages: Dict[str, Tuple[Any, ...]] = {
            "checkpoints": (data["dataset"], data["model"], data["train"], data["seeds"]["train"]),
            "pool": (data["trajectory"], data["seeds"]["pool"]),
            "autoencoder": (data["ae"], data["intensifier"], data["seeds"]["ae"]),
            "detector": (data["svdd"], data["seeds"]["svdd"]),
            "attacks": (data["attack"], data["seeds"]["attack"], data["seeds"]["surrogate"]),
        }
        return {
            name: hashlib.sha256(orjson.dumps(parts, option=orjson.OPT_SORT_KEYS)).hexdigest()
            for name, parts in stages.items()
        }


def parse_config_text(text: str) -> Dict[str, Dict[str, str]]:
    """
    Parse ``section.key=value`` lines into a nested dict.

    Args:
        text: Config file contents

    Returns:
        {section: {key: raw string value}}

    Raises:
        ConfigError: on lines without '=' or keys without a section
    """
    nested: Dict[str, Dict[str, str]] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} must be <section>.<name>")
        section, name = key.split(".", 1)
        nested.setdefault(section, {})[name] = value
    return nested


def load_settings(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Settings:
    """
    Build Settings from an optional config file plus dotted-key overrides.

    Args:
        path: Plain-text key=value config file
        overrides: Extra {"section.key": value} entries applied last

    Returns:
        Validated Settings

    Raises:
        ConfigError: unreadable file, unknown key or invalid value
    """
    nested: Dict[str, Dict[str, Any]] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        nested = parse_config_text(text)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name = key.partition(".")
        nested.setdefault(section, {})[name] = value

    try:
        return Settings(**nested)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
    except TypeError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance (environment only)"""
    return Settings()
