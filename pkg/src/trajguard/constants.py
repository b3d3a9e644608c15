"""Global constants for trajguard"""

from enum import Enum


class TaskKind(str, Enum):
    """Learning task of a model"""

    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class LayerKind(str, Enum):
    """Layer descriptors understood by the functional forward pass"""

    DENSE = "dense"
    CONV2D = "conv2d"
    LSTM = "lstm-cell"
    RELU = "relu"
    FLATTEN = "flatten"


class LossKind(str, Enum):
    """Loss functions available to gradients()"""

    HARD = "hard"  # integer labels
    SOFT = "soft"  # probability targets
    MSE = "mse"


class GradTarget(str, Enum):
    """What gradients() differentiates with respect to"""

    PARAMS = "params"
    INPUT = "input"
    BOTH = "both"


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class AttackMethod(str, Enum):
    """Adversarial example crafting methods"""

    FGSM = "fgsm"
    BIM = "bim"
    PGD = "pgd"
    BOUNDARY = "boundary"
    ADAPTIVE = "adaptive"


class ImSource(str, Enum):
    """Whose intermediate models the adaptive attacker differentiates through"""

    DEFENDER = "defender"
    SURROGATE = "surrogate"


class DistanceNormalization(str, Enum):
    RAW = "raw"
    MINMAX = "minmax"


class TrajectoryMode(str, Enum):
    """How per-epoch imprints are synthesized"""

    TARGET_ANCHORED = "target-anchored"
    CONSECUTIVE = "consecutive"
    SOFTMAX = "softmax"


class SyntheticLabel(str, Enum):
    """Surrogate ground-truth used by the synthetic cross-entropy"""

    SOFT = "soft"  # full target distribution
    HARD = "hard"  # argmax of the target distribution


class SpectrumMode(str, Enum):
    VECTOR = "vector"
    SEQUENCE = "sequence"


class CalibrationSource(str, Enum):
    TRAIN = "train"
    HOLDOUT = "holdout"


class Verdict(str, Enum):
    BENIGN = "benign"
    ADVERSARIAL = "adversarial"


class AblationVariant(str, Enum):
    """Which intensifier components are active"""

    FULL = "full"
    NO_NOISE_REDUCTION = "no-noise-reduction"
    NO_FFT = "no-fft"
    NEITHER = "neither"


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


# Numerics
LOG_CLAMP_FLOOR = 1e-12
STD_FLOOR = 1e-8
DEFAULT_LOG_OFFSET = 1e-6
BALL_TOLERANCE = 1e-7

# Checkpoint container
CONTAINER_MAGIC = b"TRCK"
CONTAINER_VERSION = 1
CHECKPOINT_PATTERN = "ckpt_{epoch:04d}.trck"
MANIFEST_NAME = "manifest.json"
AUTOENCODER_DESCRIPTOR = "trait-ae-v1"
DETECTOR_DESCRIPTOR = "trait-svdd-v1"

# Artifacts
ADV_MANIFEST_NAME = "adv_manifest.json"
ADV_FEATURES_NAME = "adv_features.csv"
BUNDLE_MANIFEST_NAME = "bundle.json"
AUTOENCODER_FILE = "autoencoder.trck"
DETECTOR_FILE = "detector.trck"
TRAJECTORY_DIGITS = 9

# Defaults
DEFAULT_POOL_SIZE = 1000
DEFAULT_PRESET_FRR = 0.05
DEFAULT_FRR_GRID = (0.01, 0.03, 0.05)
DEFAULT_BOTTLENECK = 8
DEFAULT_AE_HIDDEN = 32
DEFAULT_AE_DROPOUT = 0.2
DEFAULT_AE_EPOCHS = 150
DEFAULT_SVDD_HIDDEN = 32
DEFAULT_SVDD_OUTPUT = 16
DEFAULT_TAU = 0.19
DEFAULT_LAMBDA = 1.0
DEFAULT_PGD_STEPS = 10
DEFAULT_REGRESSION_TOLERANCE = 0.04

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

# Logging
LOG_FORMAT_JSON = "json"
LOG_FORMAT_TEXT = "text"
DEFAULT_LOG_LEVEL = "INFO"
