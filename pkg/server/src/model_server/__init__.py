"""Reference model server speaking the summarization backend wire protocol."""

__version__ = "0.1.0"

from .config import PRESETS, ConfigError, ServerConfig, load_config
from .engine import ModelEngine, ModelLoadError, TrainingError

__all__ = [
    "PRESETS",
    "ConfigError",
    "ModelEngine",
    "ModelLoadError",
    "ServerConfig",
    "TrainingError",
    "load_config",
    "__version__",
]
