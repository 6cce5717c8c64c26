"""Server configuration and the per-model training presets.

A config names one summarization model plus everything the engine needs
to train and decode it: optimizer settings, the training-length rule
(either a fixed epoch count or a minimum step count), beam width at
evaluation, token limits, and an optional separate embedding encoder.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

_OPTIMIZERS = ("adamw", "adafactor")

DEVICE_ENV = "MODEL_SERVER_DEVICE"
CACHE_ENV = "MODEL_SERVER_CACHE"


class ConfigError(ValueError):
    """Invalid server configuration."""


@dataclass(frozen=True)
class ServerConfig:
    """One model's identity, training hyperparameters, and decode limits.

    Exactly one of ``epochs`` / ``min_train_steps`` must be set: an
    epoch-count model trains that many passes over the pairs, a
    min-steps model repeats whole epochs until the step budget is
    reached. ``embedding_model`` names a separate encoder for /embed;
    when None the summarization model's own encoder is used.
    """

    model_id: str
    device: str = "cpu"
    epochs: int | None = None
    min_train_steps: int | None = None
    batch_size: int = 4
    optimizer: str = "adamw"
    learning_rate: float = 2e-5
    weight_decay: float = 0.0
    warmup_ratio: float = 0.1
    num_beams: int = 4
    embedding_model: str | None = None
    max_input_tokens: int = 512
    max_output_tokens: int = 64
    instruction_prefix: str = ""
    init_seed: int = 0
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ConfigError("model_id must be non-empty")
        if (self.epochs is None) == (self.min_train_steps is None):
            raise ConfigError("set exactly one of epochs / min_train_steps")
        if self.epochs is not None and self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.min_train_steps is not None and self.min_train_steps < 1:
            raise ConfigError(f"min_train_steps must be >= 1, got {self.min_train_steps}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in _OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {_OPTIMIZERS}, got {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ConfigError(f"warmup_ratio must be in [0, 1], got {self.warmup_ratio}")
        if self.num_beams < 1:
            raise ConfigError(f"num_beams must be >= 1, got {self.num_beams}")
        if self.max_input_tokens < 8 or self.max_output_tokens < 4:
            raise ConfigError("token limits too small to decode anything useful")

    def training_steps(self, n_pairs: int) -> int:
        """Optimizer steps a finetune on ``n_pairs`` will run.

        Epochs are always completed whole, so a min-steps model may
        overshoot its minimum by up to one epoch.
        """
        if n_pairs < 1:
            raise ConfigError(f"cannot plan training for {n_pairs} pairs")
        per_epoch = math.ceil(n_pairs / self.batch_size)
        if self.epochs is not None:
            return self.epochs * per_epoch
        return math.ceil(self.min_train_steps / per_epoch) * per_epoch


PRESETS: dict[str, ServerConfig] = {
    "facebook/bart-base": ServerConfig(
        model_id="facebook/bart-base",
        min_train_steps=350,
        batch_size=16,
        optimizer="adamw",
        learning_rate=2e-5,
        weight_decay=0.028,
        warmup_ratio=0.1,
        num_beams=4,
        embedding_model="google-bert/bert-base-uncased",
    ),
    "google/pegasus-large": ServerConfig(
        model_id="google/pegasus-large",
        min_train_steps=200,
        batch_size=8,
        optimizer="adamw",
        learning_rate=5e-4,
        weight_decay=0.03,
        warmup_ratio=0.1,
        num_beams=4,
        embedding_model="google-bert/bert-base-uncased",
    ),
    "google/flan-t5-large": ServerConfig(
        model_id="google/flan-t5-large",
        epochs=3,
        batch_size=6,
        optimizer="adafactor",
        learning_rate=3e-5,
        weight_decay=0.01,
        warmup_ratio=0.1,
        num_beams=3,
        embedding_model="google-bert/bert-base-uncased",
        instruction_prefix="Summarize: ",
    ),
    # Offline preset: a small randomly initialized char-level model built
    # in-process, so the server runs with no model hub access. Used by
    # the test suite; useless for real summaries.
    "tiny": ServerConfig(
        model_id="tiny",
        min_train_steps=8,
        batch_size=4,
        optimizer="adamw",
        learning_rate=1e-3,
        weight_decay=0.0,
        warmup_ratio=0.1,
        num_beams=2,
        max_input_tokens=96,
        max_output_tokens=24,
    ),
}

_ALIASES = {
    "bart-base": "facebook/bart-base",
    "pegasus-large": "google/pegasus-large",
    "flan-t5-large": "google/flan-t5-large",
}

_FIELD_NAMES = {f.name for f in dataclasses.fields(ServerConfig)}


def _from_file(path: Path) -> ServerConfig:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(payload) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if "model_id" not in payload:
        raise ConfigError(f"config file {path} is missing model_id")
    return ServerConfig(**payload)


def load_config(source: str, device: str | None = None) -> ServerConfig:
    """Resolve a preset name, alias, or JSON config file path.

    Environment overrides: ``MODEL_SERVER_DEVICE`` for the device (an
    explicit ``device`` argument wins) and ``MODEL_SERVER_CACHE`` for
    the model cache path.
    """
    name = _ALIASES.get(source, source)
    if name in PRESETS:
        config = PRESETS[name]
    elif source.endswith(".json") or Path(source).is_file():
        config = _from_file(Path(source))
    else:
        known = sorted([*PRESETS, *_ALIASES])
        raise ConfigError(f"unknown model {source!r}; presets: {known} or a JSON config path")

    device = device or os.environ.get(DEVICE_ENV)
    if device:
        config = dataclasses.replace(config, device=device)
    cache = os.environ.get(CACHE_ENV)
    if cache and config.cache_dir is None:
        config = dataclasses.replace(config, cache_dir=cache)
    return config
