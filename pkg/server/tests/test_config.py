import dataclasses
import json

import pytest

from model_server import ConfigError, PRESETS, ServerConfig, load_config
from model_server.config import CACHE_ENV, DEVICE_ENV


class TestPresets:
    def test_known_names(self):
        assert set(PRESETS) == {
            "facebook/bart-base",
            "google/pegasus-large",
            "google/flan-t5-large",
            "tiny",
        }

    def test_bart_base_values(self):
        cfg = PRESETS["facebook/bart-base"]
        assert cfg.min_train_steps == 350
        assert cfg.batch_size == 16
        assert cfg.optimizer == "adamw"
        assert cfg.learning_rate == 2e-5
        assert cfg.weight_decay == 0.028
        assert cfg.warmup_ratio == 0.1
        assert cfg.num_beams == 4
        assert cfg.embedding_model == "google-bert/bert-base-uncased"

    def test_pegasus_values(self):
        cfg = PRESETS["google/pegasus-large"]
        assert cfg.min_train_steps == 200
        assert cfg.batch_size == 8
        assert cfg.learning_rate == 5e-4
        assert cfg.weight_decay == 0.03

    def test_flan_t5_values(self):
        cfg = PRESETS["google/flan-t5-large"]
        assert cfg.epochs == 3
        assert cfg.min_train_steps is None
        assert cfg.batch_size == 6
        assert cfg.optimizer == "adafactor"
        assert cfg.learning_rate == 3e-5
        assert cfg.num_beams == 3
        assert cfg.instruction_prefix == "Summarize: "

    def test_tiny_is_offline(self):
        cfg = PRESETS["tiny"]
        assert cfg.model_id == "tiny"
        assert cfg.embedding_model is None

    def test_aliases_resolve(self):
        assert load_config("bart-base").model_id == "facebook/bart-base"
        assert load_config("pegasus-large").model_id == "google/pegasus-large"
        assert load_config("flan-t5-large").model_id == "google/flan-t5-large"


class TestTrainingSteps:
    def test_min_steps_rounds_up_to_whole_epochs(self):
        bart = PRESETS["facebook/bart-base"]
        # 150 pairs, batch 16 -> 10 steps per epoch, 35 epochs reach 350
        assert bart.training_steps(150) == 350

    def test_min_steps_overshoots_when_epoch_does_not_divide(self):
        bart = PRESETS["facebook/bart-base"]
        # 7 pairs -> 1 step per epoch
        assert bart.training_steps(7) == 350
        # 48 pairs -> 3 steps per epoch, ceil(350/3)=117 epochs -> 351
        assert bart.training_steps(48) == 351

    def test_epoch_mode_multiplies(self):
        flan = PRESETS["google/flan-t5-large"]
        # 150 pairs, batch 6 -> 25 steps per epoch, 3 epochs
        assert flan.training_steps(150) == 75
        assert flan.training_steps(5) == 3

    def test_tiny_floor(self):
        tiny = PRESETS["tiny"]
        # 10 pairs, batch 4 -> 3 steps per epoch, 3 epochs reach 8 -> 9
        assert tiny.training_steps(10) == 9


class TestValidation:
    def _base(self, **overrides):
        fields = dict(model_id="m", min_train_steps=10)
        fields.update(overrides)
        return ServerConfig(**fields)

    def test_requires_exactly_one_schedule(self):
        with pytest.raises(ConfigError):
            ServerConfig(model_id="m")
        with pytest.raises(ConfigError):
            ServerConfig(model_id="m", epochs=1, min_train_steps=10)

    def test_rejects_bad_values(self):
        for overrides in (
            dict(model_id=""),
            dict(batch_size=0),
            dict(optimizer="sgd"),
            dict(learning_rate=0.0),
            dict(weight_decay=-0.1),
            dict(warmup_ratio=1.5),
            dict(num_beams=0),
            dict(max_input_tokens=4),
            dict(max_output_tokens=2),
        ):
            with pytest.raises(ConfigError):
                self._base(**overrides)

    def test_accepts_boundaries(self):
        cfg = self._base(warmup_ratio=0.0, weight_decay=0.0)
        assert cfg.warmup_ratio == 0.0
        assert self._base(warmup_ratio=1.0).warmup_ratio == 1.0


class TestLoadConfig:
    def test_unknown_name_lists_presets(self):
        with pytest.raises(ConfigError, match="tiny"):
            load_config("no-such-model")

    def test_json_file(self, tmp_path):
        path = tmp_path / "custom.json"
        path.write_text(json.dumps({"model_id": "m", "epochs": 2, "batch_size": 3}))
        cfg = load_config(str(path))
        assert (cfg.model_id, cfg.epochs, cfg.batch_size) == ("m", 2, 3)

    def test_json_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "custom.json"
        path.write_text(json.dumps({"model_id": "m", "epochs": 1, "stepz": 5}))
        with pytest.raises(ConfigError, match="stepz"):
            load_config(str(path))

    def test_json_must_be_object(self, tmp_path):
        path = tmp_path / "custom.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_device_argument_beats_env(self, monkeypatch):
        monkeypatch.setenv(DEVICE_ENV, "cuda")
        assert load_config("tiny").device == "cuda"
        assert load_config("tiny", device="cpu").device == "cpu"

    def test_cache_env_fills_default(self, monkeypatch):
        monkeypatch.setenv(CACHE_ENV, "/var/cache/models")
        assert load_config("tiny").cache_dir == "/var/cache/models"

    def test_presets_are_immutable(self):
        with pytest.raises(dataclasses.FrozenInstanceError):
            PRESETS["tiny"].batch_size = 1
