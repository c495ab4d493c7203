import os
import json
import logging
import collections.abc
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from ..errors import ConfigError

logger = logging.getLogger(__name__)


def _deep_update_dict(d, u):
    for k, v in u.items():
        if isinstance(v, collections.abc.Mapping):
            d[k] = _deep_update_dict(d.get(k, {}), v)
        else:
            d[k] = v
    return d


def combine(base, overlay):
    """
    Update the base object with values from the overlay object.
    """
    for key in dir(overlay):
        if callable(getattr(overlay, key)) or key.startswith("__"):
            continue

        if hasattr(base, key):
            new_value = getattr(overlay, key)
            current_value = getattr(base, key)

            if isinstance(current_value, dict) and isinstance(new_value, dict):
                merged_dict = current_value.copy()
                _deep_update_dict(merged_dict, new_value)
                setattr(base, key, merged_dict)
            else:
                setattr(base, key, new_value)


class DefaultConfig:
    """
    Defaults for every run. Sections are plain dicts so that a JSON file
    can override single keys without restating the whole section.
    """

    RUN_DIR = "./runs"
    SQLALCHEMY_DATABASE_URI = "sqlite:///maskfill.db"
    SIGNALS = {"logging_backend": "log", "record_iterations": False}
    TRAIN = {
        "regime": "cascaded",
        "generator_lr": 1e-4,
        "discriminator_lr": 2e-4,
        "batch_size": 10,
        "epochs": 50,
        "iterations": None,
        "snapshot_every": 10,
        "seed": None,
        "channel_scale": 1.0,
        "real_label": 0.9,
        "stop_gradient": False,
        "use_l2_pixel": False,
        "disable_adv": False,
        "disable_id": False,
        "disable_pc": False,
        "adam_betas": [0.9, 0.999],
        "adam_eps": 1e-8,
        "loss_weights": {
            "perceptual": 1.0,
            "adversarial": 0.1,
            "identity": 10.0,
            "total_variation": 1e-6,
        },
    }
    EXTRACTORS = {
        "identity": None,
        "perceptual": None,
        "recognition": None,
    }
    POSTPROC = {"levels": 4}


class Config(DefaultConfig):
    """A mutable copy of the defaults which overlays are combined into."""

    def __init__(self):
        for key in dir(DefaultConfig):
            if key.isupper():
                value = getattr(DefaultConfig, key)
                if isinstance(value, dict):
                    value = json.loads(json.dumps(value))
                setattr(self, key, value)

    def as_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in dir(self) if key.isupper()}


def config_from_dict(data: Dict[str, Any]) -> object:
    """
    Make an overlay object out of a JSON-like dict. Lower-case top-level
    keys are understood as TRAIN keys, so that a bare training config
    (`{"seed": 1, "batch_size": 4}`) is accepted as well.
    """
    overlay = type("ConfigOverlay", (), {})()
    train = {}
    for key, value in data.items():
        if key.isupper():
            setattr(overlay, key, value)
        else:
            train[key] = value
    if train:
        existing = getattr(overlay, "TRAIN", {})
        setattr(overlay, "TRAIN", {**existing, **train})
    return overlay


def load_config(
    path: Optional[str] = None,
    env: bool = True,
    overrides: Optional[Dict[str, Any]] = None,
) -> Config:
    """
    Build the effective config:
    defaults < JSON file < environment < explicit overrides (CLI flags).
    """
    config = Config()
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object.")
        combine(config, config_from_dict(data))
        logger.info("Loaded config from %s", path)

    if env:
        load_dotenv()
        if run_dir := os.environ.get("MASKFILL_RUN_DIR"):
            config.RUN_DIR = run_dir
        if backend := os.environ.get("MASKFILL_SIGNALS_BACKEND"):
            config.SIGNALS = {**config.SIGNALS, "logging_backend": backend}

    if overrides:
        combine(config, config_from_dict(overrides))

    return config
