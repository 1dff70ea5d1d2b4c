"""Run configuration: one JSON document drives every pipeline stage.

Unknown keys are rejected so typos fail loudly; every field has a
default, and the canonical JSON form (sorted keys, no whitespace) is
fingerprinted into reports for provenance.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .errors import ConfigError

DEFAULTS: dict = {
    "miner": {
        # dependency relations accepted as direct objects
        "relations": ["obj", "dobj"],
        # paths to one-lemma-per-line whitelist files; null disables filtering
        "verb_whitelist": None,
        "object_whitelist": None,
        "min_frequency": 1,
    },
    "dataset": {
        # null: use the templates shipped with the package
        "templates_path": None,
        "holdout_fraction": 0.2,
        "seed": 0,
        "mode": "verb-only",
    },
    "model": {
        "word_dim": 128,
        "hidden_dim": 256,
        # null: adopt the feature dimension of the training data
        "out_dim": None,
        "cell": "elman",
        "margin": 0.0,
        "unk_policy": "hashed-random",
    },
    "train": {
        "epochs": 50,
        "lr": 0.0001,
        "batch_size": 1,
        "seed": 0,
    },
    "eval": {
        "n_tasks": 200,
        "runs": 5,
        "seed": 0,
        "mode": "verb-only",
    },
}


def _merge(defaults: dict, override: dict, path: str) -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in override.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(defaults[key], dict) and not isinstance(value, dict):
            raise ConfigError(f"config key {path + key!r} must be an object")
        if isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value, path + key + ".")
        else:
            merged[key] = value
    return merged


class RunConfig:
    """Validated section/field access over the merged config document."""

    def __init__(self, document: dict | None = None):
        self.document = _merge(DEFAULTS, document or {}, "")

    def __getitem__(self, section: str) -> dict:
        return self.document[section]

    def override(self, section: str, key: str, value) -> None:
        if section not in self.document or key not in self.document[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        self.document[section][key] = value

    def fingerprint(self) -> str:
        canonical = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return copy.deepcopy(self.document)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return RunConfig(document)
