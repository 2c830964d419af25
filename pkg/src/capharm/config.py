"""Run configuration: defaults, flat ``key = value`` files and CLI overrides.

Precedence (lowest to highest): built-in defaults, config file, command-line
flags. The WordNet path falls back to ``$CAPHARM_WORDNET`` when neither the
file nor the flags set it.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .wordnet import DEFAULT_WORDNET_ENV

PATH_KEYS = ("wordnet", "store", "non_imageable", "adjectives", "visual_verbs", "offensive", "judgment",
             "person_lexicon")


@dataclass
class RunConfig:
    wordnet: str | None = None
    store: str | None = None
    out: str = "capharm-out"
    seed: int = 0
    # thresholds
    threshold: float = 0.005
    area_threshold: float = 0.10
    lch_cutoff: float = 2.0
    # split protocol and regression
    top_k: int = 500
    n_splits: int = 1000
    train_fraction: float = 0.70
    min_valid_splits: int = 900
    lam: float = 1.0
    ci_method: str = "subsample"
    # selections
    axis: str = "gender"
    pair: str | None = None
    stage: str = "s4"
    rules: str = "black_men_boys,women_girls,weapon_darker,people_animals"
    targets: str = "female"
    # word lists
    non_imageable: str | None = None
    adjectives: str | None = None
    adjective_categories: str = "attractiveness,ethnicity,judgment,mood"
    visual_verbs: str | None = None
    offensive: str | None = None
    judgment: str | None = None
    person_lexicon: str | None = None
    # output
    review_limit: int = 50
    n_boot: int = 1000
    divergence_top_k: int = 20

    @classmethod
    def keys(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    def update(self, values: dict, source: str = "override") -> "RunConfig":
        types = {f.name: f.type for f in fields(self)}
        for key, raw in values.items():
            if raw is None:
                continue
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r} ({source})")
            setattr(self, key, _coerce(key, raw, getattr(RunConfig, key, None), source))
        return self

    def validate(self, require: tuple = (), created: tuple = ()) -> "RunConfig":
        """Fill env defaults and check settings; keys in ``created`` may not exist yet."""
        if self.wordnet is None:
            self.wordnet = os.environ.get(DEFAULT_WORDNET_ENV) or None
        for key in require:
            if getattr(self, key) in (None, ""):
                raise ConfigError(f"missing required setting {key!r}")
        for key in PATH_KEYS:
            if key in created:
                continue
            value = getattr(self, key)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{key} path does not exist: {value}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.min_valid_splits > self.n_splits:
            raise ConfigError("min_valid_splits cannot exceed n_splits")
        if self.axis not in ("gender", "skin_tone"):
            raise ConfigError("axis must be gender or skin_tone")
        return self

    def echo(self, keys) -> dict:
        """Subset of settings recorded in a report (paths kept as given)."""
        return {k: getattr(self, k) for k in keys}

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(key: str, raw, default, source: str):
    if not isinstance(raw, str):
        return raw
    ftype = type(default) if default is not None else str
    try:
        if ftype is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if ftype is int:
            return int(raw)
        if ftype is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key} expects {ftype.__name__}, got {raw!r} ({source})") from None
    return raw.strip()


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in text.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        cfg.update(read_config_file(path), source=str(path))
    if overrides:
        cfg.update(overrides, source="command line")
    return cfg
