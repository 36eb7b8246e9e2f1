"""Plain-text configuration files.

One setting per line, `key = value`, `#` starts a comment. Dotted keys
descend into nested sections, e.g. `selector.alpha_d = 0.2` or
`proposals.scale_factors = 0.9, 1.0, 1.1`. Unknown keys are rejected so
that typos fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import fields, is_dataclass

from .errors import ConfigError
from .tracker import TrackerConfig

__all__ = ["parse_settings", "apply_settings", "load_tracker_config"]

# `lambda` is a Python keyword, so the field is spelled with a trailing
# underscore; accept the bare name in files.
_ALIASES = {"lambda": "lambda_"}


def parse_settings(text: str, path: str | None = None) -> dict[str, str]:
    """Parse `key = value` lines into an ordered mapping of raw strings."""
    where = f"{path}: " if path else ""
    settings: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigError(f"{where}line {lineno}: expected `key = value`, got {raw.strip()!r}")
        if key in settings:
            raise ConfigError(f"{where}line {lineno}: duplicate key {key!r}")
        settings[key] = value
    return settings


def _coerce(text: str, current, key: str):
    if isinstance(current, bool):
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(current, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if isinstance(current, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if isinstance(current, str):
        return text
    if isinstance(current, tuple):
        parts = [p for p in text.replace(",", " ").split() if p]
        if not parts:
            raise ConfigError(f"{key}: expected a list of numbers, got {text!r}")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{key}: expected a list of numbers, got {text!r}") from None
    raise ConfigError(f"{key}: this setting cannot be changed from a file")


def _apply_one(cfg, dotted: str, full_key: str, value: str):
    head, _, rest = dotted.partition(".")
    name = _ALIASES.get(head, head)
    field_map = {f.name: f for f in fields(cfg)}
    if name not in field_map:
        raise ConfigError(f"unknown configuration key: {full_key}")
    current = getattr(cfg, name)
    if rest:
        if not is_dataclass(current):
            raise ConfigError(f"{full_key}: {head} has no sub-keys")
        new_val = _apply_one(current, rest, full_key, value)
    else:
        if is_dataclass(current):
            raise ConfigError(f"{full_key}: {head} is a section, set one of its keys")
        new_val = _coerce(value, current, full_key)
    try:
        return dataclasses.replace(cfg, **{name: new_val})
    except ValueError as exc:
        raise ConfigError(f"{full_key}: {exc}") from None


def apply_settings(cfg, settings: dict[str, str]):
    """Return a copy of a config dataclass with each dotted key applied."""
    for key, value in settings.items():
        cfg = _apply_one(cfg, key, key, value)
    return cfg


def load_tracker_config(path: str | None, base: TrackerConfig | None = None) -> TrackerConfig:
    cfg = TrackerConfig() if base is None else base
    if path is None:
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc}") from None
    return apply_settings(cfg, parse_settings(text, path))
