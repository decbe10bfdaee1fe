"""TOML experiment configuration with a canonical round trip.

Layout::

    schemes = ["sd", "unaware"]
    snr_grid_db = [20.0, 30.0]
    M = 8
    ...
    [csi]
    mode = "perfect"
    [channel]
    rician_factor = 10.0
    [metadata]
    carrier_ghz = 3.0
    [sweep]
    "channel.rician_factor" = [0.0, 10.0]

Top-level keys are :class:`ExperimentConfig` fields; ``csi`` and
``channel`` hold :class:`CsiModel` and :class:`ChannelConfig` fields (the
antenna and UE counts live at the top level only). ``metadata`` is carried
through untouched and ``sweep`` lists the grid of the ``sweep`` command.
"""
from dataclasses import fields
import math

import tomli
import tomli_w

from .channel import ChannelConfig, CsiModel
from .eval import ExperimentConfig

__all__ = [
    "ConfigError",
    "DEFAULT_METADATA",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "dumps_config",
    "parse_override",
    "apply_overrides",
]

DEFAULT_METADATA = {"carrier_ghz": 3.0}
_SECTIONS = {"csi": CsiModel, "channel": ChannelConfig}
_CHANNEL_SHARED = ("M", "K")
_EXTRA_TABLES = ("metadata", "sweep")


class ConfigError(ValueError):
    """Malformed or invalid configuration (CLI exit code 2)."""


def _field_names(cls):
    return [f.name for f in fields(cls)]


def _plain(value):
    """TOML-serializable copy: tuples become lists, numpy scalars floats."""
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


def config_to_dict(cfg, metadata=None, sweep=None):
    """Canonical mapping of ``cfg``; ``None`` fields are omitted."""
    out = {}
    for name in _field_names(ExperimentConfig):
        if name in _SECTIONS:
            continue
        value = getattr(cfg, name)
        if value is not None:
            out[name] = _plain(value)
    for section, cls in _SECTIONS.items():
        sub = getattr(cfg, section)
        table = {}
        for name in _field_names(cls):
            if section == "channel" and name in _CHANNEL_SHARED:
                continue
            value = getattr(sub, name)
            if value is not None:
                table[name] = _plain(value)
        out[section] = table
    out["metadata"] = dict(metadata if metadata is not None else DEFAULT_METADATA)
    if sweep:
        out["sweep"] = {k: _plain(v) for k, v in sweep.items()}
    return out


def _build(cls, table, where):
    known = set(_field_names(cls))
    unknown = sorted(set(table) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = dict(table)
    for key in ("angle_range", "distance_range"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return cls(**kwargs)


def config_from_dict(data):
    """Build ``(ExperimentConfig, metadata, sweep)`` from a parsed mapping."""
    data = dict(data)
    metadata = dict(data.pop("metadata", DEFAULT_METADATA))
    sweep = dict(data.pop("sweep", {}))
    sections = {}
    for section, cls in _SECTIONS.items():
        table = data.pop(section, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        if section == "channel":
            for key in _CHANNEL_SHARED:
                if key in table:
                    raise ConfigError(f"set {key} at the top level, not in [channel]")
        sections[section] = _build(cls, table, f"[{section}]")
    try:
        cfg = _build(ExperimentConfig, data, "the top level")
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.csi, cfg.channel = sections["csi"], sections["channel"]
    try:
        cfg.validate()
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, metadata, sweep


def load_config(path=None, overrides=()):
    """Read a TOML file (defaults when ``path`` is None) and apply overrides."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomli.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    data = apply_overrides(data, overrides)
    return config_from_dict(data)


def dumps_config(cfg, metadata=None, sweep=None):
    return tomli_w.dumps(config_to_dict(cfg, metadata, sweep))


def parse_override(text):
    """Split ``key.path=value``; the value is read as TOML, else as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    if isinstance(value, float) and math.isnan(value):
        raise ConfigError(f"override {text!r} is NaN")
    return key.split("."), value


def apply_overrides(data, overrides):
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    for text in overrides:
        path, value = parse_override(text)
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r} descends into a non-table")
        node[path[-1]] = value
    return data
