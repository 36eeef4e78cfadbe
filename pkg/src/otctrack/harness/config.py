"""Flat ``key = value`` configuration files for :class:`TrackConfig`."""
from __future__ import annotations

from pathlib import Path

from ..tracker import TrackConfig


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw: str, typ: type):
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_config(text: str, base: TrackConfig | None = None, source: str = "<config>") -> TrackConfig:
    types = TrackConfig.field_types()
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, types[key])
    try:
        return (base or TrackConfig()).updated(**values)
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from None


def load_config(path, base: TrackConfig | None = None) -> TrackConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: unreadable ({e.strerror or e})") from None
    return parse_config(text, base, str(path))


def dump_config(cfg: TrackConfig) -> str:
    return "".join(f"{k} = {getattr(cfg, k)}\n" for k in TrackConfig.field_types())
