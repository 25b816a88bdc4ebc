"""Pipeline settings: a flat ``key = value`` file, command-line overrides, defaults.

Example::

    # /etc/flatingest.conf
    source_dir = /data/incoming
    root_dir = /data/rs
    batch_threshold = 5000
    critical_column = 1
    notify_sink = file:/var/log/flatingest/notify.log
    notify_sink = command:mail -s "ingest {event}" ops@example.com
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Union

DEFAULT_MAX_FILE_SIZE = 250 * 1024 * 1024  # 262,144,000 bytes
WORKFLOW_FOLDERS = ("In", "InProgress", "Archive", "Exception")


class ConfigError(Exception):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ValidationError(ConfigError):
    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")


class MissingRequired(ConfigError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"{key} is required")


@dataclass(frozen=True)
class PipelineConfig:
    source_dir: Path
    root_dir: Path
    batch_threshold: int = 1000
    max_file_size_bytes: int = DEFAULT_MAX_FILE_SIZE
    table_width: int = 64
    critical_column: Optional[int] = None
    allow_quoted_newlines: bool = True
    workers: int = 1
    notify_sinks: tuple[str, ...] = ()

    def validate(self) -> "PipelineConfig":
        for key in ("batch_threshold", "max_file_size_bytes", "table_width", "workers"):
            if getattr(self, key) < 1:
                raise ValidationError(key, "must be at least 1")
        if self.critical_column is not None:
            if self.critical_column < 1:
                raise ValidationError("critical_column", "must be at least 1")
            if self.critical_column > self.table_width:
                raise ValidationError("critical_column", f"exceeds table_width {self.table_width}")
        source = Path(self.source_dir).resolve()
        for name in WORKFLOW_FOLDERS:
            if source == (Path(self.root_dir) / name).resolve():
                raise ValidationError("source_dir", f"must not be the workflow folder {name}")
        for spec in self.notify_sinks:
            kind, sep, arg = spec.partition(":")
            if kind not in ("file", "command") or not sep or not arg:
                raise ValidationError("notify_sink", f"bad sink spec {spec!r}")
        return self


_INT_KEYS = {"batch_threshold", "max_file_size_bytes", "table_width", "critical_column", "workers"}
_BOOL_KEYS = {"allow_quoted_newlines"}
_PATH_KEYS = {"source_dir", "root_dir"}
_KNOWN = {f.name for f in fields(PipelineConfig)} - {"notify_sinks"} | {"notify_sink"}
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(key: str, raw: str):
    if key in _PATH_KEYS:
        if not raw:
            raise ValidationError(key, "empty path")
        return Path(raw)
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValidationError(key, f"not a boolean: {raw!r}")
    if key in _INT_KEYS:
        if key == "critical_column" and raw == "":
            return None
        try:
            return int(raw.replace("_", ""))
        except ValueError:
            raise ValidationError(key, f"not an integer: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of typed values (no defaults)."""
    values: dict = {}
    sinks: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, raw = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigParseError(lineno, f"expected key = value, got {stripped!r}")
        if key not in _KNOWN:
            raise ConfigParseError(lineno, f"unknown key {key!r}")
        raw = raw.strip()
        if key == "notify_sink":
            sinks.append(raw)
            continue
        if key in values:
            raise ConfigParseError(lineno, f"duplicate key {key!r}")
        values[key] = _convert(key, raw)
    if sinks:
        values["notify_sinks"] = tuple(sinks)
    return values


def load_config(path: Union[str, Path, None] = None, **overrides) -> PipelineConfig:
    """Effective config: ``overrides`` (flags) > file at ``path`` > defaults.

    Overrides whose value is None are ignored, so argparse results can be
    passed straight through.
    """
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _KNOWN | {"notify_sinks"}:
            raise ValidationError(key, "unknown setting")
        if key == "notify_sink":
            key, value = "notify_sinks", (value,) if isinstance(value, str) else tuple(value)
        elif key == "notify_sinks":
            value = tuple(value)
        elif key in _PATH_KEYS:
            value = Path(value)
        values[key] = value
    for key in ("source_dir", "root_dir"):
        if key not in values:
            raise MissingRequired(key)
    return PipelineConfig(**values).validate()


def dump_config(config: PipelineConfig) -> str:
    lines = []
    for f in fields(PipelineConfig):
        value = getattr(config, f.name)
        if f.name == "notify_sinks":
            lines.extend(f"notify_sink = {spec}" for spec in value)
        elif value is None:
            lines.append(f"{f.name} =")
        elif isinstance(value, bool):
            lines.append(f"{f.name} = {'true' if value else 'false'}")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def with_overrides(config: PipelineConfig, **changes) -> PipelineConfig:
    return replace(config, **{k: v for k, v in changes.items() if v is not None}).validate()
