"""Success / duplicate / failure notifications.

A notification is one line of text::

    event=SUCCESS sr=1 file=tbl_Circuits.csv detail="rows=7958 cols=12" at=2026-01-01T00:00:00.000000+00:00

``detail`` is a JSON string literal.  Sinks receive that line; a failing sink
is reported, never raised.
"""

from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Union

logger = logging.getLogger(__name__)


class Event(str, Enum):
    SUCCESS = "SUCCESS"
    DUPLICATE = "DUPLICATE"
    FAILURE = "FAILURE"


_LINE_RX = re.compile(
    r'event=(?P<event>[A-Z]+) sr=(?P<sr>\d+) file=(?P<file>.*) '
    r'detail=(?P<detail>"(?:[^"\\]|\\.)*") at=(?P<at>\S+)'
)


@dataclass(frozen=True)
class Notification:
    event: Event
    sr_num: int
    fil_name: str
    detail: str
    emitted_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def serialize(self) -> str:
        return (
            f"event={self.event.value} sr={self.sr_num} file={self.fil_name} "
            f"detail={json.dumps(self.detail, ensure_ascii=False)} at={self.emitted_at.isoformat()}"
        )

    @classmethod
    def parse(cls, line: str) -> "Notification":
        m = _LINE_RX.fullmatch(line.rstrip("\r\n"))
        if m is None:
            raise ValueError(f"not a notification line: {line!r}")
        return cls(
            Event(m["event"]), int(m["sr"]), m["file"],
            json.loads(m["detail"]), datetime.fromisoformat(m["at"]),
        )


@dataclass(frozen=True)
class SinkResult:
    sink: str
    ok: bool
    error: Optional[str] = None


class FileSink:
    """Appends one serialized line per notification."""

    _locks: dict[str, threading.Lock] = {}
    _locks_guard = threading.Lock()

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        key = str(self.path.resolve())
        with self._locks_guard:
            self._lock = self._locks.setdefault(key, threading.Lock())

    def __str__(self) -> str:
        return f"file:{self.path}"

    def send(self, line: str) -> None:
        with self._lock, open(self.path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(line + "\n")


class CommandSink:
    """Runs an external command with the serialized line on standard input.

    ``{event}``, ``{sr}`` and ``{file}`` in the template are substituted per
    argument after shell-style splitting, e.g.
    ``mail -s "ingest {event}: {file}" ops@example.com``.
    """

    def __init__(self, command_template: str, timeout: float = 60.0):
        self.template = command_template
        self.argv = shlex.split(command_template)
        if not self.argv:
            raise ValueError("empty command template")
        self.timeout = timeout

    def __str__(self) -> str:
        return f"command:{self.template}"

    def send(self, line: str, n: Optional[Notification] = None) -> None:
        values = {"event": "", "sr": "", "file": ""}
        if n is not None:
            values = {"event": n.event.value, "sr": str(n.sr_num), "file": n.fil_name}
        argv = [arg.format(**values) for arg in self.argv]
        proc = subprocess.run(argv, input=line + "\n", text=True, capture_output=True, timeout=self.timeout)
        if proc.returncode != 0:
            raise RuntimeError(f"exit status {proc.returncode}: {proc.stderr.strip()[:200]}")


Sink = Union[FileSink, CommandSink]


def sink_from_spec(spec: str) -> Sink:
    kind, sep, arg = spec.partition(":")
    if not sep or not arg:
        raise ValueError(f"sink spec must be file:<path> or command:<template>, got {spec!r}")
    if kind == "file":
        return FileSink(arg)
    if kind == "command":
        return CommandSink(arg)
    raise ValueError(f"unknown sink kind {kind!r}")


def notify(n: Notification, sinks: Iterable[Sink]) -> list[SinkResult]:
    line = n.serialize()
    report = []
    for sink in sinks:
        try:
            if isinstance(sink, CommandSink):
                sink.send(line, n)
            else:
                sink.send(line)
        except Exception as exc:  # a sink must never break the pipeline
            logger.warning("notification sink %s failed: %s", sink, exc)
            report.append(SinkResult(str(sink), False, str(exc)))
        else:
            report.append(SinkResult(str(sink), True))
    return report
