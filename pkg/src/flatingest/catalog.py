"""Per-file audit log.

One row per file ever taken in, with the columns operators know from the
log table (SR_NUM through COL_NUM) plus a reject count and UTC timestamps.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Optional

from .csvcore import write_canonical
from .detect import HeaderStatus
from .store import Workspace


class FilStatus(str, Enum):
    IN_PROGRESS = "IN_PROGRESS"
    COMPLETE = "COMPLETE"
    INCOMPLETE = "INCOMPLETE"


class UnknownSerial(LookupError):
    pass


class InvariantViolation(ValueError):
    pass


EXPORT_COLUMNS = (
    "SR_NUM", "FIL_TYPE", "FIL_NAME", "FIL_PATH", "FIL_SIZE", "HEADER",
    "FIL_STATUS", "DUP_FILE", "ROWS_NUM", "COL_NUM",
    "REJECTS_NUM", "CREATED_AT", "MODIFIED_AT",
)

PATCHABLE = frozenset({"fil_path", "header", "fil_status", "dup_file", "rows_num", "col_num", "rejects_num"})

_SCHEMA = """
CREATE TABLE IF NOT EXISTS file_log (
    sr_num      INTEGER PRIMARY KEY AUTOINCREMENT,
    fil_type    TEXT NOT NULL,
    fil_name    TEXT NOT NULL,
    fil_path    TEXT NOT NULL,
    fil_size    INTEGER NOT NULL,
    header      TEXT NOT NULL,
    fil_status  TEXT NOT NULL,
    dup_file    TEXT NOT NULL,
    rows_num    INTEGER,
    col_num     INTEGER,
    rejects_num INTEGER NOT NULL,
    created_at  TEXT NOT NULL,
    modified_at TEXT NOT NULL
)
"""

_COLUMNS = ("sr_num", "fil_type", "fil_name", "fil_path", "fil_size", "header", "fil_status",
            "dup_file", "rows_num", "col_num", "rejects_num", "created_at", "modified_at")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass(frozen=True)
class LogEntry:
    sr_num: int
    fil_type: str
    fil_name: str
    fil_path: str
    fil_size: int
    header: HeaderStatus
    fil_status: FilStatus
    dup_file: str
    rows_num: Optional[int]
    col_num: Optional[int]
    rejects_num: int
    created_at: str
    modified_at: str

    @classmethod
    def from_row(cls, row) -> "LogEntry":
        values = dict(zip(_COLUMNS, row))
        values["header"] = HeaderStatus(values["header"])
        values["fil_status"] = FilStatus(values["fil_status"])
        return cls(**values)

    def check(self) -> None:
        """Raise InvariantViolation if the entry is internally inconsistent."""
        if self.dup_file not in ("Y", "N"):
            raise InvariantViolation(f"dup_file must be Y or N, not {self.dup_file!r}")
        if self.fil_status is FilStatus.COMPLETE:
            if self.rows_num is None or self.col_num is None:
                raise InvariantViolation("COMPLETE requires rows_num and col_num")
            if self.dup_file != "N":
                raise InvariantViolation("COMPLETE entry cannot be a duplicate")
        if self.dup_file == "Y":
            if self.fil_status is not FilStatus.INCOMPLETE:
                raise InvariantViolation("duplicate entry must be INCOMPLETE")
            if self.rows_num is not None or self.col_num is not None:
                raise InvariantViolation("duplicate entry must have null counts")
        if self.rows_num is not None and self.rows_num < 0:
            raise InvariantViolation("rows_num must be non-negative")
        if self.col_num is not None and self.col_num < 1:
            raise InvariantViolation("col_num must be positive")
        if self.rejects_num < 0:
            raise InvariantViolation("rejects_num must be non-negative")
        if self.modified_at < self.created_at:
            raise InvariantViolation("modified_at precedes created_at")

    def export_values(self) -> list:
        """Values in export column order; nulls as None."""
        return [
            str(self.sr_num), self.fil_type, self.fil_name, self.fil_path, str(self.fil_size),
            self.header.value, self.fil_status.value, self.dup_file,
            None if self.rows_num is None else str(self.rows_num),
            None if self.col_num is None else str(self.col_num),
            str(self.rejects_num), self.created_at, self.modified_at,
        ]


class Catalog:
    def __init__(self, workspace: Workspace):
        self.ws = workspace
        with self.ws.atomic() as conn:
            conn.execute(_SCHEMA)

    def append_entry(self, name: str, path: str, size: int, fil_type: str = "CSV") -> int:
        now = utc_now()
        with self.ws.atomic() as conn:
            cur = conn.execute(
                "INSERT INTO file_log (fil_type, fil_name, fil_path, fil_size, header, fil_status,"
                " dup_file, rows_num, col_num, rejects_num, created_at, modified_at)"
                " VALUES (?, ?, ?, ?, ?, ?, 'N', NULL, NULL, 0, ?, ?)",
                (fil_type, name, str(path), size, HeaderStatus.UNKNOWN.value,
                 FilStatus.IN_PROGRESS.value, now, now),
            )
            return cur.lastrowid

    def get(self, sr_num: int) -> LogEntry:
        rows = self.ws.read(f"SELECT {', '.join(_COLUMNS)} FROM file_log WHERE sr_num = ?", (sr_num,))
        if not rows:
            raise UnknownSerial(sr_num)
        return LogEntry.from_row(rows[0])

    def update_entry(self, sr_num: int, **patch) -> LogEntry:
        unknown = set(patch) - PATCHABLE
        if unknown:
            raise InvariantViolation(f"fields not patchable: {', '.join(sorted(unknown))}")
        if "header" in patch:
            patch["header"] = HeaderStatus(patch["header"])
        if "fil_status" in patch:
            patch["fil_status"] = FilStatus(patch["fil_status"])
        if "fil_path" in patch:
            patch["fil_path"] = str(patch["fil_path"])
        with self.ws.atomic() as conn:
            current = self.get(sr_num)
            updated = replace(current, **patch, modified_at=max(utc_now(), current.created_at))
            updated.check()
            values = asdict(updated)
            values["header"] = updated.header.value
            values["fil_status"] = updated.fil_status.value
            sets = ", ".join(f"{k} = :{k}" for k in (*PATCHABLE, "modified_at"))
            conn.execute(f"UPDATE file_log SET {sets} WHERE sr_num = :sr_num", values)
        return updated

    def query(self, status=None, dup_file=None, name_substring=None) -> list[LogEntry]:
        clauses, params = [], []
        if status is not None:
            clauses.append("fil_status = ?")
            params.append(FilStatus(status).value)
        if dup_file is not None:
            clauses.append("dup_file = ?")
            params.append(dup_file)
        if name_substring:
            clauses.append("instr(fil_name, ?) > 0")
            params.append(name_substring)
        where = f" WHERE {' AND '.join(clauses)}" if clauses else ""
        rows = self.ws.read(f"SELECT {', '.join(_COLUMNS)} FROM file_log{where} ORDER BY sr_num", params)
        return [LogEntry.from_row(r) for r in rows]

    def export_csv(self, entries=None) -> bytes:
        if entries is None:
            entries = self.query()
        return write_canonical([EXPORT_COLUMNS, *(e.export_values() for e in entries)])
