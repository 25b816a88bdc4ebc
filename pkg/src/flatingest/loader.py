"""Threshold-batched loading into the shared wide table.

Every file's rows land in ``generic_rows`` (COL1..COLW plus the owning log
serial).  A file is marked pending while it loads; :meth:`BatchBuffer.abort`
or :func:`recover_pending` removes everything a pending file wrote, so a
failed file never leaves rows behind.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import ceil
from typing import Iterable, Optional, Sequence

from .csvcore import Field, write_canonical
from .store import StoreUnavailable, Workspace

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1000
DEFAULT_WIDTH = 64


class TooManyColumns(ValueError):
    def __init__(self, col_num: int, width: int):
        self.col_num = col_num
        self.width = width
        super().__init__(f"TooManyColumns: {col_num} fields exceed table width {width}")


class TableWidthMismatch(StoreUnavailable):
    pass


def detect_column_count(first_record: Sequence[Field], width: int = DEFAULT_WIDTH) -> int:
    col_num = len(first_record)
    if col_num > width:
        raise TooManyColumns(col_num, width)
    if col_num < 1:
        raise ValueError("record has no fields")
    return col_num


class GenericTable:
    """The wide destination table shared by all files."""

    def __init__(self, workspace: Workspace, width: int = DEFAULT_WIDTH):
        if width < 1:
            raise ValueError("table width must be positive")
        self.ws = workspace
        existing = self._existing_width()
        if existing is not None and existing != width:
            raise TableWidthMismatch(f"generic table has {existing} columns, configured width is {width}")
        self.width = width
        cols = ", ".join(f"col{i} TEXT" for i in range(1, width + 1))
        with self.ws.atomic() as conn:
            conn.execute(
                "CREATE TABLE IF NOT EXISTS generic_rows ("
                f"row_id INTEGER PRIMARY KEY AUTOINCREMENT, source_sr INTEGER NOT NULL, {cols})"
            )
            conn.execute("CREATE INDEX IF NOT EXISTS generic_rows_sr ON generic_rows(source_sr)")
            conn.execute("CREATE TABLE IF NOT EXISTS pending_load (source_sr INTEGER PRIMARY KEY)")
        placeholders = ", ".join("?" * (width + 1))
        names = ", ".join(f"col{i}" for i in range(1, width + 1))
        self._insert_sql = f"INSERT INTO generic_rows (source_sr, {names}) VALUES ({placeholders})"

    def _existing_width(self) -> Optional[int]:
        info = self.ws.read("PRAGMA table_info(generic_rows)")
        if not info:
            return None
        return sum(1 for row in info if row[1].startswith("col"))

    def insert_rows(self, rows: list) -> None:
        with self.ws.atomic() as conn:
            conn.executemany(self._insert_sql, rows)

    def count_rows(self, source_sr: Optional[int] = None) -> int:
        if source_sr is None:
            return self.ws.read("SELECT COUNT(*) FROM generic_rows")[0][0]
        return self.ws.read("SELECT COUNT(*) FROM generic_rows WHERE source_sr = ?", (source_sr,))[0][0]

    def rows_for(self, source_sr: int) -> list[tuple]:
        """Cells of every row a file loaded, in load order."""
        rows = self.ws.read(
            f"SELECT * FROM generic_rows WHERE source_sr = ? ORDER BY row_id", (source_sr,)
        )
        return [tuple(r[2:]) for r in rows]

    def mark_pending(self, source_sr: int) -> None:
        with self.ws.atomic() as conn:
            conn.execute("INSERT OR IGNORE INTO pending_load (source_sr) VALUES (?)", (source_sr,))

    def clear_pending(self, source_sr: int) -> None:
        with self.ws.atomic() as conn:
            conn.execute("DELETE FROM pending_load WHERE source_sr = ?", (source_sr,))

    def pending(self) -> list[int]:
        return [r[0] for r in self.ws.read("SELECT source_sr FROM pending_load ORDER BY source_sr")]

    def delete_file_rows(self, source_sr: int) -> int:
        with self.ws.atomic() as conn:
            deleted = conn.execute("DELETE FROM generic_rows WHERE source_sr = ?", (source_sr,)).rowcount
            conn.execute("DELETE FROM pending_load WHERE source_sr = ?", (source_sr,))
        return deleted

    def export_csv(self) -> bytes:
        header = ["ROW_ID", "SOURCE_SR", *(f"COL{i}" for i in range(1, self.width + 1))]
        rows = self.ws.read("SELECT * FROM generic_rows ORDER BY row_id")
        return write_canonical([header, *([str(r[0]), str(r[1]), *r[2:]] for r in rows)])


@dataclass(frozen=True)
class LoadResult:
    rows_loaded: int
    col_num: int
    rejects: int


class BatchBuffer:
    """Pending rows of one file, flushed to the table every ``capacity`` records."""

    def __init__(self, table: GenericTable, source_sr: int, col_num: int,
                 capacity: int = DEFAULT_THRESHOLD):
        if capacity < 1:
            raise ValueError("batch threshold must be at least 1")
        if not 1 <= col_num <= table.width:
            raise TooManyColumns(col_num, table.width)
        self.table = table
        self.source_sr = source_sr
        self.col_num = col_num
        self.capacity = capacity
        self.pending: list[tuple] = []
        self.flush_count = 0
        self.rows_loaded = 0
        self.rejects = 0
        self.records_read = 0
        # SOURCE_SR and trailing nulls surround the file's own columns
        self._head = (source_sr,)
        self._tail_width = table.width
        table.mark_pending(source_sr)

    def buffer_record(self, record: Sequence[Field]) -> bool:
        """Queue one data record; returns False when it was quarantined as too wide."""
        self.records_read += 1
        n = len(record)
        if n > self.col_num:
            self.rejects += 1
            return False
        self.pending.append(self._head + tuple(record) + (None,) * (self._tail_width - n))
        if len(self.pending) >= self.capacity:
            self.flush()
        return True

    def extend(self, records: Iterable[Sequence[Field]]) -> None:
        for record in records:
            self.buffer_record(record)

    def flush(self) -> None:
        if not self.pending:
            return
        self.table.insert_rows(self.pending)
        self.rows_loaded += len(self.pending)
        self.pending = []
        self.flush_count += 1

    def finalize(self) -> LoadResult:
        """Flush the residue and return counts.  The pending marker stays until commit()."""
        self.flush()
        return LoadResult(self.rows_loaded, self.col_num, self.rejects)

    def commit(self) -> None:
        self.table.clear_pending(self.source_sr)

    def abort(self) -> None:
        self.pending = []
        deleted = self.table.delete_file_rows(self.source_sr)
        logger.info("aborted load of sr %d, removed %d rows", self.source_sr, deleted)


def expected_flushes(rows: int, threshold: int) -> int:
    return ceil(rows / threshold)


def recover_pending(table: GenericTable) -> list[int]:
    """Remove rows of every file whose load never committed; returns their serials."""
    stale = table.pending()
    for sr in stale:
        deleted = table.delete_file_rows(sr)
        logger.warning("discarded %d rows of interrupted load sr %d", deleted, sr)
    return stale
