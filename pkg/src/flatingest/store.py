"""Shared SQLite database backing the catalog, reference store and generic table.

All three live in one file so that finishing a file (load commit, fingerprint
ownership, log status) can happen in a single transaction.
"""

from __future__ import annotations

import sqlite3
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

DB_NAME = "ingest.sqlite3"


class StoreUnavailable(Exception):
    """The backing database could not be opened, read or written."""


class Workspace:
    """Connection to ``<root>/ingest.sqlite3`` shared by the stores.

    Writes are serialized by a re-entrant lock; :meth:`atomic` blocks nest,
    and only the outermost one commits.
    """

    def __init__(self, root: Union[str, Path], *, create: bool = True):
        self.root = Path(root)
        self.path = self.root / DB_NAME
        if not create and not self.path.exists():
            raise StoreUnavailable(f"no workspace database at {self.path}")
        try:
            self._conn = sqlite3.connect(self.path, check_same_thread=False, timeout=30)
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=FULL")
        except sqlite3.Error as exc:
            raise StoreUnavailable(f"cannot open {self.path}: {exc}") from exc
        self._lock = threading.RLock()
        self._depth = 0

    @contextmanager
    def atomic(self) -> Iterator[sqlite3.Connection]:
        with self._lock:
            outer = self._depth == 0
            self._depth += 1
            try:
                yield self._conn
            except sqlite3.IntegrityError:
                self._finish(outer, commit=False)
                raise
            except sqlite3.Error as exc:
                self._finish(outer, commit=False)
                raise StoreUnavailable(str(exc)) from exc
            except BaseException:
                self._finish(outer, commit=False)
                raise
            else:
                self._finish(outer, commit=True)

    def _finish(self, outer: bool, commit: bool) -> None:
        self._depth -= 1
        if not outer:
            return
        try:
            if commit:
                self._conn.commit()
            else:
                self._conn.rollback()
        except sqlite3.Error as exc:
            raise StoreUnavailable(str(exc)) from exc

    def read(self, sql: str, params=()) -> list:
        with self._lock:
            try:
                return self._conn.execute(sql, params).fetchall()
            except sqlite3.Error as exc:
                raise StoreUnavailable(str(exc)) from exc

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def __enter__(self) -> "Workspace":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
