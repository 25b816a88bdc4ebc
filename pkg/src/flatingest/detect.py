"""Checks run before a file is parsed in full.

Header detection looks only at the first record.  Duplicate detection
fingerprints the first ten data records and compares against every sample
registered by earlier files.  The critical-column rule rejects files whose
sample has a missing value in a configured position.
"""

from __future__ import annotations

import hashlib
import re
import sqlite3
from dataclasses import dataclass
from enum import Enum
from itertools import islice
from typing import Iterable, Optional, Sequence, Union

from .csvcore import Field, write_canonical
from .store import Workspace

SAMPLE_ROWS = 10

_NUMERIC_RX = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")


class HeaderStatus(str, Enum):
    PRESENT = "PRESENT"
    NOT_PRESENT = "NOT PRESENT"
    # catalog value before the header check has run
    UNKNOWN = "UNKNOWN"


class DuplicateDigest(Exception):
    """Another file registered the same sample first."""


def is_numeric(text: str) -> bool:
    """Bare sign, digits and at most one decimal point; ``$1.00`` is not numeric."""
    return _NUMERIC_RX.fullmatch(text.strip(" ")) is not None


def detect_header(first_record: Sequence[Field]) -> HeaderStatus:
    for value in first_record:
        if value is None or is_numeric(value):
            return HeaderStatus.NOT_PRESENT
    return HeaderStatus.PRESENT


@dataclass(frozen=True)
class Fingerprint:
    canonical_sample: bytes
    digest: str
    sampled_rows: int


def fingerprint_file(data_records: Iterable[Sequence[Field]]) -> Fingerprint:
    sample = list(islice(data_records, SAMPLE_ROWS))
    canonical = write_canonical(sample)
    return Fingerprint(canonical, hashlib.sha256(canonical).hexdigest(), len(sample))


@dataclass(frozen=True)
class CriticalRule:
    column_index: Optional[int] = None

    def __post_init__(self):
        if self.column_index is not None and self.column_index < 1:
            raise ValueError("critical column index is 1-based")


@dataclass(frozen=True)
class CriticalViolation:
    record_ordinal: int
    column_index: int

    def __str__(self) -> str:
        return f"critical column {self.column_index} is null in data record {self.record_ordinal}"


def validate_critical(data_records: Iterable[Sequence[Field]],
                      rule: CriticalRule) -> Union[CriticalViolation, None]:
    """Return the first violation in the sample, or None when the sample is ok."""
    col = rule.column_index
    if col is None:
        return None
    for ordinal, record in enumerate(islice(data_records, SAMPLE_ROWS), start=1):
        if len(record) < col or record[col - 1] is None:
            return CriticalViolation(ordinal, col)
    return None


_SCHEMA = """
CREATE TABLE IF NOT EXISTS reference_sample (
    digest   TEXT NOT NULL,
    sample   BLOB NOT NULL UNIQUE,
    owner_sr INTEGER NOT NULL,
    sampled_rows INTEGER NOT NULL
)
"""


class ReferenceStore:
    """Persistent set of first-rows samples of accepted files."""

    def __init__(self, workspace: Workspace):
        self.ws = workspace
        with self.ws.atomic() as conn:
            conn.execute(_SCHEMA)
            conn.execute("CREATE INDEX IF NOT EXISTS reference_digest ON reference_sample(digest)")

    def check_duplicate(self, fp: Fingerprint) -> bool:
        rows = self.ws.read("SELECT sample FROM reference_sample WHERE digest = ?", (fp.digest,))
        # compare bytes too, so a hash collision is never taken for a duplicate
        return any(bytes(r[0]) == fp.canonical_sample for r in rows)

    def register_fingerprint(self, fp: Fingerprint, sr_num: int) -> None:
        try:
            with self.ws.atomic() as conn:
                conn.execute(
                    "INSERT INTO reference_sample (digest, sample, owner_sr, sampled_rows) VALUES (?, ?, ?, ?)",
                    (fp.digest, fp.canonical_sample, sr_num, fp.sampled_rows),
                )
        except sqlite3.IntegrityError:
            raise DuplicateDigest(fp.digest) from None

    def release(self, sr_num: int) -> int:
        """Forget samples owned by ``sr_num`` (used when that file fails to load)."""
        with self.ws.atomic() as conn:
            return conn.execute("DELETE FROM reference_sample WHERE owner_sr = ?", (sr_num,)).rowcount

    def owners(self) -> list[int]:
        return [r[0] for r in self.ws.read("SELECT owner_sr FROM reference_sample ORDER BY owner_sr")]
