"""Hot-folder workflow.

Each file moves physically through ``<root>/In``, ``<root>/InProgress`` and
finally ``<root>/Archive`` or ``<root>/Exception``.  The log entry follows
every move.  Per file the stages are:

1. intake and size guard, then header detection (always ends in ``In``);
2. duplicate and critical-column checks on the first data rows;
3. full parse and batched load, then archive.
"""

from __future__ import annotations

import logging
import shutil
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import islice
from pathlib import Path
from typing import Optional, Union

from .catalog import Catalog, FilStatus
from .config import DEFAULT_MAX_FILE_SIZE, PipelineConfig
from .csvcore import CsvError, EncodingError, ParseProfile, open_record_stream
from .detect import (
    SAMPLE_ROWS,
    CriticalRule,
    DuplicateDigest,
    HeaderStatus,
    ReferenceStore,
    detect_header,
    fingerprint_file,
    validate_critical,
)
from .loader import BatchBuffer, GenericTable, LoadResult, TooManyColumns, detect_column_count, recover_pending
from .notify import Event, Notification, Sink, SinkResult, notify, sink_from_spec
from .store import StoreUnavailable, Workspace

logger = logging.getLogger(__name__)


class Stage(str, Enum):
    RECEIVED = "RECEIVED"
    IN = "IN"
    IN_PROGRESS = "IN_PROGRESS"
    ARCHIVED = "ARCHIVED"
    EXCEPTION = "EXCEPTION"


class Reason(str, Enum):
    DUPLICATE = "DUPLICATE"
    CRITICAL_NULL = "CRITICAL_NULL"
    TOO_LARGE = "TOO_LARGE"
    PARSE_FAILURE = "PARSE_FAILURE"
    ENCODING = "ENCODING"


@dataclass(frozen=True)
class FileState:
    stage: Stage
    reason: Optional[Reason] = None

    def __post_init__(self):
        if (self.stage is Stage.EXCEPTION) != (self.reason is not None):
            raise ValueError("an exception reason is required for, and only for, EXCEPTION")

    @property
    def terminal(self) -> bool:
        return self.stage in (Stage.ARCHIVED, Stage.EXCEPTION)

    def __str__(self) -> str:
        if self.reason is not None:
            return f"{self.stage.value}({self.reason.value})"
        return self.stage.value


RECEIVED = FileState(Stage.RECEIVED)
IN = FileState(Stage.IN)
IN_PROGRESS = FileState(Stage.IN_PROGRESS)
ARCHIVED = FileState(Stage.ARCHIVED)


def exception(reason: Reason) -> FileState:
    return FileState(Stage.EXCEPTION, reason)


_LEGAL = {
    RECEIVED: {IN, exception(Reason.TOO_LARGE)},
    IN: {IN_PROGRESS, exception(Reason.DUPLICATE), exception(Reason.CRITICAL_NULL)},
    IN_PROGRESS: {ARCHIVED, exception(Reason.PARSE_FAILURE), exception(Reason.ENCODING)},
}


def is_legal(src: FileState, dst: FileState) -> bool:
    return dst in _LEGAL.get(src, ())


class IllegalTransition(Exception):
    def __init__(self, src: FileState, dst: FileState):
        super().__init__(f"illegal transition {src} -> {dst}")
        self.src = src
        self.dst = dst


class EmptyFile(Exception):
    def __str__(self) -> str:
        return "file contains no records"


@dataclass(frozen=True)
class ManagedFile:
    sr_num: int
    current_path: Path
    size_bytes: int
    state: FileState = RECEIVED


@dataclass(frozen=True)
class FolderSet:
    root: Path
    inbox: Path
    in_progress: Path
    archive: Path
    exception: Path

    def for_stage(self, stage: Stage) -> Path:
        return {
            Stage.IN: self.inbox,
            Stage.IN_PROGRESS: self.in_progress,
            Stage.ARCHIVED: self.archive,
            Stage.EXCEPTION: self.exception,
        }[stage]


def ensure_folders(root_dir: Union[str, Path]) -> FolderSet:
    root = Path(root_dir).absolute()
    if root.exists() and not root.is_dir():
        raise NotADirectoryError(f"{root} is not a directory")
    root.mkdir(parents=True, exist_ok=True)
    folders = FolderSet(root, root / "In", root / "InProgress", root / "Archive", root / "Exception")
    for sub in (folders.inbox, folders.in_progress, folders.archive, folders.exception):
        if sub.exists() and not sub.is_dir():
            raise NotADirectoryError(f"{sub} is not a directory")
        sub.mkdir(exist_ok=True)
    return folders


def scan_source(source_dir: Union[str, Path]) -> list[Path]:
    candidates = [p for p in Path(source_dir).absolute().iterdir()
                  if p.name.lower().endswith(".csv") and p.is_file()]
    return sorted(candidates, key=lambda p: p.name)


def guard_size(path: Union[str, Path], max_bytes: int = DEFAULT_MAX_FILE_SIZE) -> bool:
    """True when the file is within the limit (inclusive)."""
    return Path(path).stat().st_size <= max_bytes


def _free_name(dest_dir: Path, name: str, sr_num: int) -> Path:
    dest = dest_dir / name
    if not dest.exists():
        return dest
    stem, dot, ext = name.rpartition(".")
    if not dot:
        stem, ext = name, ""
    suffix = f".{ext}" if dot else ""
    dest = dest_dir / f"{stem}_{sr_num}{suffix}"
    n = 2
    while dest.exists():
        dest = dest_dir / f"{stem}_{sr_num}_{n}{suffix}"
        n += 1
    return dest


def move_into(path: Path, dest_dir: Path, sr_num: int) -> Path:
    dest = _free_name(dest_dir, path.name, sr_num)
    shutil.move(str(path), str(dest))
    return dest


def transition(file: ManagedFile, to: FileState, folders: FolderSet,
               catalog: Optional[Catalog] = None, **log_patch) -> ManagedFile:
    """Move ``file`` into the folder for ``to`` and record the new path.

    ``log_patch`` is applied to the log entry together with the path.  If
    the log update fails the move is undone.
    """
    if not is_legal(file.state, to):
        raise IllegalTransition(file.state, to)
    old = file.current_path
    dest = move_into(old, folders.for_stage(to.stage), file.sr_num)
    if catalog is not None:
        try:
            catalog.update_entry(file.sr_num, fil_path=str(dest), **log_patch)
        except BaseException:
            shutil.move(str(dest), str(old))
            raise
    logger.info("sr %d: %s -> %s (%s)", file.sr_num, file.state, to, dest)
    return replace(file, current_path=dest, state=to)


@dataclass
class FileOutcome:
    sr_num: int
    name: str
    state: FileState
    rows: Optional[int] = None
    cols: Optional[int] = None
    detail: str = ""

    def line(self) -> str:
        rows = "NULL" if self.rows is None else self.rows
        cols = "NULL" if self.cols is None else self.cols
        return f"{self.name} {self.state} rows={rows} cols={cols}"


@dataclass
class RunReport:
    outcomes: list[FileOutcome] = field(default_factory=list)
    fatal: Optional[str] = None

    @property
    def exit_code(self) -> int:
        return exit_code_for(self)


def exit_code_for(report: RunReport) -> int:
    if report.fatal is not None:
        return 2
    if any(o.state != ARCHIVED for o in report.outcomes):
        return 1
    return 0


class PipelineAborted(Exception):
    def __init__(self, report: RunReport):
        super().__init__(report.fatal)
        self.report = report


class Pipeline:
    """Runs files from ``config.source_dir`` through the workflow."""

    def __init__(self, config: PipelineConfig, workspace: Optional[Workspace] = None,
                 sinks: Optional[list[Sink]] = None):
        self.config = config
        self.folders = ensure_folders(config.root_dir)
        self.ws = workspace if workspace is not None else Workspace(config.root_dir)
        self.catalog = Catalog(self.ws)
        self.reference = ReferenceStore(self.ws)
        self.table = GenericTable(self.ws, config.table_width)
        if sinks is None:
            sinks = [sink_from_spec(spec) for spec in config.notify_sinks]
        self.sinks = sinks
        self.profile = ParseProfile(allow_quoted_newlines=config.allow_quoted_newlines)
        self.rule = CriticalRule(config.critical_column)
        self.deliveries: list[tuple[Notification, list[SinkResult]]] = []
        self._notify_lock = threading.Lock()

    # -- orchestration -----------------------------------------------------

    def run(self, stop: Optional[threading.Event] = None) -> RunReport:
        """One sweep of the source folder.

        ``stop`` is checked between files; a file already started always
        reaches a terminal state.
        """
        report = RunReport()
        try:
            self.recover()
            candidates = scan_source(self.config.source_dir)
        except (StoreUnavailable, OSError) as exc:
            report.fatal = str(exc)
            raise PipelineAborted(report) from exc

        def work(path: Path) -> Optional[FileOutcome]:
            if stop is not None and stop.is_set():
                return None
            return self.process_file(path)

        try:
            if self.config.workers == 1:
                for path in candidates:
                    outcome = work(path)
                    if outcome is not None:
                        report.outcomes.append(outcome)
            else:
                with ThreadPoolExecutor(self.config.workers) as pool:
                    for outcome in pool.map(work, candidates):
                        if outcome is not None:
                            report.outcomes.append(outcome)
        except StoreUnavailable as exc:
            report.fatal = str(exc)
            raise PipelineAborted(report) from exc
        return report

    def process_file(self, path: Path) -> Optional[FileOutcome]:
        try:
            size = path.stat().st_size
        except FileNotFoundError:
            logger.warning("%s vanished before intake", path)
            return None
        sr = self.catalog.append_entry(path.name, str(path), size)
        track = {"file": ManagedFile(sr, path, size)}
        try:
            return self._process(track, path.name)
        except StoreUnavailable:
            raise
        except Exception as exc:
            logger.exception("sr %d: unexpected failure", sr)
            mf = track["file"]
            return FileOutcome(sr, path.name, mf.state, detail=f"{type(exc).__name__}: {exc}")

    def _process(self, track: dict, name: str) -> FileOutcome:
        mf: ManagedFile = track["file"]
        sr = mf.sr_num

        if not guard_size(mf.current_path, self.config.max_file_size_bytes):
            detail = f"{mf.size_bytes} bytes exceeds limit {self.config.max_file_size_bytes}"
            return self._fail(track, name, Reason.TOO_LARGE, detail)

        # stage 1: header
        header = self._read_header(mf.current_path)
        mf = track["file"] = transition(mf, IN, self.folders, self.catalog, header=header)

        # stage 2: duplicate and critical column
        sample = self._read_sample(mf.current_path, header)
        if sample:
            fp = fingerprint_file(sample)
            if self.reference.check_duplicate(fp):
                return self._duplicate(track, name)
            violation = validate_critical(sample, self.rule)
            if violation is not None:
                return self._fail(track, name, Reason.CRITICAL_NULL, str(violation))
            try:
                self.reference.register_fingerprint(fp, sr)
            except DuplicateDigest:
                return self._duplicate(track, name)
        mf = track["file"] = transition(mf, IN_PROGRESS, self.folders, self.catalog)

        # stage 3: parse and load
        try:
            result = self._load(mf, header)
        except (CsvError, TooManyColumns, EmptyFile, OSError) as exc:
            reason = Reason.ENCODING if isinstance(exc, EncodingError) else Reason.PARSE_FAILURE
            return self._fail(track, name, reason, str(exc))

        with self.ws.atomic():
            self.table.clear_pending(sr)
            self.catalog.update_entry(sr, fil_status=FilStatus.COMPLETE, rows_num=result.rows_loaded,
                                      col_num=result.col_num, rejects_num=result.rejects)
        mf = track["file"] = transition(mf, ARCHIVED, self.folders, self.catalog)
        detail = f"rows={result.rows_loaded} cols={result.col_num}"
        if result.rejects:
            detail += f" rejects={result.rejects}"
        self._emit(Event.SUCCESS, sr, name, detail)
        return FileOutcome(sr, name, mf.state, result.rows_loaded, result.col_num, detail)

    # -- stages --------------------------------------------------------------

    def _read_header(self, path: Path) -> HeaderStatus:
        try:
            with open(path, "rb") as fh:
                first = next(open_record_stream(fh, self.profile), None)
        except CsvError as exc:
            # unreadable files are rejected by the full parse in stage 3
            logger.info("%s: header check could not read first record: %s", path.name, exc)
            return HeaderStatus.NOT_PRESENT
        if first is None:
            return HeaderStatus.NOT_PRESENT
        return detect_header(first)

    def _read_sample(self, path: Path, header: HeaderStatus) -> Optional[list]:
        try:
            with open(path, "rb") as fh:
                records = list(islice(open_record_stream(fh, self.profile), SAMPLE_ROWS + 1))
        except CsvError as exc:
            logger.info("%s: sample unreadable, deferring to parse stage: %s", path.name, exc)
            return None
        if header is HeaderStatus.PRESENT:
            return records[1:]
        return records[:SAMPLE_ROWS]

    def _load(self, mf: ManagedFile, header: HeaderStatus) -> LoadResult:
        with open(mf.current_path, "rb") as fh:
            stream = open_record_stream(fh, self.profile)
            first = next(stream, None)
            if first is None:
                raise EmptyFile()
            col_num = detect_column_count(first, self.table.width)
            buf = BatchBuffer(self.table, mf.sr_num, col_num, self.config.batch_threshold)
            try:
                if header is not HeaderStatus.PRESENT:
                    buf.buffer_record(first)
                for record in stream:
                    buf.buffer_record(record)
                return buf.finalize()
            except BaseException:
                with self.ws.atomic():
                    buf.abort()
                    self.reference.release(mf.sr_num)
                raise

    # -- terminal outcomes ---------------------------------------------------

    def _fail(self, track: dict, name: str, reason: Reason, detail: str) -> FileOutcome:
        mf: ManagedFile = track["file"]
        self.reference.release(mf.sr_num)
        mf = track["file"] = transition(mf, exception(reason), self.folders, self.catalog,
                                        fil_status=FilStatus.INCOMPLETE)
        self._emit(Event.FAILURE, mf.sr_num, name, f"{reason.value}: {detail}")
        return FileOutcome(mf.sr_num, name, mf.state, detail=detail)

    def _duplicate(self, track: dict, name: str) -> FileOutcome:
        mf: ManagedFile = track["file"]
        mf = track["file"] = transition(mf, exception(Reason.DUPLICATE), self.folders, self.catalog,
                                        fil_status=FilStatus.INCOMPLETE, dup_file="Y",
                                        rows_num=None, col_num=None)
        detail = "first data rows match a previously processed file"
        self._emit(Event.DUPLICATE, mf.sr_num, name, detail)
        return FileOutcome(mf.sr_num, name, mf.state, detail=detail)

    def _emit(self, event: Event, sr: int, name: str, detail: str) -> None:
        n = Notification(event, sr, name, detail)
        with self._notify_lock:
            self.deliveries.append((n, notify(n, self.sinks)))

    # -- crash recovery ------------------------------------------------------

    def recover(self) -> None:
        """Settle files left behind by an interrupted run.

        Rows of uncommitted loads are deleted, interrupted files go to
        Exception as INCOMPLETE, and committed files still sitting in
        InProgress are archived.
        """
        recover_pending(self.table)
        for entry in self.catalog.query(status=FilStatus.IN_PROGRESS):
            self.reference.release(entry.sr_num)
            path = Path(entry.fil_path)
            if path.parent in (self.folders.inbox, self.folders.in_progress) and path.exists():
                dest = move_into(path, self.folders.exception, entry.sr_num)
                self.catalog.update_entry(entry.sr_num, fil_status=FilStatus.INCOMPLETE, fil_path=str(dest))
                self._emit(Event.FAILURE, entry.sr_num, entry.fil_name, "interrupted before completion")
            else:
                self.catalog.update_entry(entry.sr_num, fil_status=FilStatus.INCOMPLETE)
            logger.warning("sr %d: interrupted run settled as INCOMPLETE", entry.sr_num)
        for entry in self.catalog.query(status=FilStatus.COMPLETE):
            path = Path(entry.fil_path)
            if path.parent == self.folders.in_progress and path.exists():
                dest = move_into(path, self.folders.archive, entry.sr_num)
                self.catalog.update_entry(entry.sr_num, fil_path=str(dest))

    def close(self) -> None:
        self.ws.close()

    def __enter__(self) -> "Pipeline":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def run_pipeline(config: PipelineConfig, *, sinks: Optional[list[Sink]] = None,
                 stop: Optional[threading.Event] = None) -> RunReport:
    with Pipeline(config, sinks=sinks) as pipeline:
        return pipeline.run(stop)
