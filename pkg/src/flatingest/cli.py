"""Command-line entry point: ``flatingest init|run|watch|log|parse``.

Result lines go to standard output, diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
from pathlib import Path

from .catalog import EXPORT_COLUMNS, Catalog, FilStatus, UnknownSerial
from .config import ConfigError, load_config
from .csvcore import CsvError, ParseProfile, open_record_stream
from .detect import HeaderStatus, ReferenceStore, detect_header
from .loader import GenericTable
from .store import StoreUnavailable, Workspace
from .workflow import Pipeline, PipelineAborted, ensure_folders

log = logging.getLogger("flatingest")

ABSENT = "\u2205"
LIST_COLUMNS = ("SR_NUM", "FIL_TYPE", "FIL_NAME", "FIL_PATH", "FIL_SIZE", "HEADER",
                "FIL_STATUS", "DUP_FILE", "ROWS_NUM", "COL_NUM")


def err(*args) -> None:
    print(*args, file=sys.stderr, flush=True)


def _null(value) -> str:
    return "NULL" if value is None else str(value)


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\t", "\\t").replace("\r", "\\r").replace("\n", "\\n")


def cmd_init(args) -> int:
    try:
        ensure_folders(args.root)
        with Workspace(args.root) as ws:
            Catalog(ws)
            ReferenceStore(ws)
            GenericTable(ws, args.table_width)
    except (OSError, StoreUnavailable) as exc:
        err(f"init failed: {exc}")
        return 2
    return 0


def _config_from(args):
    return load_config(
        args.config,
        source_dir=args.source,
        root_dir=args.root,
        batch_threshold=args.threshold,
        critical_column=args.critical_column,
        workers=args.workers,
    )


def _sweep(pipeline: Pipeline, stop=None) -> int:
    try:
        report = pipeline.run(stop)
    except PipelineAborted as exc:
        for outcome in exc.report.outcomes:
            print(outcome.line(), flush=True)
        err(f"run aborted: {exc.report.fatal}")
        return 2
    for outcome in report.outcomes:
        print(outcome.line(), flush=True)
    return report.exit_code


def cmd_run(args) -> int:
    try:
        config = _config_from(args)
        pipeline = Pipeline(config)
    except (ConfigError, OSError, StoreUnavailable) as exc:
        err(f"error: {exc}")
        return 2
    with pipeline:
        return _sweep(pipeline)


def cmd_watch(args) -> int:
    if args.interval < 1:
        err("error: --interval must be at least 1 second")
        return 2
    try:
        config = _config_from(args)
        pipeline = Pipeline(config)
    except (ConfigError, OSError, StoreUnavailable) as exc:
        err(f"error: {exc}")
        return 2

    stop = threading.Event()

    def on_signal(signum, frame):
        log.info("signal %d received, stopping after the current file", signum)
        stop.set()

    previous = {sig: signal.signal(sig, on_signal) for sig in (signal.SIGINT, signal.SIGTERM)}
    try:
        with pipeline:
            while not stop.is_set():
                code = _sweep(pipeline, stop)
                if code == 2:
                    return 2
                stop.wait(args.interval)
    finally:
        for sig, handler in previous.items():
            signal.signal(sig, handler)
    return 0


def cmd_log(args) -> int:
    try:
        ws = Workspace(args.root, create=False)
    except StoreUnavailable as exc:
        err(f"error: {exc}")
        return 2
    with ws:
        catalog = Catalog(ws)
        if args.action == "show":
            try:
                entry = catalog.get(args.sr)
            except UnknownSerial:
                err(f"unknown SR {args.sr}")
                return 1
            for key, value in zip(EXPORT_COLUMNS, entry.export_values()):
                print(f"{key}={_null(value)}")
            return 0
        entries = catalog.query(status=args.status, dup_file="Y" if args.dup else None)
        print("\t".join(LIST_COLUMNS))
        for entry in entries:
            print("\t".join(_null(v) for v in entry.export_values()[:len(LIST_COLUMNS)]))
        return 0


def cmd_parse(args) -> int:
    profile = ParseProfile(allow_quoted_newlines=not args.no_quoted_newlines)
    try:
        fh = open(args.file, "rb")
    except OSError as exc:
        err(f"error: {exc}")
        return 1
    with fh:
        stream = open_record_stream(fh, profile)
        try:
            first = next(stream, None)
            header = HeaderStatus.NOT_PRESENT if first is None else detect_header(first)
            print(f"header: {header.value}")
            if first is not None:
                print("\t".join(ABSENT if v is None else _escape(v) for v in first))
            for record in stream:
                print("\t".join(ABSENT if v is None else _escape(v) for v in record))
        except CsvError as exc:
            sys.stdout.flush()
            err(str(exc))
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flatingest", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create workflow folders and empty stores")
    p.add_argument("--root", required=True, type=Path)
    p.add_argument("--table-width", type=int, default=64)
    p.set_defaults(func=cmd_init)

    def run_flags(p):
        p.add_argument("--source", type=Path)
        p.add_argument("--root", type=Path)
        p.add_argument("--config", type=Path)
        p.add_argument("--threshold", type=int)
        p.add_argument("--critical-column", type=int)
        p.add_argument("--workers", type=int)

    p = sub.add_parser("run", help="process every file in the source folder once")
    run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("watch", help="sweep the source folder repeatedly")
    run_flags(p)
    p.add_argument("--interval", type=float, default=30.0, help="seconds between sweeps (default 30)")
    p.set_defaults(func=cmd_watch)

    p = sub.add_parser("log", help="inspect the file log")
    p.add_argument("--root", required=True, type=Path)
    log_sub = p.add_subparsers(dest="action", required=True)
    lp = log_sub.add_parser("list")
    lp.add_argument("--status", choices=[s.value for s in FilStatus])
    lp.add_argument("--dup", action="store_true")
    sp = log_sub.add_parser("show")
    sp.add_argument("sr", type=int)
    p.set_defaults(func=cmd_log)

    p = sub.add_parser("parse", help="tokenize one file and print its records")
    p.add_argument("file", type=Path)
    p.add_argument("--no-quoted-newlines", action="store_true")
    p.set_defaults(func=cmd_parse)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        force=True)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
