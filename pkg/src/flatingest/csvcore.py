"""Streaming tokenizer for comma-separated flat files.

Records are pulled one at a time from a byte source, so memory stays
proportional to the longest record rather than the file.  Fields follow the
usual quoting grammar: a field that starts with a double quote runs until
the matching closing quote, ``""`` inside quotes is a literal quote, and
delimiters or line breaks inside quotes belong to the field.

An absent field (empty, or exactly ``""``) is represented as ``None``.
"""

from __future__ import annotations

import codecs
import io
import logging
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Optional, Sequence, Union

logger = logging.getLogger(__name__)

Field = Optional[str]

QUOTE = '"'
DEFAULT_CHUNK_SIZE = 64 * 1024
STRAY_QUOTE = "StrayQuote"

ByteSource = Union[bytes, bytearray, memoryview, BinaryIO, Iterable[bytes]]


class CsvError(Exception):
    """Base class for tokenizer failures."""


class EncodingError(CsvError):
    def __init__(self, offset: int, reason: str = ""):
        self.offset = offset
        self.reason = reason
        msg = f"EncodingError byte offset {offset}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class UnterminatedQuote(CsvError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"UnterminatedQuote line {line}")


class QuotedNewlineForbidden(CsvError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"QuotedNewlineForbidden line {line}")


@dataclass(frozen=True)
class ParseProfile:
    allow_quoted_newlines: bool = True
    delimiter: str = ","

    def __post_init__(self):
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")
        if self.delimiter == QUOTE or self.delimiter in "\r\n":
            raise ValueError(f"delimiter {self.delimiter!r} is not allowed")


@dataclass(frozen=True)
class Record:
    """One parsed row.

    ``source_line`` is the 1-based physical line the record starts on.
    Stray-quote notices are kept in ``warnings`` and ignored by equality.
    """

    fields: tuple[Field, ...]
    source_line: int
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.fields)

    def __iter__(self) -> Iterator[Field]:
        return iter(self.fields)

    def __getitem__(self, index):
        return self.fields[index]


class _NeedMore(Exception):
    pass


class _Unterminated(Exception):
    def __init__(self, pos: int):
        self.pos = pos


class _Forbidden(Exception):
    def __init__(self, pos: int):
        self.pos = pos


_BREAK_RX = re.compile(r"[\r\n]")
_FIELD_END_RX: dict[str, re.Pattern] = {}


def _field_end_rx(delimiter: str) -> re.Pattern:
    rx = _FIELD_END_RX.get(delimiter)
    if rx is None:
        rx = _FIELD_END_RX[delimiter] = re.compile("[" + re.escape(delimiter) + "\r\n]")
    return rx


def _split_balanced_line(text: str, delim: str) -> Optional[list]:
    """Split one physical line whose quoted fields all close on that line.

    Returns None when the line needs the general scanner (a stray quote,
    text after a closing quote, or a quoted field running past the line).
    """
    parts = text.split(delim)
    out = []
    i = 0
    n = len(parts)
    while i < n:
        part = parts[i]
        if QUOTE not in part:
            out.append(part or None)
            i += 1
            continue
        if part[0] != QUOTE:
            return None
        while part.count(QUOTE) % 2:
            i += 1
            if i == n:
                return None
            part += delim + parts[i]
        body = part[1:-1]
        if part[-1] != QUOTE or QUOTE in body.replace('""', ""):
            return None
        out.append(body.replace('""', QUOTE) or None)
        i += 1
    return out


def _count_breaks(text: str) -> int:
    return text.count("\n") + text.count("\r") - text.count("\r\n")


def _scan_field(text: str, pos: int, end_rx: re.Pattern, final: bool, allow_nl: bool):
    """Decode one field starting at ``pos``.

    Returns ``(value, end, stray)`` where ``end`` indexes the delimiter or
    line break that stopped the field (or ``len(text)``).  When ``final`` is
    false and the answer depends on text not yet buffered, raises _NeedMore.
    """
    n = len(text)
    if pos < n and text[pos] == QUOTE:
        parts = []
        i = pos + 1
        while True:
            j = text.find(QUOTE, i)
            if j < 0:
                if not allow_nl and _BREAK_RX.search(text, pos + 1):
                    raise _Forbidden(pos)
                if final:
                    raise _Unterminated(pos)
                raise _NeedMore
            parts.append(text[i:j])
            if j + 1 < n:
                if text[j + 1] == QUOTE:
                    parts.append(QUOTE)
                    i = j + 2
                    continue
            elif not final:
                raise _NeedMore
            i = j + 1
            break
        value = "".join(parts)
        if not allow_nl and ("\n" in value or "\r" in value):
            raise _Forbidden(pos)
        m = end_rx.search(text, i)
        end = m.start() if m else n
        stray = end > i
        if stray:
            # text after the closing quote is kept verbatim
            value += text[i:end]
        return value or None, end, stray
    m = end_rx.search(text, pos)
    end = m.start() if m else n
    value = text[pos:end]
    return value or None, end, QUOTE in value


def parse_field_run(
    characters: str,
    position: int,
    delimiter: str = ",",
    *,
    allow_quoted_newlines: bool = True,
    warnings: Optional[list] = None,
) -> tuple[Field, int]:
    """Decode the field that starts at ``position`` in a complete text.

    Returns the field and the index of the delimiter or line break that
    ended it.  A stray quote inside an unquoted token is tolerated: the text
    is kept verbatim and a notice is appended to ``warnings`` if given.
    """
    try:
        value, end, stray = _scan_field(
            characters, position, _field_end_rx(delimiter), True, allow_quoted_newlines
        )
    except _Unterminated as exc:
        raise UnterminatedQuote(1 + _count_breaks(characters[: exc.pos])) from None
    except _Forbidden as exc:
        raise QuotedNewlineForbidden(1 + _count_breaks(characters[: exc.pos])) from None
    if stray and warnings is not None:
        warnings.append(f"{STRAY_QUOTE} at offset {position}")
    return value, end


def _chunks(source: ByteSource, chunk_size: int) -> Iterator[bytes]:
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(source)
    read = getattr(source, "read", None)
    if read is not None:
        while True:
            chunk = read(chunk_size)
            if not chunk:
                return
            yield chunk
    else:
        for chunk in source:
            if chunk:
                yield chunk


class RecordStream:
    """Pull-based iterator of :class:`Record` values over a byte source.

    Single consumer.  ``records_emitted`` and ``warning_count`` are running
    totals for the caller's bookkeeping.
    """

    def __init__(self, source: ByteSource, profile: ParseProfile = ParseProfile(),
                 chunk_size: int = DEFAULT_CHUNK_SIZE):
        if chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        self.profile = profile
        self.records_emitted = 0
        self.warning_count = 0
        self._gen = self._records(_chunks(source, chunk_size))

    def __iter__(self) -> "RecordStream":
        return self

    def __next__(self) -> Record:
        return next(self._gen)

    def close(self) -> None:
        self._gen.close()

    def _records(self, chunks: Iterator[bytes]) -> Iterator[Record]:
        delim = self.profile.delimiter
        allow_nl = self.profile.allow_quoted_newlines
        end_rx = _field_end_rx(delim)
        break_search = _BREAK_RX.search
        decoder = codecs.getincrementaldecoder("utf-8")("strict")
        fed = 0

        buf = ""
        pos = 0
        line = 1
        final = False
        # buf[pos:scanned] is known to hold no line break
        scanned = 0

        while True:
            n = len(buf)
            try:
                while pos < n:
                    c = buf[pos]
                    if c == "\n":
                        pos += 1
                        line += 1
                        continue
                    if c == "\r":
                        if pos + 1 < n:
                            pos += 2 if buf[pos + 1] == "\n" else 1
                        elif final:
                            pos += 1
                        else:
                            raise _NeedMore
                        line += 1
                        continue

                    m = break_search(buf, max(pos, scanned))
                    if m is None:
                        if not final:
                            scanned = n
                            raise _NeedMore
                        eol = nxt = n
                    else:
                        eol = m.start()
                        if buf[eol] == "\n":
                            nxt = eol + 1
                        elif eol + 1 < n:
                            nxt = eol + 2 if buf[eol + 1] == "\n" else eol + 1
                        elif final:
                            nxt = eol + 1
                        else:
                            raise _NeedMore
                    text = buf[pos:eol]
                    if QUOTE not in text:
                        fields = [f or None for f in text.split(delim)]
                    else:
                        fields = _split_balanced_line(text, delim)
                    if fields is not None:
                        # fast path: the record is exactly this physical line
                        record = Record(tuple(fields), line)
                        pos = nxt
                        line += 1
                    else:
                        record, pos, line = self._slow_record(buf, pos, line, end_rx, final, allow_nl)
                    self.records_emitted += 1
                    yield record
            except _NeedMore:
                pass

            if final:
                return
            # keep only the unconsumed tail
            scanned = max(scanned - pos, 0)
            parts = [buf[pos:]]
            pos = 0
            while True:
                chunk = next(chunks, None)
                pending = len(decoder.getstate()[0])
                try:
                    if chunk is None:
                        final = True
                        piece = decoder.decode(b"", final=True)
                    else:
                        piece = decoder.decode(chunk)
                        fed += len(chunk)
                except UnicodeDecodeError as exc:
                    # exc.start is relative to the decoder's carried-over bytes plus this chunk
                    raise EncodingError(fed - pending + exc.start, exc.reason) from None
                parts.append(piece)
                # a line longer than one chunk is joined once, not once per chunk
                if final or not scanned or "\n" in piece or "\r" in piece:
                    break
            buf = "".join(parts)

    def _slow_record(self, buf, pos, line, end_rx, final, allow_nl):
        delim = self.profile.delimiter
        n = len(buf)
        start = pos
        fields = []
        notes = []
        p = pos
        while True:
            try:
                value, end, stray = _scan_field(buf, p, end_rx, final, allow_nl)
            except _Unterminated as exc:
                raise UnterminatedQuote(line + _count_breaks(buf[start:exc.pos])) from None
            except _Forbidden as exc:
                raise QuotedNewlineForbidden(line + _count_breaks(buf[start:exc.pos])) from None
            fields.append(value)
            if stray:
                notes.append(f"{STRAY_QUOTE} field {len(fields)}")
            if end >= n:
                if not final:
                    raise _NeedMore
                nxt = n
                break
            c = buf[end]
            if c == delim:
                p = end + 1
                continue
            if c == "\n":
                nxt = end + 1
            elif end + 1 < n:
                nxt = end + 2 if buf[end + 1] == "\n" else end + 1
            elif final:
                nxt = end + 1
            else:
                raise _NeedMore
            break
        if notes:
            self.warning_count += len(notes)
            logger.debug("line %d: %s", line, ", ".join(notes))
        record = Record(tuple(fields), line, tuple(notes))
        return record, nxt, line + _count_breaks(buf[start:nxt])


def open_record_stream(byte_source: ByteSource, profile: ParseProfile = ParseProfile(),
                       *, chunk_size: int = DEFAULT_CHUNK_SIZE) -> RecordStream:
    """Return a :class:`RecordStream` over ``byte_source``.

    ``byte_source`` may be a bytes-like object, a binary file object or an
    iterable of byte chunks.  Text must be UTF-8.
    """
    return RecordStream(byte_source, profile, chunk_size)


def write_canonical(records: Iterable[Sequence[Field]], delimiter: str = ",") -> bytes:
    """Serialize records as canonical CSV bytes.

    Fields holding the delimiter, a quote, CR or LF are quoted with doubled
    quotes; everything else is written bare.  Each record ends with CR LF.
    A record made of one absent field is written as ``""`` so that it does
    not read back as a blank line.
    """
    specials = (delimiter, QUOTE, "\r", "\n")
    out = []
    for record in records:
        fields = list(record)
        if not fields:
            raise ValueError("cannot serialize a record with no fields")
        if len(fields) == 1 and not fields[0]:
            out.append('""\r\n')
            continue
        tokens = []
        for value in fields:
            if not value:
                tokens.append("")
            elif any(s in value for s in specials):
                tokens.append(QUOTE + value.replace(QUOTE, QUOTE + QUOTE) + QUOTE)
            else:
                tokens.append(value)
        out.append(delimiter.join(tokens) + "\r\n")
    return "".join(out).encode("utf-8")
