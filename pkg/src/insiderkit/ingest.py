"""Parsers for CERT-r4.2-style CSV audit logs.

Seven CSV files describe user activity: logon.csv, device.csv, http.csv,
email.csv, file.csv, psychometric.csv and ldap.csv. The five event files
are parsed into :class:`LogEvent` records, optionally truncated to the
first ``n`` rows each, and merged into one chronological stream. The
psychometric and LDAP files carry no event features; they are validated
and skipped.

Parsing is header-driven: columns are located by name, so column order
and extra columns do not matter.
"""

from __future__ import annotations

import csv
import enum
import heapq
from dataclasses import dataclass
from datetime import date, datetime
from itertools import islice
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ConfigError, RecordParseError, SchemaError


class LogFileKind(enum.Enum):
    """One variant per source CSV file."""

    LOGON = "logon"
    DEVICE = "device"
    HTTP = "http"
    EMAIL = "email"
    FILE = "file"
    PSYCHOMETRIC = "psychometric"
    LDAP = "ldap"

    @property
    def filename(self) -> str:
        return f"{self.value}.csv"


class ActivityKind(enum.IntEnum):
    """User activity, bijective with integer codes 1..7."""

    LOGON = 1
    LOGOFF = 2
    CONNECT = 3
    DISCONNECT = 4
    EMAIL = 5
    FILE = 6
    HTTP = 7

    @property
    def cell(self) -> str:
        """Spelling used in CSV activity cells, e.g. ``Logon``."""
        return self.name.capitalize()


# Activities each file kind is allowed to produce.
ALLOWED_ACTIVITIES: dict[LogFileKind, frozenset[ActivityKind]] = {
    LogFileKind.LOGON: frozenset({ActivityKind.LOGON, ActivityKind.LOGOFF}),
    LogFileKind.DEVICE: frozenset({ActivityKind.CONNECT, ActivityKind.DISCONNECT}),
    LogFileKind.HTTP: frozenset({ActivityKind.HTTP}),
    LogFileKind.EMAIL: frozenset({ActivityKind.EMAIL}),
    LogFileKind.FILE: frozenset({ActivityKind.FILE}),
    LogFileKind.PSYCHOMETRIC: frozenset(),
    LogFileKind.LDAP: frozenset(),
}

# Column that carries the per-row payload kept in LogEvent.detail.
_DETAIL_COLUMN: dict[LogFileKind, str] = {
    LogFileKind.HTTP: "url",
    LogFileKind.EMAIL: "to",
    LogFileKind.FILE: "filename",
}

# Required columns per file kind. The roster-style files (psychometric,
# ldap) only need a user identifier; they are never featurized.
REQUIRED_COLUMNS: dict[LogFileKind, frozenset[str]] = {
    LogFileKind.LOGON: frozenset({"id", "date", "user", "pc", "activity"}),
    LogFileKind.DEVICE: frozenset({"id", "date", "user", "pc", "activity"}),
    LogFileKind.HTTP: frozenset({"id", "date", "user", "pc", "url"}),
    LogFileKind.EMAIL: frozenset({"id", "date", "user", "pc", "to", "from"}),
    LogFileKind.FILE: frozenset({"id", "date", "user", "pc", "filename"}),
    LogFileKind.PSYCHOMETRIC: frozenset(),
    LogFileKind.LDAP: frozenset(),
}

EVENT_FILE_KINDS: tuple[LogFileKind, ...] = (
    LogFileKind.LOGON,
    LogFileKind.DEVICE,
    LogFileKind.HTTP,
    LogFileKind.EMAIL,
    LogFileKind.FILE,
)

DEFAULT_DATE_FORMAT = "%m/%d/%Y %H:%M:%S"
DEFAULT_SAMPLE_N = 5000


@dataclass(frozen=True)
class ParserConfig:
    """Knobs for timestamp parsing and corpus-window validation."""

    date_format: str = DEFAULT_DATE_FORMAT
    window_start: date = date(2010, 1, 1)
    window_end: date = date(2011, 5, 31)


DEFAULT_PARSER_CONFIG = ParserConfig()


@dataclass
class LogEvent:
    """One parsed audit record."""

    user: str
    timestamp: datetime
    activity: ActivityKind
    source: LogFileKind
    pc: str | None = None
    event_id: str | None = None
    detail: str | None = None

    @property
    def sort_key(self) -> tuple[datetime, str, int]:
        return (self.timestamp, self.user, int(self.activity))

    def validate(self, config: ParserConfig = DEFAULT_PARSER_CONFIG) -> None:
        if self.activity not in ALLOWED_ACTIVITIES[self.source]:
            raise RecordParseError(
                f"activity {self.activity.cell} not permitted for "
                f"{self.source.filename}"
            )
        if not config.window_start <= self.timestamp.date() <= config.window_end:
            raise RecordParseError(
                f"timestamp {self.timestamp} outside corpus window "
                f"{config.window_start}..{config.window_end}"
            )


def format_timestamp(ts: datetime, config: ParserConfig = DEFAULT_PARSER_CONFIG) -> str:
    """Inverse of timestamp parsing; used to re-serialize events."""
    return ts.strftime(config.date_format)


def _activity_from_cell(kind: LogFileKind, cell_value: str) -> ActivityKind:
    allowed = ALLOWED_ACTIVITIES[kind]
    value = cell_value.strip()
    for act in allowed:
        if act.cell == value:
            return act
    expected = ", ".join(sorted(a.cell for a in allowed))
    raise RecordParseError(
        f"unknown activity {value!r} in {kind.filename} (expected one of {expected})"
    )


def parse_record(
    kind: LogFileKind,
    header: Sequence[str],
    row: Sequence[str],
    config: ParserConfig = DEFAULT_PARSER_CONFIG,
) -> LogEvent | None:
    """Parse one CSV row into a LogEvent.

    Returns ``None`` for psychometric/ldap rows, which carry no events.
    Raises :class:`SchemaError` when a required column is absent and
    :class:`RecordParseError` for malformed cell values.
    """
    if len(header) != len(row):
        raise RecordParseError(
            f"row has {len(row)} cells but header has {len(header)} columns"
        )
    cells = dict(zip(header, row))

    missing = REQUIRED_COLUMNS[kind] - cells.keys()
    if missing:
        raise SchemaError(
            f"{kind.filename} is missing required column(s): {', '.join(sorted(missing))}"
        )

    if kind in (LogFileKind.PSYCHOMETRIC, LogFileKind.LDAP):
        if "user" not in cells and "user_id" not in cells:
            raise SchemaError(f"{kind.filename} needs a 'user' or 'user_id' column")
        return None

    try:
        ts = datetime.strptime(cells["date"].strip(), config.date_format)
    except ValueError as exc:
        raise RecordParseError(f"malformed date {cells['date']!r}: {exc}") from None

    if kind in (LogFileKind.LOGON, LogFileKind.DEVICE):
        activity = _activity_from_cell(kind, cells["activity"])
    elif kind is LogFileKind.HTTP:
        activity = ActivityKind.HTTP
    elif kind is LogFileKind.EMAIL:
        activity = ActivityKind.EMAIL
    else:
        activity = ActivityKind.FILE

    event = LogEvent(
        user=cells["user"].strip(),
        timestamp=ts,
        activity=activity,
        source=kind,
        pc=cells.get("pc", "").strip() or None,
        event_id=cells.get("id", "").strip() or None,
        detail=(cells.get(_DETAIL_COLUMN.get(kind, ""), "") or "").strip() or None,
    )
    event.validate(config)
    return event


def sample_file(rows: Iterable[Sequence[str]], n: int) -> list[Sequence[str]]:
    """First ``n`` rows in file order; fewer if the file is shorter."""
    if n < 0:
        raise ConfigError(f"sample size must be >= 0, got {n}")
    return list(islice(rows, n))


def kind_for_path(path: Path) -> LogFileKind:
    stem = path.stem.lower()
    for kind in LogFileKind:
        if kind.value == stem:
            return kind
    raise ConfigError(f"cannot infer log file kind from name {path.name!r}")


def parse_file(
    path: str | Path,
    kind: LogFileKind | None = None,
    sample_n: int | None = None,
    config: ParserConfig = DEFAULT_PARSER_CONFIG,
) -> list[LogEvent]:
    """Parse one CSV log file, sampling the first ``sample_n`` data rows.

    Parse failures carry the 1-based line number of the offending row.
    """
    path = Path(path)
    if kind is None:
        kind = kind_for_path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        # Leading '#' lines are provenance comments, not data.
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty (no header row)") from None
        missing = REQUIRED_COLUMNS[kind] - set(header)
        if missing:
            raise SchemaError(
                f"{path} is missing required column(s): {', '.join(sorted(missing))}"
            )
        rows = sample_file(reader, sample_n) if sample_n is not None else list(reader)

    events: list[LogEvent] = []
    for i, row in enumerate(rows):
        try:
            event = parse_record(kind, header, row, config)
        except RecordParseError as exc:
            # header is line 1, first data row is line 2
            raise RecordParseError(f"{path}: {exc}", line=i + 2) from None
        if event is not None:
            events.append(event)
    return events


def merge_events(streams: Sequence[Sequence[LogEvent]]) -> list[LogEvent]:
    """Merge per-file event lists into one stream sorted by
    (timestamp, user, activity code), stable for equal keys."""
    ordered: list[Iterator[LogEvent] | list[LogEvent]] = []
    for stream in streams:
        events = list(stream)
        if any(
            events[i].sort_key > events[i + 1].sort_key for i in range(len(events) - 1)
        ):
            events.sort(key=lambda e: e.sort_key)
        ordered.append(events)
    return list(heapq.merge(*ordered, key=lambda e: e.sort_key))


def load_corpus(
    data_dir: str | Path,
    sample_n: int | None = DEFAULT_SAMPLE_N,
    config: ParserConfig = DEFAULT_PARSER_CONFIG,
) -> list[LogEvent]:
    """Parse and merge all seven log files found under ``data_dir``.

    Event files absent from the directory are an error; psychometric and
    ldap files are validated when present but contribute no events.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise ConfigError(f"data directory not found: {data_dir}")

    streams = []
    for kind in EVENT_FILE_KINDS:
        path = data_dir / kind.filename
        if not path.exists():
            raise ConfigError(f"missing log file: {path}")
        streams.append(parse_file(path, kind, sample_n, config))
    for kind in (LogFileKind.PSYCHOMETRIC, LogFileKind.LDAP):
        path = data_dir / kind.filename
        if path.exists():
            parse_file(path, kind, sample_n, config)
    return merge_events(streams)
