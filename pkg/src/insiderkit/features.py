"""Event encoding: integer codes, one-hot bit vectors, labels and splits.

Every event reduces to three categorical fields:

* day:  weekday index 0..6, Monday = 0
* time: hour-of-day code 1..24 (clock hour + 1, so midnight = 1)
* activity: code 1..7 (Logon=1, Logoff=2, Connect=3, Disconnect=4,
  Email=5, File=6, Http=7)

One-hot concatenation gives 7 + 24 + 7 = 38 natural bits, zero-padded to
a configurable width (default 50). The insider label rides alongside the
vector; it is not an input bit unless ``label_as_feature`` is set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, RecordParseError
from .ingest import ActivityKind, LogEvent

DAY_BITS = 7
HOUR_BITS = 24
ACTIVITY_BITS = 7
NATURAL_DIM = DAY_BITS + HOUR_BITS + ACTIVITY_BITS  # 38
HOUR_OFFSET = DAY_BITS  # 7
ACTIVITY_OFFSET = DAY_BITS + HOUR_BITS  # 31
DEFAULT_PAD_TO = 50

EVENTS_CSV_HEADER = ["day", "time", "activity", "user", "insider"]


def encode_activity(kind: ActivityKind) -> int:
    """Map an activity to its integer code 1..7."""
    return int(kind)


def decode_activity(code: int) -> ActivityKind:
    """Inverse of :func:`encode_activity`."""
    return ActivityKind(code)


def split_timestamp(ts: datetime) -> tuple[int, int]:
    """(weekday 0..6 with Monday=0, hour code 1..24)."""
    return ts.weekday(), ts.hour + 1


@dataclass
class EncodedEvent:
    """Integer-coded event plus its user and insider label."""

    day: int
    time: int
    activity_code: int
    user: str = ""
    insider: int = 0

    def validate(self) -> None:
        if not 0 <= self.day <= 6:
            raise ValueError(f"day must be in 0..6, got {self.day}")
        if not 1 <= self.time <= 24:
            raise ValueError(f"time must be in 1..24, got {self.time}")
        if not 1 <= self.activity_code <= 7:
            raise ValueError(f"activity code must be in 1..7, got {self.activity_code}")
        if self.insider not in (0, 1):
            raise ValueError(f"insider label must be 0 or 1, got {self.insider}")


@dataclass
class FeatureVector:
    """Binary one-hot vector with its label carried alongside."""

    bits: np.ndarray  # uint8, values in {0, 1}
    label: int


def encode_event(event: LogEvent, insider: int = 0) -> EncodedEvent:
    day, time = split_timestamp(event.timestamp)
    return EncodedEvent(
        day=day,
        time=time,
        activity_code=encode_activity(event.activity),
        user=event.user,
        insider=insider,
    )


def label_insiders(
    events: Iterable[EncodedEvent], roster: set[str]
) -> list[EncodedEvent]:
    """Set insider=1 exactly on events whose user is in the roster."""
    return [replace(e, insider=1 if e.user in roster else 0) for e in events]


def one_hot(event: EncodedEvent, pad_to: int = DEFAULT_PAD_TO) -> FeatureVector:
    """One-hot encode (day, time, activity) into ``pad_to`` bits.

    Bit positions: day d at d; hour t at 7+(t-1); activity a at 31+(a-1).
    Padding bits beyond position 37 are always zero.
    """
    if pad_to < NATURAL_DIM:
        raise ConfigError(f"pad_to must be >= {NATURAL_DIM}, got {pad_to}")
    event.validate()
    bits = np.zeros(pad_to, dtype=np.uint8)
    bits[event.day] = 1
    bits[HOUR_OFFSET + event.time - 1] = 1
    bits[ACTIVITY_OFFSET + event.activity_code - 1] = 1
    return FeatureVector(bits=bits, label=event.insider)


def decode_one_hot(bits: np.ndarray) -> tuple[int, int, int]:
    """Recover (day, time, activity code) from a valid one-hot vector.

    Requires exactly one set bit per field group and zero padding.
    """
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.shape[0] < NATURAL_DIM:
        raise ValueError("expected a 1-D vector of at least 38 bits")
    day_bits = np.flatnonzero(bits[:HOUR_OFFSET])
    hour_bits = np.flatnonzero(bits[HOUR_OFFSET:ACTIVITY_OFFSET])
    act_bits = np.flatnonzero(bits[ACTIVITY_OFFSET:NATURAL_DIM])
    if len(day_bits) != 1 or len(hour_bits) != 1 or len(act_bits) != 1:
        raise ValueError("vector is not a valid one-hot encoding")
    if bits[NATURAL_DIM:].any():
        raise ValueError("padding bits must be zero")
    return int(day_bits[0]), int(hour_bits[0]) + 1, int(act_bits[0]) + 1


def nearest_event_bits(values: np.ndarray) -> np.ndarray:
    """Snap a real-valued vector to the nearest valid one-hot encoding.

    Takes the argmax within each field group; padding positions are
    zeroed. Useful for interpreting generative-model output.
    """
    values = np.asarray(values, dtype=float)
    bits = np.zeros(values.shape[0], dtype=np.uint8)
    bits[int(np.argmax(values[:HOUR_OFFSET]))] = 1
    bits[HOUR_OFFSET + int(np.argmax(values[HOUR_OFFSET:ACTIVITY_OFFSET]))] = 1
    bits[ACTIVITY_OFFSET + int(np.argmax(values[ACTIVITY_OFFSET:NATURAL_DIM]))] = 1
    return bits


def vectorize(
    events: Sequence[EncodedEvent],
    pad_to: int = DEFAULT_PAD_TO,
    pad: bool = True,
    label_as_feature: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Encode events into a (n, d) uint8 bit matrix and (n,) label vector.

    With ``label_as_feature`` the label bit is appended after the 38
    natural bits (before padding), widening the natural width to 39.
    """
    natural = NATURAL_DIM + (1 if label_as_feature else 0)
    dim = max(pad_to, natural) if pad else natural
    X = np.zeros((len(events), dim), dtype=np.uint8)
    y = np.zeros(len(events), dtype=np.uint8)
    for i, event in enumerate(events):
        event.validate()
        X[i, event.day] = 1
        X[i, HOUR_OFFSET + event.time - 1] = 1
        X[i, ACTIVITY_OFFSET + event.activity_code - 1] = 1
        if label_as_feature:
            X[i, NATURAL_DIM] = event.insider
        y[i] = event.insider
    return X, y


@dataclass
class DataSplit:
    """Seed-deterministic shuffle-then-prefix split."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    ratio: float
    seed: int


def train_test_split(
    X: np.ndarray, y: np.ndarray, ratio: float = 0.75, seed: int = 0
) -> DataSplit:
    """Shuffle rows under ``seed`` and split with |train| = round(ratio*n).

    Rounding is half-up so sizes are platform-independent.
    """
    if not 0 < ratio < 1:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    n = X.shape[0]
    if n == 0:
        raise ConfigError("cannot split an empty dataset")
    if y.shape[0] != n:
        raise ConfigError("X and y row counts differ")
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(n * ratio + 0.5)
    train_idx, test_idx = order[:n_train], order[n_train:]
    return DataSplit(
        train_x=X[train_idx],
        train_y=y[train_idx],
        test_x=X[test_idx],
        test_y=y[test_idx],
        ratio=ratio,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# events.csv and packed-vector file I/O


def write_events_csv(
    path: str | Path,
    events: Sequence[EncodedEvent],
    meta: dict[str, object] | None = None,
) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if meta:
            fh.write(comment_header(meta))
        writer = csv.writer(fh)
        writer.writerow(EVENTS_CSV_HEADER)
        for e in events:
            writer.writerow([e.day, e.time, e.activity_code, e.user, e.insider])


def read_events_csv(path: str | Path) -> list[EncodedEvent]:
    path = Path(path)
    events: list[EncodedEvent] = []
    with path.open(newline="", encoding="utf-8") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows, None)
        if header is None or [h.strip() for h in header] != EVENTS_CSV_HEADER:
            raise RecordParseError(
                f"{path}: expected header {','.join(EVENTS_CSV_HEADER)}"
            )
        for i, row in enumerate(rows):
            if len(row) != len(EVENTS_CSV_HEADER):
                raise RecordParseError(f"{path}: malformed row", line=i + 2)
            try:
                event = EncodedEvent(
                    day=int(row[0]),
                    time=int(row[1]),
                    activity_code=int(row[2]),
                    user=row[3],
                    insider=int(row[4]),
                )
                event.validate()
            except ValueError as exc:
                raise RecordParseError(f"{path}: {exc}", line=i + 2) from None
            events.append(event)
    return events


def comment_header(meta: dict[str, object]) -> str:
    """One ``#``-prefixed line recording provenance of an artifact file."""
    parts = " ".join(f"{k}={v}" for k, v in meta.items())
    return f"# {parts}\n"


def write_vectors(path: str | Path, X: np.ndarray, y: np.ndarray) -> None:
    """Packed binary vectors: u16 little-endian width, then per record
    ``d`` feature bytes (0/1) followed by one label byte."""
    X = np.asarray(X, dtype=np.uint8)
    y = np.asarray(y, dtype=np.uint8)
    n, d = X.shape
    if y.shape[0] != n:
        raise ConfigError("X and y row counts differ")
    if d > 0xFFFF:
        raise ConfigError(f"vector width {d} exceeds u16 range")
    records = np.concatenate([X, y.reshape(-1, 1)], axis=1)
    with Path(path).open("wb") as fh:
        fh.write(int(d).to_bytes(2, "little"))
        fh.write(records.tobytes())


def read_vectors(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < 2:
        raise ConfigError(f"{path}: truncated vector file")
    d = int.from_bytes(raw[:2], "little")
    body = np.frombuffer(raw[2:], dtype=np.uint8)
    if d == 0 or body.size % (d + 1) != 0:
        raise ConfigError(f"{path}: body length inconsistent with width {d}")
    records = body.reshape(-1, d + 1)
    return records[:, :d].copy(), records[:, d].copy()


def write_vectors_csv(
    path: str | Path,
    X: np.ndarray,
    y: np.ndarray,
    meta: dict[str, object] | None = None,
) -> None:
    """Same content as :func:`write_vectors` but as 0/1 CSV for inspection."""
    d = X.shape[1]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if meta:
            fh.write(comment_header(meta))
        writer = csv.writer(fh)
        writer.writerow([f"b{i}" for i in range(d)] + ["label"])
        for row, label in zip(X, y):
            writer.writerow([*map(int, row), int(label)])
