"""Desk-scale synthetic audit-log corpus with injected insider scenarios.

Benign users follow a daily rhythm: a logon near the start of their work
hours, a logoff near the end (each jittered by up to 30 minutes),
Poisson-distributed web/email/file activity in between, and paired USB
connect/disconnect events. Insiders get the same background at a reduced
rate, cut short when they leave the organization, plus one of three
scripted campaigns:

* after-hours exfiltration: nightly off-hours logons with USB file
  copies and an upload to wikileaks.org
* job-seeker theft: evenings of job-site browsing followed by late-night
  USB theft bursts
* admin keylogger: a keylogger planted over USB, then nightly mass-email
  bursts (default 20 emails inside one hour)

All randomness flows from one integer seed; the same seed reproduces the
corpus byte for byte. Output matches the CSV schemas the ingest module
reads, plus ``ground_truth.csv`` mapping insiders to their scenario.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .ingest import ActivityKind, LogEvent, LogFileKind

DEFAULT_START_DATE = date(2010, 1, 4)  # a Monday inside the corpus window

ROLES = ("engineer", "analyst", "hr", "sales", "it-admin", "finance")

BENIGN_URLS = (
    "http://news.example.com",
    "http://wiki.example.com",
    "http://mail.example.com",
    "http://intranet.example.com",
    "http://weather.example.com",
    "http://forum.example.com",
)
JOB_URLS = (
    "http://jobs.example.com",
    "http://careers.example.com",
    "http://recruiter.example.com",
)
EXFIL_URL = "http://wikileaks.org/upload"
KEYLOGGER_FILENAME = "keylogger.exe"

BENIGN_FILES = ("report.docx", "budget.xlsx", "slides.pptx", "notes.txt")


class ScenarioKind(enum.Enum):
    AFTER_HOURS_EXFIL = "after-hours-exfil"
    JOB_SEEKER_THEFT = "job-seeker-theft"
    ADMIN_KEYLOGGER = "admin-keylogger"


SCENARIO_ROTATION = (
    ScenarioKind.AFTER_HOURS_EXFIL,
    ScenarioKind.JOB_SEEKER_THEFT,
    ScenarioKind.ADMIN_KEYLOGGER,
)


@dataclass
class UserProfile:
    """Work rhythm for one simulated employee.

    ``work_hours`` are hour codes 1..24 (clock hour + 1); activity rates
    are expected events per day. Logon/logoff are structural (one pair
    per day) and ignore their rate entries; the connect rate counts
    connect/disconnect pairs.
    """

    user_id: str
    role: str
    work_hours: tuple[int, int]
    activity_rates: dict[ActivityKind, float]

    def __post_init__(self) -> None:
        start, end = self.work_hours
        if not (1 <= start < end <= 24):
            raise ConfigError(f"work_hours must satisfy 1 <= start < end <= 24, got {self.work_hours}")
        if any(rate < 0 for rate in self.activity_rates.values()):
            raise ConfigError("activity rates must be non-negative")


@dataclass(frozen=True)
class ScenarioParams:
    """Campaign intensities; invented defaults, tuned for desk scale."""

    insider_background_factor: float = 0.2
    insider_tenure_days: int = 15
    off_hours_codes: tuple[int, ...] = (22, 23, 24, 1, 2)
    exfil_nights: int = 12
    exfil_files_per_night: int = 24
    exfil_http_per_night: int = 2
    browse_days: int = 10
    browse_per_day: int = 10
    browse_codes: tuple[int, ...] = (21, 22)
    theft_nights: int = 6
    theft_files: int = 25
    theft_codes: tuple[int, ...] = (23, 24)
    keylogger_burst_nights: int = 13
    burst_emails: int = 20
    burst_code: int = 22
    prep_code: int = 21


DEFAULT_SCENARIO_PARAMS = ScenarioParams()


@dataclass
class GroundTruth:
    """Who the insiders are, their scenario, and their malicious events."""

    roster: set[str]
    scenarios: dict[str, ScenarioKind]
    malicious_event_ids: set[str]

    def __post_init__(self) -> None:
        if self.roster != set(self.scenarios):
            raise ConfigError("roster must equal the scenario map keys")


def _child_seed(seed: int, index: int) -> int:
    # Stable per-user stream without relying on generator spawn order.
    return (seed * 1_000_003 + index) % (2**63)


def _pc_for(user_id: str) -> str:
    return f"PC-{user_id}"


def _ts(start_date: date, day: int, minute_of_day: int) -> datetime:
    base = datetime(start_date.year, start_date.month, start_date.day)
    return base + timedelta(days=day, minutes=minute_of_day)


class _IdAllocator:
    def __init__(self, prefix: str, user_id: str):
        self.prefix = prefix
        self.user_id = user_id
        self.n = 0

    def next(self) -> str:
        self.n += 1
        return f"{self.prefix}{self.user_id}-{self.n:06d}"


def gen_normal_user(
    profile: UserProfile,
    days: int,
    seed: int,
    start_date: date = DEFAULT_START_DATE,
) -> list[LogEvent]:
    """Benign background events for one user over ``days`` calendar days."""
    if days < 1:
        raise ConfigError(f"days must be >= 1, got {days}")
    rng = np.random.default_rng(seed)
    ids = _IdAllocator("B", profile.user_id)
    pc = _pc_for(profile.user_id)
    start_code, end_code = profile.work_hours
    rates = profile.activity_rates
    events: list[LogEvent] = []

    def emit(day: int, minute: int, activity: ActivityKind, detail: str | None = None) -> LogEvent:
        return LogEvent(
            user=profile.user_id,
            timestamp=_ts(start_date, day, minute),
            activity=activity,
            source=_SOURCE_FOR_ACTIVITY[activity],
            pc=pc,
            event_id=ids.next(),
            detail=detail,
        )

    for day in range(days):
        day_events: list[tuple[int, int, LogEvent]] = []
        seq = 0

        def push(minute: int, activity: ActivityKind, detail: str | None = None) -> None:
            nonlocal seq
            day_events.append((minute, seq, emit(day, minute, activity, detail)))
            seq += 1

        logon_min = max(0, (start_code - 1) * 60 + int(rng.integers(-30, 31)))
        logoff_min = min(1439, (end_code - 1) * 60 + int(rng.integers(-30, 31)))
        if logoff_min <= logon_min + 30:
            logoff_min = logon_min + 31
        push(logon_min, ActivityKind.LOGON)
        push(logoff_min, ActivityKind.LOGOFF)

        window_lo, window_hi = logon_min + 1, logoff_min - 1
        for activity, pool in (
            (ActivityKind.HTTP, BENIGN_URLS),
            (ActivityKind.EMAIL, None),
            (ActivityKind.FILE, BENIGN_FILES),
        ):
            for _ in range(int(rng.poisson(rates.get(activity, 0.0)))):
                minute = int(rng.integers(window_lo, window_hi + 1))
                if activity is ActivityKind.EMAIL:
                    detail = f"colleague{int(rng.integers(0, 1000)):03d}@dtaa.com"
                else:
                    detail = str(rng.choice(pool))
                push(minute, activity, detail)

        for _ in range(int(rng.poisson(rates.get(ActivityKind.CONNECT, 0.0)))):
            if window_hi - window_lo < 20:
                break
            connect = int(rng.integers(window_lo, window_hi - 10))
            duration = int(rng.integers(5, 56))
            disconnect = min(connect + duration, window_hi)
            push(connect, ActivityKind.CONNECT)
            push(disconnect, ActivityKind.DISCONNECT)

        day_events.sort(key=lambda item: (item[0], item[1]))
        events.extend(e for _, _, e in day_events)
    return events


_SOURCE_FOR_ACTIVITY = {
    ActivityKind.LOGON: LogFileKind.LOGON,
    ActivityKind.LOGOFF: LogFileKind.LOGON,
    ActivityKind.CONNECT: LogFileKind.DEVICE,
    ActivityKind.DISCONNECT: LogFileKind.DEVICE,
    ActivityKind.HTTP: LogFileKind.HTTP,
    ActivityKind.EMAIL: LogFileKind.EMAIL,
    ActivityKind.FILE: LogFileKind.FILE,
}


class _ScenarioEmitter:
    """Accumulates a scenario's events with strictly ordered minutes."""

    def __init__(self, profile: UserProfile, start_date: date):
        self.profile = profile
        self.start_date = start_date
        self.ids = _IdAllocator("M", profile.user_id)
        self.pc = _pc_for(profile.user_id)
        self.events: list[LogEvent] = []
        self.malicious: set[str] = set()

    def emit(self, day: int, minute: int, activity: ActivityKind, detail: str | None = None) -> None:
        event_id = self.ids.next()
        self.events.append(
            LogEvent(
                user=self.profile.user_id,
                timestamp=_ts(self.start_date, day, minute),
                activity=activity,
                source=_SOURCE_FOR_ACTIVITY[activity],
                pc=self.pc,
                event_id=event_id,
                detail=detail,
            )
        )
        self.malicious.add(event_id)


def _hour_block_start(code: int, rng: np.random.Generator, span: int) -> int:
    """Minute-of-day where a ``span``-event block fits inside one clock hour."""
    if span > 59:
        raise ConfigError(f"scenario block of {span} events does not fit in an hour")
    base = (code - 1) * 60
    return base + int(rng.integers(0, 60 - span))


def inject_scenario(
    kind: ScenarioKind,
    profile: UserProfile,
    timeline: Sequence[int] | range,
    seed: int,
    params: ScenarioParams = DEFAULT_SCENARIO_PARAMS,
    start_date: date = DEFAULT_START_DATE,
) -> tuple[list[LogEvent], set[str]]:
    """Emit one insider campaign across the given day indices.

    Every returned event id is in the returned malicious set. After-hours
    events use hour codes outside the profile's work hours.
    """
    days = list(timeline)
    if not days:
        raise ConfigError("scenario timeline must be non-empty")
    rng = np.random.default_rng(seed)
    out = _ScenarioEmitter(profile, start_date)

    if kind is ScenarioKind.AFTER_HOURS_EXFIL:
        for day in days[: params.exfil_nights]:
            span = 4 + params.exfil_files_per_night + params.exfil_http_per_night
            m = _hour_block_start(int(rng.choice(params.off_hours_codes)), rng, span)
            out.emit(day, m, ActivityKind.LOGON)
            out.emit(day, m + 1, ActivityKind.CONNECT)
            m += 2
            for i in range(params.exfil_files_per_night):
                out.emit(day, m + i, ActivityKind.FILE, f"secret-{day:03d}-{i:03d}.zip")
            m += params.exfil_files_per_night
            for i in range(params.exfil_http_per_night):
                out.emit(day, m + i, ActivityKind.HTTP, EXFIL_URL)
            m += params.exfil_http_per_night
            out.emit(day, m, ActivityKind.DISCONNECT)
            out.emit(day, m + 1, ActivityKind.LOGOFF)

    elif kind is ScenarioKind.JOB_SEEKER_THEFT:
        n_browse = min(params.browse_days, max(1, len(days) - 1))
        browse_days = days[:n_browse]
        theft_days = days[n_browse : n_browse + params.theft_nights] or days[-1:]
        for day in browse_days:
            code = int(rng.choice(params.browse_codes))
            base = (code - 1) * 60
            minutes = sorted(
                int(v) for v in rng.choice(60, size=min(params.browse_per_day, 60), replace=False)
            )
            for m in minutes:
                out.emit(day, base + m, ActivityKind.HTTP, str(rng.choice(JOB_URLS)))
        for day in theft_days:
            span = 2 + params.theft_files
            m = _hour_block_start(int(rng.choice(params.theft_codes)), rng, span)
            out.emit(day, m, ActivityKind.CONNECT)
            for i in range(params.theft_files):
                out.emit(day, m + 1 + i, ActivityKind.FILE, f"client-db-{day:03d}-{i:03d}.db")
            out.emit(day, m + 1 + params.theft_files, ActivityKind.DISCONNECT)

    elif kind is ScenarioKind.ADMIN_KEYLOGGER:
        prep = days[0]
        base = (params.prep_code - 1) * 60
        out.emit(prep, base, ActivityKind.CONNECT)
        out.emit(prep, base + 1, ActivityKind.FILE, KEYLOGGER_FILENAME)
        out.emit(prep, base + 2, ActivityKind.DISCONNECT)
        for day in days[1 : 1 + params.keylogger_burst_nights]:
            span = 3 + params.burst_emails
            m = _hour_block_start(params.burst_code, rng, span)
            out.emit(day, m, ActivityKind.CONNECT)
            out.emit(day, m + 1, ActivityKind.FILE, KEYLOGGER_FILENAME)
            out.emit(day, m + 2, ActivityKind.DISCONNECT)
            for i in range(params.burst_emails):
                out.emit(
                    day, m + 3 + i, ActivityKind.EMAIL, f"all-staff-{i:03d}@dtaa.com"
                )
    else:
        raise ConfigError(f"unknown scenario kind {kind!r}")

    out.events.sort(key=lambda e: e.sort_key)
    return out.events, out.malicious


def make_profile(index: int, rng: np.random.Generator) -> UserProfile:
    start = int(rng.integers(7, 10))
    end = start + int(rng.integers(8, 10))
    return UserProfile(
        user_id=f"U{index:04d}",
        role=str(rng.choice(ROLES)),
        work_hours=(start, end),
        activity_rates={
            ActivityKind.HTTP: float(rng.uniform(4.0, 8.0)),
            ActivityKind.EMAIL: float(rng.uniform(2.5, 5.5)),
            ActivityKind.FILE: float(rng.uniform(1.0, 3.0)),
            ActivityKind.CONNECT: float(rng.uniform(0.2, 0.6)),
        },
    )


def gen_events(
    n_users: int,
    n_insiders: int,
    days: int,
    seed: int,
    params: ScenarioParams = DEFAULT_SCENARIO_PARAMS,
    start_date: date = DEFAULT_START_DATE,
) -> tuple[list[LogEvent], list[UserProfile], GroundTruth]:
    """Generate the full event population in memory."""
    if n_insiders > n_users:
        raise ConfigError(f"n_insiders ({n_insiders}) exceeds n_users ({n_users})")
    if days < 1:
        raise ConfigError(f"days must be >= 1, got {days}")
    rng = np.random.default_rng(seed)
    profiles = [make_profile(i, rng) for i in range(n_users)]
    insider_indices = sorted(
        int(i) for i in rng.choice(n_users, size=n_insiders, replace=False)
    )
    scenarios = {
        profiles[idx].user_id: SCENARIO_ROTATION[j % len(SCENARIO_ROTATION)]
        for j, idx in enumerate(insider_indices)
    }

    events: list[LogEvent] = []
    malicious: set[str] = set()
    for i, profile in enumerate(profiles):
        if profile.user_id in scenarios:
            tenure = max(2, min(days, params.insider_tenure_days))
            background = replace(
                profile,
                activity_rates={
                    k: v * params.insider_background_factor
                    for k, v in profile.activity_rates.items()
                },
            )
            events.extend(
                gen_normal_user(background, tenure, _child_seed(seed, i), start_date)
            )
            campaign, ids = inject_scenario(
                scenarios[profile.user_id],
                profile,
                range(1, tenure),
                _child_seed(seed, 100_000 + i),
                params,
                start_date,
            )
            events.extend(campaign)
            malicious |= ids
        else:
            events.extend(gen_normal_user(profile, days, _child_seed(seed, i), start_date))

    ground_truth = GroundTruth(
        roster=set(scenarios),
        scenarios=scenarios,
        malicious_event_ids=malicious,
    )
    return events, profiles, ground_truth


# ---------------------------------------------------------------------------
# CSV emission

_EVENT_HEADERS = {
    LogFileKind.LOGON: ["id", "date", "user", "pc", "activity"],
    LogFileKind.DEVICE: ["id", "date", "user", "pc", "activity"],
    LogFileKind.HTTP: ["id", "date", "user", "pc", "url"],
    LogFileKind.EMAIL: ["id", "date", "user", "pc", "to", "from"],
    LogFileKind.FILE: ["id", "date", "user", "pc", "filename"],
}


def _event_row(event: LogEvent) -> list[str]:
    stamp = event.timestamp.strftime("%m/%d/%Y %H:%M:%S")
    base = [event.event_id or "", stamp, event.user, event.pc or ""]
    kind = event.source
    if kind in (LogFileKind.LOGON, LogFileKind.DEVICE):
        return base + [event.activity.cell]
    if kind is LogFileKind.HTTP:
        return base + [event.detail or BENIGN_URLS[0]]
    if kind is LogFileKind.EMAIL:
        return base + [event.detail or "colleague@dtaa.com", f"{event.user}@dtaa.com"]
    return base + [event.detail or BENIGN_FILES[0]]


def _write_csv(
    path: Path, header: list[str], rows: Iterable[Sequence[object]], meta: dict | None
) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        if meta:
            parts = " ".join(f"{k}={v}" for k, v in meta.items())
            fh.write(f"# {parts}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_corpus(
    out_dir: str | Path,
    events: Sequence[LogEvent],
    profiles: Sequence[UserProfile],
    ground_truth: GroundTruth,
    seed: int,
    meta: dict | None = None,
) -> dict[LogFileKind, Path]:
    """Write the seven CSV log files plus ground_truth.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(_child_seed(seed, 999_983))

    by_kind: dict[LogFileKind, list[LogEvent]] = {k: [] for k in _EVENT_HEADERS}
    for event in sorted(events, key=lambda e: e.sort_key):
        by_kind[event.source].append(event)

    paths: dict[LogFileKind, Path] = {}
    for kind, header in _EVENT_HEADERS.items():
        path = out_dir / kind.filename
        _write_csv(path, header, (_event_row(e) for e in by_kind[kind]), meta)
        paths[kind] = path

    psych_rows = [
        [
            f"Employee {p.user_id[1:]}",
            p.user_id,
            *(int(rng.integers(20, 81)) for _ in range(5)),
        ]
        for p in profiles
    ]
    psych_path = out_dir / LogFileKind.PSYCHOMETRIC.filename
    _write_csv(
        psych_path, ["employee_name", "user_id", "O", "C", "E", "A", "N"], psych_rows, meta
    )
    paths[LogFileKind.PSYCHOMETRIC] = psych_path

    ldap_rows = [[f"Employee {p.user_id[1:]}", p.user_id, p.role] for p in profiles]
    ldap_path = out_dir / LogFileKind.LDAP.filename
    _write_csv(ldap_path, ["employee_name", "user_id", "role"], ldap_rows, meta)
    paths[LogFileKind.LDAP] = ldap_path

    truth_rows = [
        [user, ground_truth.scenarios[user].value] for user in sorted(ground_truth.roster)
    ]
    _write_csv(out_dir / "ground_truth.csv", ["user", "scenario"], truth_rows, meta)
    return paths


def gen_dataset(
    n_users: int,
    n_insiders: int,
    days: int,
    seed: int,
    out_dir: str | Path,
    params: ScenarioParams = DEFAULT_SCENARIO_PARAMS,
    start_date: date = DEFAULT_START_DATE,
    meta: dict | None = None,
) -> tuple[dict[LogFileKind, Path], GroundTruth]:
    """Generate and write a complete corpus; returns file paths and truth."""
    events, profiles, ground_truth = gen_events(
        n_users, n_insiders, days, seed, params, start_date
    )
    paths = write_corpus(out_dir, events, profiles, ground_truth, seed, meta)
    return paths, ground_truth


def read_ground_truth(path: str | Path) -> dict[str, ScenarioKind]:
    """Read ground_truth.csv back into a user -> scenario map."""
    path = Path(path)
    out: dict[str, ScenarioKind] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["user", "scenario"]:
            raise ConfigError(f"{path}: expected header user,scenario")
        for row in reader:
            if len(row) != 2:
                raise ConfigError(f"{path}: malformed row {row!r}")
            out[row[0]] = ScenarioKind(row[1])
    return out
