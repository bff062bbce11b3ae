"""Alphabets, traces and datasets of categorical event sequences.

Raw assessment-log records are mapped onto six behavioral symbols
(HK, LK, FG, LE, KG, NI) from a student's response correctness,
confidence level and feedback-seeking action.  Arbitrary alphabets are
supported everywhere else; the six-symbol one is just the canonical
default.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import IngestionError

# Canonical symbol order; transition-matrix indices are reproducible
# across runs only because this order is fixed.
CANONICAL_SYMBOLS = ("HK", "LK", "FG", "LE", "KG", "NI")

RAW_LOG_FIELDS = (
    "student_id",
    "session_id",
    "timestamp",
    "correct",
    "high_confidence",
    "feedback_seek",
)


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of distinct event symbols."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if not self.symbols:
            raise ValueError("alphabet must contain at least one symbol")
        if any(not s for s in self.symbols):
            raise ValueError("alphabet symbols must be non-empty strings")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        return self.symbols.index(symbol)

    def __len__(self) -> int:
        return len(self.symbols)


def canonical_alphabet() -> Alphabet:
    return Alphabet(CANONICAL_SYMBOLS)


@dataclass(frozen=True)
class Trace:
    """One session's ordered symbol sequence (symbol indices into an alphabet)."""

    student_id: str
    trace_id: str
    events: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(int(e) for e in self.events))
        if len(self.events) < 1:
            raise ValueError(f"trace {self.trace_id!r} has no events")
        if any(e < 0 for e in self.events):
            raise ValueError(f"trace {self.trace_id!r} has negative event index")

    @property
    def length(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class Dataset:
    alphabet: Alphabet
    traces: tuple[Trace, ...]

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        m = self.alphabet.size
        ids = set()
        for t in self.traces:
            if t.trace_id in ids:
                raise ValueError(f"duplicate trace_id {t.trace_id!r}")
            ids.add(t.trace_id)
            if any(e >= m for e in t.events):
                raise ValueError(f"trace {t.trace_id!r} has event index >= alphabet size")

    @property
    def n_traces(self) -> int:
        return len(self.traces)

    @property
    def students(self) -> list[str]:
        """Distinct student ids in first-appearance order."""
        seen = []
        known = set()
        for t in self.traces:
            if t.student_id not in known:
                known.add(t.student_id)
                seen.append(t.student_id)
        return seen


@dataclass(frozen=True)
class RawAction:
    """One logged problem-solving action.

    ``feedback_seconds`` is optional: when present and a minimum
    feedback-reading-time threshold is configured, too-short feedback
    visits are not counted as feedback-seeking.
    """

    student_id: str
    session_id: str
    timestamp: str
    correct: bool
    high_confidence: bool
    feedback_seek: bool
    feedback_seconds: float | None = field(default=None)


def map_action(a: RawAction, min_feedback_seconds: float = 0.0) -> int:
    """Map one action to a symbol index of the canonical six-symbol alphabet.

    Correct responses collapse the feedback dimension: correct+high
    confidence is HK, correct+low confidence is LK regardless of
    feedback-seeking.  Incorrect responses split on confidence and
    feedback-seeking: FG/KG for high confidence with/without seeking,
    LE/NI for low confidence with/without seeking.
    """
    seek = a.feedback_seek
    if seek and min_feedback_seconds > 0 and a.feedback_seconds is not None:
        seek = a.feedback_seconds >= min_feedback_seconds
    if a.correct:
        return 0 if a.high_confidence else 1  # HK / LK
    if a.high_confidence:
        return 2 if seek else 4  # FG / KG
    return 3 if seek else 5  # LE / NI


def _parse_timestamp(raw: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(raw)
    except ValueError as exc:
        raise IngestionError(f"malformed timestamp {raw!r} in {where}") from exc


def build_traces(
    actions: list[RawAction],
    min_feedback_seconds: float = 0.0,
) -> tuple[Dataset, int]:
    """Group actions into per-(student, session) traces.

    Actions are grouped by (student_id, session_id), ordered by timestamp
    (ties keep input order), mapped through :func:`map_action`, and traces
    shorter than 2 events are dropped.  Returns the dataset and the number
    of dropped traces.
    """
    groups: dict[tuple[str, str], list[tuple[datetime, int, RawAction]]] = {}
    for pos, a in enumerate(actions):
        ts = _parse_timestamp(
            a.timestamp, f"record {pos} (student {a.student_id!r}, session {a.session_id!r})"
        )
        groups.setdefault((a.student_id, a.session_id), []).append((ts, pos, a))

    traces = []
    dropped = 0
    for (student, session), recs in groups.items():
        recs.sort(key=lambda r: (r[0], r[1]))  # stable: input order breaks ties
        events = [map_action(a, min_feedback_seconds) for _, _, a in recs]
        if len(events) < 2:
            dropped += 1
            continue
        traces.append(Trace(student, f"{student}/{session}", tuple(events)))
    return Dataset(canonical_alphabet(), tuple(traces)), dropped


def proportional_counts(trace: Trace, m: int) -> np.ndarray:
    """Per-symbol proportional counts of a trace (feature vector of length m)."""
    counts = np.bincount(np.asarray(trace.events), minlength=m).astype(float)
    return counts / trace.length


def dataset_features(data: Dataset) -> np.ndarray:
    """Stack proportional-count feature vectors for all traces (n x m)."""
    m = data.alphabet.size
    return np.array([proportional_counts(t, m) for t in data.traces])


# --- file formats ---------------------------------------------------------


def read_raw_log(path) -> list[RawAction]:
    """Read a delimited raw log with the documented header.

    Booleans are encoded as 0/1, timestamps as ISO-8601.  An optional
    trailing ``feedback_seconds`` column is accepted.
    """
    actions = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in RAW_LOG_FIELDS if f not in (reader.fieldnames or [])]
        if missing:
            raise IngestionError(f"raw log {path} is missing columns: {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                actions.append(
                    RawAction(
                        student_id=row["student_id"],
                        session_id=row["session_id"],
                        timestamp=row["timestamp"],
                        correct=_parse_bool(row["correct"]),
                        high_confidence=_parse_bool(row["high_confidence"]),
                        feedback_seek=_parse_bool(row["feedback_seek"]),
                        feedback_seconds=float(row["feedback_seconds"])
                        if row.get("feedback_seconds") not in (None, "")
                        else None,
                    )
                )
            except (KeyError, ValueError) as exc:
                raise IngestionError(f"{path}:{lineno}: bad record ({exc})") from exc
    return actions


def _parse_bool(raw: str) -> bool:
    if raw == "0":
        return False
    if raw == "1":
        return True
    raise ValueError(f"expected boolean 0/1, got {raw!r}")


def write_traces_jsonl(data: Dataset, path) -> None:
    """Write one JSON object per line: student, trace id and symbol names."""
    symbols = data.alphabet.symbols
    with open(path, "w") as fh:
        for t in data.traces:
            rec = {
                "student": t.student_id,
                "trace": t.trace_id,
                "events": [symbols[e] for e in t.events],
            }
            fh.write(json.dumps(rec) + "\n")


def read_traces_jsonl(path, alphabet: Alphabet | None = None) -> Dataset:
    """Read a JSON-lines trace file.

    Without an explicit alphabet the canonical one is used when every
    symbol belongs to it; otherwise symbols are taken in first-appearance
    order.
    """
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                rows.append((rec["student"], rec["trace"], list(rec["events"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise IngestionError(f"{path}:{lineno}: bad trace record ({exc})") from exc

    if alphabet is None:
        seen: list[str] = []
        known = set()
        for _, _, events in rows:
            for s in events:
                if s not in known:
                    known.add(s)
                    seen.append(s)
        if known <= set(CANONICAL_SYMBOLS):
            alphabet = canonical_alphabet()
        else:
            alphabet = Alphabet(tuple(seen))

    traces = []
    for student, trace_id, events in rows:
        try:
            idx = tuple(alphabet.index(s) for s in events)
        except ValueError as exc:
            raise IngestionError(f"trace {trace_id!r} uses a symbol outside the alphabet") from exc
        traces.append(Trace(student, trace_id, idx))
    return Dataset(alphabet, tuple(traces))
