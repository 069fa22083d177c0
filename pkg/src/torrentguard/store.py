"""Append-only event log and fold-state snapshots.

One JSON event per line, versioned, fsynced before append returns. Replay is
strict: the first unparseable line stops it with the line number and byte
offset, after every prior event has been applied. A snapshot plus the suffix
of the log behind it rebuilds the same state as a full replay.
"""

from __future__ import annotations

import json
import os
from typing import Iterator

from .detection import DetectionEngine
from .events import DetectionEvent, event_from_json, event_to_json


class SequenceViolation(ValueError):
    """Appended event's sequence number does not exceed the log's last."""


class CorruptRecord(ValueError):
    """A log line failed to parse; carries where."""

    def __init__(self, path: str, line_no: int, offset: int, problem: str):
        super().__init__(f"{path}:{line_no} (byte offset {offset}): {problem}")
        self.path = path
        self.line_no = line_no
        self.offset = offset
        self.problem = problem


class EventLog:
    """Writer handle; opening scans the existing file to learn the last seq."""

    def __init__(self, path: str):
        self.path = path
        self.last_seq = 0
        for event in iter_events(path):
            self.last_seq = event.seq
        self._f = open(path, "ab")

    def append(self, event: DetectionEvent) -> None:
        if event.seq <= self.last_seq:
            raise SequenceViolation(
                f"event seq {event.seq} does not exceed logged {self.last_seq}"
            )
        self._f.write(event_to_json(event).encode() + b"\n")
        self._f.flush()
        os.fsync(self._f.fileno())
        self.last_seq = event.seq

    def close(self) -> None:
        self._f.close()

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def iter_events(path: str) -> Iterator[DetectionEvent]:
    """Yield events in file order; raise CorruptRecord at the first bad line.

    A final line without its newline is a torn write and counts as corrupt.
    """
    if not os.path.exists(path):
        return
    offset = 0
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.endswith(b"\n"):
                raise CorruptRecord(path, line_no, offset, "truncated final line")
            try:
                yield event_from_json(raw.decode("utf-8"))
            except (ValueError, UnicodeDecodeError) as exc:
                raise CorruptRecord(path, line_no, offset, str(exc)) from None
            offset += len(raw)


def replay(path: str, engine: DetectionEngine | None = None, k: int = 3) -> DetectionEngine:
    """Fold the log into an engine.

    With an engine given (typically snapshot-loaded), events at or below its
    last sequence number are skipped, so the call resumes from the suffix.
    """
    if engine is None:
        engine = DetectionEngine(k=k)
    for event in iter_events(path):
        if event.seq <= engine.last_seq:
            continue
        engine.ingest_event(event)
    return engine


def write_snapshot(path: str, engine: DetectionEngine) -> None:
    """Atomically persist the fold state next to the log."""
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(engine.state_dict(), f, separators=(",", ":"))
        f.write("\n")
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def read_snapshot(path: str) -> DetectionEngine:
    with open(path) as f:
        return DetectionEngine.from_state(json.load(f))
