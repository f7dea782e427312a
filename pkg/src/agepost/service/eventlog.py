"""Append-only JSON-lines event log with write-ahead semantics.

Entries carry a strictly increasing ``seq``. Appends are flushed (and by
default fsynced) before returning, so a response built after ``append`` is
guaranteed to be backed by durable state. A torn final line left by a crash
is ignored on scan; corruption anywhere else fails recovery loudly.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator


class CorruptLog(ValueError):
    """The log violates the append-only contract (bad JSON or seq order)."""


@dataclass(frozen=True)
class LogEntry:
    seq: int
    kind: str
    payload: dict[str, Any]


def scan_log(path: str | Path) -> Iterator[LogEntry]:
    """Yield entries in order, validating seq continuity; tolerate a torn tail."""
    path = Path(path)
    if not path.exists():
        return
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    expected = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            obj = json.loads(stripped)
            entry = LogEntry(seq=int(obj["seq"]), kind=str(obj["kind"]), payload=obj["payload"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if i == len(lines) - 1:
                return  # torn tail from a crash mid-append
            raise CorruptLog(f"{path}: line {i + 1} unreadable: {exc}") from None
        if expected is not None and entry.seq != expected:
            raise CorruptLog(
                f"{path}: line {i + 1} has seq {entry.seq}, expected {expected}"
            )
        expected = entry.seq + 1
        yield entry


class EventLog:
    """Single-owner appender over one JSON-lines file."""

    def __init__(self, path: str | Path, *, fsync: bool = True):
        self._path = Path(path)
        self._fsync = fsync
        self._lock = threading.Lock()
        self._last_seq = 0
        for entry in scan_log(self._path):
            self._last_seq = entry.seq
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self._path, "a", encoding="utf-8")

    @property
    def path(self) -> Path:
        return self._path

    @property
    def last_seq(self) -> int:
        return self._last_seq

    def append(self, kind: str, payload: dict[str, Any]) -> int:
        with self._lock:
            seq = self._last_seq + 1
            line = json.dumps({"seq": seq, "kind": kind, "payload": payload})
            self._fh.write(line + "\n")
            self._fh.flush()
            if self._fsync:
                os.fsync(self._fh.fileno())
            self._last_seq = seq
            return seq

    def entries(self, after_seq: int = 0) -> Iterator[LogEntry]:
        for entry in scan_log(self._path):
            if entry.seq > after_seq:
                yield entry

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()
