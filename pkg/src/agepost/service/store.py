"""Event-sourced task store for annotation sessions.

Every mutation is validated, appended to the write-ahead log, and only then
applied in memory via ``_apply`` — the same transition replay uses, so a
recovered store matches the live one field for field. Posteriors are always
recomputed from the logged events through the core engine.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Sequence

from ..annotate import (
    AnnotationRecord,
    QueryItem,
    ReferenceItem,
    SelectionPolicy,
    finalize_annotation,
    rough_age_estimate,
    select_references,
)
from ..catalog import (
    event_from_dict,
    event_to_dict,
    record_from_dict,
    record_to_dict,
)
from ..grid import AgeDistribution, AgeGrid
from ..posterior import (
    ComparisonEvent,
    LogisticModel,
    Outcome,
    posterior_from_events,
)
from .config import ServiceConfig
from .eventlog import EventLog, scan_log

STATUS_OPEN = "open"
STATUS_FINALIZED = "finalized"
STATUS_DISCARDED = "discarded"

KIND_TASK_CREATED = "task_created"
KIND_COMPARISON_SUBMITTED = "comparison_submitted"
KIND_TASK_FINALIZED = "task_finalized"
KIND_TASK_DISCARDED = "task_discarded"


class UnknownTask(KeyError):
    pass


class DuplicateQuery(ValueError):
    pass


class TaskClosed(ValueError):
    pass


class OutOfOrderReference(ValueError):
    pass


class UnknownReference(ValueError):
    pass


class TaskNotExhausted(ValueError):
    pass


class Exhausted(Exception):
    """No pending references remain (not an error; a flow signal)."""


@dataclass
class TaskState:
    task_id: str
    query: QueryItem
    refs: list[ReferenceItem]
    cursor: int = 0
    events: list[ComparisonEvent] = field(default_factory=list)
    status: str = STATUS_OPEN
    record: AnnotationRecord | None = None
    posterior: AgeDistribution | None = None
    created_at: float = 0.0
    updated_at: float = 0.0

    @property
    def remaining(self) -> int:
        return len(self.refs) - self.cursor

    def current_ref(self) -> ReferenceItem | None:
        if self.cursor < len(self.refs):
            return self.refs[self.cursor]
        return None


def _ref_to_dict(r: ReferenceItem) -> dict[str, Any]:
    return {"id": r.id, "image_uri": r.image_uri, "age": r.age, "gender": r.gender.value}


def _ref_from_dict(d: dict[str, Any]) -> ReferenceItem:
    from ..annotate import Gender

    return ReferenceItem(
        id=str(d["id"]),
        image_uri=str(d.get("image_uri", "")),
        age=int(d["age"]),
        gender=Gender(d.get("gender", "unknown")),
    )


def _query_to_dict(q: QueryItem) -> dict[str, Any]:
    return {
        "id": q.id,
        "image_uri": q.image_uri,
        "gender": q.gender.value,
        "rough_age_hint": q.rough_age_hint,
    }


def _query_from_dict(d: dict[str, Any]) -> QueryItem:
    from ..annotate import Gender

    hint = d.get("rough_age_hint")
    return QueryItem(
        id=str(d["id"]),
        image_uri=str(d.get("image_uri", "")),
        gender=Gender(d.get("gender", "unknown")),
        rough_age_hint=None if hint is None else int(hint),
    )


def _stable_id_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2s(text.encode(), digest_size=8).digest(), "big")


class TaskStore:
    """All open/closed annotation tasks plus the reference pool."""

    def __init__(
        self,
        *,
        grid: AgeGrid,
        model: LogisticModel,
        policy: SelectionPolicy,
        pool: Sequence[ReferenceItem],
        log: EventLog,
        snapshot_path: Path | None = None,
        snapshot_every: int = 1000,
        selection_fallback: bool = False,
        bracket_window: int = 0,
    ):
        self._grid = grid
        self._model = model
        self._policy = policy
        self._pool = list(pool)
        self._log = log
        self._snapshot_path = snapshot_path
        self._snapshot_every = snapshot_every
        self._selection_fallback = selection_fallback
        self._bracket_window = bracket_window
        self._prior = AgeDistribution.uniform(grid)
        self._lock = threading.RLock()
        self._tasks: dict[str, TaskState] = {}
        self._order: list[str] = []
        self._query_ids: set[str] = set()
        self._task_counter = 0
        self._applied_seq = 0

    @property
    def grid(self) -> AgeGrid:
        return self._grid

    @property
    def model(self) -> LogisticModel:
        return self._model

    @property
    def prior(self) -> AgeDistribution:
        return self._prior

    @property
    def applied_seq(self) -> int:
        return self._applied_seq

    def task_count(self) -> int:
        with self._lock:
            return len(self._tasks)

    # ----- live mutations (validate, log, apply) -----

    def create_task(self, query: QueryItem) -> TaskState:
        with self._lock:
            if query.id in self._query_ids:
                raise DuplicateQuery(f"query {query.id!r} already has a task")
            rough = rough_age_estimate(query, self._grid)
            task_policy = replace(
                self._policy,
                rng_seed=(self._policy.rng_seed ^ _stable_id_hash(query.id)) & (2**63 - 1),
            )
            pool = self._pool
            if self._bracket_window > 0:
                windowed = [
                    r for r in pool if abs(r.age - rough) <= self._bracket_window
                ]
                if windowed:
                    pool = windowed
            refs = select_references(
                query, pool, task_policy, rough, fallback=self._selection_fallback
            )
            self._task_counter += 1
            payload = {
                "task_id": f"task-{self._task_counter:08d}",
                "query": _query_to_dict(query),
                "refs": [_ref_to_dict(r) for r in refs],
                "created_at": time.time(),
            }
            return self._commit(KIND_TASK_CREATED, payload)

    def submit_comparison(
        self, task_id: str, ref_id: str, outcome: Outcome, annotator_id: str
    ) -> TaskState:
        with self._lock:
            task = self._get_open(task_id)
            current = task.current_ref()
            if current is None:
                raise OutOfOrderReference(f"task {task_id} has no pending references")
            if ref_id != current.id:
                known = any(r.id == ref_id for r in task.refs)
                if not known:
                    raise UnknownReference(f"reference {ref_id!r} not in task {task_id}")
                raise OutOfOrderReference(
                    f"expected reference {current.id!r}, got {ref_id!r}"
                )
            payload = {
                "task_id": task_id,
                "ref_id": ref_id,
                "ref_age": current.age,
                "outcome": outcome.value,
                "annotator_id": annotator_id,
                "timestamp": time.time(),
            }
            return self._commit(KIND_COMPARISON_SUBMITTED, payload)

    def finalize_task(self, task_id: str, force: bool = False) -> TaskState:
        with self._lock:
            task = self._get_open(task_id)
            if task.remaining > 0 and not force:
                raise TaskNotExhausted(
                    f"task {task_id} still has {task.remaining} pending references"
                )
            record = finalize_annotation(
                task.query.id, task.events, self._model, self._prior
            )
            kind = KIND_TASK_DISCARDED if record.discarded else KIND_TASK_FINALIZED
            payload = {
                "task_id": task_id,
                "record": record_to_dict(record),
                "updated_at": time.time(),
            }
            return self._commit(kind, payload)

    def _commit(self, kind: str, payload: dict[str, Any]) -> TaskState:
        seq = self._log.append(kind, payload)
        self._apply(seq, kind, payload)
        self._maybe_snapshot(seq)
        return self._tasks[payload["task_id"]]

    # ----- reads -----

    def _get(self, task_id: str) -> TaskState:
        task = self._tasks.get(task_id)
        if task is None:
            raise UnknownTask(f"unknown task {task_id!r}")
        return task

    def _get_open(self, task_id: str) -> TaskState:
        task = self._get(task_id)
        if task.status != STATUS_OPEN:
            raise TaskClosed(f"task {task_id} is {task.status}")
        return task

    def get_task(self, task_id: str) -> TaskState:
        with self._lock:
            return self._get(task_id)

    def next_reference(self, task_id: str) -> ReferenceItem:
        with self._lock:
            task = self._get_open(task_id)
            current = task.current_ref()
            if current is None:
                raise Exhausted(task_id)
            return current

    def list_tasks(self, status: str | None = None) -> list[TaskState]:
        with self._lock:
            tasks = [self._tasks[tid] for tid in self._order]
            if status is not None:
                tasks = [t for t in tasks if t.status == status]
            return tasks

    def export_records(self, include_discarded: bool = False) -> Iterator[dict[str, Any]]:
        with self._lock:
            ordered = [self._tasks[tid] for tid in self._order]
        for task in ordered:
            if task.record is None:
                continue
            if task.status == STATUS_DISCARDED and not include_discarded:
                continue
            yield record_to_dict(task.record)

    # ----- state transitions (shared by live path and replay) -----

    def _apply(self, seq: int, kind: str, payload: dict[str, Any]) -> None:
        if kind == KIND_TASK_CREATED:
            task = TaskState(
                task_id=payload["task_id"],
                query=_query_from_dict(payload["query"]),
                refs=[_ref_from_dict(r) for r in payload["refs"]],
                posterior=self._prior,
                created_at=float(payload["created_at"]),
                updated_at=float(payload["created_at"]),
            )
            self._tasks[task.task_id] = task
            self._order.append(task.task_id)
            self._query_ids.add(task.query.id)
            num = int(task.task_id.rsplit("-", 1)[-1])
            self._task_counter = max(self._task_counter, num)
        elif kind == KIND_COMPARISON_SUBMITTED:
            task = self._tasks[payload["task_id"]]
            task.events.append(
                ComparisonEvent(
                    ref_age=int(payload["ref_age"]),
                    outcome=Outcome(payload["outcome"]),
                    annotator_id=str(payload["annotator_id"]),
                    timestamp=float(payload["timestamp"]),
                    ref_id=str(payload["ref_id"]),
                )
            )
            task.cursor += 1
            task.posterior = posterior_from_events(self._model, self._prior, task.events)
            task.updated_at = float(payload["timestamp"])
        elif kind in (KIND_TASK_FINALIZED, KIND_TASK_DISCARDED):
            task = self._tasks[payload["task_id"]]
            task.record = record_from_dict(payload["record"])
            task.status = (
                STATUS_DISCARDED if kind == KIND_TASK_DISCARDED else STATUS_FINALIZED
            )
            task.updated_at = float(payload["updated_at"])
        else:
            raise ValueError(f"unknown log entry kind {kind!r}")
        self._applied_seq = seq

    # ----- snapshots and recovery -----

    def state_fingerprint(self) -> dict[str, Any]:
        """Full observable state, for replay-equality checks."""
        with self._lock:
            return {
                "seq": self._applied_seq,
                "tasks": [self._task_state_dict(self._tasks[tid]) for tid in self._order],
            }

    def _task_state_dict(self, task: TaskState) -> dict[str, Any]:
        return {
            "task_id": task.task_id,
            "query": _query_to_dict(task.query),
            "refs": [_ref_to_dict(r) for r in task.refs],
            "cursor": task.cursor,
            "events": [event_to_dict(e) for e in task.events],
            "status": task.status,
            "record": None if task.record is None else record_to_dict(task.record),
            "posterior": None if task.posterior is None else task.posterior.to_dict(),
            "created_at": task.created_at,
            "updated_at": task.updated_at,
        }

    def _maybe_snapshot(self, seq: int) -> None:
        if self._snapshot_path is None or self._snapshot_every <= 0:
            return
        if seq % self._snapshot_every != 0:
            return
        self.write_snapshot()

    def write_snapshot(self) -> None:
        if self._snapshot_path is None:
            return
        with self._lock:
            state = {
                "seq": self._applied_seq,
                "task_counter": self._task_counter,
                "tasks": [self._task_state_dict(self._tasks[tid]) for tid in self._order],
            }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(state), encoding="utf-8")
        tmp.replace(self._snapshot_path)

    def _load_snapshot_state(self, state: dict[str, Any]) -> None:
        self._tasks.clear()
        self._order.clear()
        self._query_ids.clear()
        for td in state["tasks"]:
            task = TaskState(
                task_id=str(td["task_id"]),
                query=_query_from_dict(td["query"]),
                refs=[_ref_from_dict(r) for r in td["refs"]],
                cursor=int(td["cursor"]),
                events=[event_from_dict(e) for e in td["events"]],
                status=str(td["status"]),
                record=None if td["record"] is None else record_from_dict(td["record"]),
                created_at=float(td["created_at"]),
                updated_at=float(td["updated_at"]),
            )
            # Same code path as live updates, so recovered posteriors match.
            task.posterior = (
                posterior_from_events(self._model, self._prior, task.events)
                if task.events
                else self._prior
            )
            self._tasks[task.task_id] = task
            self._order.append(task.task_id)
            self._query_ids.add(task.query.id)
        self._task_counter = int(state["task_counter"])
        self._applied_seq = int(state["seq"])

    @classmethod
    def open(
        cls,
        config: ServiceConfig,
        pool: Sequence[ReferenceItem],
        *,
        use_snapshot: bool = True,
    ) -> "TaskStore":
        """Recover state from the snapshot (if any) plus the log tail."""
        Path(config.data_dir).mkdir(parents=True, exist_ok=True)
        log = EventLog(config.log_path, fsync=config.fsync)
        store = cls(
            grid=config.grid,
            model=config.model,
            policy=config.policy,
            pool=pool,
            log=log,
            snapshot_path=config.snapshot_path,
            snapshot_every=config.snapshot_every,
            selection_fallback=config.selection_fallback,
            bracket_window=config.bracket_window,
        )
        if use_snapshot and config.snapshot_path.exists():
            state = json.loads(config.snapshot_path.read_text(encoding="utf-8"))
            store._load_snapshot_state(state)
        for entry in log.entries(after_seq=store._applied_seq):
            store._apply(entry.seq, entry.kind, entry.payload)
        return store

    @classmethod
    def replay(
        cls,
        log_path: str | Path,
        *,
        grid: AgeGrid,
        model: LogisticModel,
        policy: SelectionPolicy | None = None,
    ) -> "TaskStore":
        """Rebuild state purely from a log file, without touching it."""
        store = cls(
            grid=grid,
            model=model,
            policy=policy or SelectionPolicy(),
            pool=[],
            log=_NullLog(),
            snapshot_path=None,
        )
        for entry in scan_log(log_path):
            store._apply(entry.seq, entry.kind, entry.payload)
        return store

    def close(self) -> None:
        self._log.close()


class _NullLog:
    """Log stand-in for pure replay; nothing may be appended."""

    def append(self, kind: str, payload: dict[str, Any]) -> int:
        raise RuntimeError("replay store is read-only")

    def close(self) -> None:
        pass
