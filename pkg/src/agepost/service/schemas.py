"""Pydantic request/response models for the annotation HTTP API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..annotate import Gender, QueryItem, ReferenceItem
from ..catalog import event_to_dict, record_to_dict
from ..posterior import confidence_interval, mode
from .store import TaskState


class QueryIn(BaseModel):
    id: str
    image_uri: str = ""
    gender: Literal["male", "female", "unknown"] = "unknown"
    rough_age_hint: int | None = None

    def to_item(self) -> QueryItem:
        return QueryItem(
            id=self.id,
            image_uri=self.image_uri,
            gender=Gender(self.gender),
            rough_age_hint=self.rough_age_hint,
        )


class ReferenceOut(BaseModel):
    id: str
    image_uri: str
    age: int
    gender: str

    @classmethod
    def from_item(cls, r: ReferenceItem) -> "ReferenceOut":
        return cls(id=r.id, image_uri=r.image_uri, age=r.age, gender=r.gender.value)


class PosteriorOut(BaseModel):
    min_age: int
    max_age: int
    mass: list[float]


class EventOut(BaseModel):
    ref_id: str
    ref_age: int
    outcome: str
    annotator_id: str
    timestamp: float


class TaskOut(BaseModel):
    task_id: str
    status: str
    query: QueryIn
    posterior: PosteriorOut
    mode: int
    ci90: list[int]
    remaining: int
    current_ref: ReferenceOut | None
    events: list[EventOut]
    created_at: float
    updated_at: float

    @classmethod
    def from_state(cls, task: TaskState) -> "TaskOut":
        assert task.posterior is not None
        ci = confidence_interval(task.posterior, 0.90)
        return cls(
            task_id=task.task_id,
            status=task.status,
            query=QueryIn(
                id=task.query.id,
                image_uri=task.query.image_uri,
                gender=task.query.gender.value,
                rough_age_hint=task.query.rough_age_hint,
            ),
            posterior=PosteriorOut(**task.posterior.to_dict()),
            mode=mode(task.posterior),
            ci90=[ci[0], ci[1]],
            remaining=task.remaining,
            current_ref=(
                None
                if task.current_ref() is None or task.status != "open"
                else ReferenceOut.from_item(task.current_ref())
            ),
            events=[EventOut(**event_to_dict(e)) for e in task.events],
            created_at=task.created_at,
            updated_at=task.updated_at,
        )


class TaskSummaryOut(BaseModel):
    task_id: str
    query_id: str
    status: str
    remaining: int
    created_at: float

    @classmethod
    def from_state(cls, task: TaskState) -> "TaskSummaryOut":
        return cls(
            task_id=task.task_id,
            query_id=task.query.id,
            status=task.status,
            remaining=task.remaining,
            created_at=task.created_at,
        )


class TaskListOut(BaseModel):
    tasks: list[TaskSummaryOut]


class ComparisonIn(BaseModel):
    ref_id: str
    outcome: Literal["older", "younger"]
    annotator_id: str = ""


class ComparisonOut(BaseModel):
    posterior: PosteriorOut
    mode: int
    ci90: list[int]
    remaining: int

    @classmethod
    def from_state(cls, task: TaskState) -> "ComparisonOut":
        assert task.posterior is not None
        ci = confidence_interval(task.posterior, 0.90)
        return cls(
            posterior=PosteriorOut(**task.posterior.to_dict()),
            mode=mode(task.posterior),
            ci90=[ci[0], ci[1]],
            remaining=task.remaining,
        )


class FinalizeIn(BaseModel):
    force: bool = False


class RecordOut(BaseModel):
    query_id: str
    posterior: PosteriorOut
    mode: int
    ci90: list[int]
    events: list[EventOut]
    status: str

    @classmethod
    def from_state(cls, task: TaskState) -> "RecordOut":
        assert task.record is not None
        return cls(**record_to_dict(task.record))


class HealthOut(BaseModel):
    status: str = "ok"
    tasks: int = 0
    seq: int = 0


class ErrorOut(BaseModel):
    error: str = Field(description="stable machine-readable code")
    detail: str = ""
