"""FastAPI application exposing annotation tasks over HTTP+JSON."""

from __future__ import annotations

import json
from contextlib import asynccontextmanager
from typing import Iterator

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from ..annotate import InsufficientPool, NoEvidence
from ..catalog import load_references
from ..posterior import DegenerateEvidence, Outcome
from .config import ServiceConfig
from .schemas import (
    ComparisonIn,
    ComparisonOut,
    FinalizeIn,
    HealthOut,
    QueryIn,
    RecordOut,
    ReferenceOut,
    TaskListOut,
    TaskOut,
    TaskSummaryOut,
)
from .store import (
    DuplicateQuery,
    Exhausted,
    OutOfOrderReference,
    TaskClosed,
    TaskNotExhausted,
    TaskStore,
    UnknownReference,
    UnknownTask,
)

ERROR_MAP: dict[type[Exception], tuple[int, str]] = {
    DuplicateQuery: (409, "duplicate_query"),
    InsufficientPool: (422, "insufficient_pool"),
    UnknownTask: (404, "unknown_task"),
    TaskClosed: (409, "task_closed"),
    OutOfOrderReference: (409, "out_of_order_reference"),
    UnknownReference: (400, "unknown_reference"),
    TaskNotExhausted: (409, "task_not_exhausted"),
    NoEvidence: (400, "no_evidence"),
    DegenerateEvidence: (500, "degenerate_evidence"),
}


def create_app(config: ServiceConfig | None = None, store: TaskStore | None = None) -> FastAPI:
    config = config or ServiceConfig.from_env()
    if store is None:
        pool = load_references(config.refs_path, config.grid) if config.refs_path else []
        store = TaskStore.open(config, pool)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        store.close()

    app = FastAPI(title="agepost annotation service", lifespan=lifespan)
    app.state.store = store
    app.state.config = config

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def error_handler(code: str, status: int):
        async def handler(request: Request, exc: Exception) -> JSONResponse:
            # KeyError reprs wrap the message in quotes; unwrap for the client
            detail = exc.args[0] if exc.args else str(exc)
            return JSONResponse(
                status_code=status, content={"error": code, "detail": str(detail)}
            )

        return handler

    for exc_type, (status, code) in ERROR_MAP.items():
        app.add_exception_handler(exc_type, error_handler(code, status))

    @app.get("/healthz", response_model=HealthOut)
    def healthz() -> HealthOut:
        return HealthOut(status="ok", tasks=store.task_count(), seq=store.applied_seq)

    @app.post("/tasks", response_model=TaskOut, status_code=201)
    def create_task(query: QueryIn) -> TaskOut:
        task = store.create_task(query.to_item())
        return TaskOut.from_state(task)

    @app.get("/tasks", response_model=TaskListOut)
    def list_tasks(status: str | None = None) -> TaskListOut:
        tasks = store.list_tasks(status=status)
        return TaskListOut(tasks=[TaskSummaryOut.from_state(t) for t in tasks])

    @app.get("/tasks/{task_id}", response_model=TaskOut)
    def get_task(task_id: str) -> TaskOut:
        return TaskOut.from_state(store.get_task(task_id))

    @app.get("/tasks/{task_id}/next")
    def next_reference(task_id: str):
        try:
            ref = store.next_reference(task_id)
        except Exhausted:
            return JSONResponse(status_code=200, content={"exhausted": True, "reference": None})
        return {"exhausted": False, "reference": ReferenceOut.from_item(ref).model_dump()}

    @app.post("/tasks/{task_id}/comparisons", response_model=ComparisonOut)
    def submit_comparison(task_id: str, body: ComparisonIn) -> ComparisonOut:
        task = store.submit_comparison(
            task_id, body.ref_id, Outcome(body.outcome), body.annotator_id
        )
        return ComparisonOut.from_state(task)

    @app.post("/tasks/{task_id}/finalize", response_model=RecordOut)
    def finalize(task_id: str, body: FinalizeIn | None = None) -> RecordOut:
        force = bool(body.force) if body is not None else False
        task = store.finalize_task(task_id, force=force)
        return RecordOut.from_state(task)

    @app.get("/export")
    def export(include_discarded: bool = False) -> StreamingResponse:
        def lines() -> Iterator[str]:
            for record in store.export_records(include_discarded=include_discarded):
                yield json.dumps(record) + "\n"

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    return app
