"""JSON-lines ingestion and export: reference pools, query catalogs, and
annotation records."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence, TextIO

from .annotate import AnnotationRecord, Gender, QueryItem, ReferenceItem
from .grid import AgeDistribution, AgeGrid
from .posterior import ComparisonEvent, Outcome


class CatalogError(ValueError):
    """A catalog line failed to parse or validate."""


def _parse_gender(raw: Any) -> Gender:
    if raw is None:
        return Gender.UNKNOWN
    try:
        return Gender(str(raw).lower())
    except ValueError:
        raise CatalogError(f"unknown gender {raw!r}") from None


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CatalogError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            if not isinstance(obj, dict):
                raise CatalogError(f"{path}:{lineno}: expected an object")
            yield lineno, obj


def load_references(path: str | Path, grid: AgeGrid) -> list[ReferenceItem]:
    refs = []
    for lineno, obj in _iter_jsonl(path):
        try:
            age = int(obj["age"])
            item = ReferenceItem(
                id=str(obj["id"]),
                image_uri=str(obj.get("image_uri", "")),
                age=age,
                gender=_parse_gender(obj.get("gender")),
            )
        except KeyError as exc:
            raise CatalogError(f"{path}:{lineno}: missing field {exc}") from None
        if not grid.contains(item.age):
            raise CatalogError(
                f"{path}:{lineno}: reference age {item.age} outside grid "
                f"[{grid.min_age}, {grid.max_age}]"
            )
        refs.append(item)
    return refs


def _query_from_dict(obj: dict[str, Any]) -> QueryItem:
    hint = obj.get("rough_age_hint")
    return QueryItem(
        id=str(obj["id"]),
        image_uri=str(obj.get("image_uri", "")),
        gender=_parse_gender(obj.get("gender")),
        rough_age_hint=None if hint is None else int(hint),
    )


def load_queries(path: str | Path) -> list[QueryItem]:
    out = []
    for lineno, obj in _iter_jsonl(path):
        try:
            out.append(_query_from_dict(obj))
        except KeyError as exc:
            raise CatalogError(f"{path}:{lineno}: missing field {exc}") from None
    return out


def load_queries_with_truth(path: str | Path) -> list[tuple[QueryItem, int | None]]:
    """Queries plus the optional ``true_age`` field used by simulated labelling."""
    out = []
    for lineno, obj in _iter_jsonl(path):
        try:
            query = _query_from_dict(obj)
        except KeyError as exc:
            raise CatalogError(f"{path}:{lineno}: missing field {exc}") from None
        truth = obj.get("true_age")
        out.append((query, None if truth is None else int(truth)))
    return out


def event_to_dict(event: ComparisonEvent) -> dict[str, Any]:
    return {
        "ref_id": event.ref_id,
        "ref_age": event.ref_age,
        "outcome": event.outcome.value,
        "annotator_id": event.annotator_id,
        "timestamp": event.timestamp,
    }


def event_from_dict(obj: dict[str, Any]) -> ComparisonEvent:
    return ComparisonEvent(
        ref_age=int(obj["ref_age"]),
        outcome=Outcome(obj["outcome"]),
        annotator_id=str(obj.get("annotator_id", "")),
        timestamp=float(obj.get("timestamp", 0.0)),
        ref_id=str(obj.get("ref_id", "")),
    )


def record_to_dict(record: AnnotationRecord) -> dict[str, Any]:
    return {
        "query_id": record.query_id,
        "posterior": record.posterior.to_dict(),
        "mode": record.mode_age,
        "ci90": [record.ci90[0], record.ci90[1]],
        "events": [event_to_dict(e) for e in record.events],
        "status": record.status,
    }


def record_from_dict(obj: dict[str, Any]) -> AnnotationRecord:
    ci = obj["ci90"]
    return AnnotationRecord(
        query_id=str(obj["query_id"]),
        posterior=AgeDistribution.from_dict(obj["posterior"]),
        mode_age=int(obj["mode"]),
        ci90=(int(ci[0]), int(ci[1])),
        events=tuple(event_from_dict(e) for e in obj["events"]),
        status=str(obj["status"]),
    )


def write_records(out: TextIO, records: Iterable[AnnotationRecord]) -> int:
    n = 0
    for record in records:
        out.write(json.dumps(record_to_dict(record)) + "\n")
        n += 1
    return n


def write_records_file(path: str | Path, records: Iterable[AnnotationRecord]) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        return write_records(fh, records)


def read_records(path: str | Path) -> list[AnnotationRecord]:
    return [record_from_dict(obj) for _, obj in _iter_jsonl(path)]


def write_reference_pool(path: str | Path, refs: Sequence[ReferenceItem]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in refs:
            fh.write(
                json.dumps(
                    {"id": r.id, "image_uri": r.image_uri, "age": r.age, "gender": r.gender.value}
                )
                + "\n"
            )


def write_queries(
    path: str | Path, queries: Sequence[QueryItem], truths: Sequence[int] | None = None
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, q in enumerate(queries):
            obj: dict[str, Any] = {"id": q.id, "image_uri": q.image_uri, "gender": q.gender.value}
            if q.rough_age_hint is not None:
                obj["rough_age_hint"] = q.rough_age_hint
            if truths is not None:
                obj["true_age"] = int(truths[i])
            fh.write(json.dumps(obj) + "\n")
