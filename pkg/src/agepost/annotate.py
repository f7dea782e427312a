"""Reference bracketing, ground-truth posterior construction, and annotation
finalization for the comparison-labelling protocol."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .grid import AgeDistribution, AgeGrid
from .posterior import (
    OUTLIER_CI_LEVEL,
    ComparisonEvent,
    LogisticModel,
    confidence_interval,
    is_outlier,
    mode,
    posterior_from_events,
)

GAUSSIAN_SIGMA = 2.0

STATUS_LABELLED = "labelled"
STATUS_DISCARDED = "discarded"


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"


class InsufficientPool(LookupError):
    """A reference stratum cannot be filled from the pool."""


class EmptySupport(ValueError):
    """An age group does not intersect the grid."""


class NoEvidence(ValueError):
    """Finalization was requested with zero comparison events."""


@dataclass(frozen=True)
class ReferenceItem:
    id: str
    image_uri: str
    age: int
    gender: Gender = Gender.UNKNOWN


@dataclass(frozen=True)
class QueryItem:
    id: str
    image_uri: str = ""
    gender: Gender = Gender.UNKNOWN
    rough_age_hint: int | None = None


@dataclass(frozen=True)
class SelectionPolicy:
    """How references are drawn around the rough age estimate."""

    num_below: int = 3
    num_above: int = 3
    gender_match_required: bool = True
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_below < 0 or self.num_above < 0:
            raise ValueError("stratum counts must be non-negative")
        if self.num_below + self.num_above < 1:
            raise ValueError("policy must request at least one reference")


@dataclass(frozen=True)
class ExactAge:
    age: int


@dataclass(frozen=True)
class AgeGroup:
    """Age range [lo, hi]; hi=None means open-ended up to the grid maximum."""

    lo: int
    hi: int | None = None

    def __post_init__(self) -> None:
        if self.hi is not None and self.lo > self.hi:
            raise ValueError(f"group lower bound {self.lo} exceeds upper bound {self.hi}")


@dataclass(frozen=True)
class RawPosterior:
    dist: AgeDistribution


GroundTruthSpec = Union[ExactAge, AgeGroup, RawPosterior]


@dataclass(frozen=True)
class AnnotationRecord:
    """Finalized label for one query: posterior, point summaries, provenance."""

    query_id: str
    posterior: AgeDistribution
    mode_age: int
    ci90: tuple[int, int]
    events: tuple[ComparisonEvent, ...]
    status: str

    @property
    def discarded(self) -> bool:
        return self.status == STATUS_DISCARDED


def rough_age_estimate(
    query: QueryItem, grid: AgeGrid, fallback: int | None = None
) -> int:
    """The query's age hint if present, else the fallback, else the grid midpoint.

    Hints are clamped into the grid so downstream bracketing stays valid.
    """
    if query.rough_age_hint is not None:
        return int(min(max(query.rough_age_hint, grid.min_age), grid.max_age))
    if fallback is not None:
        return int(fallback)
    return grid.midpoint


def _fill_stratum(
    rng: np.random.Generator,
    tiers: Sequence[list[ReferenceItem]],
    count: int,
    taken: set[str],
) -> list[ReferenceItem]:
    """Draw ``count`` items uniformly, exhausting stricter tiers first."""
    chosen: list[ReferenceItem] = []
    for tier in tiers:
        if len(chosen) == count:
            break
        avail = [r for r in tier if r.id not in taken]
        take = min(count - len(chosen), len(avail))
        if take > 0:
            for i in rng.choice(len(avail), size=take, replace=False):
                item = avail[int(i)]
                chosen.append(item)
                taken.add(item.id)
    return chosen


def select_references(
    query: QueryItem,
    pool: Sequence[ReferenceItem],
    policy: SelectionPolicy,
    rough_age: int,
    *,
    fallback: bool = False,
) -> list[ReferenceItem]:
    """Draw ``num_below`` references younger and ``num_above`` older than the
    rough age, gender-matched when required and the query gender is known.

    Selection is uniform within each stratum under the policy seed and never
    repeats a reference. With ``fallback`` enabled a short stratum is topped
    up by first relaxing the gender constraint, then widening the stratum to
    include the rough age itself; otherwise InsufficientPool is raised.
    """
    if not pool:
        raise InsufficientPool("reference pool is empty")
    rng = np.random.default_rng(policy.rng_seed)
    match_gender = policy.gender_match_required and query.gender is not Gender.UNKNOWN
    if match_gender:
        matched = [r for r in pool if r.gender is query.gender]
        others = [r for r in pool if r.gender is not query.gender]
    else:
        matched = list(pool)
        others = []

    taken: set[str] = set()
    out: list[ReferenceItem] = []
    for side, count in (("below", policy.num_below), ("above", policy.num_above)):
        if side == "below":
            strict = lambda r: r.age < rough_age  # noqa: E731
            wide = lambda r: r.age <= rough_age  # noqa: E731
        else:
            strict = lambda r: r.age > rough_age  # noqa: E731
            wide = lambda r: r.age >= rough_age  # noqa: E731
        tiers = [[r for r in matched if strict(r)]]
        if fallback:
            tiers.append([r for r in others if strict(r)])
            tiers.append([r for r in matched + others if wide(r) and not strict(r)])
        available = sum(
            len([r for r in tier if r.id not in taken]) for tier in tiers
        )
        if available < count:
            hint = (
                "set gender_match_required=false or widen the stratum to <=/>="
                if not fallback
                else "pool exhausted even after relaxing gender and widening"
            )
            raise InsufficientPool(
                f"cannot fill '{side}' stratum around age {rough_age}: "
                f"need {count}, have {available} ({hint})"
            )
        out.extend(_fill_stratum(rng, tiers, count, taken))
    return out


def build_gt_posterior(spec: GroundTruthSpec, grid: AgeGrid) -> AgeDistribution:
    """Ground-truth posterior for a label of any of the three dataset styles.

    Exact ages become a discretized Gaussian (sigma=2) peaked at the age;
    age groups spread uniformly over their bins; raw posteriors pass through
    re-normalized.
    """
    ages = grid.ages()
    if isinstance(spec, ExactAge):
        if not grid.contains(spec.age):
            raise ValueError(f"exact age {spec.age} outside grid")
        dens = np.exp(-((ages - spec.age) ** 2) / (2.0 * GAUSSIAN_SIGMA**2))
        return AgeDistribution.from_unnormalized(grid, dens)
    if isinstance(spec, AgeGroup):
        hi = grid.max_age if spec.hi is None else spec.hi
        lo_eff = max(spec.lo, grid.min_age)
        hi_eff = min(hi, grid.max_age)
        if lo_eff > hi_eff:
            raise EmptySupport(f"group [{spec.lo}, {spec.hi}] does not intersect the grid")
        mass = np.where((ages >= lo_eff) & (ages <= hi_eff), 1.0, 0.0)
        return AgeDistribution.from_unnormalized(grid, mass)
    if isinstance(spec, RawPosterior):
        if spec.dist.grid != grid:
            raise ValueError("raw posterior grid does not match the target grid")
        return AgeDistribution.from_unnormalized(grid, spec.dist.mass)
    raise TypeError(f"unknown ground-truth spec: {spec!r}")


def finalize_annotation(
    query_id: str,
    events: Sequence[ComparisonEvent],
    model: LogisticModel,
    prior: AgeDistribution,
) -> AnnotationRecord:
    """Compute the posterior and seal the annotation, discarding outliers.

    The record always carries the posterior, including for discarded
    annotations, so audits can inspect what was rejected.
    """
    if not events:
        raise NoEvidence(f"no comparison events for query {query_id!r}")
    post = posterior_from_events(model, prior, events)
    ci = confidence_interval(post, OUTLIER_CI_LEVEL)
    status = STATUS_DISCARDED if is_outlier(post) else STATUS_LABELLED
    return AnnotationRecord(
        query_id=query_id,
        posterior=post,
        mode_age=mode(post),
        ci90=ci,
        events=tuple(events),
        status=status,
    )
