"""Simulated annotators and the interval-narrowing experiment harness."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .annotate import (
    Gender,
    QueryItem,
    ReferenceItem,
    SelectionPolicy,
    select_references,
)
from .grid import AgeDistribution, AgeGrid
from .posterior import (
    ComparisonEvent,
    LogisticModel,
    Outcome,
    ci_width,
    posterior_from_events,
)

NARROW_WIDTH_YEARS = 8  # the "narrow posterior" report threshold
OUTLIER_WIDTH_YEARS = 15

# References offered for bracketing are kept within this many years of the
# rough age estimate; mirrors picking comparable-looking references rather
# than arbitrary ones. None disables the bound.
DEFAULT_BRACKET_WINDOW = 8


class AnnotatorMode(str, Enum):
    STOCHASTIC = "stochastic"
    TRUTHFUL = "truthful"


@dataclass
class SimulatedAnnotator:
    """Answers older/younger with the logistic response curve (or truthfully)."""

    beta_true: float = 0.36
    seed: int = 0
    mode: AnnotatorMode = AnnotatorMode.STOCHASTIC
    annotator_id: str = "sim"
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta_true) and self.beta_true > 0):
            raise ValueError(f"beta_true must be positive, got {self.beta_true!r}")
        self._rng = np.random.default_rng(self.seed)

    def judge(self, true_age: int, ref_age: int) -> Outcome:
        if self.mode is AnnotatorMode.TRUTHFUL:
            if true_age == ref_age:
                older = bool(self._rng.integers(2))
            else:
                older = true_age > ref_age
        else:
            p_older = float(expit(self.beta_true * (true_age - ref_age)))
            older = bool(self._rng.random() < p_older)
        return Outcome.OLDER if older else Outcome.YOUNGER


def simulate_comparison(
    annotator: SimulatedAnnotator, true_age: int, ref_age: int, ref_id: str = ""
) -> ComparisonEvent:
    return ComparisonEvent(
        ref_age=ref_age,
        outcome=annotator.judge(true_age, ref_age),
        annotator_id=annotator.annotator_id,
        ref_id=ref_id,
    )


def make_reference_pool(
    grid: AgeGrid, per_age: int = 4, gender: Gender = Gender.UNKNOWN
) -> list[ReferenceItem]:
    """Synthetic pool with ``per_age`` reference items at every grid age."""
    return [
        ReferenceItem(id=f"ref-{age}-{i}", image_uri="", age=age, gender=gender)
        for age in range(grid.min_age, grid.max_age + 1)
        for i in range(per_age)
    ]


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class NarrowingRow:
    m: int
    median_width: float
    p10_width: float
    p90_width: float
    frac_lt8: float
    frac_gt15: float
    discard_rate: float


def simulate_task_events(
    annotator: SimulatedAnnotator,
    true_age: int,
    rough_age: int,
    pool: Sequence[ReferenceItem],
    policy: SelectionPolicy,
    bracket_window: int | None = DEFAULT_BRACKET_WINDOW,
) -> list[ComparisonEvent]:
    """Select bracketing references and answer each with the annotator."""
    if bracket_window is not None:
        pool = [r for r in pool if abs(r.age - rough_age) <= bracket_window]
    refs = select_references(
        QueryItem(id="sim-query"), pool, policy, rough_age, fallback=True
    )
    return [simulate_comparison(annotator, true_age, r.age, r.id) for r in refs]


def ci_narrowing_experiment(
    annotator: SimulatedAnnotator,
    policy: SelectionPolicy,
    trials: int,
    *,
    grid: AgeGrid | None = None,
    model: LogisticModel | None = None,
    ms: Sequence[int] = (1, 2, 4, 6, 8),
    bracket_window: int | None = DEFAULT_BRACKET_WINDOW,
    pool: Sequence[ReferenceItem] | None = None,
) -> list[NarrowingRow]:
    """Distribution of 90% interval widths as the comparison count grows.

    Each trial draws a true age uniformly, brackets references around it
    (M//2 below, the rest above), simulates the comparisons, and measures
    the posterior interval. Fully reproducible from the annotator seed.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    grid = grid or AgeGrid()
    model = model or LogisticModel()
    if pool is None:
        per_age = max(policy.num_below, policy.num_above, max(ms, default=1))
        pool = make_reference_pool(grid, per_age=per_age)
    prior = AgeDistribution.uniform(grid)
    master = np.random.default_rng(annotator.seed)
    rows = []
    for m in ms:
        true_ages = master.integers(grid.min_age, grid.max_age + 1, size=trials)
        widths = np.empty(trials)
        for i in range(trials):
            true_age = int(true_ages[i])
            if m == 0:
                widths[i] = ci_width(prior)
                continue
            trial_ann = replace(
                annotator, seed=_derived_seed(annotator.seed, m, i, 1)
            )
            trial_policy = replace(
                policy,
                num_below=m // 2,
                num_above=m - m // 2,
                rng_seed=_derived_seed(annotator.seed, m, i, 2),
            )
            events = simulate_task_events(
                trial_ann, true_age, true_age, pool, trial_policy, bracket_window
            )
            widths[i] = ci_width(posterior_from_events(model, prior, events))
        rows.append(
            NarrowingRow(
                m=int(m),
                median_width=float(np.median(widths)),
                p10_width=float(np.percentile(widths, 10)),
                p90_width=float(np.percentile(widths, 90)),
                frac_lt8=float(np.mean(widths < NARROW_WIDTH_YEARS)),
                frac_gt15=float(np.mean(widths > OUTLIER_WIDTH_YEARS)),
                discard_rate=float(np.mean(widths > OUTLIER_WIDTH_YEARS)),
            )
        )
    return rows


def write_narrowing_csv(path: str | Path, rows: Sequence[NarrowingRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["M", "median_width", "p10_width", "p90_width", "frac_lt8", "frac_gt15", "discard_rate"]
        )
        for r in rows:
            writer.writerow(
                [r.m, r.median_width, r.p10_width, r.p90_width, r.frac_lt8, r.frac_gt15, r.discard_rate]
            )


def synth_query_catalog(
    n: int, seed: int, grid: AgeGrid | None = None, gender: Gender = Gender.UNKNOWN
) -> tuple[list[QueryItem], list[int]]:
    """Synthetic queries with uniform true ages; the hint equals the true age."""
    if n < 0:
        raise ValueError("n must be non-negative")
    grid = grid or AgeGrid()
    rng = np.random.default_rng(seed)
    ages = rng.integers(grid.min_age, grid.max_age + 1, size=n)
    queries = [
        QueryItem(id=f"q-{i:06d}", image_uri="", gender=gender, rough_age_hint=int(ages[i]))
        for i in range(n)
    ]
    return queries, [int(a) for a in ages]
