"""Comparison likelihoods and Bayesian posterior accumulation on the age grid.

Each older/younger judgment against a reference of known age multiplies a
logistic likelihood onto the prior. Accumulation runs in log space and is
exponentiated with max-subtraction; a bin whose accumulated log mass drops
below ``LOG_MASS_FLOOR`` counts as zero, and if every bin does, the evidence
is irreconcilable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
from scipy.special import expit, log_expit

from .grid import AgeDistribution

LOG_MASS_FLOOR = math.log(1e-300)

OUTLIER_CI_LEVEL = 0.90
OUTLIER_MAX_WIDTH = 15


class DegenerateEvidence(ArithmeticError):
    """Every grid bin underflowed the log-mass floor."""


class Outcome(str, Enum):
    OLDER = "older"
    YOUNGER = "younger"


@dataclass(frozen=True)
class LogisticModel:
    """Steepness of the response curve, per year of age difference."""

    beta: float = 0.36

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be a positive finite real, got {self.beta!r}")


@dataclass(frozen=True)
class ComparisonEvent:
    """One older/younger judgment against a reference of known age."""

    ref_age: int
    outcome: Outcome
    annotator_id: str = ""
    timestamp: float = 0.0
    ref_id: str = ""


def comparison_likelihood(model: LogisticModel, event: ComparisonEvent, age: int) -> float:
    """Probability of the observed judgment if the queried face has ``age``."""
    x = model.beta * (age - event.ref_age)
    p_older = float(expit(x))
    p_younger = float(expit(-x))
    z = p_older + p_younger  # partition over the two outcomes; identically 1
    num = p_older if event.outcome is Outcome.OLDER else p_younger
    return num / z


def _event_log_likelihood(
    model: LogisticModel, event: ComparisonEvent, ages: np.ndarray
) -> np.ndarray:
    """Per-bin log likelihood of one event, partition included."""
    x = model.beta * (ages - event.ref_age)
    if event.outcome is Outcome.YOUNGER:
        x = -x
    z = expit(x) + expit(-x)
    return log_expit(x) - np.log(z)


def posterior_from_events(
    model: LogisticModel,
    prior: AgeDistribution,
    events: Iterable[ComparisonEvent],
) -> AgeDistribution:
    """Posterior over the grid after multiplying in every event's likelihood.

    Event order does not affect the result. Raises DegenerateEvidence when
    all bins fall below the log-mass floor.
    """
    grid = prior.grid
    ages = grid.ages()
    with np.errstate(divide="ignore"):
        log_mass = np.where(prior.mass > 0.0, np.log(prior.mass), -np.inf)
    for event in events:
        if not grid.contains(event.ref_age):
            raise ValueError(
                f"reference age {event.ref_age} outside grid "
                f"[{grid.min_age}, {grid.max_age}]"
            )
        log_mass = log_mass + _event_log_likelihood(model, event, ages)
    top = float(np.max(log_mass))
    if top < LOG_MASS_FLOOR:
        raise DegenerateEvidence(
            f"all bins fell below the log-mass floor (max log mass {top:.1f}); "
            "the comparisons cannot be reconciled at this beta"
        )
    live = log_mass >= LOG_MASS_FLOOR
    mass = np.zeros_like(log_mass)
    mass[live] = np.exp(log_mass[live] - top)
    return AgeDistribution.from_unnormalized(grid, mass)


def mode(dist: AgeDistribution) -> int:
    """Age of maximal mass; ties break toward the younger age."""
    return int(dist.grid.ages()[int(np.argmax(dist.mass))])


def confidence_interval(dist: AgeDistribution, level: float) -> tuple[int, int]:
    """Shortest contiguous window [lo, hi] holding at least ``level`` mass.

    Among windows of the same minimal width the one with greater mass wins
    (leftmost on an exact tie). Width is hi - lo in years.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    n = dist.grid.n_bins
    ages = dist.grid.ages()
    prefix = np.concatenate(([0.0], np.cumsum(dist.mass)))
    for width in range(n):
        sums = prefix[width + 1 :] - prefix[: n - width]
        if np.any(sums >= level - 1e-12):
            i = int(np.argmax(sums))
            return int(ages[i]), int(ages[i + width])
    return int(ages[0]), int(ages[-1])  # unreachable: full window holds all mass


def ci_width(dist: AgeDistribution, level: float = OUTLIER_CI_LEVEL) -> int:
    lo, hi = confidence_interval(dist, level)
    return hi - lo


def is_outlier(dist: AgeDistribution) -> bool:
    """True when the 90% confidence interval spans more than 15 years."""
    return ci_width(dist, OUTLIER_CI_LEVEL) > OUTLIER_MAX_WIDTH
