"""Evaluation metrics: MAE, age-group accuracies, cumulative accuracy.

CA(n) uses the non-strict inequality |pred - truth| <= n; every serialized
report states this so downstream consumers cannot misread the convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

CA_RULE = "CA(n) counts predictions with |pred - truth| <= n"

# Age groups (lo, hi); the last is open-ended.
ADIENCE_GROUPS: tuple[tuple[int, int | None], ...] = (
    (0, 2),
    (4, 6),
    (8, 13),
    (15, 20),
    (25, 32),
    (38, 43),
    (48, 53),
    (60, None),
)


class LengthMismatch(ValueError):
    """Prediction and truth sequences differ in length."""


def adience_group_of(age: int) -> int:
    """Index of the nearest age group; distance ties go to the younger group."""
    best = 0
    best_dist = None
    for i, (lo, hi) in enumerate(ADIENCE_GROUPS):
        if hi is None:
            dist = max(lo - age, 0)
        else:
            dist = max(lo - age, age - hi, 0)
        if best_dist is None or dist < best_dist:
            best, best_dist = i, dist
    return best


@dataclass(frozen=True)
class MetricReport:
    mae: float
    exact_group_acc: float
    one_off_acc: float
    ca: dict[int, float]
    recall_pm3: float
    ca_rule: str = CA_RULE

    def to_dict(self) -> dict[str, Any]:
        return {
            "ca_rule": self.ca_rule,
            "mae": self.mae,
            "exact_group_acc": self.exact_group_acc,
            "one_off_acc": self.one_off_acc,
            "ca": {str(n): v for n, v in self.ca.items()},
            "recall_pm3": self.recall_pm3,
        }


def evaluate(
    predictions: Sequence[int],
    truths: Sequence[int],
    ns: Sequence[int] = (3, 5, 7),
) -> MetricReport:
    """Score point-age predictions against point-age truths.

    Group accuracies map both sides onto the age groups by the nearest-group
    rule; recall_pm3 is CA(3), the share within three years.
    """
    if len(predictions) != len(truths):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(truths)} truths"
        )
    if not predictions:
        raise ValueError("nothing to evaluate")
    pred = np.asarray(predictions, dtype=float)
    truth = np.asarray(truths, dtype=float)
    err = np.abs(pred - truth)
    mae = float(np.mean(err))
    ca = {int(n): float(100.0 * np.mean(err <= n)) for n in ns}
    if 3 not in ca:
        ca[3] = float(100.0 * np.mean(err <= 3))
    pg = np.asarray([adience_group_of(int(p)) for p in predictions])
    tg = np.asarray([adience_group_of(int(t)) for t in truths])
    exact = float(100.0 * np.mean(pg == tg))
    one_off = float(100.0 * np.mean(np.abs(pg - tg) <= 1))
    return MetricReport(
        mae=mae,
        exact_group_acc=exact,
        one_off_acc=one_off,
        ca=ca,
        recall_pm3=ca[3],
    )
