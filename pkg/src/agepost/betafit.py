"""Fit the logistic steepness to aggregate comparison accuracies."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .posterior import LogisticModel

BETA_SEARCH_LO = 1e-3
BETA_SEARCH_HI = 10.0
BETA_SEARCH_TOL = 1e-6

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2


class FitDiverged(RuntimeError):
    """The objective carries no slope information."""


def golden_section_minimize(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6
) -> float:
    """Minimize a unimodal f on [lo, hi]; returns the midpoint of the final bracket.

    A monotone objective collapses the bracket onto the matching endpoint.
    """
    lo, hi = min(lo, hi), max(lo, hi)
    h = hi - lo
    if h <= tol:
        return (lo + hi) / 2.0
    n = int(math.ceil(math.log(tol / h) / math.log(_INV_PHI)))
    c = lo + _INV_PHI_SQ * h
    d = lo + _INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(n - 1):
        h *= _INV_PHI
        if yc < yd:
            hi, d, yd = d, c, yc
            c = lo + _INV_PHI_SQ * h
            yc = f(c)
        else:
            lo, c, yc = c, d, yd
            d = lo + _INV_PHI * h
            yd = f(d)
    return (lo + d) / 2.0 if yc < yd else (c + hi) / 2.0


def fit_beta(samples: Sequence[tuple[float, float]]) -> LogisticModel:
    """Least-squares fit of the response curve to (age_diff, frac_older) pairs.

    Searches beta on [1e-3, 10] by golden section; a saturated sample set
    pins the estimate at the matching bound.
    """
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    diffs = np.asarray([s[0] for s in samples], dtype=float)
    fracs = np.asarray([s[1] for s in samples], dtype=float)
    if len(np.unique(diffs)) < 2:
        raise ValueError("need at least 2 distinct age differences")
    if np.any((fracs < 0.0) | (fracs > 1.0)):
        raise ValueError("frac_older values must lie in [0, 1]")
    if np.all(fracs == 0.5):
        raise FitDiverged("all observed fractions are 0.5; objective is flat")

    def objective(beta: float) -> float:
        return float(np.sum((expit(beta * diffs) - fracs) ** 2))

    beta = golden_section_minimize(
        objective, BETA_SEARCH_LO, BETA_SEARCH_HI, tol=BETA_SEARCH_TOL
    )
    return LogisticModel(beta=beta)
