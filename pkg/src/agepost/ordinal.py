"""Per-age binary rank classifiers and the fixed map to an age distribution.

The head holds one linear classifier per rank threshold t ("is the face
older than t?"). Responses feed a parameter-free linear layer whose weights
are beta*(age - t) — the algebraic reduction of log sig(beta*(age-t)) -
log sig(beta*(t-age)) — followed by a softmax, which reproduces the product
of per-rank likelihoods raised to the response exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy.special import expit, log_expit

from .grid import AgeDistribution, AgeGrid

FeatureVector = np.ndarray

COST_DEAD_ZONE = 3  # |a_gt - t| below this contributes zero cost


class DimensionMismatch(ValueError):
    """Feature vector dimension does not match the head."""


@dataclass(frozen=True)
class PosteriorMap:
    """Fixed (never trained) linear map from rank responses to bin scores."""

    weight: np.ndarray  # (n_bins, K)
    bias: np.ndarray  # (n_bins,)

    @classmethod
    def build(cls, grid: AgeGrid, num_ranks: int, beta: float) -> "PosteriorMap":
        ages = grid.ages().astype(float)
        t = thresholds(grid, num_ranks).astype(float)
        weight = beta * (ages[:, None] - t[None, :])
        bias = log_expit(beta * (t[None, :] - ages[:, None])).sum(axis=1)
        return cls(weight=weight, bias=bias)


def thresholds(grid: AgeGrid, num_ranks: int) -> np.ndarray:
    """Rank thresholds: ages min_age .. min_age + K - 1."""
    return grid.min_age + np.arange(num_ranks)


@dataclass
class OrdinalHead:
    """K rank classifiers as rows of a weight matrix; last column is the bias."""

    weights: np.ndarray  # (K, d+1)
    grid: AgeGrid
    beta: float = 0.36

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 2:
            raise ValueError(f"weights must be (K, d+1) with K>=1, d>=1; got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite entries")
        if w.shape[0] > self.grid.n_bins - 1:
            raise ValueError(
                f"{w.shape[0]} ranks exceed grid capacity {self.grid.n_bins - 1}"
            )
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        self.weights = w

    @property
    def num_ranks(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1] - 1

    def thresholds(self) -> np.ndarray:
        return thresholds(self.grid, self.num_ranks)

    def posterior_map(self) -> PosteriorMap:
        return PosteriorMap.build(self.grid, self.num_ranks, self.beta)

    @classmethod
    def zeros(
        cls,
        grid: AgeGrid,
        feature_dim: int,
        beta: float = 0.36,
        num_ranks: int | None = None,
    ) -> "OrdinalHead":
        k = grid.n_bins - 1 if num_ranks is None else num_ranks
        return cls(weights=np.zeros((k, feature_dim + 1)), grid=grid, beta=beta)

    @classmethod
    def random(
        cls,
        grid: AgeGrid,
        feature_dim: int,
        beta: float = 0.36,
        num_ranks: int | None = None,
        seed: int = 0,
        scale: float = 1.0,
    ) -> "OrdinalHead":
        k = grid.n_bins - 1 if num_ranks is None else num_ranks
        rng = np.random.default_rng(seed)
        return cls(
            weights=scale * rng.standard_normal((k, feature_dim + 1)),
            grid=grid,
            beta=beta,
        )


def _augment(head: OrdinalHead, x: FeatureVector) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (head.feature_dim,):
        raise DimensionMismatch(
            f"feature has shape {x.shape}, head expects ({head.feature_dim},)"
        )
    return np.concatenate([x, [1.0]])


def forward_ordinal(head: OrdinalHead, x: FeatureVector) -> np.ndarray:
    """Per-rank responses f in (0,1): confidence the face is older than each t."""
    return expit(head.weights @ _augment(head, x))


def forward_posterior(
    head: OrdinalHead, x: FeatureVector, pmap: PosteriorMap | None = None
) -> AgeDistribution:
    """Age distribution from the rank responses via the fixed map plus softmax."""
    f = forward_ordinal(head, x)
    if pmap is None:
        pmap = head.posterior_map()
    scores = pmap.weight @ f + pmap.bias
    scores -= scores.max()
    mass = np.exp(scores)
    return AgeDistribution.from_unnormalized(head.grid, mass)


def predict_ohrank(head: OrdinalHead, x: FeatureVector) -> int:
    """Rank aggregation: min_age plus the number of responses above 0.5."""
    f = forward_ordinal(head, x)
    return head.grid.min_age + int(np.sum(f > 0.5))


def rank_targets(head: OrdinalHead, a_gt: int) -> np.ndarray:
    """Binary targets 1[a_gt > t] for each rank threshold."""
    return (a_gt > head.thresholds()).astype(float)


def rank_costs(head: OrdinalHead, a_gt: int) -> np.ndarray:
    """Truncated absolute cost: 0 within the dead zone, |a_gt - t| outside."""
    d = np.abs(a_gt - head.thresholds()).astype(float)
    return np.where(d < COST_DEAD_ZONE, 0.0, d)


def loss_cost_sensitive(
    head: OrdinalHead, x: FeatureVector, a_gt: int
) -> tuple[float, np.ndarray]:
    """Cost-weighted squared rank loss and its gradient w.r.t. the weights."""
    if not head.grid.contains(a_gt):
        raise ValueError(f"ground-truth age {a_gt} outside grid")
    aug = _augment(head, x)
    f = expit(head.weights @ aug)
    y = rank_targets(head, a_gt)
    c = rank_costs(head, a_gt)
    loss = float(np.sum(c * (f - y) ** 2))
    dl_dz = 2.0 * c * (f - y) * f * (1.0 - f)
    return loss, np.outer(dl_dz, aug)


def loss_kl(
    head: OrdinalHead,
    x: FeatureVector,
    p_gt: AgeDistribution,
    pmap: PosteriorMap | None = None,
) -> tuple[float, np.ndarray]:
    """Cross-entropy between the target posterior and the predicted one.

    Equals the KL divergence up to the (dropped) negative entropy of the
    target, so the value is bounded below by entropy(p_gt).
    """
    if p_gt.grid != head.grid:
        raise ValueError("target posterior grid does not match the head grid")
    aug = _augment(head, x)
    f = expit(head.weights @ aug)
    if pmap is None:
        pmap = head.posterior_map()
    scores = pmap.weight @ f + pmap.bias
    shifted = scores - scores.max()
    log_norm = math.log(float(np.sum(np.exp(shifted))))
    log_p = shifted - log_norm
    loss = float(-np.sum(p_gt.mass * log_p))
    p = np.exp(log_p)
    dl_df = pmap.weight.T @ (p - p_gt.mass)
    dl_dz = dl_df * f * (1.0 - f)
    return loss, np.outer(dl_dz, aug)
