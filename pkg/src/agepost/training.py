"""Mini-batch gradient-descent trainer for the ordinal head, plus the
synthetic feature generator that stands in for a deep feature extractor."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .annotate import ExactAge, GroundTruthSpec, build_gt_posterior
from .grid import AgeGrid
from .metrics import MetricReport, evaluate
from .ordinal import FeatureVector, OrdinalHead, forward_ordinal, forward_posterior
from .posterior import mode

LOSS_MODES = ("both", "hyper", "kl")

# Embedding stream is fixed so datasets drawn with different seeds share the
# same feature geometry (train/test splits must be comparable).
_EMBED_SEED = 0x0A6E
SYNTH_NOISE_STDEV = 0.05


class NonFiniteLoss(ArithmeticError):
    def __init__(self, epoch: int, batch_index: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch_index}")
        self.epoch = epoch
        self.batch_index = batch_index


@dataclass
class TrainConfig:
    lr: float = 0.1
    epochs: int = 200
    batch_size: int = 32
    loss_mode: str = "both"
    lambda_hyper: float = 1.0
    lambda_kl: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss_hyper: float
    loss_kl: float
    loss_total: float


def synth_dataset(
    n: int,
    seed: int,
    grid: AgeGrid | None = None,
    feature_dim: int = 16,
    noise: float = SYNTH_NOISE_STDEV,
) -> list[tuple[FeatureVector, GroundTruthSpec]]:
    """Features from a fixed random linear embedding of smooth age encodings.

    Ages are uniform over the grid; each feature is the embedding of
    (a/max, sin(pi a/max), cos(pi a/max)) plus Gaussian noise. The embedding
    matrix comes from a fixed stream so separately drawn splits share it.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    grid = grid or AgeGrid()
    embed = np.random.default_rng(_EMBED_SEED).standard_normal((feature_dim, 3))
    rng = np.random.default_rng(seed)
    ages = rng.integers(grid.min_age, grid.max_age + 1, size=n)
    scaled = ages / grid.max_age
    base = np.stack([scaled, np.sin(np.pi * scaled), np.cos(np.pi * scaled)], axis=1)
    feats = base @ embed.T + rng.normal(0.0, noise, size=(n, feature_dim))
    return [(feats[i], ExactAge(int(ages[i]))) for i in range(n)]


def _prepare(
    head: OrdinalHead, dataset: Sequence[tuple[FeatureVector, GroundTruthSpec]]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack features (augmented), point ages, and target posteriors."""
    feats = np.asarray([x for x, _ in dataset], dtype=float)
    if feats.ndim != 2 or feats.shape[1] != head.feature_dim:
        raise ValueError(
            f"dataset features have shape {feats.shape}, head expects dim {head.feature_dim}"
        )
    aug = np.concatenate([feats, np.ones((len(dataset), 1))], axis=1)
    gts = []
    ages = []
    for _, spec in dataset:
        p = build_gt_posterior(spec, head.grid)
        gts.append(p.mass)
        # Point age for the rank loss: the exact age when given, else the MAP
        ages.append(spec.age if isinstance(spec, ExactAge) else mode(p))
    return aug, np.asarray(ages), np.asarray(gts)


def _batch_losses(
    weights: np.ndarray,
    xa: np.ndarray,
    ages: np.ndarray,
    pgt: np.ndarray,
    t: np.ndarray,
    wmap: np.ndarray,
    bmap: np.ndarray,
    mode_flags: tuple[bool, bool],
    lambdas: tuple[float, float],
) -> tuple[float, float, np.ndarray]:
    """Mean per-sample losses over a batch and the combined weight gradient."""
    use_hyper, use_kl = mode_flags
    lam_h, lam_kl = lambdas
    f = expit(xa @ weights.T)  # (B, K)
    grad = np.zeros_like(weights)
    loss_h = 0.0
    loss_k = 0.0
    inv_b = 1.0 / len(xa)
    if use_hyper:
        y = (ages[:, None] > t[None, :]).astype(float)
        d = np.abs(ages[:, None] - t[None, :]).astype(float)
        c = np.where(d < 3, 0.0, d)
        resid = f - y
        loss_h = float(np.sum(c * resid**2) * inv_b)
        dl_dz = 2.0 * c * resid * f * (1.0 - f)
        grad += lam_h * (dl_dz.T @ xa) * inv_b
    if use_kl:
        scores = f @ wmap.T + bmap[None, :]
        scores -= scores.max(axis=1, keepdims=True)
        log_norm = np.log(np.sum(np.exp(scores), axis=1, keepdims=True))
        log_p = scores - log_norm
        loss_k = float(-np.sum(pgt * log_p) * inv_b)
        dl_df = (np.exp(log_p) - pgt) @ wmap
        dl_dz = dl_df * f * (1.0 - f)
        grad += lam_kl * (dl_dz.T @ xa) * inv_b
    return loss_h, loss_k, grad


def train(
    head: OrdinalHead,
    dataset: Sequence[tuple[FeatureVector, GroundTruthSpec]],
    config: TrainConfig | None = None,
) -> list[EpochStats]:
    """Gradient descent on the configured loss mix; mutates the head in place.

    Batches are drawn in a fixed shuffled order per epoch under the config
    seed, so runs are reproducible.
    """
    config = config or TrainConfig()
    if not dataset:
        raise ValueError("dataset is empty")
    xa, ages, pgt = _prepare(head, dataset)
    t = head.thresholds()
    pmap = head.posterior_map()
    use_hyper = config.loss_mode in ("both", "hyper")
    use_kl = config.loss_mode in ("both", "kl")
    rng = np.random.default_rng(config.seed)
    trace: list[EpochStats] = []
    n = len(dataset)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        sum_h = 0.0
        sum_k = 0.0
        batches = 0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            lh, lk, grad = _batch_losses(
                head.weights,
                xa[idx],
                ages[idx],
                pgt[idx],
                t,
                pmap.weight,
                pmap.bias,
                (use_hyper, use_kl),
                (config.lambda_hyper, config.lambda_kl),
            )
            if not (math.isfinite(lh) and math.isfinite(lk)):
                raise NonFiniteLoss(epoch, bi)
            head.weights = head.weights - config.lr * grad
            sum_h += lh
            sum_k += lk
            batches += 1
        lh_ep = sum_h / batches
        lk_ep = sum_k / batches
        trace.append(EpochStats(epoch, lh_ep, lk_ep, lh_ep + lk_ep))
    return trace


def predict_age(head: OrdinalHead, x: FeatureVector, predictor: str = "posterior") -> int:
    if predictor == "posterior":
        return mode(forward_posterior(head, x, head.posterior_map()))
    if predictor == "ohrank":
        return head.grid.min_age + int(np.sum(forward_ordinal(head, x) > 0.5))
    raise ValueError(f"unknown predictor {predictor!r}")


def evaluate_head(
    head: OrdinalHead,
    dataset: Sequence[tuple[FeatureVector, GroundTruthSpec]],
    predictor: str = "posterior",
    ns: Sequence[int] = (3, 5, 7),
) -> MetricReport:
    """Point predictions against the dataset's point ages."""
    _, ages, pgt = _prepare(head, dataset)
    pmap = head.posterior_map()
    preds = []
    for x, _ in dataset:
        if predictor == "posterior":
            preds.append(mode(forward_posterior(head, x, pmap)))
        else:
            preds.append(predict_age(head, x, predictor))
    return evaluate(preds, [int(a) for a in ages], ns=ns)


def save_checkpoint(path: str | Path, head: OrdinalHead) -> None:
    payload = {
        "K": head.num_ranks,
        "d": head.feature_dim,
        "beta": head.beta,
        "grid": head.grid.to_dict(),
        "weights": [[float(v) for v in row] for row in head.weights],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path: str | Path) -> OrdinalHead:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    head = OrdinalHead(
        weights=np.asarray(payload["weights"], dtype=float),
        grid=AgeGrid.from_dict(payload["grid"]),
        beta=float(payload["beta"]),
    )
    if head.num_ranks != int(payload["K"]) or head.feature_dim != int(payload["d"]):
        raise ValueError("checkpoint dimensions are inconsistent with its weights")
    return head


def write_loss_trace(path: str | Path, trace: Sequence[EpochStats]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss_hyper", "loss_kl", "loss_total"])
        for row in trace:
            writer.writerow([row.epoch, repr(row.loss_hyper), repr(row.loss_kl), repr(row.loss_total)])
