"""Informativeness scoring and budgeted sample selection.

Three per-sample criteria over the unlabeled pool: softmax margin
(boundary proximity), minimum Lp embedding distance to any labeled sample
(novelty), and raw confidence (uncertainty). Criteria are min-max
normalized across the pool and combined into a weighted hybrid score;
single-criterion and random selectors exist for ablations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

SELECTOR_KINDS = (
    "multi_criteria",
    "margin_only",
    "lp_only",
    "low_confidence_only",
    "random",
)


@dataclass(frozen=True)
class SelectorConfig:
    kind: str = "multi_criteria"
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    p_norm: float = 2.0
    low_confidence_cutoff: float = 0.75
    # optional pre-filter keeping only the intersection of the top-q
    # quantiles of the three criteria before scoring; disabled by default
    intersection_quantile: float | None = None

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise ValueError(f"unknown selector kind {self.kind!r}")
        if self.p_norm < 1:
            raise ValueError("p_norm must be >= 1")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("criterion weights must be non-negative")
        if self.kind == "multi_criteria" and self.alpha + self.beta + self.gamma == 0:
            raise ValueError("multi_criteria weights must not all be zero")


@dataclass
class SelectionScore:
    margin: np.ndarray
    lp_distance: np.ndarray
    confidence: np.ndarray
    margin_norm: np.ndarray
    lp_norm: np.ndarray
    confidence_norm: np.ndarray
    hybrid: np.ndarray


def margin_scores(probs):
    """Difference between the top two class probabilities per row."""
    probs = np.asarray(probs, dtype=np.float64)
    if len(probs) == 0:
        return np.zeros(0)
    top = np.sort(probs, axis=1)[:, ::-1]
    return top[:, 0] - top[:, 1]


def lp_distances(unlabeled_embs, labeled_embs, p_norm=2.0):
    """Exact minimum Lp distance from each pool embedding to the labeled set."""
    U = np.asarray(unlabeled_embs, dtype=np.float64)
    L = np.asarray(labeled_embs, dtype=np.float64)
    if len(L) == 0:
        raise ValueError("labeled embedding set must be nonempty")
    if len(U) == 0:
        return np.zeros(0)
    # chunked to bound the pairwise matrix; still exact brute force
    chunk = max(1, int(4e6) // max(1, len(L)))
    out = np.empty(len(U))
    for start in range(0, len(U), chunk):
        block = U[start : start + chunk]
        out[start : start + chunk] = cdist(
            block, L, metric="minkowski", p=p_norm
        ).min(axis=1)
    return out


def confidence_scores(probs):
    """Maximum class probability per row."""
    probs = np.asarray(probs, dtype=np.float64)
    if len(probs) == 0:
        return np.zeros(0)
    return probs.max(axis=1)


def minmax_normalize(values):
    """Scale to [0, 1]; an all-equal vector maps to all 0.5."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 0:
        raise ValueError("cannot normalize an empty vector")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full_like(v, 0.5)
    return (v - lo) / (hi - lo)


def hybrid_scores(margin_norm, lp_norm, confidence_norm, alpha, beta, gamma):
    """Weighted sum rewarding low margin, high distance, low confidence."""
    return (
        alpha * (1.0 - np.asarray(margin_norm))
        + beta * np.asarray(lp_norm)
        + gamma * (1.0 - np.asarray(confidence_norm))
    )


def score_pool(pool_X, model, labeled_embs, cfg):
    """Compute the full SelectionScore bundle for an unlabeled pool."""
    probs = model.predict_batch(pool_X)
    embs = model.embed_batch(pool_X)
    m = margin_scores(probs)
    d = lp_distances(embs, labeled_embs, cfg.p_norm)
    c = confidence_scores(probs)
    mn, dn, cn = minmax_normalize(m), minmax_normalize(d), minmax_normalize(c)
    h = hybrid_scores(mn, dn, cn, cfg.alpha, cfg.beta, cfg.gamma)
    return SelectionScore(m, d, c, mn, dn, cn, h)


def _top_k(keys, k, eligible=None):
    """Indices of the k largest keys; ties broken by lower index."""
    n = len(keys)
    idx = np.arange(n) if eligible is None else np.flatnonzero(eligible)
    if len(idx) == 0 or k <= 0:
        return []
    order = idx[np.lexsort((idx, -np.asarray(keys)[idx]))]
    return list(order[:k])


def select(pool_X, model, labeled_embs, cfg, budget, rng=None):
    """Pick up to ``budget`` pool indices with the configured strategy.

    Returns (indices, SelectionScore or None). Scores are None only for
    the random selector, which never evaluates the model.
    """
    n = len(pool_X)
    k = int(budget)
    if k <= 0 or n == 0:
        return [], None
    if cfg.kind == "random":
        if rng is None:
            raise ValueError("random selection requires an rng")
        chosen = rng.choice(n, size=min(k, n), replace=False)
        return list(np.asarray(chosen, dtype=int)), None
    scores = score_pool(pool_X, model, labeled_embs, cfg)
    if cfg.kind == "margin_only":
        return _top_k(-scores.margin, k), scores
    if cfg.kind == "lp_only":
        return _top_k(scores.lp_distance, k), scores
    if cfg.kind == "low_confidence_only":
        eligible = scores.confidence < cfg.low_confidence_cutoff
        return _top_k(-scores.confidence, k, eligible=eligible), scores
    # multi_criteria
    eligible = None
    if cfg.intersection_quantile is not None:
        q = cfg.intersection_quantile
        eligible = (
            (scores.margin <= np.quantile(scores.margin, q))
            & (scores.lp_distance >= np.quantile(scores.lp_distance, 1 - q))
            & (scores.confidence <= np.quantile(scores.confidence, q))
        )
        if not eligible.any():
            eligible = None  # fall back to the full pool
    return _top_k(scores.hybrid, k, eligible=eligible), scores


def export_scores_csv(path, scores, selected, month=""):
    """Audit CSV: one row per pool sample with raw and hybrid scores."""
    selected = set(selected)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["month", "index", "margin", "lp_distance", "confidence",
                    "hybrid", "selected"])
        for i in range(len(scores.hybrid)):
            w.writerow([
                month, i,
                f"{scores.margin[i]:.10g}",
                f"{scores.lp_distance[i]:.10g}",
                f"{scores.confidence[i]:.10g}",
                f"{scores.hybrid[i]:.10g}",
                int(i in selected),
            ])
