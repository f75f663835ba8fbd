"""The three training loss terms and their weighted combination.

Supervised cross-entropy on labeled batches, confidence-thresholded
consistency between weak and strong views of unlabeled batches, and a
temperature-scaled supervised contrastive loss on labeled embeddings.
Every loss returns both its value and an analytic gradient so the trainer
never needs numeric differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import softmax

_CLAMP = 1e-12


class EmptyBatchError(ValueError):
    pass


class DegenerateBatchError(ValueError):
    pass


@dataclass(frozen=True)
class LossConfig:
    confidence_threshold: float = 0.95
    lambda_u: float = 1.0
    lambda_con: float = 0.5
    contrastive_temperature: float = 0.07
    normalize_embeddings: bool = True

    def __post_init__(self):
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in (0, 1]")
        if self.lambda_u < 0 or self.lambda_con < 0:
            raise ValueError("loss weights must be non-negative")
        if self.contrastive_temperature <= 0:
            raise ValueError("contrastive_temperature must be positive")


@dataclass
class LossBreakdown:
    sup: float
    unsup: float
    con: float
    total: float
    confident_count: int


def supervised_ce(probs, labels):
    """Mean cross-entropy over the batch.

    Returns (loss, d_logits) where d_logits is the gradient w.r.t. the
    logits that produced ``probs`` via softmax.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(probs) == 0:
        raise EmptyBatchError("supervised_ce on empty batch")
    if len(probs) != len(labels):
        raise ValueError("probs and labels length mismatch")
    n = len(probs)
    picked = np.clip(probs[np.arange(n), labels], _CLAMP, 1.0)
    loss = float(-np.log(picked).mean())
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0
    d_logits = (probs - onehot) / n
    return loss, d_logits


def consistency_loss(weak_probs, strong_logits, threshold):
    """FixMatch-style pseudo-label consistency term.

    Samples whose weak-view max probability reaches the threshold
    contribute CE between the strong-view prediction and the weak-view
    argmax; the sum is divided by the TOTAL unlabeled batch size, not by
    the confident count. The pseudo-label carries no gradient.

    Returns (loss, confident_count, d_strong_logits).
    """
    weak_probs = np.asarray(weak_probs, dtype=np.float64)
    strong_logits = np.asarray(strong_logits, dtype=np.float64)
    if len(weak_probs) != len(strong_logits):
        raise ValueError("weak/strong batch length mismatch")
    n = len(weak_probs)
    if n == 0:
        return 0.0, 0, np.zeros_like(strong_logits)
    conf_mask = weak_probs.max(axis=1) >= threshold
    count = int(conf_mask.sum())
    pseudo = weak_probs.argmax(axis=1)
    strong_probs = softmax(strong_logits)
    picked = np.clip(strong_probs[np.arange(n), pseudo], _CLAMP, 1.0)
    loss = float((-np.log(picked) * conf_mask).sum() / n)
    onehot = np.zeros_like(strong_probs)
    onehot[np.arange(n), pseudo] = 1.0
    d_logits = conf_mask[:, None] * (strong_probs - onehot) / n
    return loss, count, d_logits


def supervised_contrastive(embeddings, labels, temperature, normalize=True):
    """Temperature-scaled contrastive loss over labeled embeddings.

    Positives for an anchor are the other same-label samples; anchors
    with no positive contribute zero. Embeddings are L2-normalized
    before the dot products unless ``normalize`` is False.

    Returns (loss, d_embeddings) with the gradient taken w.r.t. the raw
    (pre-normalization) embeddings.
    """
    E = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(E)
    if n < 2:
        raise DegenerateBatchError("contrastive loss needs at least 2 samples")
    if len(labels) != n:
        raise ValueError("embeddings and labels length mismatch")
    if normalize:
        norms = np.linalg.norm(E, axis=1, keepdims=True)
        norms = np.maximum(norms, _CLAMP)
        Z = E / norms
    else:
        Z = E
    t = float(temperature)
    S = (Z @ Z.T) / t
    np.fill_diagonal(S, -np.inf)  # exclude the anchor from its denominator
    pos = (labels[:, None] == labels[None, :]) & ~np.eye(n, dtype=bool)
    pos_counts = pos.sum(axis=1)
    valid = pos_counts > 0

    # log softmax over each row's off-diagonal entries
    row_max = S.max(axis=1, keepdims=True)
    expS = np.exp(S - row_max)
    denom = expS.sum(axis=1, keepdims=True)
    log_prob = (S - row_max) - np.log(denom)

    pos_log_prob = np.where(pos, log_prob, 0.0)  # diagonal log_prob is -inf
    per_anchor = np.zeros(n)
    per_anchor[valid] = -pos_log_prob[valid].sum(axis=1) / pos_counts[valid]
    loss = float(per_anchor.sum() / n)

    # gradient of the similarity matrix
    soft = expS / denom
    G = np.zeros_like(S)
    G[valid] = (soft[valid] - pos[valid] / pos_counts[valid, None]) / n
    np.fill_diagonal(G, 0.0)
    dZ = ((G + G.T) @ Z) / t
    if normalize:
        dE = (dZ - (dZ * Z).sum(axis=1, keepdims=True) * Z) / norms
    else:
        dE = dZ
    return loss, dE


def total_loss(sup, unsup, con, cfg, confident_count=0):
    """Combine the three terms with the configured weights."""
    for name, v in (("sup", sup), ("unsup", unsup), ("con", con)):
        if not np.isfinite(v):
            raise FloatingPointError(f"non-finite {name} loss component: {v}")
    total = sup + cfg.lambda_u * unsup + cfg.lambda_con * con
    return LossBreakdown(
        sup=float(sup),
        unsup=float(unsup),
        con=float(con),
        total=float(total),
        confident_count=int(confident_count),
    )
