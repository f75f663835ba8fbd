"""Confusion-matrix metrics, multi-run aggregation, and report emission.

Undefined ratios (no positives or no negatives in a month) are explicit
``None`` markers, excluded from aggregates rather than propagated as NaN.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class MonthlyMetrics:
    month: str
    tp: int
    fp: int
    tn: int
    fn: int
    f1: float | None
    fnr: float | None
    fpr: float | None

    def to_dict(self):
        return vars(self).copy()


def compute_metrics(predictions, truths, month=""):
    """Exact confusion counts and F1/FNR/FPR for one evaluation batch."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths length mismatch")
    tp = int(((predictions == 1) & (truths == 1)).sum())
    fp = int(((predictions == 1) & (truths == 0)).sum())
    tn = int(((predictions == 0) & (truths == 0)).sum())
    fn = int(((predictions == 0) & (truths == 1)).sum())
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else None
    fnr = fn / (fn + tp) if (fn + tp) > 0 else None
    fpr = fp / (fp + tn) if (fp + tn) > 0 else None
    return MonthlyMetrics(month, tp, fp, tn, fn, f1, fnr, fpr)


def aggregate(values):
    """Mean and sample standard deviation, skipping None entries.

    Returns (mean, std); a single defined value has std 0, and no defined
    values at all yields (None, None).
    """
    defined = [v for v in values if v is not None]
    if not defined:
        return None, None
    mean = float(np.mean(defined))
    std = float(np.std(defined, ddof=1)) if len(defined) > 1 else 0.0
    return mean, std


REPORT_COLUMNS = ["month", "tp", "fp", "tn", "fn", "f1", "fnr", "fpr", "n_selected"]


def _fmt_pct(v):
    return "" if v is None else f"{100.0 * v:.1f}"


def emit_report(result, out_dir, fmt="json", config_hash="", seeds=()):
    """Write a StreamResult to disk as JSON and/or per-month CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    payload = result.to_dict()
    payload["config_hash"] = config_hash
    payload["seeds"] = list(seeds)
    if fmt in ("json", "both"):
        p = out_dir / "result.json"
        p.write_text(json.dumps(payload, indent=2))
        paths.append(p)
    if fmt in ("csv", "both"):
        p = out_dir / "result.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_COLUMNS)
            for mm, sel in zip(result.monthly, result.selected_ids):
                w.writerow([
                    mm.month, mm.tp, mm.fp, mm.tn, mm.fn,
                    _fmt_pct(mm.f1), _fmt_pct(mm.fnr), _fmt_pct(mm.fpr),
                    len(sel),
                ])
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# operation counting and the scaling benchmark
# ---------------------------------------------------------------------------


def forward_ops(architecture, batch):
    """Multiply-accumulate count for one batched forward pass."""
    return sum(
        batch * (2 * s.input_dim * s.output_dim + s.output_dim)
        for s in architecture
    )


def backward_ops(architecture, batch):
    """Analytic count for backprop: dW and d_input matmuls per layer."""
    total = 0
    for i, s in enumerate(architecture):
        total += batch * 2 * s.input_dim * s.output_dim  # dW = delta^T @ input
        if i > 0:
            total += batch * 2 * s.input_dim * s.output_dim  # d_input = delta @ W
    return total


def distance_ops(n_pool, n_labeled, dim):
    """Ops for brute-force pairwise Lp distances."""
    return n_pool * n_labeled * (3 * dim)


def train_step_ops(architecture, labeled_batch, unlabeled_batch):
    """One combined step: labeled fwd+bwd, weak fwd, strong fwd+bwd."""
    ops = forward_ops(architecture, labeled_batch)
    ops += backward_ops(architecture, labeled_batch)
    ops += forward_ops(architecture, unlabeled_batch)  # weak views
    ops += forward_ops(architecture, unlabeled_batch)  # strong views
    ops += backward_ops(architecture, unlabeled_batch)
    return ops


@dataclass
class BenchRecord:
    sample_count: int
    seconds: float
    operations: int

    def to_dict(self):
        return vars(self).copy()


def _bench_epoch(model, opt, Xl, yl, Xu, aug_cfg, loss_cfg, batch, rng):
    """One pass over the whole unlabeled pool, labeled batches cycled."""
    from . import augment as aug
    from .trainer import step_loss_and_grads

    n_lab = len(Xl)
    steps = int(np.ceil(len(Xu) / batch))
    for s in range(steps):
        lab = np.arange(s * batch, (s + 1) * batch) % n_lab
        Bu = Xu[s * batch : (s + 1) * batch]
        Xw = aug.weak_view(Bu, aug_cfg, rng)
        Xs = aug.strong_view(Bu, aug_cfg, rng)
        _, grads = step_loss_and_grads(model, Xl[lab], yl[lab], Xw, Xs, loss_cfg)
        opt.step(model, grads)
    return steps


def bench(n_list, budget=400, dim=100, hidden=(32, 16), batch=10, seed=0):
    """Time one training epoch plus one selection+retrain epoch per pool size.

    The labeled set is fixed at ``budget`` samples and an epoch is one
    pass over the n-sample pool, so both runtime and the analytic
    operation count grow linearly with n. Pools are random binary data;
    operation counts are derived from layer shapes, reproducible
    independently of wall clock.
    """
    import time

    from . import augment as aug
    from . import selection as sel
    from .losses import LossConfig
    from .net import Optimizer
    from .trainer import TrainConfig, build_model

    records = []
    aug_cfg = aug.AugmentConfig()
    loss_cfg = LossConfig()
    n_lab = max(2, budget)
    for n in n_list:
        n = int(n)
        rng = np.random.default_rng(seed)
        X = (rng.random((n + n_lab, dim)) < 0.3).astype(np.uint8)
        y = rng.integers(0, 2, size=n + n_lab)
        # pool size is exactly n; the labeled set is constant across sizes,
        # and tiny pools cap the effective budget so the retrain epoch
        # still covers nearly the whole pool
        budget_eff = min(budget, n // 10)
        Xl, yl, Xu = X[:n_lab], y[:n_lab], X[n_lab:]
        cfg = TrainConfig(hidden=hidden, seed=seed)
        model = build_model(dim, cfg)
        opt = Optimizer()
        t0 = time.perf_counter()
        steps1 = _bench_epoch(model, opt, Xl, yl, Xu, aug_cfg, loss_cfg, batch, rng)
        sel_cfg = sel.SelectorConfig()
        chosen, _ = sel.select(Xu, model, model.embed_batch(Xl), sel_cfg, budget_eff)
        keep = np.ones(len(Xu), dtype=bool)
        keep[chosen] = False
        Xl2 = np.concatenate([Xl, Xu[~keep]])
        yl2 = np.concatenate([yl, y[n_lab:][~keep]])
        steps2 = _bench_epoch(
            model, opt, Xl2, yl2, Xu[keep], aug_cfg, loss_cfg, batch, rng
        )
        elapsed = time.perf_counter() - t0

        arch = model.architecture
        ops = (steps1 + steps2) * train_step_ops(arch, batch, batch)
        ops += forward_ops(arch, len(Xu)) * 2  # scoring: probs + embeddings
        ops += distance_ops(len(Xu), n_lab, model.embedding_dim)
        records.append(BenchRecord(n, elapsed, int(ops)))
    return records


def write_bench_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_count", "seconds", "operations"])
        for r in records:
            w.writerow([r.sample_count, f"{r.seconds:.6f}", r.operations])
    return path
