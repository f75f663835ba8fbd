"""Budgeted active labeling on the monthly stream.

Replays a 12-month drifting stream under the test-then-train protocol:
each month is scored before joining the unlabeled pool, the selector
picks a fixed budget of samples for oracle labeling, and the model is
warm-start retrained. Compares the multi-criteria selector (margin +
embedding distance + low confidence) against random selection and the
static no-labeling baseline.

Run: python3 demos/03_active_stream.py
"""

from driftal import (
    Experiment,
    SelectorConfig,
    default_synthetic_setup,
)

setup = default_synthetic_setup(seed=0, stream_months=12, label_ratio=0.1,
                                epochs=10, retrain_epochs=2, hidden=(32, 16))
exp = Experiment(setup)

runs = {
    "static (budget 0)": exp.run(SelectorConfig(), 0, seed=0),
    "random, budget 50": exp.run(SelectorConfig(kind="random"), 50, seed=0),
    "multi-criteria, budget 50": exp.run(SelectorConfig(), 50, seed=0),
    "multi-criteria, budget 200": exp.run(SelectorConfig(), 200, seed=0),
}

print(f"{'selector':<28} {'mean F1':>8} {'std':>7} {'mean FNR':>9}")
for name, result in runs.items():
    print(f"{name:<28} {result.f1_mean:8.3f} {result.f1_std:7.3f} "
          f"{result.fnr_mean:9.3f}")

mc = runs["multi-criteria, budget 50"]
print("\nper-month F1 for the budget-50 multi-criteria run:")
print("  " + "  ".join(f"{m.month[-2:]}:{m.f1:.2f}" for m in mc.monthly))
print("\nA handful of well-chosen labels per month keeps the model on top of "
      "the drift; random selection wastes budget on samples the model "
      "already handles.")
