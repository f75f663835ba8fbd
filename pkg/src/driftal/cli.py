"""Command-line entry point.

Subcommands: synth | train | stream | ablate | bench | noise | report.
Configuration comes from a JSON file (--config) with flag overrides;
flags win. Every command writes a run.json with the fully resolved
configuration, seeds, and output hashes.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data as dio
from . import metrics as met
from .augment import AugmentConfig, AugmentConfigError
from .experiment import Experiment, ExperimentSetup
from .losses import LossConfig
from .net import NumericError
from .selection import SelectorConfig
from .stream import aggregate_runs
from .trainer import TrainConfig, build_model, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULT_OUT_ENV = "DRIFTAL_OUT"


class ConfigError(ValueError):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None


def _build(cls, cfg, path):
    try:
        return cls(**cfg)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from None
    except (ValueError, AugmentConfigError) as e:
        raise ConfigError(f"{path}: {e}") from None


def _train_config(cfg, seed=0):
    cfg = dict(cfg)
    loss = _build(LossConfig, cfg.pop("loss", {}), "train.loss")
    augment = _build(AugmentConfig, cfg.pop("augment", {}), "train.augment")
    if "hidden" in cfg:
        cfg["hidden"] = tuple(cfg["hidden"])
    tc = _build(TrainConfig, cfg, "train")
    return replace(tc, loss=loss, augment=augment, seed=seed)


def _selector_config(cfg):
    return _build(SelectorConfig, dict(cfg), "stream.selector")


def _out_dir(args, config):
    out = args.out or config.get("out") or os.environ.get(DEFAULT_OUT_ENV)
    if not out:
        raise ConfigError("no output directory: use --out, config 'out', "
                          f"or ${DEFAULT_OUT_ENV}")
    return Path(out)


def _seeds(args, config):
    if args.seed is not None:
        return [args.seed]
    return list(config.get("seeds", [config.get("seed", 0)]))


def _hash_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_run_json(out_dir, command, resolved, seeds, artifacts):
    payload = {
        "command": command,
        "config": resolved,
        "seeds": seeds,
        "artifacts": {
            str(p.relative_to(out_dir)): _hash_file(p) for p in artifacts
        },
    }
    (out_dir / "run.json").write_text(json.dumps(payload, indent=2, default=str))


def _setup_from_config(config, seed):
    """Build an ExperimentSetup from the dataset/generator + split sections."""
    has_path = "dataset" in config
    has_gen = "generator" in config
    if has_path == has_gen:
        raise ConfigError("exactly one of 'dataset' or 'generator' is required")
    if has_path:
        try:
            _, dataset = dio.load_dataset(config["dataset"])
        except dio.DataError:
            raise
    else:
        gen = _build(dio.DriftGeneratorConfig, dict(config["generator"]), "generator")
        dataset = dio.synth_drift_generate(gen)
    split = config.get("split", {})
    months = dataset.months()
    if "train" in split:
        train_months = dio.parse_period(split["train"])
        stream_period = split.get("stream")
        stream_months = (
            dio.parse_period(stream_period)
            if stream_period
            else [m for m in months if m not in set(train_months)]
        )
    else:
        k = int(split.get("train_months", 2))
        train_months, stream_months = months[:k], months[k:]
    stream_cfg = config.get("stream", {})
    return ExperimentSetup(
        dataset=dataset,
        train_months=train_months,
        stream_months=stream_months,
        label_ratio=float(config.get("label_ratio", 0.4)),
        noise_rate=float(config.get("noise_rate", 0.0)),
        train_cfg=_train_config(config.get("train", {}), seed=seed),
        retrain_epochs=int(stream_cfg.get("retrain_epochs", 10)),
        warm_start=bool(stream_cfg.get("warm_start", True)),
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args, config):
    out_dir = _out_dir(args, config)
    gen_cfg = dict(config.get("generator", {}))
    if args.seed is not None:
        gen_cfg["seed"] = args.seed
    gen = _build(dio.DriftGeneratorConfig, gen_cfg, "generator")
    dataset = dio.synth_drift_generate(gen)
    out_dir.mkdir(parents=True, exist_ok=True)
    dio.save_dataset(dataset, out_dir / "dataset", fmt=config.get("format", "binary"))
    artifacts = sorted((out_dir / "dataset").glob("*"))
    _write_run_json(out_dir, "synth", {"generator": vars(gen)}, [gen.seed], artifacts)
    print(f"wrote {len(dataset.records)} records over {len(dataset.months())} "
          f"months to {out_dir / 'dataset'}")
    return EXIT_OK


def cmd_train(args, config):
    out_dir = _out_dir(args, config)
    seeds = _seeds(args, config)
    if args.label_ratio is not None:
        config = {**config, "label_ratio": args.label_ratio}
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for seed in seeds:
        setup = _setup_from_config(config, seed)
        exp = Experiment(setup)
        model, _, _, report = exp.initial_fit(seed)
        ckpt = out_dir / f"checkpoint_seed{seed}.npz"
        model.save(ckpt)
        rpath = out_dir / f"train_report_seed{seed}.json"
        rpath.write_text(json.dumps(report.to_dict(), indent=2))
        artifacts += [ckpt, rpath]
        print(f"seed {seed}: final total loss "
              f"{report.epoch_losses[-1].total:.6f} -> {ckpt}")
    _write_run_json(out_dir, "train", config, seeds, artifacts)
    return EXIT_OK


def _apply_stream_flags(args, config):
    stream = dict(config.get("stream", {}))
    if args.budget is not None:
        stream["budget"] = args.budget
    if args.selector is not None:
        stream.setdefault("selector", {})
        stream["selector"] = {**stream["selector"], "kind": args.selector}
    return {**config, "stream": stream}


def cmd_stream(args, config):
    config = _apply_stream_flags(args, config)
    out_dir = _out_dir(args, config)
    seeds = _seeds(args, config)
    if args.label_ratio is not None:
        config = {**config, "label_ratio": args.label_ratio}
    stream_cfg = config.get("stream", {})
    budget = int(stream_cfg.get("budget", 50))
    selector = _selector_config(stream_cfg.get("selector", {}))
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []
    results = []
    for seed in seeds:
        setup = _setup_from_config(config, seed)
        exp = Experiment(setup)
        result = exp.run(selector, budget, seed)
        results.append(result)
        paths = met.emit_report(
            result, out_dir / f"seed{seed}", fmt="both",
            config_hash=hashlib.sha256(
                json.dumps(config, sort_keys=True, default=str).encode()
            ).hexdigest(),
            seeds=[seed],
        )
        artifacts += paths
        print(f"seed {seed}: mean F1 "
              f"{'n/a' if result.f1_mean is None else f'{result.f1_mean:.3f}'}")
    agg = aggregate_runs(results)
    apath = out_dir / "aggregate.json"
    apath.write_text(json.dumps(agg, indent=2))
    artifacts.append(apath)
    _write_run_json(out_dir, "stream", config, seeds, artifacts)
    return EXIT_OK


def cmd_ablate(args, config):
    out_dir = _out_dir(args, config)
    seeds = _seeds(args, config)
    ablate = config.get("ablate", {})
    kinds = ablate.get(
        "selectors",
        ["multi_criteria", "margin_only", "lp_only", "low_confidence_only", "random"],
    )
    budgets = [int(b) for b in (args.budgets or ablate.get("budgets", [50]))]
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []
    rows = []
    exps = {seed: Experiment(_setup_from_config(config, seed)) for seed in seeds}
    for kind in kinds:
        selector = _selector_config({"kind": kind})
        for budget in budgets:
            runs = [exps[seed].run(selector, budget, seed) for seed in seeds]
            f1 = aggregate_runs(runs)["f1"]
            rows.append({
                "selector": kind, "budget": budget,
                "f1_mean": f1[0], "f1_std": f1[1],
                "runs": [r.to_dict() for r in runs],
            })
            print(f"{kind:>20s} budget {budget:4d}: mean F1 "
                  f"{'n/a' if f1[0] is None else f'{f1[0]:.3f}'}")
    mpath = out_dir / "ablation.json"
    mpath.write_text(json.dumps(rows, indent=2))
    artifacts.append(mpath)
    _write_run_json(out_dir, "ablate", config, seeds, artifacts)
    return EXIT_OK


def cmd_bench(args, config):
    out_dir = _out_dir(args, config)
    bench_cfg = dict(config.get("bench", {}))
    n_list = [int(n) for n in (args.sizes or bench_cfg.get(
        "sizes", [100, 1000, 5000, 10000, 50000, 100000, 500000]
    ))]
    budget = args.budget if args.budget is not None else bench_cfg.get("budget", 400)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = met.bench(
        n_list,
        budget=int(budget),
        dim=int(bench_cfg.get("dim", 100)),
        hidden=tuple(bench_cfg.get("hidden", (32, 16))),
        batch=int(bench_cfg.get("batch", 10)),
        seed=_seeds(args, config)[0],
    )
    path = met.write_bench_csv(records, out_dir / "bench.csv")
    for r in records:
        print(f"n={r.sample_count:>7d}  {r.seconds:8.3f}s  {r.operations:>15d} ops")
    _write_run_json(out_dir, "bench", config, _seeds(args, config), [path])
    return EXIT_OK


def cmd_noise(args, config):
    config = _apply_stream_flags(args, config)
    out_dir = _out_dir(args, config)
    seeds = _seeds(args, config)
    rates = [float(r) for r in config.get(
        "noise_rates", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    )]
    stream_cfg = config.get("stream", {})
    budget = int(stream_cfg.get("budget", 50))
    selector = _selector_config(stream_cfg.get("selector", {}))
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for rate in rates:
        rate_cfg = {**config, "noise_rate": rate}
        runs = []
        for seed in seeds:
            exp = Experiment(_setup_from_config(rate_cfg, seed))
            runs.append(exp.run(selector, budget, seed))
        f1 = aggregate_runs(runs)["f1"]
        rows.append({"noise_rate": rate, "f1_mean": f1[0], "f1_std": f1[1]})
        print(f"noise {rate:4.0%}: mean F1 "
              f"{'n/a' if f1[0] is None else f'{f1[0]:.3f}'}")
    path = out_dir / "noise_sweep.json"
    path.write_text(json.dumps(rows, indent=2))
    _write_run_json(out_dir, "noise", config, seeds, [path])
    return EXIT_OK


def cmd_report(args, config):
    src = Path(args.result or config.get("result", ""))
    if not src.exists():
        raise dio.DataError(f"result file not found: {src}")
    payload = json.loads(src.read_text())
    out_dir = _out_dir(args, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    dest = out_dir / "result.csv"
    import csv

    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(met.REPORT_COLUMNS)
        for mm, sel_ids in zip(payload["monthly"], payload["selected_ids"]):
            w.writerow([
                mm["month"], mm["tp"], mm["fp"], mm["tn"], mm["fn"],
                met._fmt_pct(mm["f1"]), met._fmt_pct(mm["fnr"]),
                met._fmt_pct(mm["fpr"]), len(sel_ids),
            ])
    print(f"wrote {dest}")
    _write_run_json(out_dir, "report", config, [], [dest])
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="driftal",
        description="Drift-adaptive semi-supervised active learning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "synth": cmd_synth,
        "train": cmd_train,
        "stream": cmd_stream,
        "ablate": cmd_ablate,
        "bench": cmd_bench,
        "noise": cmd_noise,
        "report": cmd_report,
    }
    for name, fn in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="single seed override")
        p.add_argument("--budget", type=int, help="labeling budget per month")
        p.add_argument("--selector", choices=[
            "multi_criteria", "margin_only", "lp_only",
            "low_confidence_only", "random",
        ])
        p.add_argument("--label-ratio", type=float, dest="label_ratio")
        p.add_argument("--budgets", type=int, nargs="*", help="ablation budgets")
        p.add_argument("--sizes", type=int, nargs="*", help="bench pool sizes")
        p.add_argument("--result", help="result.json to convert (report)")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.fn(args, config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except dio.DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
