"""Command-line harness: train, eval, eval-sr, dump-filter, gradcheck, synth."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import config_hash, load_config
from .data import save_cache, sinusoid_series, spike_anomaly_series, synth_generate, SynthSpec
from .diagnostics import GRADCHECK_TOL, component_gradchecks
from .train import (base_factors, build_data, evaluate, load_checkpoint, metrics_lines,
                    sr_factors, task_spec_from_config, train_run, write_metrics)


def _load_with_overrides(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out_dir"] = args.out
    return cfg


def cmd_train(args) -> int:
    cfg = _load_with_overrides(args)
    result = train_run(cfg, quiet=args.quiet)
    print(json.dumps({"checkpoint": result["checkpoint"], "log": result["log"],
                      "best": result["best"], "best_epoch": result["best_epoch"],
                      "epochs_run": result["epochs_run"]}))
    return 0


def _setup_eval(args):
    model, run_cfg = load_checkpoint(args.checkpoint)
    if args.config is not None:
        given = load_config(args.config)
        if config_hash(given) != config_hash(run_cfg):
            raise ValueError("config-hash mismatch between --config and checkpoint")
    task = task_spec_from_config(run_cfg)
    rng_data = np.random.default_rng(np.random.SeedSequence(run_cfg["seed"]).spawn(4)[0])
    data = build_data(run_cfg, rng_data)
    return model, run_cfg, task, data


def cmd_eval(args, inv_sr: int = 1) -> int:
    model, run_cfg, task, data = _setup_eval(args)
    metrics = evaluate(model, task, data, args.split, run_cfg["optim"]["batch"],
                       inv_sr=inv_sr, anomaly_ratio=run_cfg["task"].get("anomaly_ratio", 1.0))
    if inv_sr > 1:
        metrics["inv_sr"] = float(inv_sr)
    text = metrics_lines(task.kind, run_cfg["seed"], config_hash(run_cfg), metrics)
    if args.out is not None:
        name = "metrics.json" if inv_sr == 1 else f"metrics_sr_1_{inv_sr}.json"
        write_metrics(Path(args.out) / name, task.kind, run_cfg["seed"],
                      config_hash(run_cfg), metrics)
    sys.stdout.write(text)
    return 0


def cmd_eval_sr(args) -> int:
    sr = Fraction(args.sr)
    if not 0 < sr <= 1:
        raise ValueError(f"sampling-rate ratio must be in (0, 1], got {sr}")
    if sr.numerator != 1:
        raise ValueError(f"sampling-rate ratio must be 1/q with integer q, got {sr}")
    return cmd_eval(args, inv_sr=sr.denominator)


def cmd_dump_filter(args) -> int:
    model, run_cfg, task, data = _setup_eval(args)
    factors = base_factors(task, data)
    split = data["splits"][args.split]
    x = split[0][: args.probes] if task.kind == "classify" else split[: args.probes]
    if task.kind == "forecast":
        x = x[:, : data["n_input"]]
    elif task.kind == "anomaly":
        x = x[:, :: task.dr]
    mags = model.filter_magnitudes(x, factors)  # one [K_L, d] array per block
    out_path = Path(args.out or "filters.csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    d = mags[0].shape[1]
    header = (["k"] + [f"block{b}_mean" for b in range(len(mags))]
              + ["mean_all"] + [f"block0_c{j}" for j in range(d)])
    mean_all = np.mean([m.mean(axis=1) for m in mags], axis=0)
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(mags[0].shape[0]):
            row = [k] + [float(m[k].mean()) for m in mags] + [float(mean_all[k])] \
                + [float(v) for v in mags[0][k]]
            writer.writerow(row)
    print(json.dumps({"filters_csv": str(out_path), "rows": int(mags[0].shape[0]),
                      "blocks": len(mags)}))
    return 0


def cmd_gradcheck(args) -> int:
    results = component_gradchecks(seed=args.seed if args.seed is not None else 0)
    worst = 0.0
    for name, err in results.items():
        status = "ok" if err < GRADCHECK_TOL else "FAIL"
        print(f"{name:36s} {err:12.3e}  {status}")
        worst = max(worst, err)
    print(f"{'worst':36s} {worst:12.3e}")
    return 0 if worst < GRADCHECK_TOL else 1


def cmd_synth(args) -> int:
    cfg = _load_with_overrides(args)
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"]).spawn(4)[0])
    data_cfg = cfg["data"]
    kind = data_cfg["kind"]
    if kind == "synth_classify":
        spec = SynthSpec(
            n_classes=cfg["task"]["n_classes"],
            n_class_freqs=data_cfg.get("n_class_freqs", 20),
            n_random_freqs=data_cfg.get("n_random_freqs", 40),
            n_time=data_cfg.get("n_time", 2000),
            band=tuple(data_cfg.get("band", (320, 590))),
            noise_std=data_cfg.get("noise_std", 0.1),
            samples_per_class=data_cfg.get("samples_per_class", 100),
        )
        signals, labels = synth_generate(spec, rng)
        arrays = {"signals": signals, "labels": labels.astype(np.int64)}
    elif kind == "synth_forecast":
        series = sinusoid_series(data_cfg.get("length", 3000),
                                 data_cfg.get("freqs", (1 / 24, 1 / 55, 1 / 130)),
                                 data_cfg.get("amps", (1.0, 0.7, 0.5)),
                                 data_cfg.get("phases", (0.0, 1.1, 2.3)),
                                 data_cfg.get("noise_std", 0.05), rng)
        arrays = {"series": series}
    elif kind == "synth_anomaly":
        train, test, labels = spike_anomaly_series(
            data_cfg.get("n_train", 8000), data_cfg.get("n_test", 4000),
            data_cfg.get("anomaly_rate", 0.01), rng,
            noise_std=data_cfg.get("noise_std", 0.05))
        arrays = {"train": train, "test": test, "labels": labels.astype(np.int64)}
    else:
        raise ValueError(f"synth command cannot materialize data kind {kind!r}")
    out = Path(args.out or "dataset.bin")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_cache(out, arrays, extra={"data": data_cfg})
    print(json.dumps({"cache": str(out), "sections": sorted(arrays)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="run config JSON path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory/path")

    p = sub.add_parser("train", help="train a model from a run config")
    common(p)
    p.add_argument("--quiet", action="store_true", help="suppress per-epoch stdout")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    common(p, config_required=False)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("eval-sr", help="evaluate at a reduced sampling rate")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sr", required=True, help="sampling-rate ratio, e.g. 1/2")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    common(p, config_required=False)
    p.set_defaults(fn=cmd_eval_sr)

    p = sub.add_parser("dump-filter", help="write per-bin filter magnitudes to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--probes", type=int, default=8, help="probe instances to average over")
    common(p, config_required=False)
    p.set_defaults(fn=cmd_dump_filter)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op/layer/loss")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("synth", help="materialize a synthetic dataset cache")
    common(p)
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
