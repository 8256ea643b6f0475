"""Training loop, evaluation drivers, checkpoints, metrics emission.

Every run is a pure function of (config, seed, input files): seeds for data
generation, parameter init, shuffling, and dropout are all spawned from the
config seed, so reruns are bit-identical.  Metrics files contain only
deterministic fields; wall-clock timings go to the epoch log.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .config import config_hash
from .data import (Standardizer, SynthSpec, chrono_split, load_cache, load_csv, make_windows,
                   sinusoid_series, spike_anomaly_series, synth_generate)
from .freqops import ExtensionFactors
from .layers import NFM, ModelConfig
from .optim import Adam, cosine_lr
from .tasks import (TaskSpec, anomaly_score, composite_loss, cross_entropy, norm_apply,
                    norm_invert_graph, point_adjust, precision_recall_f1, threshold_by_ratio)

CHECKPOINT_VERSION = "nfm-ckpt-1"


class TrainingDiverged(RuntimeError):
    pass


def _n_workers() -> int:
    try:
        return max(1, int(os.environ.get("NFM_THREADS", "1")))
    except ValueError:
        return 1


def _map_ordered(fn, items):
    """Apply ``fn`` over items with a bounded worker pool, ordered gather."""
    workers = _n_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# dataset assembly


def _flatten_channels(windows: np.ndarray) -> np.ndarray:
    """[num, T, c] -> [num*c, T, 1] for channel-independent modeling."""
    num, t, c = windows.shape
    return windows.transpose(0, 2, 1).reshape(num * c, t, 1)


def task_spec_from_config(cfg: dict) -> TaskSpec:
    t = cfg["task"]
    return TaskSpec(kind=t["kind"], horizon=t.get("horizon", 0), dr=t.get("dr", 1),
                    n_classes=t.get("n_classes", 0), lam=t.get("lambda", 0.5),
                    norm_mode=t.get("norm", "none"))


def build_data(cfg: dict, rng: np.random.Generator) -> dict:
    """Materialize split arrays for the configured task and data source."""
    task = cfg["task"]
    data_cfg = dict(cfg["data"])
    kind = data_cfg["kind"]
    if kind == "cache":
        arrays, extra = load_cache(data_cfg["path"])
        data_cfg = {**extra.get("data", {}), **{k: v for k, v in data_cfg.items() if k != "path"}}
        kind = data_cfg["kind"]
    else:
        arrays = None

    if kind == "synth_classify":
        if arrays is None:
            spec = SynthSpec(
                n_classes=task["n_classes"],
                n_class_freqs=data_cfg.get("n_class_freqs", 20),
                n_random_freqs=data_cfg.get("n_random_freqs", 40),
                n_time=data_cfg.get("n_time", 2000),
                band=tuple(data_cfg.get("band", (320, 590))),
                noise_std=data_cfg.get("noise_std", 0.1),
                samples_per_class=data_cfg.get("samples_per_class", 100),
            )
            signals, labels = synth_generate(spec, rng)
        else:
            signals, labels = arrays["signals"], arrays["labels"].astype(np.int64)
        ratios = tuple(data_cfg.get("splits", (0.7, 0.15, 0.15)))
        order = rng.permutation(signals.shape[0])
        signals, labels = signals[order], labels[order]
        bounds = np.concatenate([[0], np.round(np.cumsum(ratios) * signals.shape[0]).astype(int)])
        splits = {}
        for name, lo, hi in zip(("train", "val", "test"), bounds[:-1], bounds[1:]):
            splits[name] = (signals[lo:hi], labels[lo:hi])
        std = Standardizer.fit(splits["train"][0].reshape(-1, signals.shape[-1]))
        splits = {k: (std.apply(x), y) for k, (x, y) in splits.items()}
        return {"kind": "classify", "splits": splits, "n_input": signals.shape[1],
                "c": signals.shape[2]}

    if kind == "synth_forecast":
        if arrays is None:
            series = sinusoid_series(
                data_cfg.get("length", 3000),
                data_cfg.get("freqs", (1 / 24, 1 / 55, 1 / 130)),
                data_cfg.get("amps", (1.0, 0.7, 0.5)),
                data_cfg.get("phases", (0.0, 1.1, 2.3)),
                data_cfg.get("noise_std", 0.05), rng)
        else:
            series = arrays["series"]
        return _windowed_series_data(series, cfg, data_cfg)

    if kind == "csv":
        series, _ = load_csv(data_cfg["path"], data_cfg.get("columns"))
        if task["kind"] == "classify":
            raise ValueError("csv source provides no labels; classification unsupported")
        return _windowed_series_data(series, cfg, data_cfg)

    if kind == "synth_anomaly":
        if arrays is None:
            train, test, labels = spike_anomaly_series(
                data_cfg.get("n_train", 8000), data_cfg.get("n_test", 4000),
                data_cfg.get("anomaly_rate", 0.01), rng,
                noise_std=data_cfg.get("noise_std", 0.05))
        else:
            train, test, labels = arrays["train"], arrays["test"], arrays["labels"].astype(np.int64)
        n = cfg["data"].get("n", 100)
        std = Standardizer.fit(train)
        train, test = std.apply(train), std.apply(test)
        tr, va = chrono_split(train, (0.8, 0.2))
        splits = {
            "train": make_windows(tr, n, 0, n),
            "val": make_windows(va, n, 0, n),
            "test": make_windows(test, n, 0, n),
        }
        covered = splits["test"].shape[0] * n
        return {"kind": "anomaly", "splits": {k: _flatten_channels(v) for k, v in splits.items()},
                "window_counts": {k: v.shape[0] for k, v in splits.items()},
                "labels": labels[:covered], "n_input": n, "c": train.shape[1]}

    raise ValueError(f"unknown data kind {kind!r}")


def _windowed_series_data(series: np.ndarray, cfg: dict, data_cfg: dict) -> dict:
    n = cfg["data"].get("n", 128)
    horizon = cfg["task"].get("horizon", 0)
    stride = data_cfg.get("stride", 1)
    ratios = tuple(data_cfg.get("splits", (0.6, 0.2, 0.2)))
    segments = chrono_split(series, ratios)
    std = Standardizer.fit(segments[0])
    names = ("train", "val", "test")[: len(segments)]
    splits = {name: _flatten_channels(make_windows(std.apply(seg), n, horizon, stride))
              for name, seg in zip(names, segments)}
    return {"kind": "forecast", "splits": splits, "n_input": n, "horizon": horizon,
            "c": series.shape[1]}


# ---------------------------------------------------------------------------
# per-task forward passes


def model_config_from(cfg: dict, data: dict) -> ModelConfig:
    m = cfg["model"]
    task = cfg["task"]
    if task["kind"] == "classify":
        head, d_y, c = "classify", task["n_classes"], data["c"]
    else:
        head, d_y, c = "pointwise", 1, 1
    return ModelConfig(c=c, d=m["d"], n_blocks=m["n_blocks"], h0=m["h0"], w0=m["w0"],
                       ff_scale=m["ff_scale"], dropout=m["dropout"],
                       proj_width=m.get("proj_width", 0), mlp_hidden=m.get("mlp_hidden", 0),
                       inr_hidden=m["inr_hidden"], head=head, d_y=d_y, dtype=m["dtype"])


def base_factors(task: TaskSpec, data: dict) -> ExtensionFactors:
    return task.factors(data["n_input"] // task.dr if task.kind == "anomaly" else data["n_input"])


def sr_factors(base: ExtensionFactors, inv_sr: int) -> ExtensionFactors:
    return ExtensionFactors(base.m_tau, base.m_f * inv_sr)


def batch_loss(model: NFM, task: TaskSpec, batch, factors: ExtensionFactors,
               train: bool, rng, inv_sr: int = 1):
    """Forward one batch; returns (loss Tensor, prediction ndarray)."""
    if task.kind == "classify":
        x, labels = batch
        if inv_sr > 1:
            x = x[:, ::inv_sr]
        logits = model.forward(x, factors, train=train, rng=rng)
        return cross_entropy(logits, labels), logits.data

    if task.kind == "forecast":
        window = batch
        n = window.shape[1] - task.horizon
        lookback, target = window[:, :n], window
        if inv_sr > 1:
            lookback = lookback[:, ::inv_sr]
        x_norm, stats = norm_apply(lookback, task.norm_mode)
        y = model.forward(x_norm, factors, train=train, rng=rng)
        y = norm_invert_graph(y, stats)
        return composite_loss(y, model._const(target), task.lam), y.data

    window = batch  # anomaly: reconstruct the full window from its decimated input
    inp = window[:, :: task.dr * inv_sr]
    x_norm, stats = norm_apply(inp, task.norm_mode)
    y = model.forward(x_norm, factors, train=train, rng=rng)
    y = norm_invert_graph(y, stats)
    return composite_loss(y, model._const(window), task.lam), y.data


def _batches(n_items: int, batch: int):
    for lo in range(0, n_items, batch):
        yield lo, min(lo + batch, n_items)


# ---------------------------------------------------------------------------
# evaluation


def evaluate(model: NFM, task: TaskSpec, data: dict, split: str, batch_size: int,
             inv_sr: int = 1, anomaly_ratio: float = 1.0) -> dict[str, float]:
    step = task.dr * inv_sr if task.kind == "anomaly" else inv_sr
    if data["n_input"] % step != 0:
        raise ValueError(f"non-integral decimation: input length {data['n_input']} "
                         f"not divisible by {step}")
    factors = base_factors(task, data)
    if inv_sr > 1:
        factors = sr_factors(factors, inv_sr)

    if task.kind == "classify":
        x, labels = data["splits"][split]

        def run(span):
            lo, hi = span
            with ad.no_grad():
                _, logits = batch_loss(model, task, (x[lo:hi], labels[lo:hi]), factors,
                                       False, None, inv_sr)
            return (logits.argmax(axis=1) == labels[lo:hi]).sum()

        hits = sum(_map_ordered(run, list(_batches(x.shape[0], batch_size))))
        return {"accuracy": float(hits / x.shape[0]), "n": float(x.shape[0])}

    if task.kind == "forecast":
        windows = data["splits"][split]
        n = data["n_input"]

        def run(span):
            lo, hi = span
            with ad.no_grad():
                _, pred = batch_loss(model, task, windows[lo:hi], factors, False, None, inv_sr)
            err = pred[:, n:] - windows[lo:hi, n:]
            return np.array([np.sum(err**2), np.sum(np.abs(err)), err.size])

        sums = np.sum(_map_ordered(run, list(_batches(windows.shape[0], batch_size))), axis=0)
        return {"mse": float(sums[0] / sums[2]), "mae": float(sums[1] / sums[2]),
                "n_windows": float(windows.shape[0])}

    # anomaly: scores on the requested split, threshold from the training split
    def split_scores(name):
        windows = data["splits"][name]

        def run(span):
            lo, hi = span
            with ad.no_grad():
                _, recon = batch_loss(model, task, windows[lo:hi], factors, False, None, inv_sr)
            return anomaly_score(windows[lo:hi], recon)

        parts = _map_ordered(run, list(_batches(windows.shape[0], batch_size)))
        return np.concatenate(parts, axis=0)

    scores = split_scores(split)
    threshold = threshold_by_ratio(split_scores("train").reshape(-1), anomaly_ratio)
    metrics = {"threshold": float(threshold), "mean_score": float(scores.mean())}
    if split == "test" and "labels" in data:
        c = data["c"]
        n_win = data["window_counts"]["test"]
        # channel-flattened windows interleave channels; fold back and pool per point
        per_channel = scores.reshape(n_win, c, data["n_input"])
        stream = per_channel.mean(axis=1).reshape(-1)
        pred = stream > threshold
        adjusted = point_adjust(pred, data["labels"].astype(bool))
        metrics.update(precision_recall_f1(adjusted, data["labels"].astype(bool)))
    return metrics


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model: NFM, run_cfg: dict, rng_state: dict | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "run_config": json.dumps(run_cfg, sort_keys=True),
        "config_hash": config_hash(run_cfg),
        "model_config": json.dumps(asdict(model.cfg), sort_keys=True),
        "param_names": json.dumps(list(model.params.keys())),
        "const_names": json.dumps(list(model.consts.keys())),
        "rng_state": json.dumps(rng_state or {}),
    }
    arrays = {f"p:{k}": v.data for k, v in model.params.items()}
    arrays.update({f"c:{k}": v for k, v in model.consts.items()})
    np.savez(path, **payload, **arrays)


def load_checkpoint(path) -> tuple[NFM, dict]:
    with np.load(Path(path), allow_pickle=False) as blob:
        if str(blob["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {blob['version']}")
        run_cfg = json.loads(str(blob["run_config"]))
        stored_hash = str(blob["config_hash"])
        if config_hash(run_cfg) != stored_hash:
            raise ValueError("config-hash mismatch: checkpoint metadata is inconsistent")
        model_cfg = ModelConfig(**json.loads(str(blob["model_config"])))
        model = NFM(model_cfg, seed=0)
        for name in json.loads(str(blob["param_names"])):
            model.params[name].data = blob[f"p:{name}"].astype(model_cfg.np_dtype)
        for name in json.loads(str(blob["const_names"])):
            model.consts[name] = blob[f"c:{name}"]
        model._feature_cache.clear()
    return model, run_cfg


# ---------------------------------------------------------------------------
# training


def train_run(cfg: dict, quiet: bool = True) -> dict:
    """Train per config; writes checkpoint + epoch log + metrics under out_dir."""
    import time

    seed_root = np.random.SeedSequence(cfg["seed"])
    seeds = seed_root.spawn(4)
    rng_data = np.random.default_rng(seeds[0])
    model_seed = int(seeds[1].generate_state(1)[0])
    rng_shuffle = np.random.default_rng(seeds[2])
    rng_dropout = np.random.default_rng(seeds[3])

    task = task_spec_from_config(cfg)
    data = build_data(cfg, rng_data)
    model = NFM(model_config_from(cfg, data), seed=model_seed)
    factors = base_factors(task, data)

    opt_cfg = cfg["optim"]
    optimizer = Adam(model.parameters(), lr=opt_cfg["lr"],
                     weight_decay=opt_cfg.get("weight_decay", 0.0))
    out_dir = Path(cfg.get("out_dir", "runs"))
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"
    ckpt_path = out_dir / "checkpoint.npz"

    if task.kind == "classify":
        x_train, y_train = data["splits"]["train"]
        n_train = x_train.shape[0]
    else:
        x_train = data["splits"]["train"]
        y_train = None
        n_train = x_train.shape[0]

    epochs, batch = opt_cfg["epochs"], opt_cfg["batch"]
    maximize = task.kind == "classify"
    best = -np.inf if maximize else np.inf
    best_vec = model.param_vector()
    best_epoch = -1
    log_lines = []
    with log_path.open("w") as log:
        for epoch in range(epochs):
            t0 = time.monotonic()
            lr = cosine_lr(epoch, epochs - 1, opt_cfg["lr"], opt_cfg["lr_min"]) \
                if opt_cfg["schedule"] == "cosine" else opt_cfg["lr"]
            optimizer.lr = lr
            order = rng_shuffle.permutation(n_train)
            total_loss, n_batches = 0.0, 0
            for lo, hi in _batches(n_train, batch):
                idx = order[lo:hi]
                batch_data = (x_train[idx], y_train[idx]) if maximize else x_train[idx]
                loss, _ = batch_loss(model, task, batch_data, factors, True, rng_dropout)
                if not np.isfinite(loss.data):
                    save_checkpoint(ckpt_path, model, cfg)
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total_loss += loss.item()
                n_batches += 1
            if maximize:
                val = evaluate(model, task, data, "val", batch)
                monitored = val["accuracy"]
            else:
                monitored = _val_loss(model, task, data, batch)
                val = {"loss": monitored}
            record = {"epoch": epoch, "lr": lr, "train_loss": total_loss / max(1, n_batches),
                      "val": val, "monitored": monitored,
                      "seconds": round(time.monotonic() - t0, 3)}
            log.write(json.dumps(record) + "\n")
            log_lines.append(record)
            if not quiet:
                print(json.dumps(record))
            improved = monitored > best if maximize else monitored < best
            if improved:
                best = monitored
                best_vec = model.param_vector()
                best_epoch = epoch
            elif epoch - best_epoch > opt_cfg["patience"]:
                break

    model.load_param_vector(best_vec)
    rng_state = {"shuffle": rng_shuffle.bit_generator.state,
                 "dropout": rng_dropout.bit_generator.state}
    save_checkpoint(ckpt_path, model, cfg, rng_state=rng_state)
    return {"checkpoint": str(ckpt_path), "log": str(log_path), "best": best,
            "best_epoch": best_epoch, "epochs_run": len(log_lines), "model": model,
            "data": data, "task": task}


def _val_loss(model: NFM, task: TaskSpec, data: dict, batch_size: int) -> float:
    windows = data["splits"]["val"]
    factors = base_factors(task, data)
    total, count = 0.0, 0
    for lo, hi in _batches(windows.shape[0], batch_size):
        with ad.no_grad():
            loss, _ = batch_loss(model, task, windows[lo:hi], factors, False, None)
        total += loss.item() * (hi - lo)
        count += hi - lo
    return total / max(1, count)


# ---------------------------------------------------------------------------
# metrics emission


def metrics_lines(task_kind: str, seed: int, cfg_hash: str, metrics: dict[str, float]) -> str:
    lines = [json.dumps({"task": task_kind, "seed": seed, "config_hash": cfg_hash,
                         "metric": k, "value": v}, sort_keys=True)
             for k, v in sorted(metrics.items())]
    return "\n".join(lines) + "\n"


def write_metrics(path, task_kind: str, seed: int, cfg_hash: str, metrics: dict[str, float]) -> str:
    text = metrics_lines(task_kind, seed, cfg_hash, metrics)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return text
