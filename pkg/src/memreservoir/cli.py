"""Command-line orchestration: runtime sweeps, classification experiments,
the filtering demo, hyperparameter evolution, and the invariant suite.

Every command is deterministic given its flags and seed(s), wall-clock fields
aside. Each run writes one machine-readable JSON report plus a human-readable
text summary (and a flat CSV for sweep curves); report files carry the exact
configuration needed to reproduce them and are never overwritten.

Exit codes: 0 success, 1 property or experiment failure, 2 usage error.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import platform
import sys
import time

import click
import numpy as np
import torch

from . import checks, rng
from .artifacts import save_artifact
from .data import TimeSeriesBatch, load_ts, normalize, synth_random_uniform
from .dynamics import DynamicsScalars
from .errors import MemReservoirError
from .evolve import EvoConfig, evolve as run_evolution
from .models import (
    EsnConfig,
    MarsConfig,
    MfEsnConfig,
    filter_cascade,
    init_esn,
    init_mars,
    init_mf_esn,
    esn_forward,
    mars_forward,
    mars_forward_full,
    mf_esn_forward,
)
from .readout import accuracy as readout_accuracy, fit_ridge

TABLE_GRID = [50, 100, 1_000, 10_000, 100_000, 500_000]
OUT_ENV_VAR = "MEMRESERVOIR_OUT"

_DTYPES = {"f32": torch.float32, "f64": torch.float64}


def _common_options(f):
    f = click.option("--out", default=None, help=f"output directory (default ${OUT_ENV_VAR} or ./results)")(f)
    f = click.option("--seed", default=0, type=int, show_default=True)(f)
    f = click.option(
        "--precision", type=click.Choice(["f32", "f64"]), default="f64", show_default=True
    )(f)
    f = click.option("--threads", default=None, type=int, help="torch intra-op thread count")(f)
    return f


def _setup(out: str | None, threads: int | None) -> str:
    if threads is not None:
        torch.set_num_threads(threads)
    out = out or os.environ.get(OUT_ENV_VAR) or "results"
    os.makedirs(out, exist_ok=True)
    return out


def _run_stamp() -> str:
    return time.strftime("%Y%m%d-%H%M%S") + f"-{os.getpid()}"


def _hardware_note() -> str:
    return (
        f"{platform.machine()} {platform.system()}, {os.cpu_count()} cpu(s), "
        f"{torch.get_num_threads()} torch thread(s)"
    )


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
    click.echo(f"wrote {path}")


def _write_text(path: str, lines: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(f"wrote {path}")


@click.group()
def main():
    """Memristive reservoir benchmarks and experiments."""


# ---------------------------------------------------------------------------
# bench-runtime
# ---------------------------------------------------------------------------


def _is_oom(exc: BaseException) -> bool:
    if isinstance(exc, MemoryError):
        return True
    text = str(exc).lower()
    return "memory" in text or "alloc" in text


def _bench_forward(model_name, hidden, layers, channels, seed, dtype):
    if model_name == "mars":
        model = init_mars(
            MarsConfig(
                input_dim=channels, hidden_dim=hidden, num_layers=layers,
                gamma=1.0, delta=0.1, steepness=5.0, seed=seed,
            )
        )
        return lambda batch: mars_forward(model, batch, dtype=dtype)
    if model_name == "esn":
        model = init_esn(
            EsnConfig(input_dim=channels, hidden_dim=hidden, leak=0.5,
                      spectral_radius=0.9, seed=seed)
        )
        return lambda batch: esn_forward(model, batch, dtype=dtype)
    model = init_mf_esn(
        MfEsnConfig(input_dim=channels, hidden_dim=hidden, spectral_radius=0.9,
                    gamma=1.0, delta=0.1, steepness=5.0, seed=seed)
    )
    return lambda batch: mf_esn_forward(model, batch, dtype=dtype)


def run_runtime_sweep(
    model_name: str,
    lengths: list[int],
    repetitions: int,
    batch_size: int,
    hidden: int,
    layers: int,
    channels: int,
    seed: int,
    dtype: torch.dtype,
) -> dict:
    """Time forward passes only; init and data generation stay outside the clock."""
    forward = _bench_forward(model_name, hidden, layers, channels, seed, dtype)
    seconds: list[float | None] = []
    failures: dict[str, str] = {}
    for length in lengths:
        batch = None
        try:
            batch = synth_random_uniform(batch_size, length, channels, seed)
            forward(batch)  # warm-up iteration, excluded from the total
            start = time.perf_counter()
            for _ in range(repetitions):
                forward(batch)
            seconds.append(time.perf_counter() - start)
        except Exception as exc:  # record OOM, keep sweeping
            if not _is_oom(exc):
                raise
            seconds.append(None)
            failures[str(length)] = f"out of memory: {exc}"
        finally:
            batch = None  # release before the next, larger allocation
    return {
        "model": model_name,
        "lengths": lengths,
        "seconds": seconds,
        "failures": failures,
        "repetitions": repetitions,
        "batch": batch_size,
        "hidden": hidden,
        "layers": layers,
        "channels": channels,
        "seed": seed,
        "precision": "f32" if dtype == torch.float32 else "f64",
        "hardware": _hardware_note(),
    }


@main.command("bench-runtime")
@_common_options
@click.option("--model", "model_name", type=click.Choice(["mars", "esn", "mf-esn"]),
              default="mars", show_default=True)
@click.option("--lengths", default=None,
              help="comma-separated sweep lengths (default: the standard grid, capped)")
@click.option("--max-length", default=100_000, show_default=True,
              help="cap on the default grid; raise explicitly for the 500k point")
@click.option("--repetitions", default=100, show_default=True)
@click.option("--batch", "batch_size", default=10, show_default=True)
@click.option("--hidden", default=128, show_default=True)
@click.option("--layers", default=3, show_default=True, help="stacked blocks (mars only)")
@click.option("--channels", default=1, show_default=True)
def cmd_bench_runtime(out, seed, precision, threads, model_name, lengths, max_length,
                      repetitions, batch_size, hidden, layers, channels):
    """Wall-clock sweep of forward passes across sequence lengths."""
    out = _setup(out, threads)
    if lengths:
        try:
            grid = sorted({int(v) for v in lengths.split(",")})
        except ValueError as exc:
            raise click.UsageError(f"bad --lengths value: {exc}")
    else:
        grid = [length for length in TABLE_GRID if length <= max_length]
    if not grid or any(length < 1 for length in grid):
        raise click.UsageError("lengths must be positive")
    report = run_runtime_sweep(
        model_name, grid, repetitions, batch_size, hidden, layers, channels, seed,
        _DTYPES[precision],
    )
    stamp = _run_stamp()
    base = os.path.join(out, f"runtime_{model_name}_{stamp}")
    _write_json(base + ".json", report)
    with open(base + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["length", "seconds"])
        for length, secs in zip(report["lengths"], report["seconds"]):
            if secs is not None:
                writer.writerow([length, f"{secs:.6f}"])
    click.echo(f"wrote {base}.csv")
    lines = [f"runtime sweep: {model_name} ({report['hardware']})",
             f"repetitions={repetitions} batch={batch_size} hidden={hidden} precision={precision}"]
    for length, secs in zip(report["lengths"], report["seconds"]):
        status = f"{secs:.4f} s" if secs is not None else "FAILED (out of memory)"
        lines.append(f"  T={length:>7}: {status}")
    _write_text(base + ".txt", lines)


# ---------------------------------------------------------------------------
# train-eval
# ---------------------------------------------------------------------------


def _load_config(config_path: str | None, manifest, hidden: int | None) -> MarsConfig:
    fields = {}
    if config_path:
        try:
            with open(config_path) as fh:
                fields = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"config file {config_path} failed to load: {exc}")
        if not isinstance(fields, dict):
            raise click.UsageError(f"config file {config_path} must hold a JSON object")
        unknown = set(fields) - {f.name for f in dataclasses.fields(MarsConfig)}
        if unknown:
            raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    fields.setdefault("input_dim", manifest.input_dim)
    fields.setdefault("hidden_dim", hidden or 400)
    if hidden is not None:
        fields["hidden_dim"] = hidden
    config = MarsConfig(**fields)
    if config.input_dim != manifest.input_dim:
        raise click.UsageError(
            f"config input_dim={config.input_dim} but dataset has "
            f"{manifest.input_dim} channel(s)"
        )
    return config


def _chunked_features(model, batch: TimeSeriesBatch, dtype, rows: int):
    feats = []
    clamps = [0] * model.config.num_layers
    for start in range(0, batch.batch_size, rows):
        sub = TimeSeriesBatch(
            values=batch.values[start : start + rows],
            lengths=batch.lengths[start : start + rows],
        )
        info = mars_forward_full(model, sub, dtype=dtype)
        feats.append(info.features)
        clamps = [c + n for c, n in zip(clamps, info.clamp_counts)]
    return torch.cat(feats), clamps


def _validation_split(batch: TimeSeriesBatch, fraction: float, seed: int):
    gen = rng.substream(seed, rng.SUB_SPLIT)
    order = gen.permutation(batch.batch_size)
    cut = max(1, int(round(batch.batch_size * (1.0 - fraction))))
    cut = min(cut, batch.batch_size - 1)
    fit_rows, val_rows = order[:cut], order[cut:]

    def take(rows):
        idx = torch.from_numpy(rows.copy())
        return TimeSeriesBatch(
            values=batch.values[idx], lengths=batch.lengths[idx], labels=batch.labels[idx]
        )

    return take(fit_rows), take(val_rows)


def run_train_eval(
    train: TimeSeriesBatch,
    test: TimeSeriesBatch,
    manifest,
    config: MarsConfig,
    seeds: list[int],
    *,
    dtype: torch.dtype = torch.float64,
    ridge_lambda: float = 1e-6,
    batch_chunk: int = 256,
) -> dict:
    """Per seed: init, forward both splits, single ridge solve, evaluate."""
    accuracies, train_seconds, clamp_totals = [], [], []
    best = None
    for seed in seeds:
        model = init_mars(dataclasses.replace(config, seed=seed))
        start = time.perf_counter()
        train_feats, clamps = _chunked_features(model, train, dtype, batch_chunk)
        readout = fit_ridge(train_feats, train.labels, ridge_lambda)
        train_seconds.append(time.perf_counter() - start)
        test_feats, test_clamps = _chunked_features(model, test, dtype, batch_chunk)
        acc = readout_accuracy(readout, test_feats, test.labels)
        accuracies.append(acc)
        clamp_totals.append(sum(clamps) + sum(test_clamps))
        if best is None or acc > best[0]:
            best = (acc, seed, readout)
    mean = float(np.mean(accuracies))
    std = float(np.std(accuracies))
    return {
        "dataset": manifest.name,
        "manifest": dataclasses.asdict(manifest),
        "config": dataclasses.asdict(config),
        "seeds": seeds,
        "test_accuracies": accuracies,
        "mean_accuracy": mean,
        "std_accuracy": std,
        "train_seconds": train_seconds,
        "trainable_parameters": int(best[2].weights.numel()),
        "training_iterations": 1,  # single ridge solve by construction
        "scan_clamp_counts": clamp_totals,
        "precision": "f32" if dtype == torch.float32 else "f64",
        "hardware": _hardware_note(),
        "_best": best,
    }


def _evolve_objective(train, config, ridge_lambda, dtype, batch_chunk, split_seed,
                      val_fraction=0.2):
    fit_part, val_part = _validation_split(train, val_fraction, split_seed)

    def objective(steepness: float, delta: float) -> float:
        candidate = dataclasses.replace(config, steepness=steepness, delta=delta)
        model = init_mars(candidate)
        feats, _ = _chunked_features(model, fit_part, dtype, batch_chunk)
        readout = fit_ridge(feats, fit_part.labels, ridge_lambda)
        val_feats, _ = _chunked_features(model, val_part, dtype, batch_chunk)
        return readout_accuracy(readout, val_feats, val_part.labels)

    return objective


@main.command("train-eval")
@_common_options
@click.option("--dataset", required=True, help="dataset directory, stem, or *_TRAIN.ts path")
@click.option("--config", "config_path", default=None, help="JSON model configuration")
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--evolve", "do_evolve", is_flag=True,
              help="tune (steepness, delta) on a validation split first")
@click.option("--evolve-population", default=8, show_default=True)
@click.option("--evolve-generations", default=50, show_default=True)
@click.option("--val-fraction", default=0.2, show_default=True,
              help="held-out fraction of the training split used as evolution fitness")
@click.option("--normalize", "normalize_mode", type=click.Choice(["none", "zscore", "minmax"]),
              default="none", show_default=True)
@click.option("--ridge-lambda", default=1e-6, show_default=True)
@click.option("--batch-chunk", default=256, show_default=True,
              help="rows per forward chunk (bounds memory)")
@click.option("--hidden", default=None, type=int, help="override hidden size")
@click.option("--save-model", "save_model", default=None,
              help="write the best seed's artifact to this path")
def cmd_train_eval(out, seed, precision, threads, dataset, config_path, seeds, do_evolve,
                   evolve_population, evolve_generations, val_fraction, normalize_mode,
                   ridge_lambda, batch_chunk, hidden, save_model):
    """Classification experiment: forward, one ridge solve, evaluate."""
    out = _setup(out, threads)
    try:
        train, test, manifest = load_ts(dataset)
    except FileNotFoundError as exc:
        raise click.UsageError(f"dataset not found: {exc}")
    except MemReservoirError as exc:
        raise click.UsageError(f"dataset failed to load: {exc}")
    if train.labels is None or test.labels is None:
        raise click.UsageError("train-eval requires labelled data")
    config = _load_config(config_path, manifest, hidden)
    try:
        seed_list = [int(v) for v in seeds.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise click.UsageError(f"bad --seeds value: {exc}")
    if not seed_list:
        raise click.UsageError("at least one seed is required")

    stats = None
    if normalize_mode != "none":
        train, stats = normalize(train, normalize_mode)
        test, _ = normalize(test, normalize_mode, stats)

    dtype = _DTYPES[precision]
    stamp = _run_stamp()
    evo_payload = None
    if do_evolve:
        objective = _evolve_objective(train, config, ridge_lambda, dtype, batch_chunk, seed,
                                      val_fraction)
        evo_config = EvoConfig(
            bounds=((0.5, 20.0), (0.01, 1.0)),
            population=evolve_population,
            generations=evolve_generations,
            seed=seed,
        )
        result = run_evolution(
            objective, evo_config, log_path=os.path.join(out, f"evolve_{stamp}.log")
        )
        config = dataclasses.replace(
            config, steepness=result.best_params[0], delta=result.best_params[1]
        )
        evo_payload = {
            "best_params": result.best_params,
            "best_fitness": result.best_fitness,
            "evaluations": result.evaluations,
        }
        click.echo(
            f"evolved steepness={result.best_params[0]:.4f} delta={result.best_params[1]:.4f} "
            f"(validation accuracy {result.best_fitness:.4f})"
        )

    report = run_train_eval(
        train, test, manifest, config, seed_list,
        dtype=dtype, ridge_lambda=ridge_lambda, batch_chunk=batch_chunk,
    )
    best = report.pop("_best")
    if evo_payload:
        report["evolution"] = evo_payload
    base = os.path.join(out, f"experiment_{manifest.name}_{stamp}")
    _write_json(base + ".json", report)
    lines = [
        f"dataset {manifest.name}: {manifest.train_size} train / {manifest.test_size} test, "
        f"{manifest.num_classes} classes, dim {manifest.input_dim}, length {manifest.max_length}",
        f"accuracy {report['mean_accuracy']:.4f} +/- {report['std_accuracy']:.4f} "
        f"over seeds {seed_list}",
        f"train seconds per seed: {['%.3f' % s for s in report['train_seconds']]}",
        f"trainable parameters: {report['trainable_parameters']}",
        f"scan clamp counts per seed: {report['scan_clamp_counts']}",
    ]
    _write_text(base + ".txt", lines)
    click.echo(lines[1])
    if save_model:
        save_artifact(save_model, dataclasses.replace(config, seed=best[1]), best[2], stats)
        click.echo(f"wrote {save_model}")


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------


@main.command("evolve")
@_common_options
@click.option("--dataset", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--population", default=8, show_default=True)
@click.option("--generations", default=50, show_default=True)
@click.option("--s-bounds", default="0.5,20", show_default=True)
@click.option("--delta-bounds", default="0.01,1.0", show_default=True)
@click.option("--ridge-lambda", default=1e-6, show_default=True)
@click.option("--batch-chunk", default=256, show_default=True)
@click.option("--hidden", default=None, type=int)
@click.option("--val-fraction", default=0.2, show_default=True)
def cmd_evolve(out, seed, precision, threads, dataset, config_path, population, generations,
               s_bounds, delta_bounds, ridge_lambda, batch_chunk, hidden, val_fraction):
    """Evolve (steepness, delta) against a held-out validation split."""
    out = _setup(out, threads)
    try:
        train, _, manifest = load_ts(dataset)
    except (FileNotFoundError, MemReservoirError) as exc:
        raise click.UsageError(f"dataset failed to load: {exc}")
    if train.labels is None:
        raise click.UsageError("evolve requires labelled data")
    config = _load_config(config_path, manifest, hidden)

    def parse_bounds(text, name):
        try:
            lo, hi = (float(v) for v in text.split(","))
            return lo, hi
        except ValueError:
            raise click.UsageError(f"bad --{name} value {text!r}; expected 'low,high'")

    evo_config = EvoConfig(
        bounds=(parse_bounds(s_bounds, "s-bounds"), parse_bounds(delta_bounds, "delta-bounds")),
        population=population,
        generations=generations,
        seed=seed,
    )
    objective = _evolve_objective(
        train, config, ridge_lambda, _DTYPES[precision], batch_chunk, seed, val_fraction
    )
    stamp = _run_stamp()
    result = run_evolution(
        objective, evo_config, log_path=os.path.join(out, f"evolve_{stamp}.log")
    )
    payload = {
        "dataset": manifest.name,
        "best_params": {"steepness": result.best_params[0], "delta": result.best_params[1]},
        "best_fitness": result.best_fitness,
        "history": list(result.history),
        "evaluations": result.evaluations,
        "population": population,
        "generations": generations,
        "seed": seed,
    }
    _write_json(os.path.join(out, f"evolve_{stamp}.json"), payload)
    click.echo(
        f"best steepness={result.best_params[0]:.4f} delta={result.best_params[1]:.4f} "
        f"validation accuracy={result.best_fitness:.4f}"
    )


# ---------------------------------------------------------------------------
# filter-demo
# ---------------------------------------------------------------------------


def spectral_centroid(signal: torch.Tensor) -> float | None:
    """Magnitude-weighted mean frequency bin, DC excluded; None if silent."""
    mags = torch.abs(torch.fft.rfft(signal.to(torch.float64)))[1:]
    total = float(mags.sum())
    if total <= 0.0:
        return None
    bins = torch.arange(1, mags.shape[0] + 1, dtype=torch.float64)
    return float((bins * mags).sum() / total)


def run_filter_demo(
    frequency: float,
    length: int,
    noise: float,
    layers: int,
    amplitude: float,
    scalars: DynamicsScalars,
    seed: int,
    trace_path: str | None = None,
):
    t = torch.arange(length, dtype=torch.float64)
    signal = amplitude * torch.sin(2 * math.pi * frequency * t / length)
    if noise > 0:
        gen = rng.substream(seed, rng.SUB_SYNTH)
        signal = signal + noise * torch.from_numpy(gen.standard_normal(length))
    carried, hiddens = filter_cascade(signal, layers, scalars, trace_path=trace_path)
    centroids = [spectral_centroid(u) for u in carried]
    return carried, hiddens, centroids


@main.command("filter-demo")
@_common_options
@click.option("--frequency", default=4.0, show_default=True, help="cycles across the window")
@click.option("--length", default=1024, show_default=True)
@click.option("--noise", default=0.01, show_default=True)
@click.option("--layers", default=3, show_default=True)
@click.option("--amplitude", default=1.0, show_default=True)
@click.option("--delta", default=0.02, show_default=True)
@click.option("--gamma", default=1.0, show_default=True)
@click.option("--trace", "trace_path", default=None,
              help="dump the first block's per-step scan state to this CSV")
def cmd_filter_demo(out, seed, precision, threads, frequency, length, noise, layers,
                    amplitude, delta, gamma, trace_path):
    """Clean-dynamics toy: blocks minus their output act as a high-pass cascade."""
    out = _setup(out, threads)
    carried, hiddens, centroids = run_filter_demo(
        frequency, length, noise, layers, amplitude,
        DynamicsScalars(gamma=gamma, delta=delta), seed, trace_path,
    )
    stamp = _run_stamp()
    base = os.path.join(out, f"filter_demo_{stamp}")
    with open(base + "_signals.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"carried_{i}" for i in range(len(carried))]
                        + [f"hidden_{i + 1}" for i in range(len(hiddens))])
        for i in range(length):
            writer.writerow([i] + [f"{u[i]:.10g}" for u in carried]
                            + [f"{h[i]:.10g}" for h in hiddens])
    click.echo(f"wrote {base}_signals.csv")
    with open(base + "_spectra.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin"] + [f"carried_{i}" for i in range(len(carried))])
        spectra = [torch.abs(torch.fft.rfft(u)) for u in carried]
        for k in range(spectra[0].shape[0]):
            writer.writerow([k] + [f"{s[k]:.10g}" for s in spectra])
    click.echo(f"wrote {base}_spectra.csv")

    if any(c is None for c in centroids):
        click.echo("spectral centroid undefined (silent signal); no monotonicity to assert")
        return
    click.echo(f"input: spectral centroid {centroids[0]:.3f}")
    for i, c in enumerate(centroids[1:], start=1):
        click.echo(f"layer {i}: spectral centroid {c:.3f}")
    # the depth claim compares layer outputs to each other, not to the raw input
    per_layer = centroids[1:]
    increasing = all(per_layer[i + 1] > per_layer[i] for i in range(len(per_layer) - 1))
    if not increasing:
        click.echo("FAIL: spectral centroid did not strictly increase across layers", err=True)
        sys.exit(1)
    click.echo("PASS: spectral centroid strictly increases across layers")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@main.command("verify")
@_common_options
def cmd_verify(out, seed, precision, threads):
    """Run the invariant suite; nonzero exit on any property failure."""
    _setup(out, threads)
    results = checks.run_all(_DTYPES[precision], seed)
    failed = False
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        click.echo(
            f"{status} {result.name}: observed {result.observed:.3e} "
            f"(tolerance {result.tolerance:.0e})"
        )
        failed = failed or not result.passed
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
