#!/usr/bin/env python3
"""Forward-pass runtime comparison across sequence lengths.

Runs the parallel reservoir and both sequential baselines over the standard
length grid and prints a side-by-side table of total seconds. Equivalent to
three `memreservoir bench-runtime` invocations with shared settings.

Usage: python scripts/runtime_sweep.py [--max-length 100000] [--repetitions 100]
"""

import argparse

import torch

from memreservoir.cli import TABLE_GRID, run_runtime_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-length", type=int, default=100_000)
    parser.add_argument("--repetitions", type=int, default=100)
    parser.add_argument("--batch", type=int, default=10)
    parser.add_argument("--hidden", type=int, default=128)
    parser.add_argument("--layers", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--precision", choices=["f32", "f64"], default="f32")
    parser.add_argument("--models", default="mars,esn,mf-esn")
    args = parser.parse_args()

    lengths = [length for length in TABLE_GRID if length <= args.max_length]
    dtype = torch.float32 if args.precision == "f32" else torch.float64
    reports = {}
    for model in args.models.split(","):
        print(f"sweeping {model} ...", flush=True)
        reports[model] = run_runtime_sweep(
            model, lengths, args.repetitions, args.batch, args.hidden,
            args.layers, 1, args.seed, dtype,
        )

    header = "length".rjust(10) + "".join(m.rjust(14) for m in reports)
    print("\ntotal seconds over "
          f"{args.repetitions} repetitions, batch {args.batch}, hidden {args.hidden}")
    print(header)
    for i, length in enumerate(lengths):
        row = f"{length:>10}"
        for model in reports:
            secs = reports[model]["seconds"][i]
            row += f"{secs:>14.4f}" if secs is not None else "          OOM "
        print(row)


if __name__ == "__main__":
    main()
