#!/usr/bin/env python3
"""Classification protocol over the seven tuned datasets.

Expects each dataset directory (Coffee, SyntheticControl, ...) under a common
root, holding the usual <Name>_TRAIN.ts / <Name>_TEST.ts pair. Applies the
per-dataset tuned scalars, runs 5 seeds each, and prints mean +/- std test
accuracy with training wall-clock.

Usage: python scripts/classification_run.py /path/to/datasets [--hidden 400]
"""

import argparse
import os

from memreservoir import MarsConfig, load_ts
from memreservoir.cli import run_train_eval

TUNED = {
    "Epilepsy": (0.1, 0.1, 1.0, 0.05, 5.0),
    "SyntheticControl": (0.1, 0.5, 1.0, 0.1, 6.0),
    "GunPoint": (0.1, 0.1, 1.0, 0.1, 6.0),
    "ECG5000": (0.1, 0.2, 1.0, 0.08, 6.0),
    "Coffee": (0.1, 0.1, 1.0, 0.1, 5.0),
    "JapaneseVowels": (0.1, 0.1, 1.0, 0.5, 1.0),
    "Wafer": (0.1, 0.1, 1.0, 0.05, 14.0),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("root", help="directory containing the dataset folders")
    parser.add_argument("--hidden", type=int, default=400)
    parser.add_argument("--layers", type=int, default=3)
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--ridge-lambda", type=float, default=1e-6)
    args = parser.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]

    for name, (omega, beta, gamma, delta, steepness) in TUNED.items():
        path = os.path.join(args.root, name)
        if not os.path.isdir(path):
            print(f"{name:>18}: skipped (no directory at {path})")
            continue
        train, test, manifest = load_ts(path)
        config = MarsConfig(
            input_dim=manifest.input_dim, hidden_dim=args.hidden, num_layers=args.layers,
            input_scaling=omega, bias_scaling=beta, gamma=gamma, delta=delta,
            steepness=steepness,
        )
        result = run_train_eval(train, test, manifest, config, seeds,
                                ridge_lambda=args.ridge_lambda)
        total_train = sum(result["train_seconds"])
        print(
            f"{name:>18}: {result['mean_accuracy']:.3f} +/- {result['std_accuracy']:.3f}"
            f"  (train {total_train:.2f}s over {len(seeds)} seeds, "
            f"{result['trainable_parameters']} trainable parameters)"
        )


if __name__ == "__main__":
    main()
