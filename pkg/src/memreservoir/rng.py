"""Deterministic parameter streams.

All randomness in the library flows through numpy's counter-based Philox
generator, keyed by a user seed plus a fixed per-component substream index.
Because every component owns its own substream, adding layers to a model (or
enabling the convolutional front-end) never perturbs the weights already drawn
for other components.

Substream index table:

    0   temporal-conv kernels
    1   encoder weights
    2   synthetic benchmark inputs
    3   ESN input weights
    4   ESN recurrent weights
    5   ESN bias
    6   MF-ESN input weights
    7   MF-ESN recurrent weights
    8   MF-ESN bias
    9   evolutionary search
    10  train/validation splits
    16+ memristive block l -> 16 + 2*l (weights), 17 + 2*l (bias)
"""

from __future__ import annotations

import numpy as np
import torch

SUB_TC_KERNELS = 0
SUB_ENCODER = 1
SUB_SYNTH = 2
SUB_ESN_WX = 3
SUB_ESN_WH = 4
SUB_ESN_BIAS = 5
SUB_MFESN_WX = 6
SUB_MFESN_WH = 7
SUB_MFESN_BIAS = 8
SUB_EVOLVE = 9
SUB_SPLIT = 10
SUB_BLOCK_BASE = 16


def block_weight_stream(layer: int) -> int:
    return SUB_BLOCK_BASE + 2 * layer


def block_bias_stream(layer: int) -> int:
    return SUB_BLOCK_BASE + 2 * layer + 1


def substream(seed: int, component: int) -> np.random.Generator:
    """Philox generator for one (seed, component) pair."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(component,))
    return np.random.Generator(np.random.Philox(ss))


def uniform_tensor(
    gen: np.random.Generator,
    low: float,
    high: float,
    shape: tuple[int, ...],
    dtype: torch.dtype = torch.float64,
) -> torch.Tensor:
    """Uniform [low, high) tensor drawn from `gen`, materialised for torch."""
    arr = gen.uniform(low, high, size=shape)
    return torch.from_numpy(arr).to(dtype)
