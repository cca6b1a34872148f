import numpy as np
import pytest
import torch


@pytest.fixture(autouse=True)
def _single_thread():
    # keep timings and ops deterministic across the suite
    torch.set_num_threads(torch.get_num_threads())
    yield


def write_wave_split(path, n_per_class, seed, *, steps=64, noise=0.05):
    """Two-class separable toy: slow vs fast sinusoids with random phase."""
    gen = np.random.default_rng(seed)
    lines = [
        "@problemName ToyWaves",
        "@timeStamps false",
        "@univariate true",
        "@classLabel true slow fast",
        "@data",
    ]
    t = np.arange(steps)
    for label, freq in (("slow", 2.0), ("fast", 7.0)):
        for _ in range(n_per_class):
            phase = gen.uniform(0, 2 * np.pi)
            x = np.sin(2 * np.pi * freq * t / steps + phase)
            x = x + noise * gen.standard_normal(steps)
            lines.append(",".join(f"{v:.6f}" for v in x) + ":" + label)
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def wave_dataset(tmp_path):
    """Directory holding a train/test pair of the separable toy problem."""
    root = tmp_path / "ToyWaves"
    root.mkdir()
    write_wave_split(root / "ToyWaves_TRAIN.ts", 20, seed=0)
    write_wave_split(root / "ToyWaves_TEST.ts", 20, seed=1)
    return root


RAGGED_TS = """\
@problemName RaggedToy
@timeStamps false
@univariate false
@classLabel true a b c
@data
1.0,2.0,3.0:10.0,20.0,30.0:a
4.0,5.0:40.0,50.0:b
6.0,7.0,8.0,9.0:60.0,70.0,80.0,90.0:c
1.5,2.5,3.5:15.0,25.0,35.0:a
"""


@pytest.fixture
def ragged_ts(tmp_path):
    train = tmp_path / "RaggedToy_TRAIN.ts"
    test = tmp_path / "RaggedToy_TEST.ts"
    train.write_text(RAGGED_TS)
    test.write_text(RAGGED_TS)
    return train
