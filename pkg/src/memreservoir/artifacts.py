"""Self-describing trained-model artifacts.

A trained artifact bundles the model configuration (with its seed, from which
all fixed weights regenerate), the fitted readout, and any normalization
statistics into a single JSON file with a format-version field.
"""

from __future__ import annotations

import dataclasses
import json

import torch

from .data import NormalizationStats
from .errors import ConfigurationError
from .models import MarsConfig
from .readout import RidgeReadout

FORMAT_VERSION = 1


def _tensor_to_list(t: torch.Tensor | None):
    return None if t is None else t.tolist()


def _tensor_from_list(data, dtype=torch.float64):
    return None if data is None else torch.tensor(data, dtype=dtype)


def save_artifact(
    path: str,
    config: MarsConfig,
    readout: RidgeReadout,
    normalization: NormalizationStats | None = None,
) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "model": {"kind": "mars", **dataclasses.asdict(config)},
        "seed": config.seed,
        "readout": {
            "weights": readout.weights.tolist(),
            "lambda": readout.lambda_,
            "class_labels": list(readout.class_labels),
            "fit_bias": readout.fit_bias,
            "feature_mean": _tensor_to_list(readout.feature_mean),
            "feature_scale": _tensor_to_list(readout.feature_scale),
        },
        "normalization": None
        if normalization is None
        else {
            "mode": normalization.mode,
            "mean": normalization.mean.tolist(),
            "scale": normalization.scale.tolist(),
            "minimum": normalization.minimum.tolist(),
            "maximum": normalization.maximum.tolist(),
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def load_artifact(path: str) -> tuple[MarsConfig, RidgeReadout, NormalizationStats | None]:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigurationError(
            f"artifact format version {version!r} not supported (expected {FORMAT_VERSION})"
        )
    model = dict(payload["model"])
    if model.pop("kind", "mars") != "mars":
        raise ConfigurationError("artifact does not describe a supported model kind")
    config = MarsConfig(**model)
    ro = payload["readout"]
    readout = RidgeReadout(
        weights=torch.tensor(ro["weights"], dtype=torch.float64),
        lambda_=ro["lambda"],
        class_labels=tuple(ro["class_labels"]),
        fit_bias=ro["fit_bias"],
        feature_mean=_tensor_from_list(ro["feature_mean"]),
        feature_scale=_tensor_from_list(ro["feature_scale"]),
    )
    norm = payload.get("normalization")
    normalization = None
    if norm is not None:
        normalization = NormalizationStats(
            mode=norm["mode"],
            mean=_tensor_from_list(norm["mean"]),
            scale=_tensor_from_list(norm["scale"]),
            minimum=_tensor_from_list(norm["minimum"]),
            maximum=_tensor_from_list(norm["maximum"]),
        )
    return config, readout, normalization
