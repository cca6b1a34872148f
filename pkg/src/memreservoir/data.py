"""Dataset ingestion and synthetic benchmark inputs.

Supports the sktime-style `.ts` text format (header of `@`-prefixed tags,
then one record per line with `:`-separated dimensions and the class label
last) plus a minimal CSV fallback with one sequence per row. Ragged rows are
right-padded with zeros and per-row valid lengths recorded; labels are mapped
to 0-based indices following the header's class list. Missing-value markers
(`?`) are rejected, not imputed.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from . import rng
from .errors import ParseError, StructuralError


@dataclass
class TimeSeriesBatch:
    """Right-padded batch of multivariate sequences.

    values: [batch, max_time, channels] float64, zeros beyond each row's
    valid length; lengths: [batch] int64 in [1, max_time]; labels: optional
    [batch] int64 class indices.
    """

    values: torch.Tensor
    lengths: torch.Tensor
    labels: torch.Tensor | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.values.ndim != 3:
            raise StructuralError(
                f"values must be [batch, time, channels], got ndim={self.values.ndim}"
            )
        self.lengths = torch.as_tensor(self.lengths, dtype=torch.long)
        if self.lengths.shape != (self.values.shape[0],):
            raise StructuralError("lengths must have one entry per batch row")
        if self.labels is not None:
            self.labels = torch.as_tensor(self.labels, dtype=torch.long)
            if self.labels.shape != (self.values.shape[0],):
                raise StructuralError("labels must have one entry per batch row")
        if self.validate:
            steps = self.values.shape[1]
            if bool((self.lengths < 1).any()) or bool((self.lengths > steps).any()):
                raise StructuralError(f"lengths must lie in [1, {steps}]")
            if not bool(torch.isfinite(self.values).all()):
                raise StructuralError("values must be finite")

    @property
    def batch_size(self) -> int:
        return self.values.shape[0]

    @property
    def max_time(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    train_size: int
    test_size: int
    max_length: int
    num_classes: int
    input_dim: int


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel statistics computed on a training split."""

    mode: str
    mean: torch.Tensor
    scale: torch.Tensor
    minimum: torch.Tensor
    maximum: torch.Tensor


# ---------------------------------------------------------------------------
# .ts parsing
# ---------------------------------------------------------------------------


class _TsHeader:
    def __init__(self):
        self.problem_name = "unnamed"
        self.class_labels: list[str] | None = None
        self.data_line: int | None = None


def _parse_header(lines: list[str], path: str) -> _TsHeader:
    header = _TsHeader()
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not line.startswith("@"):
            raise ParseError(f"expected an @tag or @data before records in {path}", i + 1)
        tag, _, rest = line.partition(" ")
        tag = tag.lower()
        if tag == "@data":
            header.data_line = i + 1
            return header
        if tag == "@problemname":
            header.problem_name = rest.strip()
        elif tag == "@timestamps":
            if rest.strip().lower() == "true":
                raise ParseError("timestamped records are not supported", i + 1)
        elif tag == "@classlabel":
            tokens = rest.split()
            if not tokens:
                raise ParseError("@classLabel requires a true/false value", i + 1)
            if tokens[0].lower() == "true":
                if len(tokens) < 2:
                    raise ParseError("@classLabel true requires the label list", i + 1)
                header.class_labels = tokens[1:]
            elif tokens[0].lower() != "false":
                raise ParseError(f"invalid @classLabel value {tokens[0]!r}", i + 1)
        # remaining tags (@univariate, @equalLength, ...) are advisory; the
        # record structure itself is authoritative
    raise ParseError(f"no @data tag found in {path}")


def _parse_records(
    lines: list[str], first: int, header: _TsHeader, path: str
) -> tuple[list[list[list[float]]], list[int] | None]:
    label_index = {name: i for i, name in enumerate(header.class_labels or [])}
    rows: list[list[list[float]]] = []
    labels: list[int] | None = [] if header.class_labels else None
    num_dims = None
    for offset, raw in enumerate(lines[first:]):
        lineno = first + offset + 1
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "?" in line:
            raise ParseError("missing values ('?') are rejected, not imputed", lineno)
        parts = line.split(":")
        if header.class_labels:
            if len(parts) < 2:
                raise ParseError("record is missing its class label", lineno)
            label = parts[-1].strip()
            if label not in label_index:
                raise ParseError(f"unknown class label {label!r}", lineno)
            labels.append(label_index[label])
            parts = parts[:-1]
        if num_dims is None:
            num_dims = len(parts)
        elif len(parts) != num_dims:
            raise ParseError(
                f"record has {len(parts)} dimensions, expected {num_dims}", lineno
            )
        dims = []
        for dim in parts:
            text = dim.strip()
            try:
                dims.append([float(v) for v in text.split(",")] if text else [])
            except ValueError as exc:
                raise ParseError(f"bad numeric value ({exc})", lineno) from None
        if max(len(d) for d in dims) == 0:
            raise ParseError("record contains no values", lineno)
        rows.append(dims)
    if not rows:
        raise ParseError(f"no records found after @data in {path}")
    return rows, labels


def _rows_to_batch(rows: list[list[list[float]]], labels: list[int] | None) -> TimeSeriesBatch:
    channels = len(rows[0])
    # a row's valid length is the longest of its dimensions; shorter
    # dimensions are zero-padded to it
    lengths = [max(len(d) for d in row) for row in rows]
    max_time = max(lengths)
    values = np.zeros((len(rows), max_time, channels), dtype=np.float64)
    for r, row in enumerate(rows):
        for c, dim in enumerate(row):
            values[r, : len(dim), c] = dim
    return TimeSeriesBatch(
        values=torch.from_numpy(values),
        lengths=torch.tensor(lengths, dtype=torch.long),
        labels=torch.tensor(labels, dtype=torch.long) if labels is not None else None,
    )


def _load_one_ts(path: str) -> tuple[TimeSeriesBatch, _TsHeader]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    header = _parse_header(lines, path)
    rows, labels = _parse_records(lines, header.data_line, header, path)
    return _rows_to_batch(rows, labels), header


def _resolve_split_paths(path: str) -> tuple[str, str]:
    if os.path.isdir(path):
        train = [f for f in sorted(os.listdir(path)) if f.upper().endswith("_TRAIN.TS")]
        test = [f for f in sorted(os.listdir(path)) if f.upper().endswith("_TEST.TS")]
        if not train or not test:
            raise ParseError(f"no *_TRAIN.ts / *_TEST.ts pair found in {path}")
        return os.path.join(path, train[0]), os.path.join(path, test[0])
    upper = path.upper()
    if upper.endswith("_TRAIN.TS"):
        return path, path[: -len("_TRAIN.ts")] + "_TEST.ts"
    if upper.endswith("_TEST.TS"):
        return path[: -len("_TEST.ts")] + "_TRAIN.ts", path
    # dataset stem: <stem>_TRAIN.ts / <stem>_TEST.ts
    return path + "_TRAIN.ts", path + "_TEST.ts"


def load_ts(path: str) -> tuple[TimeSeriesBatch, TimeSeriesBatch, DatasetManifest]:
    """Load a train/test `.ts` pair.

    `path` may be a dataset directory, either split file, or the common stem.
    The train header's class list defines the label mapping for both splits.
    """
    train_path, test_path = _resolve_split_paths(path)
    train, train_header = _load_one_ts(train_path)
    test, test_header = _load_one_ts(test_path)
    if train.channels != test.channels:
        raise ParseError(
            f"train has {train.channels} channels but test has {test.channels}"
        )
    if (train_header.class_labels or []) != (test_header.class_labels or []):
        raise ParseError("train and test class label lists differ")
    manifest = DatasetManifest(
        name=train_header.problem_name,
        train_size=train.batch_size,
        test_size=test.batch_size,
        max_length=max(train.max_time, test.max_time),
        num_classes=len(train_header.class_labels or []),
        input_dim=train.channels,
    )
    return train, test, manifest


# ---------------------------------------------------------------------------
# CSV fallback
# ---------------------------------------------------------------------------


def load_csv(path: str, *, has_labels: bool = True) -> TimeSeriesBatch:
    """One univariate sequence per row; label in the first column if present.

    Label values are mapped to indices in order of first appearance, so the
    mapping is stable across reloads of the same file.
    """
    rows: list[list[float]] = []
    raw_labels: list[str] = []
    with open(path, "r", newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            record = [c.strip() for c in record if c.strip() != ""]
            if not record:
                continue
            if has_labels:
                raw_labels.append(record[0])
                record = record[1:]
            if not record:
                raise ParseError("row has a label but no values", lineno)
            try:
                rows.append([float(v) for v in record])
            except ValueError as exc:
                raise ParseError(f"bad numeric value ({exc})", lineno) from None
    if not rows:
        raise ParseError(f"no rows found in {path}")
    labels = None
    if has_labels:
        order: dict[str, int] = {}
        for name in raw_labels:
            order.setdefault(name, len(order))
        labels = [order[name] for name in raw_labels]
    return _rows_to_batch([[row] for row in rows], labels)


# ---------------------------------------------------------------------------
# synthetic inputs and preprocessing
# ---------------------------------------------------------------------------


def synth_random_uniform(batch: int, length: int, channels: int, seed: int) -> TimeSeriesBatch:
    """Deterministic uniform [0, 1) inputs for the runtime benchmark."""
    if batch < 1 or length < 1 or channels < 1:
        raise StructuralError("batch, length and channels must be positive")
    gen = rng.substream(seed, rng.SUB_SYNTH)
    values = torch.from_numpy(gen.random((batch, length, channels)))
    return TimeSeriesBatch(
        values=values, lengths=torch.full((batch,), length, dtype=torch.long)
    )


def _valid_mask(batch: TimeSeriesBatch) -> torch.Tensor:
    steps = batch.max_time
    return (torch.arange(steps).unsqueeze(0) < batch.lengths.unsqueeze(1)).unsqueeze(-1)


def normalize(
    batch: TimeSeriesBatch,
    mode: str,
    stats: NormalizationStats | None = None,
    *,
    epsilon: float = 1e-12,
) -> tuple[TimeSeriesBatch, NormalizationStats]:
    """Per-channel normalization over the valid (unpadded) region.

    Call on the training split first; pass the returned stats when
    transforming the test split so it reuses the training statistics.
    Padding stays exactly zero.
    """
    if mode not in ("zscore", "minmax"):
        raise StructuralError(f"unknown normalization mode {mode!r}")
    mask = _valid_mask(batch)
    if stats is None:
        # statistics per channel over valid entries only; the mask is shared
        # across channels so a scalar count suffices
        count = mask.sum()
        mean = (batch.values * mask).sum(dim=(0, 1)) / count
        var = (((batch.values - mean) * mask) ** 2).sum(dim=(0, 1)) / count
        big = torch.tensor(torch.finfo(batch.values.dtype).max, dtype=batch.values.dtype)
        masked = torch.where(mask.expand_as(batch.values), batch.values, big)
        minimum = masked.amin(dim=(0, 1))
        masked = torch.where(mask.expand_as(batch.values), batch.values, -big)
        maximum = masked.amax(dim=(0, 1))
        stats = NormalizationStats(
            mode=mode,
            mean=mean,
            scale=torch.sqrt(var),
            minimum=minimum,
            maximum=maximum,
        )
    if stats.mode != mode:
        raise StructuralError(f"stats were computed for mode {stats.mode!r}, not {mode!r}")
    if mode == "zscore":
        transformed = (batch.values - stats.mean) / (stats.scale + epsilon)
    else:
        span = stats.maximum - stats.minimum
        safe = torch.where(span > 0, span, torch.ones_like(span))
        transformed = torch.where(
            span > 0,
            (batch.values - stats.minimum) / safe,
            torch.zeros_like(batch.values),
        )
    transformed = transformed * mask
    return (
        TimeSeriesBatch(values=transformed, lengths=batch.lengths, labels=batch.labels),
        stats,
    )


def cache_dataset(
    directory: str,
    train: TimeSeriesBatch,
    test: TimeSeriesBatch,
    manifest: DatasetManifest,
) -> None:
    """Write parsed tensors plus a key-value manifest file to `directory`.

    The cache holds one .npz per split and a manifest.json, so later runs can
    skip text parsing entirely.
    """
    os.makedirs(directory, exist_ok=True)
    for name, batch in (("train", train), ("test", test)):
        arrays = {"values": batch.values.numpy(), "lengths": batch.lengths.numpy()}
        if batch.labels is not None:
            arrays["labels"] = batch.labels.numpy()
        np.savez(os.path.join(directory, f"{name}.npz"), **arrays)
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(dataclasses.asdict(manifest), fh, indent=2)


def load_cached(directory: str) -> tuple[TimeSeriesBatch, TimeSeriesBatch, DatasetManifest]:
    """Load a dataset previously written by `cache_dataset`."""
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = DatasetManifest(**json.load(fh))

    def load_split(name):
        arrays = np.load(os.path.join(directory, f"{name}.npz"))
        labels = torch.from_numpy(arrays["labels"]) if "labels" in arrays else None
        return TimeSeriesBatch(
            values=torch.from_numpy(arrays["values"]),
            lengths=torch.from_numpy(arrays["lengths"]),
            labels=labels,
        )

    return load_split("train"), load_split("test"), manifest


def poison_padding(batch: TimeSeriesBatch) -> TimeSeriesBatch:
    """Debug copy with NaN written over the padding region.

    Downstream features must stay NaN-free on such a batch; anything reading
    past a row's valid length surfaces immediately.
    """
    values = batch.values.clone()
    values[~_valid_mask(batch).expand_as(values)] = torch.nan
    return TimeSeriesBatch(
        values=values, lengths=batch.lengths, labels=batch.labels, validate=False
    )
