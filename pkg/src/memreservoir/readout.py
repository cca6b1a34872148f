"""Ridge-regularized linear readout, the only trained component.

Training is a single symmetric positive-definite solve of the normal
equations on the feature Gram matrix: one shot, no iterations. An optional
constant-one bias column is appended and left unregularized, and features can
optionally be z-scored with statistics stored in the readout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import NumericalError, StructuralError


@dataclass(frozen=True)
class RidgeReadout:
    """Trained linear classifier over reservoir features.

    weights is [classes, features(+1)] with the bias coefficients, when
    fitted, in the last column.
    """

    weights: torch.Tensor
    lambda_: float
    class_labels: tuple[int, ...]
    fit_bias: bool = True
    feature_mean: torch.Tensor | None = None
    feature_scale: torch.Tensor | None = None

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1] - (1 if self.fit_bias else 0)


def _as_matrix(features) -> torch.Tensor:
    t = torch.as_tensor(features, dtype=torch.float64)
    if t.ndim != 2:
        raise StructuralError(f"features must be [n, d], got ndim={t.ndim}")
    return t


def fit_ridge(
    features,
    labels,
    lambda_: float = 1e-6,
    *,
    fit_bias: bool = True,
    standardize: bool = False,
) -> RidgeReadout:
    """Solve (H^T H + lambda*I) W = H^T Y against one-hot targets.

    The bias column, when enabled, is excluded from the regularization block.
    A singular system (typically lambda = 0 with rank-deficient features)
    raises NumericalError advising a positive lambda.
    """
    h = _as_matrix(features)
    y = torch.as_tensor(labels, dtype=torch.long)
    if y.ndim != 1 or y.shape[0] != h.shape[0]:
        raise StructuralError("labels must be one class index per feature row")
    if h.shape[0] < 1:
        raise StructuralError("need at least one training row")
    if bool((y < 0).any()):
        raise StructuralError("labels must be non-negative class indices")
    if lambda_ < 0:
        raise StructuralError("lambda must be non-negative")
    num_classes = int(y.max()) + 1
    if num_classes < 2:
        raise StructuralError("need at least two classes")

    mean = scale = None
    if standardize:
        mean = h.mean(dim=0)
        scale = h.std(dim=0, unbiased=False).clamp(min=1e-12)
        h = (h - mean) / scale

    targets = torch.zeros(h.shape[0], num_classes, dtype=torch.float64)
    targets[torch.arange(h.shape[0]), y] = 1.0
    design = torch.cat([h, torch.ones(h.shape[0], 1, dtype=torch.float64)], dim=1) if fit_bias else h

    gram = design.T @ design
    d = h.shape[1]
    gram[range(d), range(d)] = gram.diagonal()[:d] + lambda_
    rhs = design.T @ targets
    try:
        chol = torch.linalg.cholesky(gram)
    except torch.linalg.LinAlgError as exc:
        raise NumericalError(
            "normal equations are singular; use lambda > 0 to regularize"
        ) from exc
    weights = torch.cholesky_solve(rhs, chol).T.contiguous()
    return RidgeReadout(
        weights=weights,
        lambda_=lambda_,
        class_labels=tuple(range(num_classes)),
        fit_bias=fit_bias,
        feature_mean=mean,
        feature_scale=scale,
    )


def scores(readout: RidgeReadout, features) -> torch.Tensor:
    """Linear class scores [n, classes]."""
    h = _as_matrix(features)
    if h.shape[1] != readout.feature_dim:
        raise StructuralError(
            f"features have dim {h.shape[1]}, readout expects {readout.feature_dim}"
        )
    if readout.feature_mean is not None:
        h = (h - readout.feature_mean) / readout.feature_scale
    if readout.fit_bias:
        h = torch.cat([h, torch.ones(h.shape[0], 1, dtype=torch.float64)], dim=1)
    return h @ readout.weights.T


def predict(readout: RidgeReadout, features) -> torch.Tensor:
    """Predicted class indices; ties break toward the lowest class index."""
    s = scores(readout, features).numpy()
    return torch.from_numpy(np.argmax(s, axis=1))  # np.argmax takes the first maximum


def accuracy(readout: RidgeReadout, features, labels) -> float:
    y = torch.as_tensor(labels, dtype=torch.long)
    return float((predict(readout, features) == y).double().mean())
