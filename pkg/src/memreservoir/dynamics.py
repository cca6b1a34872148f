"""Pointwise memristive dynamics.

Rate functions for conductance potentiation and depression, the bounded
RESCALE nonlinearity that keeps activations in the range where the
exponential rates stay tractable, and the reduction of the memristive state
update to the elementwise linear-recurrence coefficients consumed by the scan
engine.

All operations are pure and elementwise; they accept Python scalars or torch
tensors and preserve the input kind. Everything defaults to float64. Rate
evaluation on raw (un-rescaled) inputs is permitted but overflow-prone for
large |z|; the model pipeline only ever evaluates rates on rescaled values.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import DomainError
from .scan import ScanCoefficients

#: floor applied to the state-retention coefficient when the update would
#: leave the positive regime required by the log-space scan
COEFF_FLOOR = 1e-12


@dataclass(frozen=True)
class MemristiveConstants:
    """Rate-balance constants, fixed by device physics."""

    kp0: float = 0.0001
    eta_p: float = 10.0
    kd0: float = 0.5
    eta_d: float = 1.0

    def __post_init__(self):
        for name in ("kp0", "eta_p", "kd0", "eta_d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class RescaleConstants:
    """Bounds and steepness of the RESCALE nonlinearity.

    The bounds are fixed by convention; steepness is a task hyperparameter.
    """

    steepness: float
    lower: float = 0.35
    upper: float = 1.15

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")
        if not self.steepness > 0:
            raise ValueError(f"steepness must be strictly positive, got {self.steepness}")


@dataclass(frozen=True)
class DynamicsScalars:
    """State-retention factor and discretization step of the state update."""

    gamma: float
    delta: float

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")


DEFAULT_CONSTANTS = MemristiveConstants()


def _as_tensor(z, op: str, validate: bool = True) -> tuple[torch.Tensor, bool]:
    scalar = not isinstance(z, torch.Tensor)
    t = torch.as_tensor(z, dtype=torch.float64) if scalar else z
    if not t.is_floating_point():
        t = t.to(torch.float64)
    if validate and not bool(torch.isfinite(t).all()):
        raise DomainError(f"{op} requires finite input")
    return t, scalar


def _unwrap(t: torch.Tensor, scalar: bool):
    return float(t) if scalar and t.ndim == 0 else t


def potentiation_rate(z, constants: MemristiveConstants = DEFAULT_CONSTANTS):
    """Exponentially growing conductance-gain rate, kp0 * exp(eta_p * z)."""
    t, scalar = _as_tensor(z, "potentiation_rate")
    return _unwrap(constants.kp0 * torch.exp(constants.eta_p * t), scalar)


def depression_rate(z, constants: MemristiveConstants = DEFAULT_CONSTANTS):
    """Exponentially decaying conductance-loss rate, kd0 * exp(-eta_d * z)."""
    t, scalar = _as_tensor(z, "depression_rate")
    return _unwrap(constants.kd0 * torch.exp(-constants.eta_d * t), scalar)


def rescale(z, bounds: RescaleConstants, *, validate: bool = True):
    """Bounded sigmoid squashing into (bounds.lower, bounds.upper).

    validate=False skips the finiteness check; the model pipeline uses it on
    padded sequences where only valid steps feed the outputs.
    """
    t, scalar = _as_tensor(z, "rescale", validate)
    span = bounds.upper - bounds.lower
    return _unwrap(span * torch.sigmoid(bounds.steepness * t) + bounds.lower, scalar)


def mars_coefficients(
    z,
    constants: MemristiveConstants,
    scalars: DynamicsScalars,
    *,
    floor: float = COEFF_FLOOR,
    validate: bool = True,
) -> tuple[ScanCoefficients, int]:
    """Coefficients (a, b) of the linearized memristive update.

    a = gamma - delta * (K_p(z) + K_d(z)),  b = delta * K_p(z).

    b is strictly positive by construction. a can leave the positive regime
    for large delta or high activations; such entries are clamped to `floor`
    and counted, and the count is returned alongside the coefficients so
    callers can surface regime violations instead of hiding them.
    """
    t, _ = _as_tensor(z, "mars_coefficients", validate)
    kp = constants.kp0 * torch.exp(constants.eta_p * t)
    kd = constants.kd0 * torch.exp(-constants.eta_d * t)
    b = scalars.delta * kp
    a_raw = scalars.gamma - scalars.delta * (kp + kd)
    clamped = int((a_raw <= 0).sum())
    a = a_raw.clamp(min=floor)
    return ScanCoefficients(a=a, b=b), clamped


def fixed_point(z, constants: MemristiveConstants = DEFAULT_CONSTANTS):
    """Stationary state K_p / (K_p + K_d) of the update at gamma = 1.

    For constant rescaled input and full state retention the recurrence
    contracts to this value; useful as an analytic check on forward passes.
    """
    kp = potentiation_rate(z, constants)
    kd = depression_rate(z, constants)
    return kp / (kp + kd)
