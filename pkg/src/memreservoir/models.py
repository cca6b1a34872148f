"""Reservoir models built from fixed random weights.

Three model families share this module:

* the parallel memristive reservoir (stacked blocks, each one an affine map,
  RESCALE, the linearized memristive recurrence evaluated by the log-space
  scan, and a subtractive skip connection that removes the block's slow
  component from the carried signal);
* its strict sequential twin, evaluated one time step at a time, which doubles
  as the memristive baseline when a recurrent matrix is present;
* a classical leaky-tanh echo state network, the sequential runtime baseline.

All weights are drawn once from seeded counter-based streams (see `rng`) and
never trained. Forward passes are read-only on parameters and therefore safe
to run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import torch

from . import rng
from .data import TimeSeriesBatch
from .dynamics import (
    COEFF_FLOOR,
    DEFAULT_CONSTANTS,
    DynamicsScalars,
    MemristiveConstants,
    RescaleConstants,
    mars_coefficients,
    rescale,
)
from .errors import DiagnosticError, InitializationError, StructuralError
from .scan import HiddenSequence, ScanCoefficients, last_state, parallel_scan_log

DEFAULT_TC_CHANNELS = 20
DEFAULT_TC_KERNEL = 7


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarsConfig:
    """Static description of a parallel memristive reservoir.

    delta = 0 is admitted as a degenerate configuration: such a block holds
    its state at zero and its skip connection passes the signal through
    unchanged.
    """

    input_dim: int
    hidden_dim: int
    num_layers: int = 3
    input_scaling: float = 0.1
    bias_scaling: float = 0.1
    gamma: float = 1.0
    delta: float = 0.1
    steepness: float = 5.0
    seed: int = 0
    tc_enabled: bool = False
    tc_channels: int = DEFAULT_TC_CHANNELS
    tc_kernel: int = DEFAULT_TC_KERNEL

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1 or self.num_layers < 1:
            raise StructuralError(
                f"dims must be positive: input_dim={self.input_dim}, "
                f"hidden_dim={self.hidden_dim}, num_layers={self.num_layers}"
            )
        if self.input_scaling < 0 or self.bias_scaling < 0:
            raise StructuralError("scalings must be non-negative")
        if not 0 < self.gamma <= 1:
            raise StructuralError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.delta < 0:
            raise StructuralError(f"delta must be non-negative, got {self.delta}")
        if not self.steepness > 0:
            raise StructuralError(f"steepness must be positive, got {self.steepness}")
        if self.tc_enabled and (self.tc_channels < 1 or self.tc_kernel < 1):
            raise StructuralError("tc_channels and tc_kernel must be positive")


@dataclass(frozen=True)
class EsnConfig:
    """Leaky echo state network hyperparameters."""

    input_dim: int
    hidden_dim: int
    leak: float = 1.0
    spectral_radius: float = 0.9
    input_scaling: float = 0.1
    bias_scaling: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise StructuralError("dims must be positive")
        if not 0 < self.leak <= 1:
            raise StructuralError(f"leak must lie in (0, 1], got {self.leak}")
        if not self.spectral_radius > 0:
            raise StructuralError("spectral_radius must be positive")


@dataclass(frozen=True)
class MfEsnConfig:
    """Sequential memristive baseline with a full recurrent matrix."""

    input_dim: int
    hidden_dim: int
    input_scaling: float = 0.1
    bias_scaling: float = 0.1
    spectral_radius: float = 0.9
    gamma: float = 1.0
    delta: float = 0.1
    steepness: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise StructuralError("dims must be positive")
        if not 0 < self.gamma <= 1:
            raise StructuralError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.delta < 0:
            raise StructuralError("delta must be non-negative")
        if not self.steepness > 0:
            raise StructuralError("steepness must be positive")


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemristiveBlockParams:
    """Fixed per-block affine map applied to the carried sequence."""

    w_in: torch.Tensor  # [hidden, hidden]
    bias: torch.Tensor  # [hidden]


@dataclass(frozen=True)
class EncoderParams:
    """Input-to-hidden map, optionally preceded by fixed convolution kernels."""

    w_enc: torch.Tensor  # [hidden, channels]
    tc_kernels: torch.Tensor | None = None  # [tc_channels, input_dim, kernel]


@dataclass(frozen=True)
class MarsModel:
    config: MarsConfig
    encoder: EncoderParams
    blocks: tuple[MemristiveBlockParams, ...]
    constants: MemristiveConstants
    bounds: RescaleConstants
    scalars: DynamicsScalars


@dataclass(frozen=True)
class EsnModel:
    config: EsnConfig
    w_x: torch.Tensor  # [hidden, input_dim]
    w_h: torch.Tensor  # [hidden, hidden], rescaled to the requested radius
    bias: torch.Tensor  # [hidden]


@dataclass(frozen=True)
class MfEsnModel:
    config: MfEsnConfig
    w_x: torch.Tensor  # [hidden, input_dim]
    w_h: torch.Tensor  # [hidden, hidden]; zero it to drop recurrent coupling
    bias: torch.Tensor  # [hidden]
    constants: MemristiveConstants
    bounds: RescaleConstants
    scalars: DynamicsScalars


@dataclass(frozen=True)
class MarsForwardInfo:
    """Forward pass with per-layer detail.

    `layer_states` holds each block's full hidden sequence [B, T, H];
    `clamp_counts` the number of retention coefficients floored per block.
    """

    features: torch.Tensor
    layer_states: tuple[torch.Tensor, ...]
    clamp_counts: tuple[int, ...]


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def spectral_radius_estimate(w: torch.Tensor, *, tol: float = 1e-9, max_iter: int = 1000) -> float:
    """Largest eigenvalue magnitude via norm-based iterated squaring.

    Tracks ||W^(2^k)||_F^(1/2^k) with per-step normalization; the sequence
    converges to the spectral radius for any matrix, including those whose
    dominant eigenvalues form a complex pair (where a plain power vector
    oscillates indefinitely).
    """
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise StructuralError(f"expected a square matrix, got {tuple(w.shape)}")
    m = w.to(torch.float64)
    norm = float(torch.linalg.matrix_norm(m))
    if norm == 0.0:
        return 0.0
    m = m / norm
    log_scale = math.log(norm)
    power = 1
    previous = math.inf
    for _ in range(max_iter):
        estimate = math.exp(log_scale / power)
        if abs(estimate - previous) <= tol * max(estimate, 1e-300):
            return estimate
        previous = estimate
        m = m @ m
        power *= 2
        norm = float(torch.linalg.matrix_norm(m))
        if not math.isfinite(norm):
            raise InitializationError("spectral radius estimate overflowed")
        if norm == 0.0:
            return 0.0
        m = m / norm
        log_scale = 2 * log_scale + math.log(norm)
    raise InitializationError(
        f"spectral radius estimate did not converge within {max_iter} iterations"
    )


def _scaled_recurrent(seed: int, stream: int, hidden: int, radius: float) -> torch.Tensor:
    w = rng.uniform_tensor(rng.substream(seed, stream), -1.0, 1.0, (hidden, hidden))
    estimate = spectral_radius_estimate(w)
    if estimate == 0.0:
        raise InitializationError("recurrent matrix has zero spectral radius")
    return w * (radius / estimate)


def init_mars(
    config: MarsConfig,
    *,
    constants: MemristiveConstants = DEFAULT_CONSTANTS,
    rescale_lower: float = 0.35,
    rescale_upper: float = 1.15,
) -> MarsModel:
    """Deterministically materialise all fixed weights for `config`.

    Equal (seed, config) pairs produce bitwise-identical models. Encoder,
    convolution kernels and every block draw from their own substreams, so
    changing num_layers leaves the other components' weights untouched.
    """
    omega, beta = config.input_scaling, config.bias_scaling
    enc_in = config.tc_channels if config.tc_enabled else config.input_dim
    w_enc = rng.uniform_tensor(
        rng.substream(config.seed, rng.SUB_ENCODER), -omega, omega, (config.hidden_dim, enc_in)
    )
    kernels = None
    if config.tc_enabled:
        kernels = rng.uniform_tensor(
            rng.substream(config.seed, rng.SUB_TC_KERNELS),
            -omega,
            omega,
            (config.tc_channels, config.input_dim, config.tc_kernel),
        )
    blocks = []
    for layer in range(config.num_layers):
        w_in = rng.uniform_tensor(
            rng.substream(config.seed, rng.block_weight_stream(layer)),
            -omega,
            omega,
            (config.hidden_dim, config.hidden_dim),
        )
        bias = rng.uniform_tensor(
            rng.substream(config.seed, rng.block_bias_stream(layer)),
            -beta,
            beta,
            (config.hidden_dim,),
        )
        blocks.append(MemristiveBlockParams(w_in=w_in, bias=bias))
    return MarsModel(
        config=config,
        encoder=EncoderParams(w_enc=w_enc, tc_kernels=kernels),
        blocks=tuple(blocks),
        constants=constants,
        bounds=RescaleConstants(config.steepness, rescale_lower, rescale_upper),
        scalars=DynamicsScalars(gamma=config.gamma, delta=config.delta),
    )


def init_esn(config: EsnConfig) -> EsnModel:
    seed = config.seed
    return EsnModel(
        config=config,
        w_x=rng.uniform_tensor(
            rng.substream(seed, rng.SUB_ESN_WX),
            -config.input_scaling,
            config.input_scaling,
            (config.hidden_dim, config.input_dim),
        ),
        w_h=_scaled_recurrent(seed, rng.SUB_ESN_WH, config.hidden_dim, config.spectral_radius),
        bias=rng.uniform_tensor(
            rng.substream(seed, rng.SUB_ESN_BIAS),
            -config.bias_scaling,
            config.bias_scaling,
            (config.hidden_dim,),
        ),
    )


def init_mf_esn(config: MfEsnConfig) -> MfEsnModel:
    seed = config.seed
    return MfEsnModel(
        config=config,
        w_x=rng.uniform_tensor(
            rng.substream(seed, rng.SUB_MFESN_WX),
            -config.input_scaling,
            config.input_scaling,
            (config.hidden_dim, config.input_dim),
        ),
        w_h=_scaled_recurrent(seed, rng.SUB_MFESN_WH, config.hidden_dim, config.spectral_radius),
        bias=rng.uniform_tensor(
            rng.substream(seed, rng.SUB_MFESN_BIAS),
            -config.bias_scaling,
            config.bias_scaling,
            (config.hidden_dim,),
        ),
        constants=DEFAULT_CONSTANTS,
        bounds=RescaleConstants(config.steepness),
        scalars=DynamicsScalars(gamma=config.gamma, delta=config.delta),
    )


def zero_recurrence(model: MfEsnModel) -> MfEsnModel:
    """Copy of the sequential baseline with its recurrent coupling removed."""
    return replace(model, w_h=torch.zeros_like(model.w_h))


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------


def _batch_to_lanes(batch: TimeSeriesBatch, input_dim: int, dtype: torch.dtype) -> torch.Tensor:
    if batch.values.shape[2] != input_dim:
        raise StructuralError(
            f"batch has {batch.values.shape[2]} channels, model expects {input_dim}"
        )
    # [B, T, C] -> [B, C, T]; contiguous so downstream matmuls hit fast paths
    return batch.values.to(dtype).transpose(1, 2).contiguous()


def _mask_padding(u: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    steps = u.shape[-1]
    if bool((lengths >= steps).all()):
        return u
    valid = torch.arange(steps).unsqueeze(0) < lengths.unsqueeze(1)  # [B, T]
    # where(), not multiplication: padding may hold NaN sentinels in debug mode
    return torch.where(valid.unsqueeze(1), u, torch.zeros((), dtype=u.dtype))


def _conv_same(u: torch.Tensor, kernels: torch.Tensor) -> torch.Tensor:
    # cross-correlation with centered kernel; zero padding keeps the length
    size = kernels.shape[-1]
    left = size // 2
    padded = torch.nn.functional.pad(u, (left, size - 1 - left))
    return torch.nn.functional.conv1d(padded, kernels.to(u.dtype))


def temporal_conv(front: EncoderParams, batch: TimeSeriesBatch) -> TimeSeriesBatch:
    """Fixed random 1-D convolution along time, same-length output.

    The padding region of every row is treated as (and restored to) zeros,
    which matches the symmetric zero padding applied at the sequence ends.
    """
    if front.tc_kernels is None:
        raise StructuralError("temporal_conv requires initialized tc_kernels")
    size = front.tc_kernels.shape[-1]
    if size > int(batch.lengths.min()):
        raise StructuralError(
            f"kernel size {size} exceeds the shortest sequence "
            f"({int(batch.lengths.min())} steps)"
        )
    if batch.values.shape[2] != front.tc_kernels.shape[1]:
        raise StructuralError(
            f"batch has {batch.values.shape[2]} channels, kernels expect "
            f"{front.tc_kernels.shape[1]}"
        )
    u = batch.values.transpose(1, 2)
    u = _mask_padding(u, batch.lengths)
    out = _conv_same(u, front.tc_kernels)
    out = _mask_padding(out, batch.lengths)
    return TimeSeriesBatch(
        values=out.transpose(1, 2).contiguous(), lengths=batch.lengths, labels=batch.labels
    )


def _block_hidden(
    model: MarsModel, block: MemristiveBlockParams, u: torch.Tensor, chunk: int
) -> tuple[torch.Tensor, int]:
    """One block's hidden sequence in [B, H, T] layout plus its clamp count."""
    if model.scalars.delta == 0.0:
        # degenerate block: no drive, state pinned at the zero initial state
        return torch.zeros_like(u), 0
    z = rescale(torch.matmul(block.w_in.to(u.dtype), u) + block.bias.to(u.dtype).unsqueeze(-1),
                model.bounds, validate=False)
    coeffs, clamped = mars_coefficients(z, model.constants, model.scalars, validate=False)
    # wrap as [B, T, H] views; the scan reads them back in time-last layout.
    # validation is off: coefficients are positive by construction and padded
    # regions may carry sentinels that only the feature diagnostics inspect
    seq = parallel_scan_log(
        ScanCoefficients(a=coeffs.a.transpose(1, 2), b=coeffs.b.transpose(1, 2)),
        chunk=chunk,
        validate=False,
    )
    return seq.h.transpose(1, 2), clamped


def mars_forward_full(
    model: MarsModel,
    batch: TimeSeriesBatch,
    *,
    dtype: torch.dtype = torch.float64,
    chunk: int = 8192,
    keep_states: bool = True,
) -> MarsForwardInfo:
    """Forward pass with per-block detail.

    Pipeline per block, on the carried sequence: affine map and RESCALE over
    the whole sequence at once, coefficient computation, log-space scan from a
    zero initial state, then the subtractive skip u <- u - h. Features are the
    final block's state at each row's last valid step.

    keep_states=False drops each block's hidden sequence as soon as the next
    one is computed, bounding memory for long-sequence runs; layer_states is
    then empty.
    """
    cfg = model.config
    u = _batch_to_lanes(batch, cfg.input_dim, dtype)
    if cfg.tc_enabled:
        u = _mask_padding(u, batch.lengths)
        u = _conv_same(u, model.encoder.tc_kernels)
    u = torch.matmul(model.encoder.w_enc.to(dtype), u)
    # pin padding to zero so outputs cannot depend on pad content (rows with
    # full length skip this entirely)
    u = _mask_padding(u, batch.lengths)

    batch_size, hidden = u.shape[0], u.shape[1]
    states: list[torch.Tensor] = []
    counts: list[int] = []
    features = None
    zeros = torch.zeros(batch_size, hidden, dtype=dtype)
    for layer, block in enumerate(model.blocks):
        h_lanes, clamped = _block_hidden(model, block, u, chunk)
        counts.append(clamped)
        if keep_states:
            states.append(h_lanes.transpose(1, 2))
        features = last_state(
            HiddenSequence(h=h_lanes.transpose(1, 2), h0=zeros), batch.lengths
        )
        if bool(torch.isnan(features).any()):
            raise DiagnosticError(f"NaN features produced by block {layer}")
        if layer + 1 < len(model.blocks):
            u = u - h_lanes
        del h_lanes
    return MarsForwardInfo(
        features=features, layer_states=tuple(states), clamp_counts=tuple(counts)
    )


def mars_forward(
    model: MarsModel,
    batch: TimeSeriesBatch,
    *,
    dtype: torch.dtype = torch.float64,
    chunk: int = 8192,
) -> torch.Tensor:
    """Readout features [batch, hidden] from the parallel pipeline."""
    return mars_forward_full(
        model, batch, dtype=dtype, chunk=chunk, keep_states=False
    ).features


def _memristive_step(
    z: torch.Tensor,
    h: torch.Tensor,
    constants: MemristiveConstants,
    scalars: DynamicsScalars,
) -> tuple[torch.Tensor, int]:
    """One step of the rate-balance update, h' = delta*K_p + (gamma - delta*(K_p+K_d))*h.

    The retention coefficient is floored exactly like the parallel path so
    both evaluations share one regime policy; the flooring count is returned.
    """
    kp = constants.kp0 * torch.exp(constants.eta_p * z)
    kd = constants.kd0 * torch.exp(-constants.eta_d * z)
    retain = scalars.gamma - scalars.delta * (kp + kd)
    clamped = int((retain <= 0).sum())
    return scalars.delta * kp + retain.clamp(min=COEFF_FLOOR) * h, clamped


def _rows_finishing_at(lengths: torch.Tensor) -> dict[int, list[int]]:
    marks: dict[int, list[int]] = {}
    for row, length in enumerate(lengths.tolist()):
        marks.setdefault(length - 1, []).append(row)
    return marks


def mf_esn_forward(
    model: MfEsnModel,
    batch: TimeSeriesBatch,
    *,
    dtype: torch.dtype = torch.float64,
    collect: bool = False,
):
    """Strict time-sequential evaluation of the memristive baseline.

    With the recurrent matrix zeroed this reproduces the parallel pipeline's
    single-block hidden sequence (up to scan tolerance); with it present it is
    the sequential baseline model. Returns features, or (features, hidden
    sequence [B, T, H]) when collect=True.
    """
    u = _batch_to_lanes(batch, model.config.input_dim, dtype)
    steps = u.shape[-1]
    proj = torch.matmul(model.w_x.to(dtype), u)  # input drive, hoisted
    bias = model.bias.to(dtype)
    w_h_t = model.w_h.to(dtype).T.contiguous()
    recurrent = bool((w_h_t != 0).any())
    h = torch.zeros(u.shape[0], model.config.hidden_dim, dtype=dtype)
    seq = torch.empty(u.shape[0], steps, model.config.hidden_dim, dtype=dtype) if collect else None
    gathered = torch.empty_like(h)
    marks = _rows_finishing_at(batch.lengths)
    for t in range(steps):
        pre = proj[:, :, t] + bias
        if recurrent:
            pre = pre + h @ w_h_t
        z = rescale(pre, model.bounds, validate=False)
        h, _ = _memristive_step(z, h, model.constants, model.scalars)
        if collect:
            seq[:, t] = h
        for row in marks.get(t, ()):
            gathered[row] = h[row]
    return (gathered, seq) if collect else gathered


def mars_forward_reference(
    model: MarsModel,
    batch: TimeSeriesBatch,
    *,
    dtype: torch.dtype = torch.float64,
) -> MarsForwardInfo:
    """Sequential twin of `mars_forward_full`, one time step at a time.

    Every block is evaluated as the strict per-step recurrence (no scan, no
    whole-sequence batching beyond the fixed affine maps), making this the
    independent reference the parallel pipeline is checked against.
    """
    cfg = model.config
    u = _batch_to_lanes(batch, cfg.input_dim, dtype)
    if cfg.tc_enabled:
        u = _mask_padding(u, batch.lengths)
        u = _conv_same(u, model.encoder.tc_kernels)
    u = torch.matmul(model.encoder.w_enc.to(dtype), u)
    u = _mask_padding(u, batch.lengths)

    batch_size, hidden, steps = u.shape
    states: list[torch.Tensor] = []
    counts: list[int] = []
    features = None
    zeros = torch.zeros(batch_size, hidden, dtype=dtype)
    for layer, block in enumerate(model.blocks):
        w_in_t = block.w_in.to(dtype).T.contiguous()
        bias = block.bias.to(dtype)
        h = zeros
        clamped = 0
        seq = torch.empty(batch_size, steps, hidden, dtype=dtype)
        for t in range(steps):
            if model.scalars.delta == 0.0:
                seq[:, t] = h
                continue
            z = rescale(u[:, :, t] @ w_in_t + bias, model.bounds, validate=False)
            h, n = _memristive_step(z, h, model.constants, model.scalars)
            clamped += n
            seq[:, t] = h
        states.append(seq)
        counts.append(clamped)
        features = last_state(HiddenSequence(h=seq, h0=zeros), batch.lengths)
        if layer + 1 < len(model.blocks):
            u = u - seq.transpose(1, 2)
    return MarsForwardInfo(
        features=features, layer_states=tuple(states), clamp_counts=tuple(counts)
    )


def esn_forward(
    model: EsnModel | EsnConfig,
    batch: TimeSeriesBatch,
    *,
    dtype: torch.dtype = torch.float64,
) -> torch.Tensor:
    """Sequential leaky-tanh state update; returns last-valid-step states."""
    if isinstance(model, EsnConfig):
        model = init_esn(model)
    u = _batch_to_lanes(batch, model.config.input_dim, dtype)
    proj = torch.matmul(model.w_x.to(dtype), u)
    bias = model.bias.to(dtype)
    w_h_t = model.w_h.to(dtype).T.contiguous()
    leak = model.config.leak
    h = torch.zeros(u.shape[0], model.config.hidden_dim, dtype=dtype)
    gathered = torch.empty_like(h)
    marks = _rows_finishing_at(batch.lengths)
    for t in range(u.shape[-1]):
        h = (1.0 - leak) * h + leak * torch.tanh(proj[:, :, t] + h @ w_h_t + bias)
        for row in marks.get(t, ()):
            gathered[row] = h[row]
    return gathered


# ---------------------------------------------------------------------------
# clean-dynamics toy
# ---------------------------------------------------------------------------


def filter_cascade(
    signal: torch.Tensor,
    layers: int,
    scalars: DynamicsScalars,
    constants: MemristiveConstants = DEFAULT_CONSTANTS,
    *,
    trace_path: str | None = None,
) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
    """Memristive blocks on a raw signal: no affine map, no RESCALE.

    The signal itself plays the role of the rescaled activation. Returns the
    carried signal after each subtraction and each block's hidden sequence;
    index 0 of the carried list is the input itself.
    """
    if signal.ndim != 1:
        raise StructuralError("filter_cascade expects a 1-D signal")
    u = signal.to(torch.float64)
    carried = [u]
    hiddens = []
    for layer in range(layers):
        coeffs, _ = mars_coefficients(u.view(1, -1, 1), constants, scalars)
        seq = parallel_scan_log(
            coeffs, trace_path=trace_path if layer == 0 else None
        )
        h = seq.h.view(-1)
        hiddens.append(h)
        u = u - h
        carried.append(u)
    return carried, hiddens
