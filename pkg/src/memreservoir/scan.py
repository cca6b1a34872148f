"""Elementwise linear-recurrence evaluation.

Computes the full hidden sequence of

    h[t] = a[t] * h[t-1] + b[t],        t = 1..T,  h[0] = h0

two ways: a strict sequential left fold (the correctness reference) and a
log-space formulation in which the product over `a` becomes a cumulative sum
of logarithms and the forcing accumulates through a cumulative log-sum-exp.
The log-space path is only valid for strictly positive coefficients.

Layout note: tensors enter and leave as [batch, time, hidden], but the
log-space path works on [batch, hidden, time] storage so the cumulative
reductions run along contiguous memory. The returned hidden tensor may
therefore be a transposed view; callers that need contiguous [B, T, H]
storage should call .contiguous() themselves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import torch

from .errors import DomainError, StructuralError

#: default number of time steps processed per streaming slab
DEFAULT_CHUNK = 8192

# Largest admissible gap (in log units) between a slab's final running max and
# the running max at its first step. Beyond this, exp() of shifted terms would
# hit the underflow cliff (~-745 in float64, ~-87 in float32) and early prefix
# outputs in the slab would be lost, so the slab is split recursively instead.
_MAX_SLAB_SPAN = {torch.float64: 600.0, torch.float32: 60.0}


@dataclass(frozen=True)
class ScanCoefficients:
    """Per-timestep coefficient pair driving the recurrence.

    Both tensors are [batch, time, hidden] and must have identical shapes.
    The log-space path additionally requires every entry strictly positive;
    that is validated at scan time, not construction time.
    """

    a: torch.Tensor
    b: torch.Tensor

    def __post_init__(self):
        if self.a.shape != self.b.shape:
            raise StructuralError(
                f"coefficient shapes differ: a {tuple(self.a.shape)} vs b {tuple(self.b.shape)}"
            )
        if self.a.dtype != self.b.dtype:
            raise StructuralError(
                f"coefficient dtypes differ: a {self.a.dtype} vs b {self.b.dtype}"
            )


@dataclass(frozen=True)
class HiddenSequence:
    """Hidden states h ([batch, time, hidden]) plus the initial state h0."""

    h: torch.Tensor
    h0: torch.Tensor


def _check_3d(coeffs: ScanCoefficients) -> tuple[int, int, int]:
    if coeffs.a.ndim != 3:
        raise StructuralError(
            f"expected [batch, time, hidden] coefficients, got ndim={coeffs.a.ndim}"
        )
    return coeffs.a.shape


def _prepare_h0(h0, batch: int, hidden: int, dtype, allow_negative: bool) -> torch.Tensor:
    if h0 is None:
        return torch.zeros(batch, hidden, dtype=dtype)
    h0 = torch.as_tensor(h0, dtype=dtype)
    if h0.shape != (batch, hidden):
        raise StructuralError(
            f"h0 shape {tuple(h0.shape)} does not match (batch, hidden)=({batch}, {hidden})"
        )
    if not allow_negative and bool((h0 < 0).any()):
        raise DomainError("h0 must be non-negative for the log-space path")
    return h0


def sequential_scan(coeffs: ScanCoefficients, h0=None) -> HiddenSequence:
    """Exact left fold of the recurrence in time order.

    Serves as the correctness reference for `parallel_scan_log`. No positivity
    requirement: any finite coefficients are accepted.
    """
    batch, steps, hidden = _check_3d(coeffs)
    h0 = _prepare_h0(h0, batch, hidden, coeffs.a.dtype, allow_negative=True)
    out = torch.empty(batch, steps, hidden, dtype=coeffs.a.dtype)
    h = h0
    for t in range(steps):
        h = coeffs.a[:, t] * h + coeffs.b[:, t]
        out[:, t] = h
    return HiddenSequence(h=out, h0=h0)


def _first_offender(mask: torch.Tensor) -> tuple[int, int, int]:
    # mask is [B, T, H]; returns the earliest flagged (batch, t, unit) index
    idx = int(mask.reshape(-1).to(torch.int8).argmax())
    _, steps, hidden = mask.shape
    b, rem = divmod(idx, steps * hidden)
    t, u = divmod(rem, hidden)
    return b, t, u


def _validate_positive(coeffs: ScanCoefficients) -> None:
    for name, x in (("a", coeffs.a), ("b", coeffs.b)):
        bad = ~(x > 0)  # catches non-positive and NaN entries alike
        if bool(bad.any()):
            b, t, u = _first_offender(bad)
            raise DomainError(
                f"coefficient {name} must be strictly positive for the log-space "
                f"scan; first offending entry at (batch={b}, t={t}, unit={u}) "
                f"with value {float(x[b, t, u])}"
            )


def _stream_slab(
    v: torch.Tensor,
    m: torch.Tensor,
    s: torch.Tensor,
    out: torch.Tensor,
    ed: torch.dtype,
):
    """Streamed cumulative log-sum-exp over one [B, H, C] slab of shifted terms.

    Carry state per lane: `m` is the running maximum over all previously seen
    terms (and the log of h0, if any), `s` the sum of exp(term - m) over those
    terms, both float64. The slab's exp/log/cumsum run in the elementwise
    dtype `ed` (torch's float64 transcendentals are scalar and several times
    slower, and shifted terms are small enough for `ed` once the slab span is
    bounded). Writes the inclusive prefix log-sum-exp into `out` (float64)
    and returns the updated carry. Splits the slab recursively when the
    within-slab rise of the running maximum would push exp() under `ed`'s
    underflow cliff.
    """
    span = v.shape[-1]
    m_end = torch.maximum(m, v.amax(dim=-1))
    if span > 1:
        m_start = torch.maximum(m, v[..., 0])
        # NaN lanes (possible under debug padding poisoning) are already lost
        # and must not veto a split another lane needs
        rise = torch.nan_to_num(m_end - m_start, nan=0.0, posinf=0.0)
        if float(rise.max()) > _MAX_SLAB_SPAN[ed]:
            half = span // 2
            m, s = _stream_slab(v[..., :half], m, s, out[..., :half], ed)
            return _stream_slab(v[..., half:], m, s, out[..., half:], ed)
    # All shifted exponents are <= 0; carry and slab terms stay representable
    # in `ed` because the slab span is bounded.
    base = s * torch.exp(m - m_end)
    total = torch.cumsum(torch.exp((v - m_end.unsqueeze(-1)).to(ed)), dim=-1)
    total += base.to(ed).unsqueeze(-1)
    out.copy_(m_end.unsqueeze(-1) + torch.log(total))
    return m_end, total[..., -1].to(torch.float64)


def parallel_scan_log(
    coeffs: ScanCoefficients,
    h0=None,
    *,
    chunk: int = DEFAULT_CHUNK,
    validate: bool = True,
    trace_path: str | None = None,
) -> HiddenSequence:
    """Log-space evaluation of the recurrence over the whole sequence.

    The quantities whose magnitude grows with T are kept in float64 regardless
    of the input dtype: the cumulative sum of log(a), the shifted-term tensor
    derived from it, the running-max/sum carries of the streamed log-sum-exp,
    and the final recombination of the two large cancelling terms. Bounded
    elementwise work (exp, log, within-slab accumulation of shifted terms)
    runs in the input dtype, whose underflow cliff also sets the slab-split
    threshold. Time is processed in slabs of `chunk` steps with carried
    per-lane state, so peak temporary memory is O(batch*hidden*chunk).

    With validate=True (the default), any non-positive a or b entry raises
    DomainError naming the first offending (batch, t, unit) index, as does a
    negative h0 entry. The model pipeline passes validate=False: its
    coefficients are positive by construction and padded regions may carry
    sentinel values that only the per-layer feature diagnostics inspect.
    """
    batch, steps, hidden = _check_3d(coeffs)
    if chunk < 1:
        raise StructuralError(f"chunk must be >= 1, got {chunk}")
    dtype = coeffs.a.dtype
    if dtype not in _MAX_SLAB_SPAN:
        raise StructuralError(f"unsupported coefficient dtype {dtype}; use float32 or float64")
    h0 = _prepare_h0(h0, batch, hidden, dtype, allow_negative=False)
    if validate:
        _validate_positive(coeffs)

    h064 = h0.to(torch.float64)
    positive = h064 > 0
    m = torch.where(positive, torch.log(h064.clamp(min=1e-300)), torch.full_like(h064, -torch.inf))
    s = positive.to(torch.float64)

    # output storage is [B, H, T]; the returned tensor is a [B, T, H] view
    out = torch.empty(batch, hidden, steps, dtype=dtype)
    alpha_carry = torch.zeros(batch, hidden, dtype=torch.float64)
    trace_rows: list[tuple[int, float, float]] = []

    for start in range(0, steps, chunk):
        stop = min(start + chunk, steps)
        a_c = coeffs.a[:, start:stop].transpose(1, 2)
        b_c = coeffs.b[:, start:stop].transpose(1, 2)
        # logs in the input dtype; the accumulation itself runs in float64
        alpha = torch.cumsum(torch.log(a_c), dim=-1, dtype=torch.float64)
        alpha += alpha_carry.unsqueeze(-1)
        alpha_carry = alpha[..., -1].clone()
        beta = torch.log(b_c)
        if trace_path is not None:
            a0 = alpha[0, 0].tolist()
            b0 = beta[0, 0].tolist()
            trace_rows.extend((start + i, a0[i], b0[i]) for i in range(stop - start))
        v = beta.to(torch.float64) - alpha
        lse = torch.empty_like(v)
        m, s = _stream_slab(v, m, s, lse, dtype)
        out[:, :, start:stop] = torch.exp((alpha + lse).to(dtype))

    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "alpha", "beta"])
            writer.writerows(trace_rows)

    return HiddenSequence(h=out.transpose(1, 2), h0=h0)


def last_state(seq: HiddenSequence, lengths) -> torch.Tensor:
    """Hidden state at each sequence's last valid step, [batch, hidden]."""
    batch, steps, hidden = seq.h.shape
    lengths = torch.as_tensor(lengths, dtype=torch.long)
    if lengths.shape != (batch,):
        raise StructuralError(
            f"lengths shape {tuple(lengths.shape)} does not match batch size {batch}"
        )
    if bool((lengths < 1).any()) or bool((lengths > steps).any()):
        raise StructuralError(
            f"every length must lie in [1, {steps}]; got range "
            f"[{int(lengths.min())}, {int(lengths.max())}]"
        )
    index = (lengths - 1).view(batch, 1, 1).expand(batch, 1, hidden)
    return seq.h.gather(1, index).squeeze(1)
