"""Memristive reservoir computing with a parallel log-space scan.

Fixed random reservoirs whose state update follows a potentiation/depression
rate balance. Because the update is linear in the state once the recurrent
matrix is dropped, whole sequences evaluate through a numerically stable
log-space prefix scan instead of a step-by-step loop; stacked blocks are
joined by subtractive skip connections and read out with one ridge solve.
"""

from .artifacts import load_artifact, save_artifact
from .data import (
    DatasetManifest,
    NormalizationStats,
    TimeSeriesBatch,
    cache_dataset,
    load_cached,
    load_csv,
    load_ts,
    normalize,
    poison_padding,
    synth_random_uniform,
)
from .dynamics import (
    COEFF_FLOOR,
    DEFAULT_CONSTANTS,
    DynamicsScalars,
    MemristiveConstants,
    RescaleConstants,
    depression_rate,
    fixed_point,
    mars_coefficients,
    potentiation_rate,
    rescale,
)
from .errors import (
    ConfigurationError,
    DiagnosticError,
    DomainError,
    InitializationError,
    MemReservoirError,
    NumericalError,
    ParseError,
    StructuralError,
)
from .evolve import EvoConfig, EvoResult, evolve
from .models import (
    EncoderParams,
    EsnConfig,
    EsnModel,
    MarsConfig,
    MarsForwardInfo,
    MarsModel,
    MemristiveBlockParams,
    MfEsnConfig,
    MfEsnModel,
    esn_forward,
    filter_cascade,
    init_esn,
    init_mars,
    init_mf_esn,
    mars_forward,
    mars_forward_full,
    mars_forward_reference,
    mf_esn_forward,
    spectral_radius_estimate,
    temporal_conv,
    zero_recurrence,
)
from .readout import RidgeReadout, accuracy, fit_ridge, predict, scores
from .scan import (
    HiddenSequence,
    ScanCoefficients,
    last_state,
    parallel_scan_log,
    sequential_scan,
)

__version__ = "0.1.0"
