"""Coherence extraction from energy-ladder reservoirs: protocols, closed forms and checks."""

from .closed_form import (
    SeriesParams,
    asymptote_check,
    catalytic_overlap,
    max_useful_coherence,
    predicted_amount,
    series_F,
    series_G,
)
from .coherence import (
    CoherenceReport,
    check_basis_permutation,
    check_energy_conserving,
    coherence_split,
    created_free_coherence,
    is_incoherent,
    l1_coherence,
)
from .errors import (
    CohExtractError,
    ConsistencyError,
    DivergenceError,
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidStateError,
    RepetitionLimitError,
    TruncationError,
)
from .hilbert import LadderSpec, ReservoirSpec, partial_trace, shift_operator, shift_power
from .protocols import (
    RunTrace,
    StepResult,
    build_catalytic_unitary,
    build_dlevel_unitary,
    build_strong_unitary,
    build_weak_unitary,
    catalytic_step,
    dlevel_step,
    max_repetitions,
    repeat_extraction,
    strong_step,
    weak_step,
)

__version__ = "0.1.0"
