"""Exact simulator for single-photon logic gates mediated by weak
cross-Kerr couplings to coherent qubus beams."""

from .state import (
    Branch,
    HybridState,
    coherent_overlap,
    fidelity,
    pol_amplitudes,
    product_state,
    state_from_amplitudes,
)
from .elements import (
    ANY,
    ModeSelector,
    apply_instruction,
    pbs_diag,
    pbs_hv,
    phase_shift,
    photon_bs,
    qubus_bs,
    qubus_phase,
    xpm,
)
from .detection import (
    DetectorParams,
    PovmBins,
    PovmOutcome,
    detection_error_eq11,
    detection_error_exact,
    enumerate_fock_outcomes,
    misclassification_probability,
    povm_bins,
    qnd_detect,
    sample_fock,
    vacuum_response_probability,
)
from .gates import (
    ExactMode,
    FreshAncilla,
    GateResult,
    ParkedAncilla,
    QndMode,
    Record,
    ResourceReport,
    ResourceTrace,
    SampleMode,
    c_path,
    c_phase,
    chain,
    cnot,
    coalesce,
    controlled_pair,
    cz,
    fredkin,
    initial_records,
    merging,
    multi_toffoli,
    resource_report,
    synth_two_qubit,
    toffoli,
)
from .kak import TwoQubitCanonicalParams, canonical_gate, kak_decompose
from . import errors, oracle, verify

__all__ = [name for name in dir() if not name.startswith("_")]
