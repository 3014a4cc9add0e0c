"""Bidirectional controlled teleportation over the five-qubit Brown state."""
from .choreography import Mode, expected_uncontrolled_fidelity, run_session
from .corrections import (
    CorrectionEntry,
    CorrectionTable,
    PauliLabel,
    derive_table,
    parse_table,
    serialize_table,
    verify_table,
)
from .protocol import (
    InputQubit,
    ProtocolOutcome,
    alice_unitary,
    bell_states,
    brown_state,
    outcome_probability,
    prepare_system,
    run_protocol,
)
from .qsim import (
    Engine,
    MeasurementBasis,
    QOperator,
    StateVector,
    apply,
    factorize_bipartite,
    fidelity,
    measure,
    tensor_product,
)

__version__ = "0.1.0"
