"""Simulation and verification toolkit for hierarchical temporal relay (HTR) instances."""
from .instance import (
    BadHeader,
    BadLength,
    BadShape,
    BadTarget,
    BitPayload,
    DigitOutOfRange,
    Family,
    HtrInstance,
    InstanceError,
    decode,
    encode,
    new_instance,
    random_instance,
)
from .sequential import ExecutionTrace, eval_predicate, run_blocks, run_payload, run_sequential, transition
from .causal import (
    Action,
    CapacityMode,
    CausalTrace,
    CausalWorld,
    ConstraintViolation,
    Rule,
    apply_tick,
    canonical_schedule,
    init_world,
    min_causal_time,
    run_schedule,
)
from .infoflow import (
    InfoReport,
    audit_run,
    cutset_budget,
    exact_mutual_information,
    fano_residual,
    message_entropy,
    min_capacity,
    time_lower_bound,
)
from .circuit import (
    CausalCertificate,
    LayeredCircuit,
    ViolationReport,
    build_canonical_circuit,
    build_flat_circuit,
    check_implements_htr,
    evaluate_circuit,
)

__version__ = "0.1.0"
