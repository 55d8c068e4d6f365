"""Numerical laboratory for quantum stop times on a sliced, truncated Fock space.

The package realises discrete quantum stop times, their convolution, the
stopped projection / shift / flow maps, and stopped operator cocycles with
their inner flow families, on a finite tensor-product model where every
identity of the theory holds to machine precision.
"""

from .errors import (
    AmpliationError,
    CocycleBuildError,
    DimensionLimitError,
    HorizonError,
    QstopError,
    ScenarioError,
    StopTimeValidationError,
)
from .fock import (
    STRICT_TOL,
    TOL,
    FockOperator,
    FockVector,
    SliceConfig,
    StepFunction,
    ampliate,
    enumerate_basis,
    exponential_inner_oracle,
    exponential_vector,
    fock_operator,
    identity_operator,
    initial_operator,
    joint_vector,
    number_operator,
    restrict_initial,
    slot_occupations,
    slot_operator,
    tensor_join,
    tensor_split,
    vacuum_vector,
    zero_step_function,
)
from .secondquant import (
    apply_shift,
    ccr_flow,
    ccr_flow_ampliated,
    conditional_vacuum,
    p_tail_projection,
    shift,
)
from .stoptime import (
    DiscreteStopTime,
    cdf_sample,
    coarsen,
    convergence_gap,
    convolve,
    convolve_via_shifted_sets,
    make_deterministic,
    make_first_arrival,
    make_from_adapted_projections,
    product_rectangle,
    shift_time,
    validate_stop_time,
)
from .stopped import (
    StoppedBundle,
    build_bundle,
    stopped_flow,
    stopped_flow_ampliated,
    stopped_projection,
    stopped_projection_ampliated,
    stopped_shift,
)
from .cocycle import (
    Cocycle,
    StoppedCocycleResult,
    build_cocycle,
    cocycle_continuity_probe,
    eh_composition_defect,
    eh_flow_identity,
    eh_flow_vacuum,
    isometry_defect,
    stop_cocycle,
    stopped_cocycle_identity_check,
    vacuum_composition_defect,
)

__version__ = "0.1.0"
