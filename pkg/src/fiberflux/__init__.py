"""Volume-preserving flows on fibered 3-manifolds built from torus blocks:
closed-form helicity, winding, wrappingness, and trunkenness, plus direct
Monte Carlo flux estimation through fiber annuli."""

from .assembly import (
    Assembly,
    BoundaryRef,
    Gluing,
    SweepRow,
    Violation,
    assembly_from_dict,
    assembly_to_dict,
    helicity_sweep,
    standard_decomposition,
    sweep_ranges,
    total_helicity,
    validate_assembly,
)
from .blocks import (
    BlockA,
    BlockB,
    BlockC,
    BoundaryRecord,
    Jet,
    LutzPair,
    LutzReport,
    Profile,
    SewResult,
    block_a_field,
    block_c_field,
    lutz_valid,
    profile_from_spec,
    profile_to_spec,
    sew_lutz,
    transform_torus,
    wronskian_fn,
)
from .core import (
    RngStream,
    ScalarFn,
    affine,
    antiderivative,
    constant,
    derivative_check,
    find_roots,
    integrate,
    lincomb,
    piecewise_linear,
    polynomial,
    rk4_flow,
    scalarfn_from_spec,
    scalarfn_to_spec,
    sinusoid,
)
from .errors import (
    ConfigError,
    DegenerateJetError,
    EpsilonTooLargeError,
    EvaluationError,
    FiberfluxError,
    IncompleteAssemblyError,
    NotAKnotError,
    NotTorusAutomorphismError,
    SingularCoreError,
    SingularFieldError,
    ToleranceNotMetError,
    UnsewableError,
)
from .flux_mc import (
    ConvergenceRow,
    FiberSurface,
    FiberSweep,
    FluxEstimate,
    MeasureSpec,
    ShearReport,
    convergence_report,
    dirac_crossings,
    dirac_orbit_measure,
    fiber_sweep,
    flux_estimate,
    shear_invariance_test,
    shear_matrix,
    volume_measure,
)
from .invariants import (
    LEBESGUE,
    PROBABILITY,
    SINE_HELICITY_NOTE,
    CohomologyClass,
    InequalityCheck,
    InvariantReport,
    ObstructionReport,
    TangentOrbit,
    check_inequalities,
    fiber_flux,
    helicity_block_c,
    invariant_report,
    section_obstruction,
    sine_helicity_reference,
    tangent_orbit_detect,
    torus_knot_trunk,
    trunk_union_bounds,
    trunkenness_block_c,
    winding_block_c,
    wrappingness_block_c,
)

__version__ = "0.1.0"
