"""Detonation-wave profiles and Evans-function stability certificates."""

from . import errors
from .errors import (
    ContinuationError,
    ContourThroughZero,
    ConvergenceError,
    DetwaveError,
    DomainError,
    DomainExhausted,
    IgnitionError,
    LaxViolation,
    LiftError,
    NoBurnedState,
    NoConnection,
    NoShock,
    NumericalError,
    SplitAmbiguous,
    StiffnessError,
    StructureError,
    TransversalityError,
    UsageError,
)
from .models import (
    GasState,
    IdealGasModel,
    IdealGasParams,
    MajdaModel,
    MajdaParams,
    ModelSpec,
    check_structure,
    evaluate_flux,
    flux_jacobian,
    ignition,
    make_model,
)
from .linearize import (
    AnalyticBasis,
    CoefficientAssembly,
    SpectralFrame,
    analytic_basis,
    assemble_frozen_rns,
    assemble_ns,
    assemble_rns,
    assemble_znd,
    limiting_splitting,
    ns_frame,
    ns_matrix,
    rns_frame,
    rns_matrix,
    znd_frame,
    znd_interior_matrix,
    znd_jump_vector,
)
from .evans import (
    EvansOptions,
    EvansValue,
    ManifoldState,
    evans_lopatinski,
    evans_ns,
    evans_rns,
    integrate_manifold,
)
from .roots import (
    Contour,
    LocatedRoot,
    RootReport,
    Winding,
    locate_roots,
    winding_number,
)
from .limits import (
    ConvergenceReport,
    StudyConfig,
    build_evaluators,
    decide_verdicts,
    full_certificate,
    match_root_sets,
    region1_study,
    region2_study,
    region3_check,
    scale_value,
)
from .profiles import (
    EndStates,
    ProfileOptions,
    ViscousDetonationProfile,
    ViscousShockProfile,
    ZndProfile,
    compute_ns_shock_profile,
    compute_viscous_detonation_profile,
    compute_znd_profile,
    load_profile,
    sample_profile,
    save_profile,
    solve_burned_state,
    solve_end_states,
    solve_neumann_shock,
)

__version__ = "0.1.0"
