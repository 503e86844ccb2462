"""Spectra, indices and degeneracy manifolds of pseudo-Hermitian spin chains."""

from .errors import (
    AmbiguousTracking,
    ComplexEigenvalue,
    ConfigError,
    CorrectorDivergence,
    DefectiveMatrix,
    GramSingular,
    NearException,
    NoTransition,
    OddChain,
    PairingFailure,
    PrecisionLoss,
    PseudospecError,
    SingularMetric,
    SiteCountMismatch,
    UnresolvedClassification,
    ZeroScale,
)
from .degeneracy import (
    CrossingEvent,
    EPLocation,
    ManifoldTrace,
    PairTracker,
    ProjectedHamiltonian,
    certify_terminus,
    check_zero_condition,
    classify_crossing,
    export_events,
    export_manifold,
    find_crossings_1d,
    locate_ep_1d,
    project_hamiltonian,
    trace_dp_manifold,
)
from .model import (
    Arrangement,
    FixedScaleFamily,
    GainLossConfig,
    MatrixFamily,
    MetricDescriptor,
    ModelConfig,
    build_hamiltonian,
    normalize,
    pseudo_metric_catalog,
    staggered_config,
)
from .operators import (
    DenseOperator,
    OperatorExpr,
    PauliString,
    commutator_norm,
    expr,
    parity_operator,
    pseudo_hermiticity_residual,
    to_dense,
    u_operator,
)
from .oracle import (
    FermionModes,
    many_body_spectrum,
    occupation_table,
    single_particle_modes,
    u_index_oracle,
)
from .spectral import (
    BiorthogonalEigensystem,
    LevelIndex,
    biorthogonal_eig,
    cluster_degeneracies,
    mapping_pair,
    resolve_degenerate_subspace,
    topological_index,
)
from .sweep import (
    BandSample,
    SweepPlan,
    TrackedBand,
    export_sweep,
    run_sweep,
    track_levels,
    uniform_grid,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousTracking",
    "Arrangement",
    "BandSample",
    "BiorthogonalEigensystem",
    "ComplexEigenvalue",
    "ConfigError",
    "CorrectorDivergence",
    "CrossingEvent",
    "DefectiveMatrix",
    "DenseOperator",
    "EPLocation",
    "FermionModes",
    "FixedScaleFamily",
    "GainLossConfig",
    "GramSingular",
    "LevelIndex",
    "ManifoldTrace",
    "MatrixFamily",
    "MetricDescriptor",
    "ModelConfig",
    "NearException",
    "NoTransition",
    "OddChain",
    "OperatorExpr",
    "PairTracker",
    "PairingFailure",
    "PauliString",
    "PrecisionLoss",
    "ProjectedHamiltonian",
    "PseudospecError",
    "SingularMetric",
    "SiteCountMismatch",
    "SweepPlan",
    "TrackedBand",
    "UnresolvedClassification",
    "ZeroScale",
    "biorthogonal_eig",
    "build_hamiltonian",
    "certify_terminus",
    "check_zero_condition",
    "classify_crossing",
    "cluster_degeneracies",
    "commutator_norm",
    "export_events",
    "export_manifold",
    "export_sweep",
    "expr",
    "find_crossings_1d",
    "locate_ep_1d",
    "many_body_spectrum",
    "mapping_pair",
    "normalize",
    "occupation_table",
    "parity_operator",
    "project_hamiltonian",
    "pseudo_hermiticity_residual",
    "pseudo_metric_catalog",
    "resolve_degenerate_subspace",
    "run_sweep",
    "single_particle_modes",
    "staggered_config",
    "to_dense",
    "topological_index",
    "trace_dp_manifold",
    "track_levels",
    "u_index_oracle",
    "u_operator",
    "uniform_grid",
]
