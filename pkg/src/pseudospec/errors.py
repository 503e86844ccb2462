"""Exception hierarchy shared by all pseudospec modules."""


class PseudospecError(Exception):
    """Base class for every numerical or validation failure in this package."""


class SiteCountMismatch(PseudospecError):
    """A Pauli string's letter count disagrees with the declared chain length."""


class SingularMetric(PseudospecError):
    """Candidate pseudo-metric is numerically singular (rcond below threshold)."""


class OddChain(PseudospecError):
    """Staggered gain/loss requested on an odd chain, which breaks the mirror rule."""


class ZeroScale(PseudospecError):
    """Normalization scale sqrt(J^2 + Delta^2) vanishes."""


class PairingFailure(PseudospecError):
    """Eigenvalue matching between H and its adjoint is ambiguous beyond tolerance."""


class DefectiveMatrix(PseudospecError):
    """Left/right eigenvector overlap underflows; the matrix is (numerically) defective."""


class GramSingular(PseudospecError):
    """Metric Gram matrix of a degenerate cluster is singular beyond tolerance."""


class ComplexEigenvalue(PseudospecError):
    """Topological index requested for a level whose eigenvalue is not real."""


class NearException(PseudospecError):
    """Index quality collapsed below tolerance; the level is too close to an EP."""


class AmbiguousTracking(PseudospecError):
    """Band assignment between adjacent parameter points is not unique; refine the grid."""


class UnresolvedClassification(PseudospecError):
    """Crossing diagnostics fall between the EP / diabolical / avoided thresholds."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PrecisionLoss(PseudospecError):
    """Finite-difference Richardson estimates disagree beyond the relative tolerance."""


class CorrectorDivergence(PseudospecError):
    """Manifold corrector root left its trust region; the trace is truncated."""


class NoTransition(PseudospecError):
    """Both bracket endpoints agree on eigenvalue reality; nothing to bisect."""


class ConfigError(PseudospecError):
    """Run configuration file is missing, malformed, or violates an invariant."""
