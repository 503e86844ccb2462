"""Non-Hermitian transverse-field Ising chains with balanced gain and loss.

H = sum_j Delta sigma^x_j - J sum_{j=1}^{N-1} sigma^z_j sigma^z_{j+1}
    + i sum_j (gamma^z_j sigma^z_j + gamma^x_j sigma^x_j)

with open boundaries and the mirror-antisymmetry constraint
gamma^s_j = -gamma^s_{N+1-j} that makes H pseudo-Hermitian under the site
reversal P.  Depending on which channel carries the gain/loss, additional
parameter-independent pseudo-metrics exist (the global spin flip U, or the
product PU); ``pseudo_metric_catalog`` enumerates and validates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, OddChain, ZeroScale
from .operators import (
    DenseOperator,
    OperatorExpr,
    PauliString,
    commutator_norm,
    parity_operator,
    pseudo_hermiticity_residual,
    single_site,
    to_dense,
    two_site,
    u_operator,
)

#: relative pseudo-Hermiticity residual a catalog metric must satisfy
CATALOG_RESIDUAL_TOL = 1e-12

#: absolute Frobenius norm bound for [H, U] in the transversal arrangement
COMMUTATOR_TOL = 1e-12

_MIRROR_TOL = 1e-12


class Arrangement(str, Enum):
    """Which Pauli channel carries the staggered gain/loss."""

    LONGITUDINAL = "longitudinal"
    TRANSVERSAL = "transversal"
    MIXED = "mixed"


def _as_tuple(seq: Sequence[float]) -> tuple[float, ...]:
    vals = tuple(float(v) for v in seq)
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError("gain/loss amplitudes must be finite")
    return vals


def _mirror_antisymmetric(vals: tuple[float, ...]) -> bool:
    ref = max(1.0, max((abs(v) for v in vals), default=0.0))
    return all(abs(a + b) <= _MIRROR_TOL * ref for a, b in zip(vals, reversed(vals)))


@dataclass(frozen=True)
class GainLossConfig:
    """Per-site imaginary field amplitudes for both Pauli channels.

    Both sequences must be mirror-antisymmetric, gamma_j = -gamma_{N+1-j}.
    The arrangement kind pins which channel may be populated; the all-zero
    (Hermitian) limit is accepted for every kind so sweeps can start at
    zero gain.  ``amplitude`` optionally records the scalar strength the
    sequences were generated from.
    """

    n_sites: int
    gamma_z: tuple[float, ...]
    gamma_x: tuple[float, ...]
    kind: Arrangement
    amplitude: Optional[float] = None

    def __post_init__(self):
        if self.n_sites < 1:
            raise ConfigError("n_sites must be >= 1")
        object.__setattr__(self, "gamma_z", _as_tuple(self.gamma_z))
        object.__setattr__(self, "gamma_x", _as_tuple(self.gamma_x))
        object.__setattr__(self, "kind", Arrangement(self.kind))
        for name, vals in (("gamma_z", self.gamma_z), ("gamma_x", self.gamma_x)):
            if len(vals) != self.n_sites:
                raise ConfigError(f"{name} must have length n_sites={self.n_sites}")
            if not _mirror_antisymmetric(vals):
                raise ConfigError(f"{name} violates gamma_j = -gamma_(N+1-j)")
        z_zero = all(v == 0.0 for v in self.gamma_z)
        x_zero = all(v == 0.0 for v in self.gamma_x)
        if self.kind is Arrangement.LONGITUDINAL and not x_zero:
            raise ConfigError("longitudinal arrangement requires gamma_x = 0")
        if self.kind is Arrangement.TRANSVERSAL and not z_zero:
            raise ConfigError("transversal arrangement requires gamma_z = 0")
        if self.kind is Arrangement.MIXED and (z_zero != x_zero):
            # one populated channel only is a mislabeled pure arrangement
            raise ConfigError("mixed arrangement requires both channels (or neither)")


@dataclass(frozen=True)
class ModelConfig:
    """Chain parameters: transverse field, Ising coupling and gain/loss."""

    gain_loss: GainLossConfig
    delta: float
    coupling: float

    def __post_init__(self):
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "coupling", float(self.coupling))
        if not (math.isfinite(self.delta) and math.isfinite(self.coupling)):
            raise ConfigError("delta and coupling must be finite")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if self.delta == 0.0 and self.coupling == 0.0:
            raise ZeroScale("delta and coupling cannot both vanish")

    @property
    def n_sites(self) -> int:
        return self.gain_loss.n_sites


@dataclass(frozen=True)
class MetricDescriptor:
    """A labeled pseudo-metric operator (Hermitian involution)."""

    label: str
    operator: DenseOperator

    def __post_init__(self):
        if not isinstance(self.operator, DenseOperator):
            object.__setattr__(self, "operator", DenseOperator(self.operator))
        m = self.operator.matrix
        if np.linalg.norm(m - m.conj().T) > 1e-12:
            raise ConfigError(f"metric {self.label} is not Hermitian")
        if np.linalg.norm(m @ m - np.eye(m.shape[0])) > 1e-12:
            raise ConfigError(f"metric {self.label} is not involutory")


def staggered_config(
    kind: Arrangement | str,
    n_sites: int,
    gamma: float,
    mixed_split: float = 0.5,
) -> GainLossConfig:
    """Alternating gain/loss pattern gamma_j = gamma * (-1)^(j-1).

    Only even chains keep the pattern mirror-antisymmetric; odd n_sites
    raises OddChain.  For the mixed kind the amplitude is shared between
    the two channels with weight ``mixed_split`` on each (0.5 by default).
    """
    kind = Arrangement(kind)
    if n_sites % 2:
        raise OddChain("staggered gain/loss requires an even number of sites")
    if not math.isfinite(gamma):
        raise ConfigError("gamma must be finite")
    pattern = tuple(gamma * (-1.0) ** j for j in range(n_sites))
    zeros = (0.0,) * n_sites
    if kind is Arrangement.LONGITUDINAL:
        gz, gx = pattern, zeros
    elif kind is Arrangement.TRANSVERSAL:
        gz, gx = zeros, pattern
    else:
        scaled = tuple(mixed_split * v for v in pattern)
        gz = gx = scaled
    return GainLossConfig(n_sites, gz, gx, kind, amplitude=gamma)


def build_hamiltonian(cfg: ModelConfig) -> DenseOperator:
    """Dense matrix of H0 + i(gain/loss) on the open chain."""
    n = cfg.n_sites
    terms: list[PauliString] = []
    for j in range(1, n + 1):
        terms.extend(single_site("X", j, n, cfg.delta).terms)
    for j in range(1, n):
        terms.extend(two_site("Z", j, n, -cfg.coupling).terms)
    for j in range(1, n + 1):
        gz = cfg.gain_loss.gamma_z[j - 1]
        gx = cfg.gain_loss.gamma_x[j - 1]
        if gz != 0.0:
            terms.extend(single_site("Z", j, n, 1j * gz).terms)
        if gx != 0.0:
            terms.extend(single_site("X", j, n, 1j * gx).terms)
    return to_dense(OperatorExpr(tuple(terms)), n)


def pseudo_metric_catalog(cfg: ModelConfig) -> tuple[MetricDescriptor, ...]:
    """Parameter-independent pseudo-metrics valid for the arrangement.

    Always contains P (site reversal); the longitudinal arrangement adds
    the spin flip U, the transversal one adds PU.  Every returned operator
    is re-validated against the actual Hamiltonian (relative residual at
    most 1e-12) so a misconfigured arrangement fails loudly rather than
    shipping a wrong index column.
    """
    h = build_hamiltonian(cfg)
    n = cfg.n_sites
    p = parity_operator(n)
    chosen: list[tuple[str, DenseOperator]] = [("P", p)]
    if cfg.gain_loss.kind is Arrangement.LONGITUDINAL:
        chosen.append(("U", u_operator(n)))
    elif cfg.gain_loss.kind is Arrangement.TRANSVERSAL:
        u = u_operator(n)
        cnorm = commutator_norm(h, u)
        if cnorm > COMMUTATOR_TOL:
            raise ConfigError(
                f"transversal arrangement expects [H, U] = 0, got norm {cnorm:.3e}"
            )
        chosen.append(("PU", DenseOperator(p.matrix @ u.matrix)))
    out = []
    for label, op in chosen:
        res = pseudo_hermiticity_residual(h, op)
        if res > CATALOG_RESIDUAL_TOL:
            raise ConfigError(
                f"metric {label} fails pseudo-Hermiticity check: residual {res:.3e}"
            )
        out.append(MetricDescriptor(label, op))
    return tuple(out)


def normalize(cfg: ModelConfig) -> tuple[float, float, float]:
    """Return (j_tilde, gamma_tilde, scale) with scale = sqrt(J^2 + Delta^2)."""
    scale = math.hypot(cfg.coupling, cfg.delta)
    if scale == 0.0:
        raise ZeroScale("cannot normalize with delta = coupling = 0")
    gl = cfg.gain_loss
    if gl.amplitude is not None:
        gamma = gl.amplitude
    else:
        gamma = max(
            (abs(z) + abs(x) for z, x in zip(gl.gamma_z, gl.gamma_x)), default=0.0
        )
    return cfg.coupling / scale, gamma / scale, scale


class FixedScaleFamily:
    """Two-parameter chain family at unit energy scale.

    Points are (j_tilde, gamma_tilde) with Delta = sqrt(1 - j_tilde^2),
    J = j_tilde, so normalized energies coincide with raw ones.  Implements
    the parametric-model interface used by sweeps and degeneracy tracing:
    ``hamiltonian(point)``, ``metrics()``, ``bounds``, ``scale``.
    """

    scale = 1.0

    def __init__(self, n_sites: int, kind: Arrangement | str, mixed_split: float = 0.5):
        self.n_sites = int(n_sites)
        self.kind = Arrangement(kind)
        self.mixed_split = float(mixed_split)
        self._metrics: Optional[tuple[MetricDescriptor, ...]] = None
        self._basis: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    @property
    def bounds(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((0.0, 1.0), (0.0, math.inf))

    def config(self, point) -> ModelConfig:
        j_tilde, gamma_tilde = float(point[0]), float(point[1])
        if not -1e-12 <= j_tilde <= 1.0 + 1e-12:
            raise ConfigError(f"j_tilde {j_tilde} outside [0, 1]")
        j_tilde = min(max(j_tilde, 0.0), 1.0)
        delta = math.sqrt(max(0.0, 1.0 - j_tilde * j_tilde))
        gl = staggered_config(self.kind, self.n_sites, gamma_tilde, self.mixed_split)
        return ModelConfig(gain_loss=gl, delta=delta, coupling=j_tilde)

    def _basis_matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # H(j, g) = sqrt(1-j^2) HX - j HZZ + i g HG with all three matrices
        # parameter free, so sweeps pay three axpys per point instead of a
        # full Pauli-string assembly
        if self._basis is None:
            n = self.n_sites
            x_terms = [t for j in range(1, n + 1) for t in single_site("X", j, n).terms]
            zz_terms = [t for j in range(1, n) for t in two_site("Z", j, n).terms]
            unit = staggered_config(self.kind, n, 1.0, self.mixed_split)
            g_terms = []
            for j in range(1, n + 1):
                gz, gx = unit.gamma_z[j - 1], unit.gamma_x[j - 1]
                if gz != 0.0:
                    g_terms.extend(single_site("Z", j, n, gz).terms)
                if gx != 0.0:
                    g_terms.extend(single_site("X", j, n, gx).terms)
            self._basis = (
                to_dense(OperatorExpr(tuple(x_terms)), n).matrix,
                to_dense(OperatorExpr(tuple(zz_terms)), n).matrix,
                to_dense(OperatorExpr(tuple(g_terms)), n).matrix,
            )
        return self._basis

    def hamiltonian(self, point) -> np.ndarray:
        cfg = self.config(point)
        hx, hzz, hg = self._basis_matrices()
        amp = cfg.gain_loss.amplitude or 0.0
        return cfg.delta * hx - cfg.coupling * hzz + 1j * amp * hg

    def metrics(self) -> tuple[MetricDescriptor, ...]:
        # operators are parameter independent; validate once at a generic
        # interior point where a wrong catalog could not slip through
        if self._metrics is None:
            self._metrics = pseudo_metric_catalog(self.config((0.5, 0.25)))
        return self._metrics

    @property
    def metric_labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.metrics())


class MatrixFamily:
    """Ad-hoc parametric family from a matrix builder and fixed metrics.

    Adapts hand-written models (analytic two-level examples, regression
    cases) to the interface consumed by sweeps and degeneracy tracing.
    """

    scale = 1.0

    def __init__(self, builder, metrics: Sequence[MetricDescriptor]):
        self._builder = builder
        self._metrics = tuple(metrics)
        if not self._metrics:
            raise ConfigError("a matrix family needs at least one metric")

    def hamiltonian(self, point) -> np.ndarray:
        return np.asarray(self._builder((float(point[0]), float(point[1]))), dtype=complex)

    def metrics(self) -> tuple[MetricDescriptor, ...]:
        return self._metrics

    @property
    def metric_labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self._metrics)
