"""Dense Pauli-string operators on small qubit chains.

Site ordering convention: site 1 occupies the most significant tensor factor,
so ``to_dense("XI...I")`` acts on the leftmost qubit of the computational
basis label.  All operators are dense complex matrices; chains beyond desk
scale (N > ~10) are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import SingularMetric, SiteCountMismatch

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

#: rcond threshold below which a candidate metric counts as singular
METRIC_RCOND = 1e-12


@dataclass(frozen=True)
class PauliString:
    """One weighted tensor product of single-site Pauli matrices.

    ``letters`` holds one character per site out of ``I, X, Y, Z``;
    ``coefficient`` is an arbitrary finite complex weight.
    """

    coefficient: complex
    letters: str

    def __post_init__(self):
        if len(self.letters) < 1:
            raise SiteCountMismatch("empty Pauli string")
        bad = set(self.letters) - set("IXYZ")
        if bad:
            raise SiteCountMismatch(f"unknown Pauli letters {sorted(bad)!r}")
        if not np.isfinite(complex(self.coefficient)):
            raise ValueError("non-finite coefficient")

    @property
    def n_sites(self) -> int:
        return len(self.letters)


@dataclass(frozen=True)
class OperatorExpr:
    """Sum of Pauli strings over a common chain."""

    terms: tuple[PauliString, ...]

    def __post_init__(self):
        if not self.terms:
            raise SiteCountMismatch("expression with no terms")
        n = self.terms[0].n_sites
        for t in self.terms:
            if t.n_sites != n:
                raise SiteCountMismatch(
                    f"term {t.letters!r} has {t.n_sites} sites, expected {n}"
                )

    @property
    def n_sites(self) -> int:
        return self.terms[0].n_sites


def expr(terms: Iterable[tuple[complex, str]]) -> OperatorExpr:
    """Convenience builder: ``expr([(1.0, "XI"), (0.5j, "ZZ")])``."""
    return OperatorExpr(tuple(PauliString(c, s) for c, s in terms))


@dataclass(frozen=True)
class DenseOperator:
    """A 2^N x 2^N complex matrix with its dimension validated."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        if m.shape[0] & (m.shape[0] - 1) or m.shape[0] == 0:
            raise ValueError("operator dimension must be a power of two")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_sites(self) -> int:
        return self.dim.bit_length() - 1

    def __array__(self, dtype=None, copy=None):
        m = self.matrix
        if dtype is not None:
            m = m.astype(dtype)
        return np.array(m) if copy else m


def as_matrix(op) -> np.ndarray:
    """Accept a DenseOperator or a bare ndarray and return the ndarray."""
    if isinstance(op, DenseOperator):
        return op.matrix
    return np.asarray(op, dtype=complex)


def _kron_chain(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def to_dense(expression: OperatorExpr, n_sites: int) -> DenseOperator:
    """Realize a Pauli-string sum as a dense matrix on ``n_sites`` qubits.

    Site 1 is the most significant tensor factor.  Raises SiteCountMismatch
    if any term's letter count differs from ``n_sites``.
    """
    for t in expression.terms:
        if t.n_sites != n_sites:
            raise SiteCountMismatch(
                f"term {t.letters!r} has {t.n_sites} sites, expected {n_sites}"
            )
    dim = 2**n_sites
    out = np.zeros((dim, dim), dtype=complex)
    for t in expression.terms:
        out += complex(t.coefficient) * _kron_chain([PAULI[c] for c in t.letters])
    return DenseOperator(out)


def single_site(letter: str, site: int, n_sites: int, coefficient: complex = 1.0) -> OperatorExpr:
    """Pauli ``letter`` acting on 1-based ``site`` of an ``n_sites`` chain."""
    if not 1 <= site <= n_sites:
        raise SiteCountMismatch(f"site {site} outside 1..{n_sites}")
    letters = "I" * (site - 1) + letter + "I" * (n_sites - site)
    return OperatorExpr((PauliString(coefficient, letters),))


def two_site(letter: str, site: int, n_sites: int, coefficient: complex = 1.0) -> OperatorExpr:
    """``letter`` on sites ``site`` and ``site+1`` (1-based, nearest neighbours)."""
    if not 1 <= site <= n_sites - 1:
        raise SiteCountMismatch(f"bond {site} outside 1..{n_sites - 1}")
    letters = "I" * (site - 1) + letter * 2 + "I" * (n_sites - site - 1)
    return OperatorExpr((PauliString(coefficient, letters),))


def parity_operator(n_sites: int) -> DenseOperator:
    """Mirror flip of the chain: P sigma_j P^-1 = sigma_{N+1-j}.

    A permutation matrix on the computational basis that reverses the site
    order; Hermitian and involutory.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    dim = 2**n_sites
    perm = np.zeros(dim, dtype=int)
    for state in range(dim):
        rev = 0
        for bit in range(n_sites):
            if state >> bit & 1:
                rev |= 1 << (n_sites - 1 - bit)
        perm[state] = rev
    mat = np.zeros((dim, dim), dtype=complex)
    mat[perm, np.arange(dim)] = 1.0
    return DenseOperator(mat)


def u_operator(n_sites: int) -> DenseOperator:
    """Global spin flip U = tensor product of sigma^x over all sites."""
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    return to_dense(OperatorExpr((PauliString(1.0, "X" * n_sites),)), n_sites)


def frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, "fro"))


def reciprocal_condition(m: np.ndarray) -> float:
    """Smallest over largest singular value (0 for the zero matrix)."""
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def pseudo_hermiticity_residual(h, zeta) -> float:
    """Relative Frobenius defect of the similarity zeta H zeta^-1 = H^dagger.

    Returns ``||zeta h zeta^-1 - h^dagger||_F / ||h||_F`` with 0/0 taken as 0.
    Zero exactly when ``h`` is pseudo-Hermitian with respect to ``zeta``.
    Raises SingularMetric when zeta's reciprocal condition estimate falls
    below 1e-12.
    """
    hm = as_matrix(h)
    zm = as_matrix(zeta)
    if zm.shape != hm.shape:
        raise ValueError("operator and metric dimensions differ")
    if reciprocal_condition(zm) < METRIC_RCOND:
        raise SingularMetric("pseudo-metric is numerically singular")
    # zeta h zeta^-1 via a right solve, avoiding the explicit inverse
    transformed = np.linalg.solve(zm.T, (zm @ hm).T).T
    defect = frobenius(transformed - hm.conj().T)
    denom = frobenius(hm)
    if denom == 0.0:
        return 0.0
    return defect / denom


def commutator_norm(a, b) -> float:
    am, bm = as_matrix(a), as_matrix(b)
    return frobenius(am @ bm - bm @ am)
