"""Biorthogonal eigensystems and per-metric topological indices.

Right eigenvectors come from the matrix itself, left ones from the adjoint
problem; the two sets are paired by eigenvalue proximity and normalized to
<L_n|R_n> = 1.  Degenerate subspaces are only fixed up to a linear
transformation, so before an index can be read off they are rotated to
diagonalize the metric Gram matrix <R_m|zeta|R_n>.  For a level with real
eigenvalue the diagonal entry c_n = <R_n|zeta|R_n> is real; its sign is the
level's topological index and |c_n|/<R_n|R_n> measures how far the level is
from an exceptional point (the quality drops to zero exactly there).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ComplexEigenvalue,
    DefectiveMatrix,
    GramSingular,
    NearException,
    PairingFailure,
)
from .model import MetricDescriptor
from .operators import as_matrix

TOL_CLUSTER = 1e-8
TOL_DEFECT = 1e-10
TOL_PAIR = 1e-6
TOL_REAL = 1e-9
TOL_QUALITY = 1e-6
MAX_RESIDUAL = 1e-6


@dataclass(frozen=True)
class BiorthogonalEigensystem:
    """Eigenvalues with paired right columns and left rows, <L_n|R_n> = 1."""

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    biorth_residual: float

    def __post_init__(self):
        n = len(self.eigenvalues)
        if self.right.shape != (n, n) or self.left.shape != (n, n):
            raise ValueError("inconsistent eigensystem shapes")

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class LevelIndex:
    """Topological index of one level under one pseudo-metric."""

    metric_label: str
    value: int
    quality: float

    def __post_init__(self):
        if self.value not in (1, -1):
            raise ValueError("index value must be +1 or -1")
        if not 0.0 < self.quality <= 1.0 + 1e-9:
            raise ValueError("quality must lie in (0, 1]")
        object.__setattr__(self, "quality", min(float(self.quality), 1.0))


def _cluster_indices(values: np.ndarray, tol: float) -> tuple[tuple[int, ...], ...]:
    """Transitive closure of |v_i - v_j| <= tol, clusters ordered by member."""
    k = len(values)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            if abs(values[i] - values[j]) <= tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(sorted(g)) for g in sorted(groups.values(), key=min))


def _fix_gauge(right: np.ndarray, left: np.ndarray, columns) -> None:
    """Unit-normalize the chosen right columns and make the largest-modulus
    component real positive, compensating the matching left rows in place."""
    for n in columns:
        r = np.linalg.norm(right[:, n])
        if r == 0.0:
            raise DefectiveMatrix("zero right eigenvector column")
        right[:, n] /= r
        left[n, :] *= r
        k = int(np.argmax(np.abs(right[:, n])))
        ph = right[k, n] / abs(right[k, n])
        right[:, n] /= ph
        left[n, :] *= ph


def biorthogonal_eig(
    h,
    tol_cluster: float = TOL_CLUSTER,
    tol_defect: float = TOL_DEFECT,
    tol_pair: float = TOL_PAIR,
    max_residual: float = MAX_RESIDUAL,
) -> BiorthogonalEigensystem:
    """Complete biorthonormal eigensystem of a dense matrix.

    Eigenvalues are sorted by (real, imaginary) part.  Left rows are built
    cluster by cluster from the adjoint problem: with adjoint columns Y_c
    and right columns R_c sharing one (near-)degenerate eigenvalue, the rows
    solve (Y_c^dagger R_c) L_c = Y_c^dagger, which enforces biorthonormality
    inside the cluster; across clusters it holds because eigenvectors of
    distinct eigenvalues are automatically biorthogonal.

    Tolerances are taken relative to max(1, spectral radius).  Raises
    PairingFailure when eigenvalues of the adjoint problem cannot be matched
    one-to-one to conjugated eigenvalues, and DefectiveMatrix when a cluster
    overlap matrix is numerically singular or the final residual exceeds
    ``max_residual`` (a coalesced eigenvector pair, i.e. an exceptional
    point at working precision).
    """
    hm = as_matrix(h)
    if not np.all(np.isfinite(hm)):
        raise ValueError("matrix entries must be finite")
    dim = hm.shape[0]
    w_r, rv = np.linalg.eig(hm)
    order = np.lexsort((w_r.imag, w_r.real))
    w_r, rv = w_r[order], rv[:, order]
    w_a, av = np.linalg.eig(hm.conj().T)

    scale = max(1.0, float(np.max(np.abs(w_r))))
    clusters = _cluster_indices(w_r, tol_cluster * scale)
    owner = {}
    for ci, members in enumerate(clusters):
        for n in members:
            owner[n] = ci

    assigned: list[list[int]] = [[] for _ in clusters]
    for m in range(dim):
        target = np.conj(w_a[m])
        dists = np.abs(w_r - target)
        n_best = int(np.argmin(dists))
        if dists[n_best] > tol_pair * scale:
            raise PairingFailure(
                f"adjoint eigenvalue {w_a[m]:.6g} has no partner within "
                f"{tol_pair * scale:.3e}"
            )
        assigned[owner[n_best]].append(m)

    left = np.empty_like(rv)
    for members, adj in zip(clusters, assigned):
        if len(adj) != len(members):
            raise PairingFailure(
                f"cluster at {w_r[members[0]]:.6g} matched {len(adj)} adjoint "
                f"vectors for {len(members)} levels"
            )
        yc = av[:, adj]
        rc = rv[:, list(members)]
        m_ov = yc.conj().T @ rc
        smin = np.linalg.svd(m_ov, compute_uv=False)[-1]
        if smin <= tol_defect:
            raise DefectiveMatrix(
                f"left/right overlap collapsed (smin={smin:.3e}) at eigenvalue "
                f"{w_r[members[0]]:.6g}"
            )
        left[list(members), :] = np.linalg.solve(m_ov, yc.conj().T)

    _fix_gauge(rv, left, range(dim))
    residual = float(np.max(np.abs(left @ rv - np.eye(dim))))
    if residual > max_residual:
        raise DefectiveMatrix(
            f"biorthonormalization residual {residual:.3e} exceeds "
            f"{max_residual:.1e}; eigenvectors coalesce at working precision"
        )
    return BiorthogonalEigensystem(w_r, rv, left, residual)


def cluster_degeneracies(
    eigensystem: BiorthogonalEigensystem, tol_cluster: float
) -> tuple[tuple[int, ...], ...]:
    """Partition level indices into degenerate clusters (transitive closure)."""
    if tol_cluster <= 0:
        raise ValueError("tol_cluster must be positive")
    return _cluster_indices(eigensystem.eigenvalues, tol_cluster)


def _require_real(eigenvalue: complex, tol_real: float) -> float:
    if abs(eigenvalue.imag) > tol_real * max(1.0, abs(eigenvalue)):
        raise ComplexEigenvalue(
            f"eigenvalue {eigenvalue:.6g} is not real within {tol_real:.1e}"
        )
    return float(eigenvalue.real)


def _slot_permutation(lam: np.ndarray, overlap: np.ndarray) -> list[int]:
    """Assign new cluster vectors to the slots of the old ones.

    Greedy on the overlap magnitudes keeps each rotated vector in the slot
    of the input vector it resembles most, so weakly split degeneracies keep
    their band identity; exact ties go to the larger Gram eigenvalue first.
    """
    k = len(lam)
    # quantize overlaps so exact symmetry ties compare equal
    quant = np.round(np.abs(overlap) / 1e-12).astype(np.int64)
    perm = [-1] * k
    free_rows = set(range(k))
    free_cols = set(range(k))
    for _ in range(k):
        best_key = None
        best_ij = (-1, -1)
        for i in free_rows:
            for j in free_cols:
                key = (quant[i, j], lam[j], -i, -j)
                if best_key is None or key > best_key:
                    best_key, best_ij = key, (i, j)
        i, j = best_ij
        perm[i] = j
        free_rows.remove(i)
        free_cols.remove(j)
    return perm


def resolve_degenerate_subspace(
    eigensystem: BiorthogonalEigensystem,
    cluster,
    zeta,
    tol_gram: float = TOL_DEFECT,
    tol_real: float = TOL_REAL,
) -> BiorthogonalEigensystem:
    """Rebase one degenerate cluster so its metric Gram matrix is diagonal.

    Any invertible recombination R' = R_c A (with left rows transformed
    contragradiently) is an equally valid eigenbasis of the cluster, and the
    Gram matrix transforms by congruence A^dagger G A.  We orthonormalize
    the right subspace first and then take the eigenbasis of the compressed
    metric: the Gram matrix comes out diagonal (so zeta R'_n is proportional
    to the matching left ket), the new columns stay unit norm, and in the
    Hermitian limit the diagonal entries are exactly the +-1 eigenvalues of
    the restricted involution.  Raises GramSingular when the compressed
    metric has a numerically zero eigenvalue or the cluster's right vectors
    are linearly dependent (a defective direction hides inside the cluster).
    """
    members = tuple(cluster)
    for n in members:
        _require_real(complex(eigensystem.eigenvalues[n]), tol_real)
    if len(members) == 1:
        return eigensystem
    zm = as_matrix(zeta)
    rc = eigensystem.right[:, list(members)]
    lc = eigensystem.left[list(members), :]
    q, t = np.linalg.qr(rc)
    tdiag = np.abs(np.diag(t))
    if np.min(tdiag) <= tol_gram * max(1.0, np.max(tdiag)):
        raise GramSingular("cluster right vectors are linearly dependent")
    g0 = q.conj().T @ zm @ q
    g0 = 0.5 * (g0 + g0.conj().T)
    lam, vec = np.linalg.eigh(g0)
    if np.min(np.abs(lam)) <= tol_gram:
        raise GramSingular(
            f"cluster Gram matrix has eigenvalue {lam[np.argmin(np.abs(lam))]:.3e}"
        )
    new_rc = q @ vec
    new_lc = vec.conj().T @ (t @ lc)
    perm = _slot_permutation(lam, rc.conj().T @ new_rc)
    right = eigensystem.right.copy()
    left = eigensystem.left.copy()
    right[:, list(members)] = new_rc[:, perm]
    left[list(members), :] = new_lc[perm, :]
    _fix_gauge(right, left, members)
    residual = float(np.max(np.abs(left @ right - np.eye(eigensystem.dim))))
    return BiorthogonalEigensystem(eigensystem.eigenvalues, right, left, residual)


def resolve_all_clusters(
    eigensystem: BiorthogonalEigensystem,
    zeta,
    tol_cluster: float = TOL_CLUSTER,
    tol_gram: float = TOL_DEFECT,
    tol_real: float = TOL_REAL,
) -> BiorthogonalEigensystem:
    """Resolve every real multi-level cluster against one metric."""
    out = eigensystem
    for cluster in cluster_degeneracies(eigensystem, tol_cluster):
        if len(cluster) > 1:
            out = resolve_degenerate_subspace(out, cluster, zeta, tol_gram, tol_real)
    return out


def _metric_label(zeta) -> str:
    return zeta.label if isinstance(zeta, MetricDescriptor) else "zeta"


def _metric_matrix(zeta) -> np.ndarray:
    return as_matrix(zeta.operator if isinstance(zeta, MetricDescriptor) else zeta)


def mapping_coefficient(eigensystem: BiorthogonalEigensystem, level: int, zeta) -> complex:
    """<R_n|zeta|R_n>, the coefficient mapping R_n to the left ket."""
    r = eigensystem.right[:, level]
    return complex(r.conj() @ (_metric_matrix(zeta) @ r))


def topological_index(
    eigensystem: BiorthogonalEigensystem,
    level: int,
    zeta,
    tol_quality: float = TOL_QUALITY,
    tol_real: float = TOL_REAL,
) -> LevelIndex:
    """Sign of <R_n|zeta|R_n> for a real-eigenvalue level.

    Requires degenerate clusters to be resolved against the same metric
    first.  Raises ComplexEigenvalue when the level is not real within
    tolerance and NearException when the quality (the modulus of the
    normalized expectation) falls below ``tol_quality``, which happens
    exactly when an exceptional point is approached.
    """
    _require_real(complex(eigensystem.eigenvalues[level]), tol_real)
    c = mapping_coefficient(eigensystem, level, zeta)
    r = eigensystem.right[:, level]
    quality = abs(c.real) / float(np.real(r.conj() @ r))
    if quality <= tol_quality:
        raise NearException(
            f"index quality {quality:.3e} at level {level} is below "
            f"{tol_quality:.1e} (exceptional point nearby)"
        )
    return LevelIndex(_metric_label(zeta), 1 if c.real > 0 else -1, quality)


def mapping_pair(
    eigensystem: BiorthogonalEigensystem, level: int, zeta
) -> tuple[np.ndarray, np.ndarray]:
    """Rescaled (right ket, left ket) with zeta R'_n = index * L'_n.

    The rescaling R' = alpha R, L' = L/alpha with alpha = |c_n|^(-1/2)
    absorbs the mapping coefficient up to its sign while keeping
    <L'_n|R'_n> = 1.
    """
    c = mapping_coefficient(eigensystem, level, zeta)
    if abs(c) <= TOL_DEFECT:
        raise NearException("mapping coefficient vanishes; cannot rescale")
    alpha = 1.0 / np.sqrt(abs(c))
    r = alpha * eigensystem.right[:, level]
    l_ket = eigensystem.left[level, :].conj() / alpha
    return r, l_ket
