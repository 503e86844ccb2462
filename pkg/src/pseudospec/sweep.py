"""Parameter sweeps with biorthogonal level tracking and CSV export.

A sweep walks the normalized coupling grid at fixed gain strength, solves
the biorthogonal eigensystem at every point, assigns per-metric indices
where they are defined, and stitches levels into continuous bands by
matching left/right eigenvector overlaps between neighbouring points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    AmbiguousTracking,
    ComplexEigenvalue,
    ConfigError,
    DefectiveMatrix,
    GramSingular,
    NearException,
)
from .model import Arrangement, FixedScaleFamily, MetricDescriptor
from .spectral import (
    TOL_CLUSTER,
    TOL_QUALITY,
    TOL_REAL,
    BiorthogonalEigensystem,
    LevelIndex,
    biorthogonal_eig,
    cluster_degeneracies,
    resolve_degenerate_subspace,
    topological_index,
)

#: imaginary parts at or below this are written as exact zeros
IM_FLUSH = 1e-10


@dataclass(frozen=True)
class SweepPlan:
    """Grid specification for a family of fixed-gain sweeps."""

    j_tilde_grid: tuple[float, ...]
    gamma_tilde_values: tuple[float, ...]
    arrangement: Arrangement
    n_sites: int
    mixed_split: float = 0.5

    def __post_init__(self):
        grid = tuple(float(j) for j in self.j_tilde_grid)
        object.__setattr__(self, "j_tilde_grid", grid)
        object.__setattr__(
            self, "gamma_tilde_values", tuple(float(g) for g in self.gamma_tilde_values)
        )
        object.__setattr__(self, "arrangement", Arrangement(self.arrangement))
        if len(grid) < 2:
            raise ConfigError("j_tilde_grid needs at least 2 points")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("j_tilde_grid must be strictly increasing")
        if grid[0] < 0.0 or grid[-1] >= 1.0:
            raise ConfigError("j_tilde_grid must lie in [0, 1)")
        if any(g < 0 for g in self.gamma_tilde_values):
            raise ConfigError("gamma_tilde values must be >= 0")

    def family(self) -> FixedScaleFamily:
        return FixedScaleFamily(self.n_sites, self.arrangement, self.mixed_split)


@dataclass
class BandSample:
    """One grid point of one band; eps_tilde is None at defective points."""

    j_tilde: float
    eps_tilde: Optional[complex]
    indices: dict[str, Optional[LevelIndex]]
    slot: Optional[int] = None
    defective: bool = False


@dataclass
class TrackedBand:
    band_id: int
    samples: list[BandSample] = field(default_factory=list)


def track_levels(
    prev: BiorthogonalEigensystem,
    next_: BiorthogonalEigensystem,
    tol_cluster: float = TOL_CLUSTER,
    tol_real: float = TOL_REAL,
    ratio_limit: float = 0.5,
) -> list[int]:
    """Permutation sending each level of ``prev`` to its continuation.

    Greedy global assignment on the overlap magnitudes |<L_prev,n|R_next,m>|
    with eigenvalue-proximity tie-breaking.  A level whose best and
    second-best overlaps are within ``ratio_limit`` of each other raises
    AmbiguousTracking unless the ambiguity is harmless: contested targets
    that are themselves degenerate, a mutually conjugate target pair (a
    real pair entering a complex bubble, assigned by imaginary part), a
    source level sitting in a degenerate cluster (any mixture is valid),
    or a source pair with nearly parallel eigenvectors close to a
    coalescence, where the pair-internal assignment is conventional.
    """
    dim = prev.dim
    if next_.dim != dim:
        raise ValueError("eigensystem dimensions differ")
    overlap = np.abs(prev.left @ next_.right)
    scale = max(
        1.0,
        float(np.max(np.abs(prev.eigenvalues))),
        float(np.max(np.abs(next_.eigenvalues))),
    )
    prev_clusters = cluster_degeneracies(prev, tol_cluster)
    cluster_size = {}
    for c in prev_clusters:
        for n in c:
            cluster_size[n] = len(c)

    perm = [-1] * dim
    taken = [False] * dim
    order = np.dstack(np.unravel_index(np.argsort(-overlap, axis=None), overlap.shape))[0]
    for n, m in order:
        if perm[n] == -1 and not taken[m]:
            perm[n] = int(m)
            taken[m] = True

    for n in range(dim):
        row = overlap[n, :]
        best = row[perm[n]]
        second = np.max(np.delete(row, perm[n])) if dim > 1 else 0.0
        if best <= 0 or second / best <= ratio_limit:
            continue
        if cluster_size.get(n, 1) > 1:
            continue
        m2 = int(np.argsort(-row)[1] if np.argsort(-row)[0] == perm[n] else np.argsort(-row)[0])
        ea, eb = next_.eigenvalues[perm[n]], next_.eigenvalues[m2]
        if abs(ea - eb) <= tol_cluster * scale:
            continue
        if abs(ea - np.conj(eb)) <= tol_cluster * scale and abs(ea.imag) > tol_real * scale:
            continue
        # a complex level leaving its bubble splits symmetrically onto two
        # real levels; either assignment is valid (canonicalized below)
        en = prev.eigenvalues[n]
        if abs(en.imag) > tol_real * scale and np.any(
            np.abs(prev.eigenvalues - np.conj(en)) <= tol_cluster * scale
        ):
            continue
        # a real pair fresh out of (or headed into) a bubble keeps nearly
        # parallel eigenvectors for a while; the assignment inside such a
        # pair is conventional, so take eigenvalue order, matching the
        # bubble-exit canonicalization below
        rn = prev.right[:, n]
        partner = next(
            (
                k
                for k in range(dim)
                if k != n
                and perm[k] == m2
                and abs(np.vdot(prev.right[:, k], rn)) >= 0.9
            ),
            None,
        )
        if partner is not None:
            if (n < partner) != (perm[n] < perm[partner]):
                perm[n], perm[partner] = perm[partner], perm[n]
            continue
        # contested targets closer than a few step-motions of the level sit
        # below the sweep's identity resolution; the greedy pick stands
        d_move = min(abs(prev.eigenvalues[n] - ea), abs(prev.eigenvalues[n] - eb))
        if abs(ea - eb) <= 4.0 * d_move:
            continue
        raise AmbiguousTracking(
            f"level {n}: best/second overlap {best:.3f}/{second:.3f}; "
            "grid step too large"
        )

    # canonicalize conjugate-pair entries: lower source slot takes Im < 0
    for n1 in range(dim):
        for n2 in range(n1 + 1, dim):
            m1, m2 = perm[n1], perm[n2]
            e1, e2 = next_.eigenvalues[m1], next_.eigenvalues[m2]
            if (
                abs(e1 - np.conj(e2)) <= tol_cluster * scale
                and abs(e1.imag) > tol_real * scale
                and abs(prev.eigenvalues[n1].imag) <= tol_real * scale
                and abs(prev.eigenvalues[n2].imag) <= tol_real * scale
            ):
                if e1.imag > e2.imag:
                    perm[n1], perm[n2] = m2, m1

    # canonicalize bubble exits: a conjugate source pair landing on two real
    # levels sends its Im < 0 member to the lower sorted slot
    for n1 in range(dim):
        for n2 in range(n1 + 1, dim):
            p1, p2 = prev.eigenvalues[n1], prev.eigenvalues[n2]
            m1, m2 = perm[n1], perm[n2]
            if (
                abs(p1 - np.conj(p2)) <= tol_cluster * scale
                and abs(p1.imag) > tol_real * scale
                and abs(next_.eigenvalues[m1].imag) <= tol_real * scale
                and abs(next_.eigenvalues[m2].imag) <= tol_real * scale
            ):
                lo, hi = min(m1, m2), max(m1, m2)
                if p1.imag < 0:
                    perm[n1], perm[n2] = lo, hi
                else:
                    perm[n1], perm[n2] = hi, lo
    return perm


def indices_for_metric(
    es: BiorthogonalEigensystem,
    metric: MetricDescriptor,
    tol_cluster: float = TOL_CLUSTER,
    tol_quality: float = TOL_QUALITY,
    tol_real: float = TOL_REAL,
) -> list[Optional[LevelIndex]]:
    """Per-level indices for one metric; None where the index is undefined.

    Real degenerate clusters are resolved against the metric first; complex
    levels, near-exceptional levels and clusters with singular Gram
    matrices all yield None rather than a guessed sign.
    """
    out: list[Optional[LevelIndex]] = [None] * es.dim
    resolved = es
    skip: set[int] = set()
    for cluster in cluster_degeneracies(es, tol_cluster):
        if any(
            abs(es.eigenvalues[n].imag) > tol_real * max(1.0, abs(es.eigenvalues[n]))
            for n in cluster
        ):
            skip.update(cluster)
            continue
        if len(cluster) == 1:
            continue
        try:
            resolved = resolve_degenerate_subspace(resolved, cluster, metric.operator)
        except GramSingular:
            skip.update(cluster)
    for n in range(es.dim):
        if n in skip:
            continue
        try:
            out[n] = topological_index(resolved, n, metric, tol_quality, tol_real)
        except (ComplexEigenvalue, NearException):
            out[n] = None
    return out


def run_sweep(
    plan: SweepPlan,
    tol_cluster: float = TOL_CLUSTER,
    tol_quality: float = TOL_QUALITY,
    tol_real: float = TOL_REAL,
) -> dict[float, list[TrackedBand]]:
    """Tracked bands for every gain value of the plan.

    Defective grid points (exceptional points sitting exactly on the grid)
    are recorded as flagged samples and the sweep continues; tracking then
    bridges from the last good point.  Points whose band assignment is
    ambiguous get the same treatment, since that only happens inside a
    coalescence neighborhood where band identity is not defined anyway; more
    than three consecutive ambiguous points mean the grid really is too
    coarse and the error propagates.
    """
    fam = plan.family()
    metrics = fam.metrics()
    dim = 2**plan.n_sites
    out: dict[float, list[TrackedBand]] = {}
    for gamma in plan.gamma_tilde_values:
        bands = [TrackedBand(i) for i in range(dim)]
        slot_of_band: list[int] = list(range(dim))
        prev_es: Optional[BiorthogonalEigensystem] = None
        ambiguous_run = 0
        for j in plan.j_tilde_grid:
            try:
                es = biorthogonal_eig(fam.hamiltonian((j, gamma)))
            except DefectiveMatrix:
                for band in bands:
                    band.samples.append(
                        BandSample(j, None, {m.label: None for m in metrics}, None, True)
                    )
                continue
            if prev_es is not None:
                try:
                    perm = track_levels(prev_es, es, tol_cluster, tol_real)
                except AmbiguousTracking:
                    ambiguous_run += 1
                    if ambiguous_run > 3:
                        raise
                    for band in bands:
                        band.samples.append(
                            BandSample(
                                j, None, {m.label: None for m in metrics}, None, True
                            )
                        )
                    continue
                ambiguous_run = 0
                slot_of_band = [perm[s] for s in slot_of_band]
            by_metric = {
                m.label: indices_for_metric(es, m, tol_cluster, tol_quality, tol_real)
                for m in metrics
            }
            for band in bands:
                s = slot_of_band[band.band_id] if prev_es is not None else band.band_id
                band.samples.append(
                    BandSample(
                        j,
                        complex(es.eigenvalues[s]) / fam.scale,
                        {label: vals[s] for label, vals in by_metric.items()},
                        s,
                    )
                )
            slot_of_band = [b.samples[-1].slot for b in bands]
            prev_es = es
        out[gamma] = bands
    return out


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_sweep(
    bands_by_gamma: dict[float, list[TrackedBand]],
    destination,
    metric_labels,
) -> Path:
    """Write the sweep CSV: one row per (gamma, grid point, band).

    Column order is fixed; undefined indices and defective samples leave
    their fields empty; imaginary parts at or below 1e-10 are written as 0.
    """
    dest = Path(destination)
    if not bands_by_gamma:
        raise ValueError("no bands to export")
    header = ["gamma_tilde", "j_tilde", "band_id", "re_eps_tilde", "im_eps_tilde"]
    for label in metric_labels:
        header += [f"index_{label}", f"quality_{label}"]
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for gamma, bands in bands_by_gamma.items():
            n_samples = len(bands[0].samples)
            for i in range(n_samples):
                for band in bands:
                    s = band.samples[i]
                    row = [_fmt(gamma), _fmt(s.j_tilde), str(band.band_id)]
                    if s.eps_tilde is None:
                        row += ["", ""]
                    else:
                        im = s.eps_tilde.imag
                        row += [
                            _fmt(s.eps_tilde.real),
                            _fmt(0.0 if abs(im) <= IM_FLUSH else im),
                        ]
                    for label in metric_labels:
                        idx = s.indices.get(label)
                        if idx is None:
                            row += ["", ""]
                        else:
                            row += [str(idx.value), _fmt(idx.quality)]
                    writer.writerow(row)
    return dest


def uniform_grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    """Evenly spaced grid; endpoints included."""
    if n < 2:
        raise ConfigError("grid needs at least 2 points")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ConfigError("grid bounds must be finite with lo < hi")
    return tuple(np.linspace(lo, hi, n).tolist())
