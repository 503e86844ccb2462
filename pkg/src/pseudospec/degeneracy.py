"""Degeneracy detection, classification, and manifold continuation.

Crossings found along fixed-gain sweeps are refined by bisection on the
tracked level pair, classified as exceptional, diabolical or avoided, and
protected diabolical crossings are continued through parameter space by a
predictor-corrector scheme built on the projected two-level problem.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ComplexEigenvalue,
    CorrectorDivergence,
    DefectiveMatrix,
    GramSingular,
    NearException,
    NoTransition,
    PrecisionLoss,
    UnresolvedClassification,
)
from .model import FixedScaleFamily
from .spectral import (
    TOL_CLUSTER,
    TOL_QUALITY,
    TOL_REAL,
    biorthogonal_eig,
    cluster_degeneracies,
    resolve_degenerate_subspace,
    topological_index,
)
from .sweep import TrackedBand

TOL_GAP = 1e-8
#: eigenvector overlap above this certifies coalescence
OVERLAP_EP = 1.0 - 1e-4
#: eigenvector overlap below this certifies a genuinely two-dimensional pair
OVERLAP_DP = 0.9
FD_STEP = 1e-5
TOL_FD = 1e-5
TOL_EP_PARAM = 1e-8
#: angle (rad) under which the slope and coupling gradients count as collinear
COLLINEAR_ANGLE = 1e-3


@dataclass(frozen=True)
class CrossingEvent:
    """A (near-)degeneracy of one band pair on a fixed-gain line."""

    location: tuple[float, float]
    band_pair: tuple[int, int]
    classification: Optional[str]
    index_products: dict[str, Optional[int]]
    gap_residual: float
    energy: float


@dataclass(frozen=True)
class ProjectedHamiltonian:
    """Gradient data of the two-level problem projected on a real pair.

    ``u1``/``u2`` are the real level-slope vectors; ``w_by_metric`` holds the
    complex coupling gradient in each metric-rescaled basis.  ``u_minus``
    spans the normal of the degeneracy line, ``w`` decides whether the
    crossing splits (EP) or survives (DP).
    """

    base_point: tuple[float, float]
    eps_pair: tuple[float, float]
    u1: np.ndarray
    u2: np.ndarray
    w_by_metric: dict[str, np.ndarray]
    index_products: dict[str, int]
    grad_scale: float
    reciprocity_residual: float
    near_collinear: bool

    @property
    def u_minus(self) -> np.ndarray:
        return 0.5 * (self.u1 - self.u2)

    @property
    def u_plus(self) -> np.ndarray:
        return 0.5 * (self.u1 + self.u2)

    @property
    def w(self) -> np.ndarray:
        return next(iter(self.w_by_metric.values()))


@dataclass(frozen=True)
class EPLocation:
    """Bisected reality-transition point of a tracked level pair."""

    location: tuple[float, float]
    complex_side: int
    gap: float
    overlap: float


@dataclass
class ManifoldTrace:
    """Polyline of verified degeneracy points with termination labels."""

    points: list[tuple[float, float]] = field(default_factory=list)
    gaps: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    terminations: tuple[str, str] = ("", "")
    seed: Optional[CrossingEvent] = None

    def __len__(self):
        return len(self.points)


def _as_point(p) -> tuple[float, float]:
    j, g = float(p[0]), float(p[1])
    return (j, g)


class PairTracker:
    """Follows one level pair through parameter space by overlap continuity.

    Eigenvectors of a diabolical pair stay linearly independent on the
    degeneracy itself, so overlap tracking remains well conditioned across
    crossings; it only breaks down at exceptional points, which is exactly
    where tracing must stop anyway.
    """

    def __init__(self, model: FixedScaleFamily, point, es, ia: int, ib: int):
        self.model = model
        self.point = _as_point(point)
        self.es = es
        self.ia = ia
        self.ib = ib

    @classmethod
    def seed(cls, model: FixedScaleFamily, point, ia: int, ib: int) -> "PairTracker":
        es = biorthogonal_eig(model.hamiltonian(_as_point(point)))
        return cls(model, point, es, ia, ib)

    @classmethod
    def seed_near_energy(cls, model: FixedScaleFamily, point, energy: float) -> "PairTracker":
        """Track the two levels closest to each other near a target energy."""
        es = biorthogonal_eig(model.hamiltonian(_as_point(point)))
        order = np.argsort(np.abs(es.eigenvalues - energy))[:4]
        best = None
        for ii in range(len(order)):
            for jj in range(ii + 1, len(order)):
                a, b = int(order[ii]), int(order[jj])
                gap = abs(es.eigenvalues[a] - es.eigenvalues[b])
                if best is None or gap < best[0]:
                    best = (gap, a, b)
        return cls(model, point, es, best[1], best[2])

    def clone(self) -> "PairTracker":
        return PairTracker(self.model, self.point, self.es, self.ia, self.ib)

    @property
    def eps_pair(self) -> tuple[complex, complex]:
        return (
            complex(self.es.eigenvalues[self.ia]),
            complex(self.es.eigenvalues[self.ib]),
        )

    @property
    def gap(self) -> float:
        ea, eb = self.eps_pair
        return abs(ea - eb)

    @property
    def signed_gap(self) -> float:
        ea, eb = self.eps_pair
        return ea.real - eb.real

    def both_real(self, tol_real: float = TOL_REAL) -> bool:
        ea, eb = self.eps_pair
        s = max(1.0, abs(ea), abs(eb))
        return abs(ea.imag) <= tol_real * s and abs(eb.imag) <= tol_real * s

    def advance(self, point, max_step: float = 0.02) -> "PairTracker":
        """Move the tracker to ``point`` in substeps, reassigning the pair."""
        target = _as_point(point)
        dist = math.hypot(target[0] - self.point[0], target[1] - self.point[1])
        n_sub = max(1, int(math.ceil(dist / max_step)))

        def lerp(t: float) -> tuple[float, float]:
            return (
                (1 - t) * self.point[0] + t * target[0],
                (1 - t) * self.point[1] + t * target[1],
            )

        for k in range(1, n_sub + 1):
            try:
                self._step(lerp(k / n_sub))
            except DefectiveMatrix:
                if k == n_sub:
                    raise
                # interior substep hit a defective point; shift it off
                self._step(lerp((k + 0.382) / n_sub))
        self.point = target
        return self

    def _step(self, p) -> None:
        es2 = biorthogonal_eig(self.model.hamiltonian(p))
        rows = np.abs(self.es.left[[self.ia, self.ib], :] @ es2.right)
        a = int(np.argmax(rows[0]))
        b = int(np.argmax(rows[1]))
        if a == b:
            # contested target: weaker row takes its runner-up
            if rows[0, a] >= rows[1, b]:
                b = int(np.argsort(-rows[1])[1])
            else:
                a = int(np.argsort(-rows[0])[1])
        ea, eb = es2.eigenvalues[a], es2.eigenvalues[b]
        s = max(1.0, abs(ea), abs(eb))
        pa, pb = self.es.eigenvalues[self.ia], self.es.eigenvalues[self.ib]
        if abs(ea - np.conj(eb)) <= TOL_CLUSTER * s and abs(ea.imag) > TOL_REAL * s:
            # conjugate targets: keep previous imaginary orientation, or pin
            # the first slot to the Im < 0 branch on bubble entry
            want_a_neg = pa.imag < pb.imag if abs(pa.imag - pb.imag) > TOL_REAL * s else True
            if (ea.imag < eb.imag) != want_a_neg:
                a, b = b, a
        self.es = es2
        self.ia, self.ib = a, b


def _real_pair_or_raise(tracker: PairTracker, tol_real: float) -> tuple[float, float]:
    ea, eb = tracker.eps_pair
    s = max(1.0, abs(ea), abs(eb))
    if abs(ea.imag) > tol_real * s or abs(eb.imag) > tol_real * s:
        raise ComplexEigenvalue(
            f"pair is complex at {tracker.point}: {ea:.6g}, {eb:.6g}"
        )
    return (ea.real, eb.real)


def _resolved_for_metric(es, metric, tol_cluster=TOL_CLUSTER):
    resolved = es
    for cluster in cluster_degeneracies(es, tol_cluster):
        if len(cluster) == 1:
            continue
        if any(abs(es.eigenvalues[n].imag) > TOL_REAL for n in cluster):
            continue
        resolved = resolve_degenerate_subspace(resolved, cluster, metric.operator)
    return resolved


def project_hamiltonian(
    model: FixedScaleFamily,
    base_point,
    pair: tuple[int, int],
    fd_step: float = FD_STEP,
    tol_fd: float = TOL_FD,
    tol_real: float = TOL_REAL,
    tol_quality: float = TOL_QUALITY,
) -> ProjectedHamiltonian:
    """Gradients of the pair-projected two-level problem at a real base point.

    The projection uses frozen biorthogonal eigenvectors of the base point,
    rescaled per metric so the metric maps right onto left vectors exactly.
    Central differences at two step sizes feed a Richardson extrapolation;
    disagreement beyond ``tol_fd`` relative to the Hamiltonian gradient
    scale raises PrecisionLoss.
    """
    point = _as_point(base_point)
    es = biorthogonal_eig(model.hamiltonian(point))
    ia, ib = int(pair[0]), int(pair[1])
    ea, eb = es.eigenvalues[ia], es.eigenvalues[ib]
    s = max(1.0, abs(ea), abs(eb))
    if abs(ea.imag) > tol_real * s or abs(eb.imag) > tol_real * s:
        raise ComplexEigenvalue(f"projection base pair is complex at {point}")

    metrics = model.metrics()
    products: dict[str, int] = {}
    bases: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for metric in metrics:
        resolved = _resolved_for_metric(es, metric)
        za = topological_index(resolved, ia, metric, tol_quality, tol_real)
        zb = topological_index(resolved, ib, metric, tol_quality, tol_real)
        products[metric.label] = za.value * zb.value
        zeta = metric.operator
        rr = resolved.right[:, [ia, ib]]
        ll = resolved.left[[ia, ib], :]
        alphas = []
        for k, n in enumerate((ia, ib)):
            c = complex(np.vdot(resolved.right[:, n], zeta @ resolved.right[:, n]))
            alphas.append(abs(c.real) ** -0.5)
        rr = rr * np.array(alphas)[None, :]
        ll = ll / np.array(alphas)[:, None]
        bases[metric.label] = (ll, rr)

    first = metrics[0].label

    def grad_mats(h: float) -> list[np.ndarray]:
        # dH/dp_axis by central differences; metric independent
        out = []
        for axis in range(2):
            dp = [0.0, 0.0]
            dp[axis] = h
            hp = model.hamiltonian((point[0] + dp[0], point[1] + dp[1]))
            hm = model.hamiltonian((point[0] - dp[0], point[1] - dp[1]))
            out.append((hp - hm) / (2 * h))
        return out

    mats1 = grad_mats(fd_step)
    mats2 = grad_mats(fd_step / 2)
    grad_scale = math.sqrt(sum(float(np.linalg.norm(m)) ** 2 for m in mats2))

    results: dict[str, np.ndarray] = {}
    for metric in metrics:
        ll, rr = bases[metric.label]
        d1 = np.stack([ll @ m @ rr for m in mats1])
        d2 = np.stack([ll @ m @ rr for m in mats2])
        rich = (4.0 * d2 - d1) / 3.0
        rel = float(np.max(np.abs(rich - d2))) / max(grad_scale, 1e-300)
        if rel > tol_fd:
            raise PrecisionLoss(
                f"finite differences disagree at {point}: rel error {rel:.3e}"
            )
        results[metric.label] = rich

    g0 = results[first]
    u1 = g0[:, 0, 0]
    u2 = g0[:, 1, 1]
    im_max = max(float(np.max(np.abs(u1.imag))), float(np.max(np.abs(u2.imag))))
    if im_max > 100 * tol_fd * max(grad_scale, 1.0):
        raise PrecisionLoss(
            f"level slopes acquired imaginary parts ({im_max:.3e}) at {point}"
        )
    u1 = u1.real.copy()
    u2 = u2.real.copy()

    w_by_metric = {label: g[:, 0, 1].copy() for label, g in results.items()}
    recip = 0.0
    for metric in metrics:
        g = results[metric.label]
        zprod = products[metric.label]
        r = float(np.max(np.abs(g[:, 1, 0] - zprod * np.conj(g[:, 0, 1]))))
        recip = max(recip, r / max(grad_scale, 1e-300))

    u_minus = 0.5 * (u1 - u2)
    w = w_by_metric[first]
    nu = float(np.linalg.norm(u_minus))
    nw = float(np.linalg.norm(w))
    near_collinear = False
    if nu > 0 and nw > 1e-12 * max(grad_scale, 1.0):
        cosang = abs(np.vdot(w, u_minus.astype(complex))) / (nu * nw)
        near_collinear = bool(cosang > math.cos(COLLINEAR_ANGLE))

    return ProjectedHamiltonian(
        base_point=point,
        eps_pair=(float(ea.real), float(eb.real)),
        u1=u1,
        u2=u2,
        w_by_metric=w_by_metric,
        index_products=products,
        grad_scale=grad_scale,
        reciprocity_residual=recip,
        near_collinear=near_collinear,
    )


def check_zero_condition(index_products: dict[str, Optional[int]]) -> bool:
    """True when some metric pair disagrees on the index product.

    Opposite products under two metrics force the projected coupling to
    vanish identically, protecting the crossing against gap opening.
    """
    vals = [v for v in index_products.values() if v is not None]
    return any(a != b for a in vals for b in vals)


def find_crossings_1d(
    model: FixedScaleFamily,
    bands: list[TrackedBand],
    gamma_tilde: float,
    tol_gap: float = TOL_GAP,
    avoided_threshold: Optional[float] = None,
    tol_real: float = TOL_REAL,
) -> list[CrossingEvent]:
    """Candidate degeneracies of a fixed-gain sweep, refined per pair.

    Sign changes of the tracked real gap are bisected to ``tol_gap``;
    interior local minima of the gap magnitude below ``avoided_threshold``
    (default 10x tol_gap; pass a larger value to pick up wide avoided
    crossings) are refined by golden-section search.  Events come back
    unclassified.
    """
    if avoided_threshold is None:
        avoided_threshold = 10.0 * tol_gap
    events: list[CrossingEvent] = []
    n_bands = len(bands)
    grid = [s.j_tilde for s in bands[0].samples]
    for a in range(n_bands):
        for b in range(a + 1, n_bands):
            sa, sb = bands[a].samples, bands[b].samples
            usable = [
                i
                for i in range(len(grid))
                if sa[i].eps_tilde is not None and sb[i].eps_tilde is not None
            ]
            real = {
                i: (
                    abs(sa[i].eps_tilde.imag) <= tol_real
                    and abs(sb[i].eps_tilde.imag) <= tol_real
                )
                for i in usable
            }
            diffs = {
                i: (sa[i].eps_tilde.real - sb[i].eps_tilde.real) for i in usable
            }
            gaps = {i: abs(sa[i].eps_tilde - sb[i].eps_tilde) for i in usable}
            # adjacent entries of ``usable`` may span flagged grid points;
            # the refiners re-solve the eigensystem inside the interval, so
            # events straddling a bridged point are still found
            for k in range(len(usable) - 1):
                i, j = usable[k], usable[k + 1]
                if not (real[i] and real[j]):
                    continue
                if diffs[i] == 0.0:
                    continue
                if diffs[i] * diffs[j] < 0:
                    ev = _refine_sign_change(
                        model, bands, a, b, grid[i], grid[j], gamma_tilde, i, tol_gap
                    )
                    if ev is not None:
                        events.append(ev)
            for k in range(1, len(usable) - 1):
                h, i, j = usable[k - 1], usable[k], usable[k + 1]
                if not (real[h] and real[i] and real[j]):
                    continue
                sign_change = diffs[h] * diffs[i] < 0 or diffs[i] * diffs[j] < 0
                if sign_change or gaps[i] >= avoided_threshold:
                    continue
                if gaps[h] >= gaps[i] <= gaps[j] and (gaps[h] > gaps[i] or gaps[j] > gaps[i]):
                    ev = _refine_minimum(
                        model, bands, a, b, grid[h], grid[j], gamma_tilde, i, tol_gap
                    )
                    if ev is not None:
                        events.append(ev)
    events.sort(key=lambda e: (e.location[0], e.band_pair))
    return events


def _seed_tracker(model, bands, a, b, grid_index, gamma) -> Optional[PairTracker]:
    sa = bands[a].samples[grid_index]
    sb = bands[b].samples[grid_index]
    if sa.slot is None or sb.slot is None:
        return None
    return PairTracker.seed(model, (sa.j_tilde, gamma), sa.slot, sb.slot)


def _refine_sign_change(
    model, bands, a, b, j_lo, j_hi, gamma, seed_index, tol_gap
) -> Optional[CrossingEvent]:
    tracker = _seed_tracker(model, bands, a, b, seed_index, gamma)
    if tracker is None:
        return None
    lo, hi = j_lo, j_hi
    t_lo = tracker.clone().advance((lo, gamma))
    d_lo = t_lo.signed_gap
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        t_mid = t_lo.clone().advance((mid, gamma))
        if not t_mid.both_real():
            return None
        d_mid = t_mid.signed_gap
        if abs(d_mid) <= tol_gap or (hi - lo) <= 1e-14:
            return CrossingEvent(
                location=(mid, gamma),
                band_pair=(bands[a].band_id, bands[b].band_id),
                classification=None,
                index_products={},
                gap_residual=t_mid.gap,
                energy=float(np.mean([e.real for e in t_mid.eps_pair])),
            )
        if d_lo * d_mid < 0:
            hi = mid
        else:
            lo, t_lo, d_lo = mid, t_mid, d_mid
    return None


def _refine_minimum(
    model, bands, a, b, j_lo, j_hi, gamma, seed_index, tol_gap
) -> Optional[CrossingEvent]:
    tracker = _seed_tracker(model, bands, a, b, seed_index, gamma)
    if tracker is None:
        return None

    def gap_at(j: float) -> float:
        t = tracker.clone().advance((j, gamma))
        return t.gap if t.both_real() else math.inf

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = j_lo, j_hi
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = gap_at(x1), gap_at(x2)
    while hi - lo > 1e-12:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = gap_at(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = gap_at(x2)
    j_star = 0.5 * (lo + hi)
    t = tracker.clone().advance((j_star, gamma))
    if not t.both_real():
        return None
    return CrossingEvent(
        location=(j_star, gamma),
        band_pair=(bands[a].band_id, bands[b].band_id),
        classification=None,
        index_products={},
        gap_residual=t.gap,
        energy=float(np.mean([e.real for e in t.eps_pair])),
    )


def _pair_at(model: FixedScaleFamily, point, energy: float):
    """Raw (unordered) eigen-decomposition with the target pair identified."""
    h = model.hamiltonian(_as_point(point))
    lam, vec = np.linalg.eig(h)
    vec = vec / np.linalg.norm(vec, axis=0)
    order = np.argsort(np.abs(lam - energy))[:4]
    best = None
    for ii in range(len(order)):
        for jj in range(ii + 1, len(order)):
            va, vb = int(order[ii]), int(order[jj])
            gap = abs(lam[va] - lam[vb])
            if best is None or gap < best[0]:
                best = (gap, va, vb)
    return lam, vec, best[1], best[2]


def _indices_outside(
    model: FixedScaleFamily, event: CrossingEvent, offsets=(1e-3, 3e-3, 1e-2)
) -> dict[str, Optional[int]]:
    """Index products of the crossing pair measured just outside the event.

    The pair is re-identified at each probe point by alignment with the
    event's own eigenvector span; picking the two energy-nearest levels
    would grab the wrong pair where a third level shares the energy window,
    as it does where a diabolical line meets an exceptional ring.  Products
    must agree on both sides of the crossing to count; metrics that stay
    undefined (near-exceptional or complex) map to None.
    """
    j0, gamma = event.location
    _, vec0, ia0, ib0 = _pair_at(model, event.location, event.energy)
    if abs(np.vdot(vec0[:, ia0], vec0[:, ib0])) >= 0.99:
        # near-coalescent pair: the span is effectively one-dimensional and
        # its second QR direction would be rounding noise
        basis = vec0[:, [ia0]]
    else:
        basis, _ = np.linalg.qr(vec0[:, [ia0, ib0]])
    products: dict[str, Optional[int]] = {}
    for metric in model.metrics():
        value: Optional[int] = None
        for d in offsets:
            sides = []
            for sgn in (-1.0, 1.0):
                j = min(max(j0 + sgn * d, 0.0), 0.999999)
                try:
                    es = biorthogonal_eig(model.hamiltonian((j, gamma)))
                    resolved = _resolved_for_metric(es, metric)
                    vn = resolved.right / np.linalg.norm(resolved.right, axis=0)
                    score = np.linalg.norm(basis.conj().T @ vn, axis=0)
                    near = np.argsort(np.abs(resolved.eigenvalues - event.energy))[:6]
                    ia, ib = sorted(near, key=lambda k: -score[k])[:2]
                    za = topological_index(resolved, int(ia), metric)
                    zb = topological_index(resolved, int(ib), metric)
                    sides.append(za.value * zb.value)
                except (
                    DefectiveMatrix,
                    GramSingular,
                    NearException,
                    ComplexEigenvalue,
                ):
                    sides.append(None)
            defined = [s for s in sides if s is not None]
            if len(defined) == 2 and defined[0] == defined[1]:
                value = defined[0]
                break
            if len(defined) == 1:
                # the other side is complex or defect-adjacent, which is the
                # normal situation next to an exceptional point
                value = defined[0]
                break
        products[metric.label] = value
    return products


def classify_crossing(
    model: FixedScaleFamily,
    event: CrossingEvent,
    tol_gap: float = TOL_GAP,
    tol_quality: float = TOL_QUALITY,
    avoided_threshold: Optional[float] = None,
    overlap_ep: float = OVERLAP_EP,
    overlap_dp: float = OVERLAP_DP,
) -> CrossingEvent:
    """Attach a classification and outside index products to an event.

    EP2 requires eigenvector coalescence with Gram collapse; Diabolical
    requires a closed gap with a full-rank two-dimensional cluster and
    healthy qualities; a refined minimum whose gap stays open is Avoided.
    Anything between the certificates raises UnresolvedClassification.
    """
    if avoided_threshold is None:
        avoided_threshold = 10.0 * tol_gap
    lam, vec, ia, ib = _pair_at(model, event.location, event.energy)
    gap = abs(lam[ia] - lam[ib])
    overlap = abs(np.vdot(vec[:, ia], vec[:, ib]))
    vc = vec[:, [ia, ib]]
    first_metric = model.metrics()[0]
    gram = vc.conj().T @ first_metric.operator @ vc
    det_gram = abs(np.linalg.det(gram))
    # a coalescing eigenvector is self-orthogonal under every metric
    raw_quality = max(
        abs(complex(np.vdot(v, metric.operator @ v)))
        for metric in model.metrics()
        for v in (vec[:, ia], vec[:, ib])
    )
    qualities = _cluster_qualities(model, vc)
    products = _indices_outside(model, event)

    collapse = math.sqrt(tol_quality)
    diagnostics = {
        "gap": gap,
        "overlap": overlap,
        "det_gram": det_gram,
        "raw_quality": raw_quality,
        "qualities": qualities,
        "index_products": products,
    }
    scale = max(1.0, float(np.max(np.abs(lam))))
    label = None
    if overlap >= overlap_ep and det_gram <= collapse and raw_quality <= collapse:
        # square-root splitting keeps the eigenvalue gap well above tol_gap
        # even at a parameter-bisected location, so EP2 rests on the
        # eigenvector certificates alone
        label = "EP2"
    elif gap <= tol_gap * scale:
        # inside a numerically exact degeneracy the solver returns an
        # arbitrary basis of the eigenspace, so the raw overlap measures
        # basis luck rather than geometry; certify the span dimension
        # (which collapses at an exceptional point) and the qualities
        span = 1.0 - overlap * overlap
        if span >= collapse and all(
            q > tol_quality for qs in qualities.values() for q in qs
        ):
            label = "Diabolical"
    elif gap > avoided_threshold * scale and overlap <= overlap_dp:
        label = "Avoided"
    if label is None:
        raise UnresolvedClassification(
            f"certificates disagree at {event.location}", diagnostics
        )
    return replace(event, classification=label, index_products=products)


def _cluster_qualities(model: FixedScaleFamily, vc: np.ndarray) -> dict[str, list[float]]:
    """Metric qualities of the two-dimensional column space of ``vc``.

    Orthonormalizes the pair subspace and diagonalizes the compressed
    metric by congruence; the eigenvalue magnitudes are the qualities the
    resolved cluster members would carry.
    """
    out: dict[str, list[float]] = {}
    q, _ = np.linalg.qr(vc)
    for metric in model.metrics():
        g = q.conj().T @ metric.operator @ q
        g = 0.5 * (g + g.conj().T)
        ev = np.linalg.eigvalsh(g)
        out[metric.label] = [float(abs(x)) for x in ev]
    return out


def locate_ep_1d(
    model: FixedScaleFamily,
    band_pair: tuple[int, int],
    bracket: tuple[tuple[float, float], tuple[float, float]],
    tol_param: float = TOL_EP_PARAM,
    tol_real: float = TOL_REAL,
) -> EPLocation:
    """Bisect a reality transition of one tracked pair along a segment.

    ``band_pair`` names sorted level slots at the first bracket endpoint.
    Raises NoTransition when both endpoints agree on pair reality.
    """
    p_lo = _as_point(bracket[0])
    p_hi = _as_point(bracket[1])
    t_lo = PairTracker.seed(model, p_lo, int(band_pair[0]), int(band_pair[1]))
    r_lo = t_lo.both_real(tol_real)
    t_hi = t_lo.clone().advance(p_hi)
    r_hi = t_hi.both_real(tol_real)
    if r_lo == r_hi:
        raise NoTransition(
            f"pair reality identical at both bracket ends ({r_lo})"
        )
    lo, hi = np.array(p_lo), np.array(p_hi)
    for _ in range(120):
        if float(np.linalg.norm(hi - lo)) <= tol_param:
            break
        mid = 0.5 * (lo + hi)
        try:
            t_mid = t_lo.clone().advance(tuple(mid))
        except DefectiveMatrix:
            # the probe sits on the coalescence itself
            lo = hi = mid
            break
        if t_mid.both_real(tol_real) == r_lo:
            lo, t_lo = mid, t_mid
        else:
            hi = mid
    loc = (float(0.5 * (lo[0] + hi[0])), float(0.5 * (lo[1] + hi[1])))
    energy = float(np.mean([e.real for e in t_lo.eps_pair]))
    lam, vec, via, vib = _pair_at(model, loc, energy)
    overlap = float(abs(np.vdot(vec[:, via], vec[:, vib])))
    complex_side = +1 if not r_hi else -1
    return EPLocation(
        location=loc,
        complex_side=complex_side,
        gap=float(abs(lam[via] - lam[vib])),
        overlap=overlap,
    )


# manifold tracing -----------------------------------------------------------

J_BOUNDS = (0.0, 1.0)


def _in_domain(p) -> bool:
    return J_BOUNDS[0] <= p[0] <= J_BOUNDS[1] and p[1] >= 0.0


def _clip_to_domain(p, q):
    """Largest point on segment p->q still inside the domain."""
    t = 1.0
    dj = q[0] - p[0]
    dg = q[1] - p[1]
    if dj > 0:
        t = min(t, (J_BOUNDS[1] - p[0]) / dj)
    elif dj < 0:
        t = min(t, (J_BOUNDS[0] - p[0]) / dj)
    if dg < 0:
        t = min(t, (0.0 - p[1]) / dg)
    t = max(t, 0.0)
    return (p[0] + t * dj, p[1] + t * dg), t


class _TraceStop(Exception):
    def __init__(self, reason: str, ep_evidence: bool):
        super().__init__(reason)
        self.reason = reason
        self.ep_evidence = ep_evidence


def _line_normal_tangent(
    model: FixedScaleFamily,
    tracker: PairTracker,
    point,
    probe_dir,
    offset: float,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Unit normal (along the gap gradient), tangent, and slope |u_minus|.

    The slope difference is sampled from a transversally offset base point
    because the degenerate point itself is unsuitable for the projection.
    Both offset sides and two widenings are tried before giving up; total
    failure counts as exceptional-point evidence since it means the whole
    neighbourhood is defect-dominated.
    """
    any_in_domain = False
    for scale_up in (1.0, 4.0, 16.0):
        for sgn in (1.0, -1.0):
            d = sgn * scale_up * offset
            base = (point[0] + probe_dir[0] * d, point[1] + probe_dir[1] * d)
            if not _in_domain(base):
                continue
            any_in_domain = True
            try:
                t = tracker.clone().advance(base)
                _real_pair_or_raise(t, TOL_REAL)
                proj = project_hamiltonian(model, base, (t.ia, t.ib))
            except (DefectiveMatrix, ComplexEigenvalue, NearException, PrecisionLoss):
                continue
            um = proj.u_minus
            nu = float(np.linalg.norm(um))
            if nu < 1e-12 * max(proj.grad_scale, 1.0):
                continue
            normal = um / nu
            tangent = np.array([-normal[1], normal[0]])
            return normal, tangent, nu
    # with no in-domain offset the point is pinched against the boundary
    raise _TraceStop("projection failed on every offset around the point", any_in_domain)


def trace_dp_manifold(
    model: FixedScaleFamily,
    seed_event: CrossingEvent,
    step: float = 0.005,
    max_points: int = 400,
    tol_gap: float = TOL_GAP,
    base_offset: float = 1e-4,
) -> ManifoldTrace:
    """Continue a protected diabolical crossing through parameter space.

    Marches both ways from the seed with tangent predictors and a bisection
    corrector along the line normal, inside a trust region of five step
    lengths.  Steps halve on failure down to step/256; what terminates a
    side is recorded: EPBoundary (pair went complex, qualities collapsed,
    or the solver hit a defect), DomainBoundary, or StepLimit.  A corrector
    that diverges with no exceptional-point evidence raises
    CorrectorDivergence carrying the partial trace.
    """
    if seed_event.classification != "Diabolical":
        raise ValueError("manifold tracing needs a Diabolical seed event")
    if not check_zero_condition(seed_event.index_products):
        raise ValueError("seed crossing is not protected by opposite index products")
    p0 = _as_point(seed_event.location)
    tracker0 = PairTracker.seed_near_energy(model, p0, seed_event.energy)
    min_step = step * 2.0**-8

    def march(direction: float):
        points: list[tuple[float, float]] = []
        gaps: list[float] = []
        energies: list[float] = []
        tracker = tracker0.clone()
        p = p0
        h = step
        tangent_hint = np.array([0.0, direction])
        last_dir = None

        def finish(term: str):
            if term == "EPBoundary" and last_dir is not None:
                tip = _extend_to_boundary(
                    model, tracker, p, last_dir, min_step, step, tol_gap
                )
                if tip is not None:
                    points.append(tip[0])
                    gaps.append(tip[1])
                    energies.append(tip[2])
            return points, gaps, energies, term

        while len(points) < max_points:
            probe = tangent_hint / max(float(np.linalg.norm(tangent_hint)), 1e-300)
            stale = False
            try:
                normal, tangent, slope = _line_normal_tangent(
                    model, tracker, p, (probe[1], -probe[0]), base_offset
                )
                if float(tangent @ tangent_hint) < 0:
                    tangent = -tangent
                last_dir = (normal, tangent, slope)
            except _TraceStop as stop:
                if not stop.ep_evidence:
                    return finish("DomainBoundary")
                if last_dir is None:
                    return finish("EPBoundary")
                # near the boundary the offset ladder dies first; creep on
                # with the previous direction until the corrector gives out
                normal, tangent, slope = last_dir
                stale = True
            while True:
                q = (p[0] + h * tangent[0], p[1] + h * tangent[1])
                if not _in_domain(q):
                    q_clip, tq = _clip_to_domain(p, q)
                    if tq * h < min_step:
                        return finish("DomainBoundary")
                    q = q_clip
                try:
                    s_root, g_root, tracker_new = _correct(
                        model, tracker, q, normal, 5.0 * h, tol_gap, 2.0 * slope
                    )
                except _TraceStop as stop:
                    if h / 2 >= min_step:
                        h /= 2
                        continue
                    if stop.ep_evidence or stale:
                        return finish("EPBoundary")
                    exc = CorrectorDivergence(
                        f"corrector lost the line near {q}: {stop.reason}"
                    )
                    exc.partial_points = [p0] + points
                    exc.partial_gaps = [seed_event.gap_residual] + gaps
                    raise exc
                p_new = (q[0] + s_root * normal[0], q[1] + s_root * normal[1])
                if not _in_domain(p_new):
                    return finish("DomainBoundary")
                points.append(p_new)
                gaps.append(g_root)
                energies.append(float(np.mean([e.real for e in tracker_new.eps_pair])))
                tracker = tracker_new
                tangent_hint = np.array([p_new[0] - p[0], p_new[1] - p[1]])
                p = p_new
                if not stale:
                    h = min(step, 2 * h)
                break
        return points, gaps, energies, "StepLimit"

    up_pts, up_gaps, up_en, up_term = march(+1.0)
    down_pts, down_gaps, down_en, down_term = march(-1.0)
    seed_energy = float(np.mean([e.real for e in tracker0.eps_pair]))
    trace = ManifoldTrace(seed=seed_event)
    trace.points = list(reversed(down_pts)) + [p0] + up_pts
    trace.gaps = list(reversed(down_gaps)) + [seed_event.gap_residual] + up_gaps
    trace.energies = list(reversed(down_en)) + [seed_energy] + up_en
    trace.terminations = (down_term, up_term)
    return trace


def _extend_to_boundary(
    model: FixedScaleFamily,
    tracker: PairTracker,
    p,
    last_dir,
    min_step: float,
    step: float,
    tol_gap: float,
):
    """Walk the final point up against the exceptional boundary.

    Gallops along the last tangent in doubling increments while the
    corrector still lands on the line, then bisects the alive/dead bracket
    to micro-step resolution so the recorded terminus sits tight against
    the coalescence.  Returns (point, gap, energy) or None when even the
    first micro-step is dead on arrival.
    """
    normal, tangent, slope = last_dir

    def alive(s: float):
        q = (p[0] + s * tangent[0], p[1] + s * tangent[1])
        if not _in_domain(q):
            return None
        try:
            s_root, g_root, t_new = _correct(
                model, tracker, q, normal, 5.0 * max(s, min_step), tol_gap, 2.0 * slope
            )
        except _TraceStop:
            return None
        p_new = (q[0] + s_root * normal[0], q[1] + s_root * normal[1])
        if not _in_domain(p_new):
            return None
        energy = float(np.mean([e.real for e in t_new.eps_pair]))
        return p_new, g_root, energy

    best = None
    lo = 0.0
    hi = min_step
    while hi <= step * (1.0 + 1e-12):
        res = alive(hi)
        if res is None:
            break
        best, lo = res, hi
        hi *= 2.0
    else:
        # still alive a full step out: the stop was spurious, keep the gain
        return best
    for _ in range(60):
        if hi - lo <= 1e-6:
            break
        mid = 0.5 * (lo + hi)
        res = alive(mid)
        if res is None:
            hi = mid
        else:
            best, lo = res, mid
    return best


def certify_terminus(
    model: FixedScaleFamily,
    trace: ManifoldTrace,
    side: int,
    search: float = 2e-4,
    tol_param: float = TOL_EP_PARAM,
) -> tuple[EPLocation, str, float]:
    """Locate and classify the coalescence bounding one trace endpoint.

    The exceptional surface can meet the traced line at a shallow angle, so
    a single ray through the endpoint may cross it far away or not at all.
    A fan of rays is scanned instead and the nearest located transition is
    classified.  Returns (location, classification, distance to endpoint).
    Raises NoTransition when no ray crosses a reality transition.
    """
    if trace.terminations[side] != "EPBoundary":
        raise ValueError("endpoint did not terminate on an exceptional boundary")
    if len(trace.points) < 2:
        raise ValueError("trace too short to orient the endpoint")
    idx, prv = (0, 1) if side == 0 else (-1, -2)
    p_end = np.asarray(trace.points[idx], dtype=float)
    d = p_end - np.asarray(trace.points[prv], dtype=float)
    d /= max(float(np.linalg.norm(d)), 1e-300)
    energy = trace.energies[idx] if trace.energies else 0.0

    best: Optional[tuple[float, EPLocation]] = None
    for deg in (0.0, 30.0, -30.0, 60.0, -60.0, 90.0, -90.0):
        th = math.radians(deg)
        ray = np.array(
            [math.cos(th) * d[0] - math.sin(th) * d[1],
             math.sin(th) * d[0] + math.cos(th) * d[1]]
        )
        p_lo = tuple(p_end - search * ray)
        p_hi = tuple(p_end + search * ray)
        if not (_in_domain(p_lo) and _in_domain(p_hi)):
            continue
        try:
            t = PairTracker.seed_near_energy(model, p_lo, energy)
            ep = locate_ep_1d(model, (t.ia, t.ib), (p_lo, p_hi), tol_param)
        except (NoTransition, DefectiveMatrix):
            continue
        dist = float(np.linalg.norm(np.asarray(ep.location) - p_end))
        if best is None or dist < best[0]:
            best = (dist, ep)
    if best is None:
        raise NoTransition("no reality transition on any ray through the endpoint")
    dist, ep = best
    probe = CrossingEvent(
        location=ep.location,
        band_pair=(0, 1),
        classification=None,
        index_products={},
        gap_residual=ep.gap,
        energy=energy,
    )
    label = classify_crossing(model, probe).classification or "Unresolved"
    return ep, label, dist


def _correct(
    model: FixedScaleFamily,
    tracker: PairTracker,
    q,
    normal: np.ndarray,
    trust: float,
    tol_gap: float,
    slope_hint: float = 0.0,
):
    """Root of the tracked signed gap along the normal through q.

    Returns (offset, residual gap, tracker at the corrected point).  Raises
    _TraceStop with EP evidence when probes turn complex, without when no
    sign change exists inside the trust region.  ``slope_hint`` is the
    expected |d gap / d s|, used to aim the first bracket candidates.
    """
    cache: dict[float, PairTracker] = {}

    def probe(s: float) -> PairTracker:
        if s in cache:
            return cache[s]
        pt = (q[0] + s * normal[0], q[1] + s * normal[1])
        try:
            t = tracker.clone().advance(pt)
        except DefectiveMatrix as err:
            raise _TraceStop(f"defective eigensystem at probe: {err}", True)
        cache[s] = t
        return t

    t0 = probe(0.0)
    if not t0.both_real():
        raise _TraceStop("pair complex at predictor point", True)
    g0 = t0.signed_gap
    if abs(g0) <= tol_gap:
        return 0.0, t0.gap, t0

    candidates: list[float] = []
    if slope_hint > 0:
        s_n = abs(g0) / slope_hint
        candidates += [-s_n, s_n, -2 * s_n, 2 * s_n]
    candidates += [sgn * trust * k / 5.0 for k in range(1, 6) for sgn in (1.0, -1.0)]
    saw_complex = False
    bracket = None
    for s in candidates:
        if abs(s) > trust or s == 0.0:
            continue
        t = probe(s)
        if not t.both_real():
            saw_complex = True
            continue
        if g0 * t.signed_gap < 0:
            bracket = s
            break
    if bracket is None:
        raise _TraceStop("no gap sign change in trust region", saw_complex)

    def gap_fn(s: float) -> float:
        t = probe(float(s))
        if not t.both_real():
            raise _TraceStop("pair complex inside corrector bracket", True)
        return t.signed_gap

    s_root = float(brentq(gap_fn, 0.0, bracket, xtol=1e-14, rtol=1e-15))
    t_fin = probe(s_root)
    if t_fin.gap > 10 * tol_gap:
        raise _TraceStop("corrector root keeps a finite gap", False)
    return s_root, t_fin.gap, t_fin


# CSV export -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_events(events, destination, metric_labels) -> Path:
    """Write crossing events: one row per event, products empty when unset.

    Events whose classification could not be certified are written with the
    literal word Unresolved rather than dropped.
    """
    dest = Path(destination)
    header = ["gamma_tilde", "j_tilde", "band_a", "band_b", "classification"]
    header += [f"product_{label}" for label in metric_labels]
    header.append("gap_residual")
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for ev in events:
            row = [
                _fmt(ev.location[1]),
                _fmt(ev.location[0]),
                str(ev.band_pair[0]),
                str(ev.band_pair[1]),
                ev.classification or "Unresolved",
            ]
            for label in metric_labels:
                v = ev.index_products.get(label)
                row.append("" if v is None else str(int(v)))
            row.append(_fmt(ev.gap_residual))
            writer.writerow(row)
    return dest


def export_manifold(traces, destination) -> Path:
    """Write manifold traces: one row per point, terminations on last rows.

    The first and last row of each trace carry the termination labels of
    the corresponding march direction; interior rows leave the field empty.
    """
    dest = Path(destination)
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["trace_id", "point_index", "j_tilde", "gamma_tilde", "gap", "termination"]
        )
        for tid, trace in enumerate(traces):
            last = len(trace.points) - 1
            for i, (p, g) in enumerate(zip(trace.points, trace.gaps)):
                term = ""
                if i == 0:
                    term = trace.terminations[0]
                elif i == last:
                    term = trace.terminations[1]
                writer.writerow(
                    [str(tid), str(i), _fmt(p[0]), _fmt(p[1]), _fmt(g), term]
                )
    return dest
