"""End-to-end checks of the package's headline guarantees, one test each.

The ten tests cover: eigensystem integrity, the pseudo-metric catalog, the
free-fermion reference, index conservation along real band segments, the
opposite-index rule at exceptional points, stability of protected crossings
under gain, splitting of unprotected crossings, gap opening in the mixed
arrangement, the vanishing-coupling similarity identity, and an analytic
two-level gate.  Each test ends with a single PASS line carrying its key
numbers, so a ``-v -s`` run reads as a checklist.

Module fixtures share the expensive pieces: the gamma = 0 crossing
inventory of the 4-site chain, the traced diabolical manifolds, and their
certified termini.
"""

import math
from time import perf_counter

import numpy as np
import pytest

from pseudospec.degeneracy import (
    CrossingEvent,
    PairTracker,
    certify_terminus,
    check_zero_condition,
    classify_crossing,
    find_crossings_1d,
    locate_ep_1d,
    project_hamiltonian,
    trace_dp_manifold,
)
from pseudospec.errors import DefectiveMatrix, PairingFailure, UnresolvedClassification
from pseudospec.model import (
    FixedScaleFamily,
    GainLossConfig,
    MatrixFamily,
    MetricDescriptor,
    ModelConfig,
    build_hamiltonian,
    pseudo_metric_catalog,
    staggered_config,
)
from pseudospec.operators import (
    commutator_norm,
    pseudo_hermiticity_residual,
    u_operator,
)
from pseudospec.oracle import (
    many_body_spectrum,
    occupation_table,
    single_particle_modes,
    u_index_oracle,
)
from pseudospec.spectral import biorthogonal_eig, cluster_degeneracies
from pseudospec.sweep import SweepPlan, indices_for_metric, run_sweep, uniform_grid

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)

# window holding all six gamma = 0 crossings of the 4-site chain
WINDOW = uniform_grid(0.45, 0.75, 61)


def classified_window(arrangement):
    plan = SweepPlan(
        j_tilde_grid=WINDOW,
        gamma_tilde_values=(0.0,),
        arrangement=arrangement,
        n_sites=4,
    )
    fam = plan.family()
    bands = run_sweep(plan)[0.0]
    events = [classify_crossing(fam, ev) for ev in find_crossings_1d(fam, bands, 0.0)]
    return fam, events


def protected(events):
    return [
        ev
        for ev in events
        if ev.classification == "Diabolical" and check_zero_condition(ev.index_products)
    ]


@pytest.fixture(scope="module")
def longitudinal_window():
    return classified_window("longitudinal")


@pytest.fixture(scope="module")
def transversal_window():
    return classified_window("transversal")


@pytest.fixture(scope="module")
def mixed_window():
    return classified_window("mixed")


@pytest.fixture(scope="module")
def red_traces(longitudinal_window, transversal_window):
    # every protected gamma = 0 crossing of both arrangements, continued
    # into the gain plane
    out = []
    for fam, events in (longitudinal_window, transversal_window):
        for ev in protected(events):
            out.append((fam, ev, trace_dp_manifold(fam, ev, step=0.005, max_points=400)))
    return out


@pytest.fixture(scope="module")
def certified_termini(red_traces):
    out = []
    for fam, _, trace in red_traces:
        side = trace.terminations.index("EPBoundary")
        ep, label, dist = certify_terminus(fam, trace, side)
        energy = trace.energies[0 if side == 0 else -1]
        out.append((fam, trace, ep, label, dist, energy))
    return out


@pytest.fixture(scope="module")
def bubble_edges(longitudinal_window):
    """The two reality transitions flanking one unprotected crossing at gamma = 0.1."""
    fam, events = longitudinal_window
    black = [
        ev
        for ev in events
        if ev.classification == "Diabolical" and not check_zero_condition(ev.index_products)
    ]
    seed = min(black, key=lambda ev: ev.location[0])
    jstar = seed.location[0]
    edges = []
    for lo, hi in (((0.44, 0.1), (jstar, 0.1)), ((jstar, 0.1), (0.58, 0.1))):
        t = PairTracker.seed_near_energy(fam, lo, seed.energy)
        edges.append(locate_ep_1d(fam, (t.ia, t.ib), (lo, hi), tol_param=1e-8))
    return fam, seed, edges


def test_biorthonormality_and_reconstruction():
    """50 random gain/loss configs: L R = 1 and R diag(eps) L = H to 1e-8."""
    rng = np.random.default_rng(314159)
    kinds = ("longitudinal", "transversal", "mixed")
    eye = np.eye(16)
    worst_id = worst_rec = 0.0
    done = 0
    t0 = perf_counter()
    while done < 50:
        cfg = ModelConfig(
            gain_loss=staggered_config(
                kinds[rng.integers(3)], 4, float(rng.uniform(0.0, 0.5))
            ),
            delta=float(rng.uniform(0.3, 1.4)),
            coupling=float(rng.uniform(-1.3, 1.3)),
        )
        h = build_hamiltonian(cfg).matrix
        try:
            es = biorthogonal_eig(h)
        except (DefectiveMatrix, PairingFailure):
            continue  # drew a coalescence; redraw, the check wants generic points
        done += 1
        worst_id = max(worst_id, float(np.max(np.abs(es.left @ es.right - eye))))
        recon = es.right @ np.diag(es.eigenvalues) @ es.left - h
        worst_rec = max(
            worst_rec, float(np.max(np.abs(recon))) / float(np.max(np.abs(h)))
        )
    elapsed = perf_counter() - t0
    assert worst_id <= 1e-8
    assert worst_rec <= 1e-8
    assert elapsed < 5.0
    print(
        f"PASS biorthonormality and reconstruction: 50 configs, "
        f"identity residual {worst_id:.2e}, reconstruction {worst_rec:.2e}, "
        f"{elapsed:.2f} s"
    )


def test_pseudo_metric_catalog():
    """Each arrangement's catalog intertwines H and H+ to 1e-12."""
    expected = {
        "longitudinal": ("P", "U"),
        "transversal": ("P", "PU"),
        "mixed": ("P",),
    }
    points = ((0.3, 0.2), (0.62, 0.35), (0.85, 0.12))
    worst = worst_comm = 0.0
    for kind, labels in expected.items():
        fam = FixedScaleFamily(4, kind)
        for point in points:
            cfg = fam.config(point)
            catalog = pseudo_metric_catalog(cfg)
            assert tuple(m.label for m in catalog) == labels
            h = build_hamiltonian(cfg)
            for metric in catalog:
                worst = max(worst, pseudo_hermiticity_residual(h, metric.operator))
            if kind == "transversal":
                # the spin-flip symmetry itself must commute, not just intertwine
                worst_comm = max(worst_comm, commutator_norm(h, u_operator(4)))
    assert worst <= 1e-12
    assert worst_comm <= 1e-12
    print(
        f"PASS pseudo-metric catalog: all arrangements, residual {worst:.2e}, "
        f"transversal commutator {worst_comm:.2e}"
    )


def test_free_fermion_oracle_equivalence():
    """Hermitian spectra match the quadratic-fermion oracle; U-indices match parity."""
    rng = np.random.default_rng(940721)
    worst = 0.0
    checked = mismatches = 0
    for n in (2, 3, 4):
        zero = GainLossConfig(n, (0.0,) * n, (0.0,) * n, "longitudinal")
        for _ in range(20):
            cfg = ModelConfig(
                gain_loss=zero,
                delta=float(rng.uniform(0.2, 1.5)),
                coupling=float(rng.uniform(-1.5, 1.5)),
            )
            h = build_hamiltonian(cfg).matrix
            dense = np.sort(np.linalg.eigvalsh(h))
            modes = single_particle_modes(cfg.delta, cfg.coupling, n)
            oracle = np.sort(many_body_spectrum(modes))
            scale = max(1.0, float(np.max(np.abs(dense))))
            worst = max(worst, float(np.max(np.abs(dense - oracle))) / scale)

            es = biorthogonal_eig(h)
            metric = next(m for m in pseudo_metric_catalog(cfg) if m.label == "U")
            indices = indices_for_metric(es, metric)
            clustered = set()
            for cluster in cluster_degeneracies(es, 1e-8):
                if len(cluster) > 1:
                    clustered.update(cluster)
            table = occupation_table(modes)
            table_e = np.array([e for e, _ in table])
            for k in range(es.dim):
                if k in clustered or indices[k] is None:
                    continue
                d = np.abs(table_e - es.eigenvalues[k].real)
                order = np.argsort(d)
                if d[order[0]] > 1e-8 or (len(order) > 1 and d[order[1]] < 1e-8):
                    continue  # no unambiguous partner in the table
                checked += 1
                if indices[k].value != u_index_oracle(table[order[0]][1], n):
                    mismatches += 1
    assert worst <= 1e-10
    assert checked >= 300
    assert mismatches == 0
    print(
        f"PASS free-fermion oracle: 60 draws at 2-4 sites, spectrum residual "
        f"{worst:.2e}, {checked} U-indices matched, {mismatches} mismatches"
    )


SWEEP_CASES = (
    ("longitudinal", 0.0),
    ("longitudinal", 0.2),
    ("longitudinal", 0.4),
    ("transversal", 0.0),
    ("transversal", 0.2),
    ("mixed", 0.1),
    ("mixed", 0.2),
)


def test_index_conservation_along_real_segments():
    """No defined index changes between consecutive real samples at step 1e-3."""
    grid = uniform_grid(0.001, 0.98, 980)
    violations = compared = 0
    for kind, gamma in SWEEP_CASES:
        plan = SweepPlan(
            j_tilde_grid=grid,
            gamma_tilde_values=(gamma,),
            arrangement=kind,
            n_sites=4,
        )
        for band in run_sweep(plan)[gamma]:
            for s1, s2 in zip(band.samples, band.samples[1:]):
                if s1.eps_tilde is None or s2.eps_tilde is None:
                    continue
                if any(
                    abs(e.imag) > 1e-9 * max(1.0, abs(e))
                    for e in (s1.eps_tilde, s2.eps_tilde)
                ):
                    continue
                for label, i1 in s1.indices.items():
                    i2 = s2.indices[label]
                    if i1 is None or i2 is None:
                        continue
                    compared += 1
                    if i1.value != i2.value:
                        violations += 1
    assert compared > 100000
    assert violations == 0
    print(
        f"PASS index conservation: {compared} consecutive index pairs over "
        f"{len(SWEEP_CASES)} sweeps, {violations} changes"
    )


def test_opposite_index_rule_at_every_ep2(certified_termini, bubble_edges):
    """Every EP2 in the inventory has all defined adjacent index products at -1."""
    fam_b, seed, edges = bubble_edges
    inventory = [(fam, ep, energy) for fam, _, ep, _, _, energy in certified_termini]
    inventory += [(fam_b, ep, seed.energy) for ep in edges]
    assert len(inventory) == 11
    products = 0
    for fam, ep, energy in inventory:
        probe = CrossingEvent(ep.location, (0, 1), None, {}, ep.gap, energy)
        out = classify_crossing(fam, probe)
        assert out.classification == "EP2"
        defined = [v for v in out.index_products.values() if v is not None]
        assert defined
        assert all(v == -1 for v in defined)
        products += len(defined)
    print(
        f"PASS opposite-index rule: {len(inventory)} EP2s, "
        f"{products} defined products, all -1"
    )


def test_protected_crossings_stable_under_gain(red_traces, certified_termini):
    """Protected crossings stay diabolical at 5+ gain values, ending on an EP2."""
    by_kind = {"longitudinal": 0, "transversal": 0}
    for fam, seed, trace in red_traces:
        by_kind[fam.kind.value] += 1
        gam = np.array([p[1] for p in trace.points])
        cand = np.where(gam > 0)[0]
        take = sorted(
            {
                int(cand[np.argmin(np.abs(gam[cand] - fr * gam.max()))])
                for fr in (0.15, 0.3, 0.5, 0.7, 0.85)
            }
        )
        assert len(take) >= 5
        assert len({round(float(gam[i]), 12) for i in take}) >= 5
        js = []
        for i in take:
            probe = CrossingEvent(
                trace.points[i], (0, 1), None, {}, trace.gaps[i], trace.energies[i]
            )
            assert trace.gaps[i] <= 1e-8 * fam.scale
            assert classify_crossing(fam, probe).classification == "Diabolical"
            js.append(trace.points[i][0])
        # the locus moves in j as gain grows; nothing else about it changes
        assert max(abs(j - seed.location[0]) for j in js) > 1e-4
        assert set(trace.terminations) == {"DomainBoundary", "EPBoundary"}
    assert by_kind == {"longitudinal": 3, "transversal": 6}
    for _, _, _, label, dist, _ in certified_termini:
        assert label == "EP2"
        assert dist <= 1e-4
    worst = max(dist for _, _, _, _, dist, _ in certified_termini)
    print(
        f"PASS protected-crossing stability: 9 traces (3 longitudinal, "
        f"6 transversal) stay Diabolical at 5 gain values each, "
        f"termini certified EP2 within {worst:.2e}"
    )


def test_unprotected_crossing_splits_into_ep_pair(bubble_edges):
    """An all-minus crossing splits into exactly two flanking EP2s at gain 0.1."""
    fam, seed, edges = bubble_edges
    jstar = seed.location[0]
    defined = [v for v in seed.index_products.values() if v is not None]
    assert defined
    assert all(v == -1 for v in defined)
    # exactly two reality toggles along the gamma = 0.1 line through j*
    tracker = PairTracker.seed_near_energy(fam, (0.44, 0.1), seed.energy)
    reality = [tracker.both_real()]
    for j in uniform_grid(0.44, 0.58, 29)[1:]:
        tracker = tracker.advance((j, 0.1))
        reality.append(tracker.both_real())
    toggles = sum(a != b for a, b in zip(reality, reality[1:]))
    assert toggles == 2
    lo, hi = edges
    assert lo.location[0] < jstar < hi.location[0]
    assert lo.location[1] == hi.location[1] == 0.1
    for ep in edges:
        probe = CrossingEvent(ep.location, (0, 1), None, {}, ep.gap, seed.energy)
        assert classify_crossing(fam, probe).classification == "EP2"
    print(
        f"PASS unprotected-crossing splitting: crossing at j = {jstar:.6f} "
        f"splits into EP2s at j = {lo.location[0]:.6f} and {hi.location[0]:.6f} "
        f"on the gamma = 0.1 line"
    )


def test_mixed_same_parity_gap_opening(mixed_window):
    """Same-parity mixed crossings open real gaps above 1e-4 under gain."""
    fam, events = mixed_window
    same = [
        ev
        for ev in events
        if ev.classification == "Diabolical" and ev.index_products.get("P") == 1
    ]
    assert len(same) == 3
    opened = []
    for ev in same:
        jstar, estar = ev.location[0], ev.energy
        for gamma in (0.1, 0.2):
            plan = SweepPlan(
                j_tilde_grid=uniform_grid(jstar - 0.06, jstar + 0.06, 101),
                gamma_tilde_values=(gamma,),
                arrangement="mixed",
                n_sites=4,
            )
            bands = run_sweep(plan)[gamma]
            near, unresolved = [], 0
            for cand in find_crossings_1d(fam, bands, gamma, avoided_threshold=0.08):
                if abs(cand.energy - estar) > 0.2:
                    continue  # other energy branch
                try:
                    near.append(classify_crossing(fam, cand))
                except UnresolvedClassification:
                    unresolved += 1
            assert unresolved == 0
            assert near, f"no event near j = {jstar:.4f} at gamma = {gamma}"
            assert all(out.classification == "Avoided" for out in near)
            assert all(out.gap_residual > 1e-4 * fam.scale for out in near)
            opened.append(min(out.gap_residual for out in near))
    assert len(opened) == 6
    print(
        f"PASS mixed gap opening: 3 same-parity loci x 2 gain values all "
        f"Avoided, minimal gaps {min(opened):.2e} .. {max(opened):.2e}"
    )


def test_zero_condition_forcing_at_protected_loci(longitudinal_window, transversal_window):
    """Opposite index products force the pair coupling to vanish identically."""
    rng = np.random.default_rng(5)
    loci = 0
    worst_w = worst_sim = 0.0
    for fam, events in (longitudinal_window, transversal_window):
        for ev in protected(events):
            loci += 1
            base = (ev.location[0] - 0.012, 0.0)
            t = PairTracker.seed_near_energy(fam, base, ev.energy)
            proj = project_hamiltonian(fam, base, (t.ia, t.ib))
            assert not proj.near_collinear
            labels = list(proj.w_by_metric)
            assert len(labels) == 2
            for w in proj.w_by_metric.values():
                worst_w = max(worst_w, float(np.linalg.norm(w)) / proj.grad_scale)
            for _ in range(4):
                dp = rng.normal(size=2) * 1e-2
                # signed splitting strength must agree between the two metrics
                s = {
                    m: proj.index_products[m] * abs(np.dot(proj.w_by_metric[m], dp)) ** 2
                    for m in labels
                }
                norm2 = (proj.grad_scale * float(np.linalg.norm(dp))) ** 2
                worst_sim = max(worst_sim, abs(s[labels[0]] - s[labels[1]]) / norm2)
    assert loci == 9
    assert worst_w <= 1e-8
    assert worst_sim <= 1e-8
    print(
        f"PASS zero-condition forcing: 9 loci, max |w|/|grad H| {worst_w:.2e}, "
        f"cross-metric splitting residual {worst_sim:.2e}"
    )


def test_two_level_analytic_gate():
    """delta sx + i gamma sz: eigenvalues +-sqrt(delta^2 - gamma^2), EP at delta."""
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(12):
        delta = float(rng.uniform(0.4, 1.2))
        fam = MatrixFamily(
            lambda p, d=delta: d * SX + 1j * p[1] * SZ, [MetricDescriptor("X", SX)]
        )
        for _ in range(6):
            g = float(rng.uniform(0.0, 0.95)) * delta
            es = biorthogonal_eig(fam.hamiltonian((0.0, g)))
            root = math.sqrt(delta * delta - g * g)
            worst = max(
                worst,
                abs(es.eigenvalues[0] + root),
                abs(es.eigenvalues[1] - root),
            )
    assert worst <= 1e-12
    located = []
    for delta in (0.55, 0.8):
        fam = MatrixFamily(
            lambda p, d=delta: d * SX + 1j * p[1] * SZ, [MetricDescriptor("X", SX)]
        )
        ep = locate_ep_1d(
            fam, (0, 1), ((0.0, 0.2 * delta), (0.0, 1.6 * delta)), tol_param=1e-8
        )
        located.append(abs(ep.location[1] - delta))
    assert max(located) <= 1e-8
    print(
        f"PASS analytic two-level gate: eigenvalue error {worst:.2e}, "
        f"EP located within {max(located):.2e} of gamma = delta"
    )
