"""Band tracking and sweep export tests."""

import csv

import numpy as np
import pytest

from pseudospec.errors import AmbiguousTracking, ConfigError
from pseudospec.model import Arrangement, FixedScaleFamily
from pseudospec.spectral import biorthogonal_eig
from pseudospec.sweep import (
    SweepPlan,
    export_sweep,
    run_sweep,
    track_levels,
    uniform_grid,
)


def _es(h):
    return biorthogonal_eig(np.asarray(h, dtype=complex))


def _pauli(theta):
    # cos(t) sz + sin(t) sx, eigenvalues +-1 for every t
    return np.array(
        [[np.cos(theta), np.sin(theta)], [np.sin(theta), -np.cos(theta)]]
    )


class TestTrackLevels:
    def test_identity_for_identical_systems(self):
        es = _es(np.diag([1.0, 2.0, 3.0]))
        assert track_levels(es, es) == [0, 1, 2]

    def test_transposition_detected(self):
        # diag basis unchanged, eigenvalues swap energy order
        a = _es(np.diag([1.0, 2.0]))
        b = _es(np.diag([2.1, 1.9]))
        # level 0 of `a` lives on basis vector e0, which now carries 2.1;
        # after (Re, Im) sorting that is slot 1 of `b`
        perm = track_levels(a, b)
        assert perm == [1, 0]
        assert b.eigenvalues[perm[0]] == pytest.approx(2.1)

    def test_small_rotation_follows_vectors(self):
        a = _es(_pauli(0.0))
        b = _es(_pauli(0.15))
        perm = track_levels(a, b)
        # lowest level of a (eigenvalue -1) stays the -1 level of b
        i = int(np.argmin(a.eigenvalues.real))
        assert b.eigenvalues[perm[i]].real == pytest.approx(-1.0)

    def test_quarter_rotation_is_ambiguous(self):
        a = _es(_pauli(0.0))
        b = _es(_pauli(np.pi / 2))
        with pytest.raises(AmbiguousTracking):
            track_levels(a, b)

    def test_degenerate_source_cluster_exempt(self):
        a = _es(np.diag([1.0, 1.0]))
        b = _es(_pauli(0.3) + 2.0 * np.eye(2))
        perm = track_levels(a, b)
        assert sorted(perm) == [0, 1]

    def test_conjugate_bubble_entry_canonical(self):
        # two real levels fall onto a conjugate pair: lower slot takes Im<0
        a = _es(np.diag([1.0, 1.2]))
        g = 1.05
        h = np.array([[1.1 + 1j * g, 0.1], [0.1, 1.1 - 1j * g]])
        b = _es(h)
        assert np.all(np.abs(b.eigenvalues.imag) > 1e-3)
        perm = track_levels(a, b, tol_cluster=1.0)
        assert b.eigenvalues[perm[0]].imag < 0 < b.eigenvalues[perm[1]].imag


class TestSweepPlan:
    def test_grid_validation(self):
        with pytest.raises(ConfigError):
            SweepPlan((0.5,), (0.0,), Arrangement.LONGITUDINAL, 4)
        with pytest.raises(ConfigError):
            SweepPlan((0.5, 0.4), (0.0,), Arrangement.LONGITUDINAL, 4)
        with pytest.raises(ConfigError):
            SweepPlan((0.5, 1.0), (0.0,), Arrangement.LONGITUDINAL, 4)
        with pytest.raises(ConfigError):
            SweepPlan((0.1, 0.5), (-0.1,), Arrangement.LONGITUDINAL, 4)

    def test_uniform_grid(self):
        g = uniform_grid(0.0, 0.5, 6)
        assert len(g) == 6
        assert g[0] == 0.0 and g[-1] == 0.5
        with pytest.raises(ConfigError):
            uniform_grid(0.5, 0.5, 3)


class TestRunSweep:
    def test_hermitian_limit_all_defined(self):
        plan = SweepPlan(
            uniform_grid(0.05, 0.45, 21), (0.0,), Arrangement.LONGITUDINAL, 2
        )
        bands = run_sweep(plan)[0.0]
        assert len(bands) == 4
        for band in bands:
            assert len(band.samples) == 21
            for s in band.samples:
                assert not s.defective
                assert abs(s.eps_tilde.imag) <= 1e-10
                for idx in s.indices.values():
                    assert idx is not None
                    assert idx.value in (-1, 1)
                    assert idx.quality == pytest.approx(1.0, abs=1e-9)

    def test_bands_are_energy_continuous(self):
        plan = SweepPlan(
            uniform_grid(0.3, 0.7, 81), (0.1,), Arrangement.LONGITUDINAL, 4
        )
        bands = run_sweep(plan)[0.1]
        step = 0.4 / 80
        for band in bands:
            eps = np.array([s.eps_tilde for s in band.samples])
            jumps = np.abs(np.diff(eps))
            assert np.max(jumps) < 60 * step

    def test_complex_bubble_has_conjugate_bands(self):
        # longitudinal gain opens a complex bubble around the j*=0.5013 point
        plan = SweepPlan((0.49, 0.50), (0.1,), Arrangement.LONGITUDINAL, 4)
        bands = run_sweep(plan)[0.1]
        ims = sorted(s.samples[-1].eps_tilde.imag for s in bands)
        assert ims[0] < -1e-4 and ims[-1] > 1e-4
        assert ims[0] == pytest.approx(-ims[-1], abs=1e-12)
        # complex levels carry no indices
        for band in bands:
            s = band.samples[-1]
            if abs(s.eps_tilde.imag) > 1e-9:
                assert all(v is None for v in s.indices.values())

    def test_grid_refinement_keeps_index_pattern(self):
        coarse = SweepPlan(
            uniform_grid(0.3, 0.45, 16), (0.05,), Arrangement.LONGITUDINAL, 4
        )
        fine = SweepPlan(
            uniform_grid(0.3, 0.45, 31), (0.05,), Arrangement.LONGITUDINAL, 4
        )
        bc = run_sweep(coarse)[0.05]
        bf = run_sweep(fine)[0.05]
        for band_c, band_f in zip(bc, bf):
            for i, s in enumerate(band_c.samples):
                f = band_f.samples[2 * i]
                assert f.j_tilde == pytest.approx(s.j_tilde, abs=1e-12)
                assert f.eps_tilde == pytest.approx(s.eps_tilde, abs=1e-9)
                for label, idx in s.indices.items():
                    if idx is not None and f.indices[label] is not None:
                        assert f.indices[label].value == idx.value

    def test_metric_labels_follow_arrangement(self):
        plan = SweepPlan((0.2, 0.3), (0.1,), Arrangement.TRANSVERSAL, 4)
        bands = run_sweep(plan)[0.1]
        assert set(bands[0].samples[0].indices) == {"P", "PU"}
        plan = SweepPlan((0.2, 0.3), (0.1,), Arrangement.MIXED, 4)
        bands = run_sweep(plan)[0.1]
        assert set(bands[0].samples[0].indices) == {"P"}

    def test_index_step_conservation_small_window(self):
        # away from crossings the index pattern of each band is constant
        plan = SweepPlan(
            uniform_grid(0.1, 0.3, 41), (0.0, 0.1), Arrangement.LONGITUDINAL, 4
        )
        for bands in run_sweep(plan).values():
            for band in bands:
                for label in band.samples[0].indices:
                    vals = {
                        s.indices[label].value
                        for s in band.samples
                        if s.indices[label] is not None
                    }
                    assert len(vals) == 1


class TestExport:
    def test_csv_layout_and_formatting(self, tmp_path):
        plan = SweepPlan((0.2, 0.25, 0.3), (0.0, 0.1), Arrangement.LONGITUDINAL, 2)
        data = run_sweep(plan)
        labels = plan.family().metric_labels
        path = export_sweep(data, tmp_path / "sweep.csv", labels)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "gamma_tilde",
            "j_tilde",
            "band_id",
            "re_eps_tilde",
            "im_eps_tilde",
            "index_P",
            "quality_P",
            "index_U",
            "quality_U",
        ]
        assert len(rows) == 1 + 2 * 3 * 4
        # row order: gamma block, then grid point, then band id
        assert [r[2] for r in rows[1:5]] == ["0", "1", "2", "3"]
        assert rows[1][0] == "0" and rows[13][0] == "0.10000000000000001"
        im_values = {r[4] for r in rows[1:13]}
        assert im_values == {"0"}
        for r in rows[1:]:
            if r[5]:
                assert r[5] in ("1", "-1")
                assert float(r[6]) > 0

    def test_headers_use_lf_and_no_trailing_blank(self, tmp_path):
        plan = SweepPlan((0.2, 0.3), (0.0,), Arrangement.LONGITUDINAL, 2)
        data = run_sweep(plan)
        path = export_sweep(data, tmp_path / "s.csv", plan.family().metric_labels)
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.endswith(b"\n") and not raw.endswith(b"\n\n")

    def test_deterministic_bytes(self, tmp_path):
        plan = SweepPlan(
            uniform_grid(0.45, 0.55, 11), (0.1,), Arrangement.LONGITUDINAL, 4
        )
        labels = plan.family().metric_labels
        a = export_sweep(run_sweep(plan), tmp_path / "a.csv", labels)
        b = export_sweep(run_sweep(plan), tmp_path / "b.csv", labels)
        assert a.read_bytes() == b.read_bytes()

    def test_undefined_fields_empty(self, tmp_path):
        plan = SweepPlan((0.49, 0.50), (0.1,), Arrangement.LONGITUDINAL, 4)
        data = run_sweep(plan)
        path = export_sweep(data, tmp_path / "c.csv", plan.family().metric_labels)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        empties = [r for r in rows[1:] if r[5] == ""]
        assert empties, "complex bubble rows should have empty index fields"
        for r in empties:
            assert r[6] == ""
