import json

import numpy as np
import pytest

from kcover.analysis import (
    StageSlice,
    compare_spectra,
    energy_rank,
    extract_final_stage,
    final_stage_indices,
    participation_ratio,
    plot_spectra,
    singular_values,
)
from kcover.datagen import generate_dataset
from kcover.errors import DomainError
from kcover.planner import PlannerConfig


class TestFinalStageRule:
    def test_boundary_lengths(self):
        idx = final_stage_indices({"a": 25, "b": 8, "c": 20})
        assert idx["a"] == list(range(15, 25))  # last 10
        assert idx["b"] == list(range(4, 8))  # last half of 8 -> 4
        assert idx["c"] == list(range(10, 20))  # both rules coincide

    def test_odd_length_takes_middle(self):
        idx = final_stage_indices({"r": 9})
        assert idx["r"] == list(range(4, 9))  # ceil(9/2) = 5 samples

    def test_extraction_from_dataset(self, tmp_path):
        cfg = PlannerConfig(k=2, delta=0.9, seed=3, first_sensor="random")
        man = generate_dataset([], n=14, cfg=cfg, out_dir=tmp_path / "d", grid=16)
        sl = extract_final_stage(tmp_path / "d", rows="gain")
        by_run = {}
        for meta in man.samples:
            by_run.setdefault(meta["run"], 0)
            by_run[meta["run"]] += 1
        expect = sum(10 if L >= 20 else (L + 1) // 2 for L in by_run.values())
        assert sl.rows.shape == (expect, 16 * 16)
        sl_in = extract_final_stage(tmp_path / "d", rows="inputs")
        assert sl_in.rows.shape == (expect, 3 * 16 * 16)

    def test_unknown_rows_kind(self, tmp_path):
        with pytest.raises(DomainError):
            extract_final_stage(tmp_path, rows="everything")


class TestSingularValues:
    def test_identical_rows_zero_spectrum(self):
        X = np.tile(np.arange(6.0), (4, 1))
        spec = singular_values(X, count=5)
        assert np.all(spec.values == 0.0)
        assert spec.padded  # 4 rows cannot carry 5 nonzero values anyway

    def test_antisymmetric_pair_closed_form(self):
        rng = np.random.default_rng(0)
        r = rng.normal(size=40)
        X = np.stack([r, -r])
        spec = singular_values(X, count=3)
        expect = np.linalg.norm(r) * np.sqrt(2.0)
        assert spec.values[0] == pytest.approx(expect, rel=1e-12)
        assert np.all(spec.values[1:] == 0.0)
        # dense SVD oracle agrees
        dense = np.linalg.svd(X - X.mean(axis=0), compute_uv=False)
        assert spec.values[0] == pytest.approx(dense[0], rel=1e-12)

    def test_gram_vs_svd_routes(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(50, 100))
        a = singular_values(X, count=20, method="gram").values
        b = singular_values(X, count=20, method="svd").values
        assert np.allclose(a, b, rtol=1e-8, atol=1e-10)

    def test_gram_vs_svd_large_wide(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(200, 16384))
        a = singular_values(X, count=20, method="gram").values
        b = singular_values(X, count=20, method="svd").values
        assert np.allclose(a, b, rtol=1e-8)

    def test_centering_invariance(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 64))
        shift = rng.normal(size=64)
        a = singular_values(X, count=10).values
        b = singular_values(X + shift, count=10).values
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9)

    def test_nonincreasing_and_nonnegative(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(25, 40))
        s = singular_values(X, count=20).values
        assert np.all(s >= 0.0)
        assert np.all(np.diff(s) <= 1e-12)

    def test_single_row_rejected(self):
        with pytest.raises(DomainError):
            singular_values(np.ones((1, 8)))


class TestSummaries:
    def test_participation_ratio(self):
        assert participation_ratio(np.array([1.0, 0.0])) == pytest.approx(1.0)
        assert participation_ratio(np.ones(8)) == pytest.approx(8.0)
        assert participation_ratio(np.zeros(4)) == 0.0

    def test_energy_rank(self):
        assert energy_rank(np.array([1.0, 0.0, 0.0])) == 1
        assert energy_rank(np.ones(10)) == 10  # 95% of uniform energy needs 10 of 10
        assert energy_rank(np.zeros(3)) == 0


class TestCompare:
    def test_identical_inputs_identical_spectra(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(12, 30))
        sl = StageSlice(rows=X, provenance={})
        report = compare_spectra({"a": sl, "b": StageSlice(rows=X.copy(), provenance={})}, count=8)
        assert (
            report["datasets"]["a"]["singular_values"]
            == report["datasets"]["b"]["singular_values"]
        )

    def test_requires_two_slices(self):
        with pytest.raises(DomainError):
            compare_spectra({"only": StageSlice(rows=np.ones((3, 3)), provenance={})})

    def test_report_and_plot_from_generated_data(self, tmp_path):
        cfg0 = PlannerConfig(k=2, delta=0.9, epsilon=0.0, seed=1, first_sensor="random")
        cfge = PlannerConfig(k=2, delta=0.9, epsilon=0.05, seed=2, first_sensor="random")
        generate_dataset([], n=10, cfg=cfg0, out_dir=tmp_path / "d0", grid=16)
        generate_dataset([], n=10, cfg=cfge, out_dir=tmp_path / "de", grid=16)
        named = {
            "greedy": extract_final_stage(tmp_path / "d0"),
            "explore": extract_final_stage(tmp_path / "de"),
        }
        report = compare_spectra(named, count=12)
        for entry in report["datasets"].values():
            s = entry["singular_values"]
            assert all(b <= a + 1e-12 for a, b in zip(s, s[1:]))
        out = tmp_path / "spectra.png"
        plot_spectra(report, out)
        assert out.stat().st_size > 0
        json.dumps(report)  # report is JSON-serializable
