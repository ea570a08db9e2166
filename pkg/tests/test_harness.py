import filecmp
import json

import numpy as np
import pytest

from gnnlab.errors import ValidationError
from gnnlab.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    emit_report,
    fit_alpha,
    pool_width,
    run_sweep,
)

MINI_KAPPA_CONFIG = {
    "kind": "kappa",
    "family": "axial-linear",
    "ladder": [0.0025, 0.005, 0.01, 0.02, 0.04, 0.08, 0.16],
    "nonlinearity": {"family": "constant", "params": {"value": 1.0}},
    "grid": {"n_r": 65, "n_theta": 64},
    "solver": {"newton_tol": 1e-9},
    "seed": 0,
}


@pytest.fixture(scope="module")
def mini_sweep():
    return run_sweep(ExperimentConfig.from_json(MINI_KAPPA_CONFIG))


class TestFitAlpha:
    def test_exact_power_law(self):
        x = np.array([0.1, 0.2, 0.4, 0.8])
        pts = np.column_stack([x, 2.0 * np.sqrt(x)])
        slope, intercept, resid = fit_alpha(pts)
        assert slope == pytest.approx(0.5, abs=1e-12)
        assert intercept == pytest.approx(np.log(2.0), abs=1e-12)
        assert resid <= 1e-12

    def test_two_points_rejected(self):
        with pytest.raises(ValidationError):
            fit_alpha([(0.1, 0.2), (0.2, 0.4)])

    def test_zero_values_rejected(self):
        with pytest.raises(ValidationError):
            fit_alpha([(0.1, 0.0), (0.2, 0.4), (0.3, 0.5)])


class TestConfig:
    def test_round_trip(self):
        cfg = ExperimentConfig.from_json(MINI_KAPPA_CONFIG)
        again = ExperimentConfig.from_json(cfg.to_json())
        assert again == cfg

    def test_rejects_flat_ladder(self):
        bad = dict(MINI_KAPPA_CONFIG, ladder=[0.0, 0.0, 0.0])
        with pytest.raises(ValidationError):
            ExperimentConfig.from_json(bad)

    def test_rejects_short_ladder(self):
        bad = dict(MINI_KAPPA_CONFIG, ladder=[0.1, 0.2])
        with pytest.raises(ValidationError):
            ExperimentConfig.from_json(bad)

    def test_rejects_unknown_family(self):
        bad = dict(MINI_KAPPA_CONFIG, family="ellipsoid")
        with pytest.raises(ValidationError):
            ExperimentConfig.from_json(bad)


class TestPoolWidth:
    def test_env_caps(self, monkeypatch):
        monkeypatch.setenv("GNNLAB_THREADS", "2")
        assert pool_width(8) == 2
        monkeypatch.delenv("GNNLAB_THREADS")
        assert pool_width(3) == 3

    def test_minimum_one(self, monkeypatch):
        monkeypatch.setenv("GNNLAB_THREADS", "0")
        assert pool_width(4) == 1


class TestRunSweep:
    def test_linear_family_alpha_is_one(self, mini_sweep):
        assert mini_sweep.alpha == pytest.approx(1.0, abs=0.05)
        assert mini_sweep.fit_residual <= 1e-6

    def test_records_sorted_and_complete(self, mini_sweep):
        eps = [r.eps for r in mini_sweep.records]
        assert eps == sorted(eps)
        assert len(mini_sweep.records) == 7
        assert not any(r.failed for r in mini_sweep.records)

    def test_theorem_shape_property(self, mini_sweep):
        # as the deficit decreases to zero so do the asymmetry and the
        # monotonicity defect (up to 5% noise)
        recs = sorted(mini_sweep.records, key=lambda r: r.deficit_total)
        asym = [r.asymmetry for r in recs]
        defect = [r.monotonicity_defect for r in recs]
        floor = mini_sweep.noise_floor
        for seq in (asym, defect):
            for lo, hi in zip(seq, seq[1:]):
                assert lo <= 1.05 * hi + floor
        assert asym[0] <= asym[-1]

    def test_uniform_bound_diagnostics(self, mini_sweep):
        # torsion-barrier ratio: u(x) >= (1/(2n)) (1 - |x|) scaled; for the
        # near-unit kappa family the profile stays at 1/4 up to 5%
        for r in mini_sweep.records:
            if r.eps <= 0.1:
                assert r.inf_ratio >= 0.25 * 0.95
                assert 0.2 <= r.sup_norm <= 0.3

    def test_lambda_star_column(self, mini_sweep):
        stars = [r.lambda_star for r in mini_sweep.records]
        assert all(s >= 0 for s in stars)
        assert all(a <= b + 1e-12 for a, b in zip(stars, stars[1:]))

    def test_parallel_matches_serial(self):
        serial = run_sweep(ExperimentConfig.from_json(MINI_KAPPA_CONFIG))
        cfg2 = dict(MINI_KAPPA_CONFIG, threads=2)
        parallel = run_sweep(ExperimentConfig.from_json(cfg2))
        for a, b in zip(serial.records, parallel.records):
            assert a.row() == b.row()

    def test_noise_only_sweep_rejected(self):
        # a ladder of vanishing perturbations produces records below the
        # fitting floor
        cfg = dict(
            MINI_KAPPA_CONFIG,
            ladder=[1e-15, 2e-15, 4e-15],
        )
        with pytest.raises(ValidationError):
            run_sweep(ExperimentConfig.from_json(cfg))


class TestEmitReport:
    def test_files_and_shape(self, mini_sweep, tmp_path):
        paths = emit_report(mini_sweep, str(tmp_path))
        lines = open(paths["csv"]).read().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 1 + len(mini_sweep.records)
        blob = json.load(open(paths["json"]))
        assert blob["schema_version"] == "1"
        assert blob["fit"]["alpha"] == pytest.approx(mini_sweep.alpha)
        svg = open(paths["svg"]).read()
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")

    def test_empty_dir_rejected(self, mini_sweep):
        with pytest.raises(ValidationError):
            emit_report(mini_sweep, "")

    def test_rerun_byte_identical(self, tmp_path):
        a = run_sweep(ExperimentConfig.from_json(MINI_KAPPA_CONFIG))
        b = run_sweep(ExperimentConfig.from_json(MINI_KAPPA_CONFIG))
        pa = emit_report(a, str(tmp_path / "a"))
        pb = emit_report(b, str(tmp_path / "b"))
        for key in ("csv", "json", "svg"):
            assert filecmp.cmp(pa[key], pb[key], shallow=False)
