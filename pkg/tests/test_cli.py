import filecmp
import json
import os

import pytest

from gnnlab.cli import main


def write_config(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


SOLVE_CONFIG = {
    "kappa": {"family": "axial-linear", "params": {"base": 1.0, "eps": 0.1}},
    "nonlinearity": {"family": "constant", "params": {"value": 1.0}},
    "grid": {"n_r": 33, "n_theta": 32},
    "solver": {"newton_tol": 1e-9},
}

SWEEP_CONFIG = {
    "kind": "kappa",
    "family": "axial-linear",
    "ladder": [0.01, 0.02, 0.04, 0.08],
    "nonlinearity": {"family": "constant", "params": {"value": 1.0}},
    "grid": {"n_r": 33, "n_theta": 32},
    "solver": {"newton_tol": 1e-9},
    "seed": 0,
}

CHAIN_CONFIG = {
    "d": 1.0,
    "delta": 0.1,
    "ell": 2.0,
    "c_sharp": 0.5,
    "n_dim": 2,
    "seed": 0,
    "mc_samples": 5000,
}


class TestSolveCommand:
    def test_success(self, tmp_path):
        cfg = write_config(tmp_path, "solve.json", SOLVE_CONFIG)
        out = str(tmp_path / "out")
        assert main(["solve", "--config", cfg, "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "solution.csv"))
        sidecar = json.load(open(os.path.join(out, "solution.json")))
        assert sidecar["converged"]

    def test_grid_override(self, tmp_path):
        cfg = write_config(tmp_path, "solve.json", SOLVE_CONFIG)
        out = str(tmp_path / "out")
        assert main(["solve", "--config", cfg, "--out", out, "--grid", "17,16"]) == 0
        sidecar = json.load(open(os.path.join(out, "solution.json")))
        assert sidecar["grid"] == {"n_r": 17, "n_theta": 16}

    def test_validation_exit_code(self, tmp_path):
        bad = dict(SOLVE_CONFIG, grid={"n_r": 2, "n_theta": 32})
        cfg = write_config(tmp_path, "bad.json", bad)
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert (
            main(["solve", "--config", str(tmp_path / "nope.json"), "--out", "o"]) == 2
        )

    def test_solver_failure_exit_code(self, tmp_path):
        hard = dict(
            SOLVE_CONFIG,
            nonlinearity={
                "family": "affine-power",
                "params": {"const": 1.0, "coef": 1.0, "exponent": 2.0},
            },
            solver={"newton_tol": 1e-12, "max_newton_iters": 1},
        )
        cfg = write_config(tmp_path, "hard.json", hard)
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


class TestOtherCommands:
    def test_deficit(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "d.json",
            {"kappa": {"family": "axial-linear", "params": {"base": 1.0, "eps": 0.1}}},
        )
        out = str(tmp_path / "out")
        assert main(["deficit", "--config", cfg, "--out", out]) == 0
        blob = json.load(open(os.path.join(out, "deficit.json")))
        assert blob["first_order"]["total"] == pytest.approx(0.2)
        assert blob["zeroth"] == pytest.approx(0.3, rel=1e-6)

    def test_planes(self, tmp_path):
        cfg = write_config(tmp_path, "p.json", dict(SOLVE_CONFIG, slack="deficit"))
        out = str(tmp_path / "out")
        assert main(["planes", "--config", cfg, "--out", out]) == 0
        blob = json.load(open(os.path.join(out, "planes.json")))
        assert not blob["flag"]

    def test_chain(self, tmp_path):
        cfg = write_config(tmp_path, "c.json", CHAIN_CONFIG)
        out = str(tmp_path / "out")
        assert main(["chain", "--config", cfg, "--out", out]) == 0
        blob = json.load(open(os.path.join(out, "chain.json")))
        assert blob["N"] == 9
        assert blob["log_bound"]["ok"]
        assert os.path.exists(os.path.join(out, "chain.csv"))

    def test_map(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "m.json",
            {
                "kind": "ellipsoid",
                "eps": 0.1,
                "nonlinearity": {"family": "constant", "params": {"value": 1.0}},
            },
        )
        out = str(tmp_path / "out")
        assert main(["map", "--config", cfg, "--out", out]) == 0
        blob = json.load(open(os.path.join(out, "map.json")))
        assert blob["pullback_deficit"]["total"] > 0

    def test_sweep_and_determinism(self, tmp_path):
        cfg = write_config(tmp_path, "s.json", SWEEP_CONFIG)
        out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
        assert main(["sweep", "--config", cfg, "--out", out1]) == 0
        assert main(["sweep", "--config", cfg, "--out", out2]) == 0
        for name in ("results.csv", "results.json", "plot.svg"):
            assert filecmp.cmp(
                os.path.join(out1, name), os.path.join(out2, name), shallow=False
            )

    def test_chain_invalid_config(self, tmp_path):
        cfg = write_config(tmp_path, "c.json", dict(CHAIN_CONFIG, delta=0.9))
        assert main(["chain", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
