import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from stencil_lab.core import save_stencil, Stencil


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "stencil_lab.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


class TestPipeline:
    def test_gen_data(self, workdir):
        proc = run_cli("gen-data", "--out", str(workdir), "--n-sims", "40", "--seed", "9")
        assert proc.returncode == 0, proc.stderr
        assert (workdir / "training_data.npz").exists()

    def test_learn_from_saved_data(self, workdir):
        proc = run_cli(
            "learn", "--method", "admm",
            "--data", str(workdir / "training_data.npz"),
            "--out", str(workdir / "learned"),
        )
        assert proc.returncode == 0, proc.stderr
        stencil = json.loads((workdir / "learned" / "stencil.json").read_text())
        assert stencil["R"] == 1
        assert abs(stencil["w"][2] - 32.0) / 32.0 < 0.05
        assert (workdir / "learned" / "trace.csv").exists()
        assert (workdir / "learned" / "diagnostics.json").exists()

    def test_simulate(self, workdir):
        proc = run_cli(
            "simulate", "--stencil", str(workdir / "learned" / "stencil.json"),
            "--out", str(workdir / "sim"), "--steps", "50", "--snapshot-every", "10",
        )
        assert proc.returncode == 0, proc.stderr
        with open(workdir / "sim" / "energy.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 51
        drift = max(abs(float(r["energy_minus_initial"])) for r in rows)
        assert drift <= 1e-11
        assert (workdir / "sim" / "spacetime.csv").exists()

    def test_dispersion(self, workdir):
        proc = run_cli(
            "dispersion", "--stencil", str(workdir / "learned" / "stencil.json"),
            "--out", str(workdir / "disp"),
        )
        assert proc.returncode == 0, proc.stderr
        report = json.loads((workdir / "disp" / "report.json").read_text())
        assert report["max_amplification_error"] <= 1e-13
        assert report["cfl_bound"] == pytest.approx(2.0 / report["c_max"])

    def test_converge_small(self, workdir):
        proc = run_cli(
            "converge", "--out", str(workdir / "conv"),
            "--resolutions", "32,64", "--t-final", "1", "--n-sims", "40",
        )
        assert proc.returncode == 0, proc.stderr
        with open(workdir / "conv" / "convergence.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert float(rows[1]["error"]) < float(rows[0]["error"])

    def test_experiment_solver_bench(self, workdir):
        proc = run_cli("experiment", "solver-bench", "--out", str(workdir / "bench"))
        assert proc.returncode == 0, proc.stderr
        assert (workdir / "bench" / "manifest.json").exists()


class TestConfigFile:
    def test_config_overrides(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"n_sims": 12, "m_max": 3}))
        proc = run_cli("gen-data", "--config", str(cfg_file), "--out", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        assert "12 samples" in proc.stdout
        with np.load(tmp_path / "training_data.npz") as data:
            assert int(data["n_sims"]) == 12
            assert int(data["m_max"]) == 3

    def test_cli_flag_beats_config(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"n_sims": 12}))
        proc = run_cli("gen-data", "--config", str(cfg_file), "--out", str(tmp_path), "--n-sims", "7")
        assert proc.returncode == 0
        assert "7 samples" in proc.stdout


class TestExitCodes:
    def test_success_is_zero(self, tmp_path):
        assert run_cli("gen-data", "--out", str(tmp_path), "--n-sims", "2").returncode == 0

    def test_config_error_is_two(self, tmp_path):
        proc = run_cli("learn", "--method", "admm", "--max-iters", "0", "--out", str(tmp_path))
        assert proc.returncode == 2
        assert "error" in proc.stderr

    def test_missing_file_is_two(self, tmp_path):
        proc = run_cli("simulate", "--stencil", str(tmp_path / "nope.json"), "--out", str(tmp_path))
        assert proc.returncode == 2

    def test_bad_subcommand_is_two(self):
        assert run_cli("teleport").returncode == 2

    def test_numerical_failure_is_one(self, tmp_path):
        # strongly non-skew stencil: Crank-Nicolson amplifies roundoff until overflow
        bad = Stencil(np.array([-120.0, 0.0, -120.0]), 1.0 / 64.0)
        save_stencil(bad, tmp_path / "bad.json")
        proc = run_cli(
            "simulate", "--stencil", str(tmp_path / "bad.json"),
            "--out", str(tmp_path), "--steps", "400",
        )
        assert proc.returncode == 1
        assert "numerical failure" in proc.stderr

    def test_bad_config_file_is_two(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        proc = run_cli("gen-data", "--config", str(bad), "--out", str(tmp_path))
        assert proc.returncode == 2
