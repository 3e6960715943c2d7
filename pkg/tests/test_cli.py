"""End-to-end tests of the command-line interface and its file artifacts."""

import json

import numpy as np
import pytest

from riskid.cli import main
from riskid.experiment import DEMO_SYSTEM, config_to_dict, ExperimentConfig
from riskid.kernel import DcHyperParams, marginal_log_likelihood
from riskid.lti import build_toeplitz, impulse_response, load_dataset, save_model


@pytest.fixture()
def model_file(tmp_path):
    path = tmp_path / "model.json"
    save_model(DEMO_SYSTEM, path)
    return path


def run_cli(*args) -> int:
    return main([str(a) for a in args])


class TestSimulate:
    def test_impulse_mode_outputs_impulse_response(self, tmp_path, model_file):
        out = tmp_path / "data.csv"
        code = run_cli(
            "simulate", "--system", model_file, "--n", 40, "--noise-variance", 0,
            "--impulse", "--seed", 1, "--out", out,
        )
        assert code == 0
        ds = load_dataset(out)
        np.testing.assert_allclose(ds.y, impulse_response(DEMO_SYSTEM, 40), atol=1e-12)

    def test_byte_identical_reruns(self, tmp_path, model_file):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run_cli(
                "simulate", "--system", model_file, "--n", 25,
                "--noise-variance", 0.5, "--seed", 7, "--out", out,
            ) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_row_count(self, tmp_path, model_file):
        out = tmp_path / "data.csv"
        run_cli("simulate", "--system", model_file, "--n", 60, "--seed", 0, "--out", out)
        lines = out.read_text().splitlines()
        assert len(lines) == 61
        assert lines[0] == "t,u,y"

    def test_missing_model_file(self, tmp_path):
        code = run_cli(
            "simulate", "--system", tmp_path / "nope.json", "--n", 5,
            "--out", tmp_path / "x.csv",
        )
        assert code == 2


class TestIdentify:
    def test_pem_noise_free(self, tmp_path, model_file, capsys):
        data = tmp_path / "data.csv"
        run_cli("simulate", "--system", model_file, "--n", 60, "--noise-variance", 0,
                "--seed", 3, "--out", data)
        out = tmp_path / "decision.json"
        code = run_cli("identify", "--data", data, "--orders", "0,2,1",
                       "--method", "pem", "--seed", 0, "--out", out)
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["decision"]["objective"] <= 1e-8
        assert payload["hyperparameters"] is None
        np.testing.assert_allclose(payload["decision"]["model"]["b"], [0.72], atol=1e-4)

    def test_band_reported_for_full_rank_regressor(self, tmp_path, model_file):
        # An impulse input makes the regressor the identity, so the
        # least-squares weight is full rank and the band must be emitted.
        data = tmp_path / "data.csv"
        run_cli("simulate", "--system", model_file, "--n", 30, "--noise-variance", 0.1,
                "--impulse", "--seed", 4, "--out", data)
        out = tmp_path / "decision.json"
        code = run_cli("identify", "--data", data, "--orders", "0,2,1",
                       "--method", "pem", "--seed", 0, "--out", out)
        assert code == 0
        payload = json.loads(out.read_text())
        band = payload["posterior"]["band"]
        assert len(band) == 30
        assert all(b > 0 for b in band)

    def test_brm_reports_improved_hyperparameters(self, tmp_path, model_file):
        data = tmp_path / "data.csv"
        run_cli("simulate", "--system", model_file, "--n", 50, "--noise-variance", 1,
                "--seed", 5, "--out", data)
        out = tmp_path / "decision.json"
        code = run_cli("identify", "--data", data, "--orders", "0,2,1", "--method", "brm",
                       "--kernel-init", "100,0.8,0.7", "--restarts", 2, "--seed", 0, "--out", out)
        assert code == 0
        payload = json.loads(out.read_text())
        tuned = payload["hyperparameters"]
        assert tuned is not None
        ds = load_dataset(data)
        H = build_toeplitz(ds.u)
        ll_init = marginal_log_likelihood(DcHyperParams(100.0, 0.8, 0.7, 1.0), H, ds.y)
        ll_tuned = marginal_log_likelihood(DcHyperParams.from_dict(tuned), H, ds.y)
        assert ll_tuned >= ll_init

    def test_missing_dataset_names_path(self, tmp_path, capsys):
        missing = tmp_path / "missing.csv"
        code = run_cli("identify", "--data", missing, "--orders", "0,2,1",
                       "--out", tmp_path / "d.json")
        assert code == 2
        assert str(missing) in capsys.readouterr().err

    def test_warns_when_first_input_is_zero(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        data.write_text("t,u,y\n1,0.0,0.1\n2,1.0,0.5\n3,0.5,0.7\n4,-0.2,0.3\n5,0.1,0.2\n")
        code = run_cli("identify", "--data", data, "--orders", "0,1,0",
                       "--method", "pem", "--seed", 0, "--out", tmp_path / "d.json")
        assert code == 0
        assert "u(1) = 0" in capsys.readouterr().err


class TestTune:
    def test_writes_hyperparameter_json(self, tmp_path, model_file):
        data = tmp_path / "data.csv"
        run_cli("simulate", "--system", model_file, "--n", 40, "--noise-variance", 1,
                "--seed", 2, "--out", data)
        out = tmp_path / "hyper.json"
        code = run_cli("tune", "--data", data, "--kernel-init", "100,0.8,0.7",
                       "--restarts", 1, "--seed", 0, "--out", out)
        assert code == 0
        payload = json.loads(out.read_text())
        assert set(payload) == {"c", "alpha", "rho", "lambda"}
        assert 0.0 < payload["alpha"] < 1.0


@pytest.fixture()
def benchmark_config(tmp_path):
    cfg = ExperimentConfig(
        replications=2,
        seed=11,
        tuner_restarts=0,
        tuner_max_iter=60,
        optimizer_restarts=2,
    )
    payload = config_to_dict(cfg)
    payload["kind"] = "vary_nf"
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return path


class TestBenchmark:
    def test_artifacts_and_determinism(self, tmp_path, benchmark_config):
        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        for out in (out1, out2):
            assert run_cli("benchmark", "--config", benchmark_config, "--out", out) == 0
            for name in ("config.json", "replications.csv", "boxplot.csv", "summary.json"):
                assert (out / name).exists()
        assert (out1 / "replications.csv").read_bytes() == (out2 / "replications.csv").read_bytes()
        summary = json.loads((out1 / "summary.json").read_text())
        assert len(summary["cells"]) == 6
        assert summary["total_failed"] == 0

    def test_flag_overrides_recorded_in_config_echo(self, tmp_path, benchmark_config):
        out = tmp_path / "run"
        assert run_cli("benchmark", "--config", benchmark_config, "--out", out,
                       "--replications", 1, "--seed", 99, "--horizon", 50) == 0
        echoed = json.loads((out / "config.json").read_text())
        assert echoed["replications"] == 1
        assert echoed["seed"] == 99
        assert echoed["metric_horizon"] == 50
        assert echoed["kind"] == "vary_nf"

    def test_report_reproduces_boxplot(self, tmp_path, benchmark_config):
        out = tmp_path / "run"
        run_cli("benchmark", "--config", benchmark_config, "--out", out)
        report = tmp_path / "box.csv"
        assert run_cli("report", "--input", out / "replications.csv", "--out", report) == 0
        assert report.read_bytes() == (out / "boxplot.csv").read_bytes()
