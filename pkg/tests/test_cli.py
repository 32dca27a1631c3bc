import json
import os

import numpy as np
import pandas as pd
import pytest

from dmme import cli
from dmme.cli import (
    FAIL,
    PASS,
    RESULT_COLUMNS,
    XFAIL,
    main,
    min_alpha32,
    run_figure1,
    run_figure2,
    run_simulation,
    run_steady,
    scan_alpha_sign,
)
from dmme.config import ExperimentConfig
from dmme.controls import ProtocolParams, synthesize
from dmme.errors import NoSignChangeError, ToleranceError


class TestResultTables:

    def test_columns_and_clamp(self):
        df, traj = run_simulation(ExperimentConfig(grid=20, initial_state="psi3_0"))
        assert list(df.columns) == RESULT_COLUMNS
        assert np.all(np.diff(df["t"]) > 0)
        assert df["log10_infidelity"].min() >= -16.0
        assert len(df) == 21
        assert traj.times[-1] == pytest.approx(ProtocolParams().period)

    def test_deterministic(self):
        config = ExperimentConfig(grid=15, initial_state="ket00")
        first, _ = run_simulation(config)
        second, _ = run_simulation(config)
        pd.testing.assert_frame_equal(first, second)

    def test_initial_state_selectors(self):
        protocol = synthesize(ProtocolParams())
        custom = ExperimentConfig(initial_state="custom", initial_amplitudes=(2, 0, 0, 0))
        assert np.allclose(cli.initial_state(custom, protocol), [1, 0, 0, 0])
        psi4 = cli.initial_state(ExperimentConfig(initial_state="psi4_0"), protocol)
        assert np.vdot(psi4, psi4).real == pytest.approx(1.0)


class TestFigure1:

    def test_outputs(self, tmp_path):
        tables = run_figure1(ExperimentConfig(grid=40, method="DOP853"), str(tmp_path))
        closed = tables["a_ket00_closed"]
        opened = tables["a_ket00_open"]
        assert closed["fidelity"].iloc[-1] == pytest.approx(0.9, abs=0.005)
        assert 1.0 - opened["fidelity"].iloc[-1] < 0.1
        rates_table = tables["c_rates"]
        # both transitions are open on [0, T); 2 <-> 4 closes at t = T
        assert rates_table["gamma32"].min() > 0.0
        assert rates_table["gamma24"].iloc[:-1].min() > 0.0
        assert rates_table["gamma24"].iloc[-1] == pytest.approx(0.0, abs=1e-12)
        for name in ("a_psi3_open", "a_ket00_open", "a_ket00_closed"):
            df = tables[name]
            assert df["trace_defect"].abs().max() <= 1e-8
            assert df["min_eig"].min() >= -1e-8

        with open(tmp_path / "figure1a_ket00_open.csv") as f:
            assert f.readline().strip() == ",".join(RESULT_COLUMNS)
        with open(tmp_path / "figure1_summary.json") as f:
            summary = json.load(f)
        assert summary["final_fidelity"]["a_ket00_closed"] == pytest.approx(0.9, abs=0.005)
        assert summary["min_gamma24"] > 0.0
        assert os.path.exists(tmp_path / "figure1b_fields.csv")
        assert os.path.exists(tmp_path / "figure1c_rates.csv")


class TestFigure2:

    def test_outputs(self, tmp_path):
        tables = run_figure2(ExperimentConfig(grid=20, method="DOP853"), str(tmp_path))
        assert len(tables) == 6
        for label in ("psi3", "psi4", "ket00"):
            for lamb in ("on", "off"):
                assert os.path.exists(tmp_path / f"figure2_{label}_lamb_{lamb}.csv")
        with open(tmp_path / "figure2_summary.json") as f:
            summary = json.load(f)
        final = summary["final_infidelity"]
        assert final["psi3"]["lamb_on"] < 1e-3
        assert final["psi4"]["lamb_on"] == pytest.approx(final["psi4"]["lamb_off"], abs=1e-6)
        assert summary["max_lamb_difference"]["psi4"] < 1e-6
        assert summary["max_lamb_difference"]["ket00"] > 1e-6


class TestSteady:

    def test_zero_temperature(self, tmp_path):
        df = run_steady(ExperimentConfig(grid=10), str(tmp_path))
        assert len(df) == 11
        assert os.path.exists(tmp_path / "steady.csv")
        assert np.allclose(df["rho33"], 1.0, atol=1e-8)
        assert np.allclose(df[["rho22", "rho44"]], 0.0, atol=1e-8)
        assert (df["sector_dim"].iloc[:5] == 1).all()
        assert df["sector_dim"].iloc[-1] > 1

    def test_finite_temperature_matches_balance(self, tmp_path):
        df = run_steady(ExperimentConfig(grid=10, temperature=1.0), str(tmp_path))
        total = df["rho22"] + df["rho33"] + df["rho44"]
        assert np.allclose(total, 1.0, atol=1e-8)
        assert df[["rho22", "rho33", "rho44"]].min().min() >= -1e-8
        rows = df.dropna()
        assert len(rows) >= 8
        for name in ("rho22", "rho33", "rho44"):
            assert np.allclose(rows[name], rows[f"{name}_balance"], atol=1e-6)


class TestThresholdScan:

    def test_sign_of_min_alpha32(self):
        assert min_alpha32(ProtocolParams(g2m=0.02)) > 0.0
        assert min_alpha32(ProtocolParams(g2m=0.6)) > 0.0
        assert min_alpha32(ProtocolParams(g2m=1.0)) < 0.0

    def test_threshold(self):
        est = scan_alpha_sign(ExperimentConfig(), (0.1, 1.0), resolution=1e-3)
        assert est.threshold == pytest.approx(2.0 * np.sqrt(2.0) / 3.0, abs=5e-3)
        assert est.width <= 1e-3
        assert est.lower < est.threshold < est.upper

    def test_no_sign_change(self):
        with pytest.raises(NoSignChangeError):
            scan_alpha_sign(ExperimentConfig(), (0.1, 0.5), resolution=1e-2, coarse_points=5)


class TestSelfCheckPieces:

    def test_admissibility_failure_names_time(self):
        result = cli._check_admissibility(ProtocolParams(g2m=2.0))
        assert result.status == FAIL
        assert "t =" in result.detail

    def test_lamb_scope_is_expected_failure(self):
        config = ExperimentConfig(temperature=1.0, include_lamb_shift=True)
        result = cli._check_lamb_scope(config, synthesize(config.protocol_params()))
        assert result.status == XFAIL

    def test_steady_and_special_checks(self):
        protocol = synthesize(ProtocolParams())
        assert cli._check_steady(protocol).status == PASS
        assert cli._check_special(ExperimentConfig().bath_params()).status == PASS
        assert cli._check_xi_sum(protocol).status == PASS
        assert cli._check_swapped_steady().status == XFAIL

    def test_selfcheck_stops_on_inadmissible_protocol(self):
        results = cli.selfcheck(ExperimentConfig(g2m=2.0))
        assert [r.status for r in results] == [FAIL]

    def test_default_config_passes_every_check(self):
        results = cli.selfcheck(ExperimentConfig())
        assert len(results) > 1
        failed = [r.name for r in results if r.status not in (PASS, XFAIL)]
        assert failed == []


class TestMain:

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("delta = 1.5\n")
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 1
        assert "ERROR:" in capsys.readouterr().out

    def test_figure2_rejects_temperature(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DMME_TEMPERATURE", "1.0")
        assert main(["figure2", "--out", str(tmp_path)]) == 1

    def test_scan_without_sign_change(self, tmp_path):
        assert main(["scan-g2m", "--low", "0.1", "--high", "0.5", "--out", str(tmp_path)]) == 1

    def test_simulate_writes_outputs(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DMME_INITIAL_STATE", "ket00")
        assert main(["simulate", "--grid", "20", "--out", str(tmp_path)]) == 0
        df = pd.read_csv(tmp_path / "simulate.csv")
        assert list(df.columns) == RESULT_COLUMNS
        with open(tmp_path / "simulate_summary.json") as f:
            assert json.load(f)["final_fidelity"] == pytest.approx(df["fidelity"].iloc[-1])

    def test_numerical_failure_exit_code(self, tmp_path, monkeypatch, capsys):
        def drift(*args, **kwargs):
            raise ToleranceError("drift")
        monkeypatch.setattr(cli, "run_simulation", drift)
        assert main(["simulate", "--out", str(tmp_path)]) == 2
        assert "numerical failure" in capsys.readouterr().out
