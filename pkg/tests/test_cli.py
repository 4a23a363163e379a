import json
import math

import pytest

from gbattery.cli import main
from gbattery.config import ConfigError, emit_config, parse_config

TINY_MODEL = {
    "model": {"n_bath": 8, "gamma": 0.5, "omega_d": 2.0, "beta": 2.0},
    "cycle": {"t_charge": 25.0, "window": 0.25, "sample_count": 50},
}


def write_config(tmp_path, doc):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


class TestParseConfig:
    def test_empty_text_gives_reference_defaults(self):
        cfg = parse_config("")
        assert cfg.model.n_bath == 150
        assert cfg.model.beta == 10.0
        assert cfg.protocol_exponent == 11
        assert cfg.t_charge == 150.0
        assert cfg.sweep.scenarios == ("tripartite",)

    def test_round_trip(self):
        cfg = parse_config("")
        again = parse_config(emit_config(cfg))
        assert again == cfg

    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError, match="'model'"):
            parse_config(json.dumps({"model": {"omega_nought": 2.0}}))
        with pytest.raises(ConfigError, match="<root>"):
            parse_config(json.dumps({"modle": {}}))

    def test_invalid_field_named(self):
        with pytest.raises(ConfigError, match="beta"):
            parse_config(json.dumps({"model": {"beta": -1.0}}))
        with pytest.raises(ConfigError, match="t_charge"):
            parse_config(json.dumps({"cycle": {"t_charge": 0.0}}))
        with pytest.raises(ConfigError, match="window"):
            parse_config(json.dumps({"cycle": {"window": 1.5}}))

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError, match="non-empty"):
            parse_config(json.dumps({"sweep": {"td_grid": []}}))

    def test_cycle_config_factory(self):
        cfg = parse_config(json.dumps(TINY_MODEL))
        cell = cfg.cycle_config("bipartite", 0.5, 1.0)
        assert cell.t_charge == 25.0
        assert cell.window == 0.25


class TestCliCommands:
    def test_model_inspect_reference_values(self, tmp_path, capsys):
        code = main(["--out", str(tmp_path), "model-inspect"])
        assert code == 0
        out = capsys.readouterr().out
        assert "omega_r_sq          = 8.000000" in out
        manifest = json.loads((tmp_path / "run_manifest.json").read_text())
        assert manifest["derived"]["omega_r_sq"] == pytest.approx(8.0, abs=1e-8)
        assert manifest["derived"]["recurrence_estimate"] == pytest.approx(586.4, rel=1e-3)

    def test_cycle_writes_csv_and_row(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, TINY_MODEL)
        code = main(["--config", cfg_path, "--out", str(tmp_path / "out"),
                     "cycle", "--scenario", "tripartite", "--td", "0"])
        assert code == 0
        csv_text = (tmp_path / "out" / "sweep.csv").read_text()
        header, row = csv_text.strip().splitlines()
        assert header.startswith("scenario,t_d,theta,W_d,W_c,ergotropy,W_diss,Q,Sigma,eta")
        fields = row.split(",")
        assert fields[0] == "tripartite"
        assert fields[2] == "nan"  # theta not meaningful for tripartite rows
        assert math.isfinite(float(fields[3]))

    def test_sweep_deterministic_bytes(self, tmp_path):
        doc = dict(TINY_MODEL)
        doc["sweep"] = {
            "scenarios": ["tripartite", "bipartite"],
            "td_grid": [0.0, 0.3],
            "theta_grid": [0.0, 2.0],
        }
        cfg_path = write_config(tmp_path, doc)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["--config", cfg_path, "--out", str(out_a), "sweep", "--jobs", "1"]) == 0
        assert main(["--config", cfg_path, "--out", str(out_b), "sweep", "--jobs", "2"]) == 0
        assert (out_a / "sweep.csv").read_bytes() == (out_b / "sweep.csv").read_bytes()
        rows = (out_a / "sweep.csv").read_text().strip().splitlines()
        # 2 tripartite cells + 2 x 2 bipartite cells
        assert len(rows) == 1 + 2 + 4
        manifest = json.loads((out_a / "run_manifest.json").read_text())
        assert all(cell["status"] == "ok" for cell in manifest["cells"])

    def test_charge_trace_schema(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, TINY_MODEL)
        code = main(["--config", cfg_path, "--out", str(tmp_path / "out"),
                     "charge-trace", "--td", "0", "--t-charge", "25"])
        assert code == 0
        lines = (tmp_path / "out" / "trace.csv").read_text().strip().splitlines()
        assert lines[0] == "t,sigma_S_11,sigma_S_22,sigma_S_12,mf_q2_ref,mf_p2_ref"
        assert len(lines) == 1 + 50
        first = lines[1].split(",")
        assert float(first[0]) == 0.0

    def test_charge_trace_after_finite_disconnection(self, tmp_path, capsys):
        doc = dict(TINY_MODEL)
        doc["stepper"] = {"dt": 0.005}
        cfg_path = write_config(tmp_path, doc)
        code = main(["--config", cfg_path, "--out", str(tmp_path / "out"),
                     "charge-trace", "--td", "0.3", "--theta", "1.0", "--t-charge", "25"])
        assert code == 0
        lines = (tmp_path / "out" / "trace.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 50

    def test_oracle_csv(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, TINY_MODEL)
        code = main(["--config", cfg_path, "--out", str(tmp_path / "out"), "oracle"])
        assert code == 0
        lines = (tmp_path / "out" / "oracle.csv").read_text().strip().splitlines()
        assert lines[0] == "m0,omega0,gamma,omega_d,beta,q2,p2,q2_error,p2_error"
        values = [float(x) for x in lines[1].split(",")]
        assert values[5] > 0.0 and values[6] > 0.0

    def test_audit_prints_ledger(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, TINY_MODEL)
        code = main(["--config", cfg_path, "--out", str(tmp_path / "out"),
                     "audit", "--scenario", "bipartite", "--td", "0", "--theta", "0.5"])
        assert code == 0
        out = capsys.readouterr().out
        assert "first_law_residual" in out
        assert "second_law_gap" in out
        assert "interaction_identity_res" in out

    def test_bad_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{\"model\": {\"beta\": -3}}", encoding="utf-8")
        assert main(["--config", str(path), "model-inspect"]) == 2
        assert "beta" in capsys.readouterr().err

    def test_failed_cell_row_written_without_abort(self, tmp_path, monkeypatch):
        import gbattery.cli as cli_mod
        import gbattery.cycles as cycles_mod

        real_run = cycles_mod.CycleEngine.run

        def flaky_run(self, cfg):
            if cfg.scenario == "bipartite":
                raise RuntimeError("injected failure")
            return real_run(self, cfg)

        monkeypatch.setattr(cycles_mod.CycleEngine, "run", flaky_run)
        doc = dict(TINY_MODEL)
        doc["sweep"] = {
            "scenarios": ["tripartite", "bipartite"],
            "td_grid": [0.0],
            "theta_grid": [0.0],
        }
        cfg_path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        code = cli_mod.main(["--config", cfg_path, "--out", str(out), "sweep", "--jobs", "1"])
        assert code == 1  # failure reported, run not aborted
        rows = (out / "sweep.csv").read_text().strip().splitlines()
        assert len(rows) == 3
        assert any("error:RuntimeError" in row for row in rows)
        manifest = json.loads((out / "run_manifest.json").read_text())
        statuses = {cell["scenario"]: cell["status"] for cell in manifest["cells"]}
        assert statuses == {"tripartite": "ok", "bipartite": "error"}

    def test_log_env_does_not_change_numerics(self, tmp_path, monkeypatch):
        cfg_path = write_config(tmp_path, TINY_MODEL)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("GB_LOG", "DEBUG")
        assert main(["--config", cfg_path, "--out", str(out_a),
                     "cycle", "--scenario", "bipartite", "--td", "0.2"]) == 0
        monkeypatch.setenv("GB_LOG", "ERROR")
        assert main(["--config", cfg_path, "--out", str(out_b),
                     "cycle", "--scenario", "bipartite", "--td", "0.2"]) == 0
        assert (out_a / "sweep.csv").read_bytes() == (out_b / "sweep.csv").read_bytes()
