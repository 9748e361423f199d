import json
import math
from pathlib import Path

import numpy as np
import pytest

from torusctrl import field as F
from torusctrl.cli import (
    EXIT_ACCEPTANCE,
    EXIT_CONFIG,
    EXIT_OK,
    main,
    parse_config,
    parse_schedule,
    parse_state_expression,
)
from torusctrl.errors import ConfigError


class TestConfigParsing:
    def test_sections_flatten(self):
        cfg = parse_config("a = 1\n[grid]\nK = 64\nN = 256\n")
        assert cfg == {"a": "1", "grid.K": "64", "grid.N": "256"}

    def test_comments_ignored(self):
        cfg = parse_config("# top\nx = 2  # trailing\n")
        assert cfg == {"x": "2"}

    def test_bad_line_raises(self):
        with pytest.raises(ConfigError):
            parse_config("novalue\n")


class TestExpressions:
    def test_constant(self):
        f = parse_state_expression("2.5", 8)
        assert abs(f.mean - 2.5) < 1e-15

    def test_mixture(self):
        f = parse_state_expression("1 + 0.3*sin(1x) - 0.2*cos(3x)", 16)
        assert abs(f.mean - 1.0) < 1e-15
        assert abs(f.coeff(1) - (-0.15j)) < 1e-15
        assert abs(f.coeff(3) - (-0.1)) < 1e-15

    def test_exp_wrapper(self):
        f = parse_state_expression("exp(0.1*sin(1x))", 16)
        grid = f.to_grid(64)
        x = 2 * math.pi * np.arange(64) / 64
        assert np.max(np.abs(grid - np.exp(0.1 * np.sin(x)))) < 1e-12

    def test_garbage_raises(self):
        with pytest.raises(ConfigError):
            parse_state_expression("1 + frog(2x)", 8)

    def test_schedule(self):
        s = parse_schedule("0.1:1,0,0;0.2:0,0.5,0")
        assert abs(s.total_duration - 0.3) < 1e-15
        assert tuple(s.value_at(0.25)) == (0.0, 0.5, 0.0)


class TestRunner:
    def test_simulate_trivial(self, tmp_path):
        rc = main(["simulate", "--out", str(tmp_path / "r"),
                   "u0=1", "model=ks", "T=0.05", "K=16"])
        assert rc == EXIT_OK
        summary = json.loads((tmp_path / "r" / "summary.json").read_text())
        assert summary["blowup"] is False
        assert abs(float(summary["terminal_l2"]) - 1.0) < 1e-12
        assert (tmp_path / "r" / "manifest.json").exists()
        assert (tmp_path / "r" / "trajectory.csv").exists()

    def test_unknown_model_is_config_error(self, tmp_path):
        rc = main(["simulate", "--out", str(tmp_path / "r"), "model=banana"])
        assert rc == EXIT_CONFIG

    def test_saturation_check(self, tmp_path):
        rc = main(["saturation-check", "--out", str(tmp_path / "r"), "n_max=3"])
        assert rc == EXIT_OK
        rows = (tmp_path / "r" / "derivation.csv").read_text().splitlines()
        assert rows[0] == "n,depth,node_count,exact"
        assert len(rows) == 4

    def test_determinism_byte_identical(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            rc = main(["simulate", "--out", str(tmp_path / name),
                       "u0=1 + 0.2*sin(1x)", "model=ch", "T=0.02", "K=16",
                       "samples=5"])
            assert rc == EXIT_OK
            outs.append((tmp_path / name / "trajectory.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_manifest_replay(self, tmp_path):
        rc = main(["simulate", "--out", str(tmp_path / "a"),
                   "u0=1 + 0.2*sin(1x)", "model=ch", "T=0.02", "K=16",
                   "samples=5"])
        assert rc == EXIT_OK
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        overrides = [f"{k}={v}" for k, v in manifest["config"].items()]
        rc = main(["simulate", "--out", str(tmp_path / "b")] + overrides)
        assert rc == EXIT_OK
        assert (tmp_path / "a" / "trajectory.csv").read_bytes() == \
            (tmp_path / "b" / "trajectory.csv").read_bytes()

    def test_blowup_exit_code(self, tmp_path):
        rc = main(["simulate", "--out", str(tmp_path / "r"), "u0=1",
                   "model=ks", "T=0.5", "K=16",
                   "schedule=0.5:60,0,0", "guard=1e3"])
        assert rc == 3

    def test_conjugate_limit_artifacts(self, tmp_path):
        rc = main(["conjugate-limit", "--out", str(tmp_path / "r"),
                   "u0=1 + 0.1*cos(1x)", "phi=1.2 + 0.2*sin(1x)",
                   "p=0.3,0,0", "deltas=1e-2,5e-3", "K=32", "model=ks"])
        assert rc == EXIT_OK
        rows = (tmp_path / "r" / "errors.csv").read_text().splitlines()
        assert rows[0] == "delta,error"
        assert len(rows) == 3
        summary = json.loads((tmp_path / "r" / "summary.json").read_text())
        assert summary["monotone"] is True

    def test_steer_constants(self, tmp_path):
        rc = main(["steer", "--out", str(tmp_path / "r"), "mode=hold",
                   "u0=2", "u1=0.5", "eps=0.05", "T=0.5", "K=32", "model=ks"])
        assert rc == EXIT_OK
        plan = json.loads((tmp_path / "r" / "plan.json").read_text())
        assert abs(float(plan["duration"]) - 0.5) < 1e-12
        assert float(plan["eps_achieved"]) < 0.05

    def test_moment_control_run(self, tmp_path):
        rc = main(["moment-control", "--out", str(tmp_path / "r"),
                   "model=ch", "phi=1", "T=0.4", "count=6", "K=32",
                   "v0=0.1*cos(1x)", "oracle=1"])
        assert rc == EXIT_OK
        summary = json.loads((tmp_path / "r" / "summary.json").read_text())
        run = summary["runs"][0]
        assert float(run["terminal_residual"]) < 1e-3
        assert float(run["oracle_residual"]) < 1e-8
        assert (tmp_path / "r" / "control_0.csv").exists()
        assert (tmp_path / "r" / "cost.csv").exists()


class TestSweepAndProfiles:
    def test_sweep_axis(self, tmp_path):
        rc = main(["simulate", "--out", str(tmp_path / "r"),
                   "u0=1", "model=ks", "K=16", "sweep=T:0.01,0.02"])
        assert rc == EXIT_OK
        rows = (tmp_path / "r" / "sweep_summary.csv").read_text().splitlines()
        assert rows[0] == "index,T,exit_code"
        assert len(rows) == 3
        assert (tmp_path / "r" / "sweep_000" / "summary.json").exists()
        assert (tmp_path / "r" / "sweep_001" / "summary.json").exists()

    def test_profile_file(self, tmp_path):
        import csv as _csv
        from torusctrl.dynamics import poly_bump_mu4, poly_bump_mu5
        K = 16
        mu4, mu5 = poly_bump_mu4(K), poly_bump_mu5(K)
        path = tmp_path / "profiles.csv"
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["k", "mu4_re", "mu4_im", "mu5_re", "mu5_im"])
            for k in range(0, K + 1):
                w.writerow([k, mu4.coeff(k).real, mu4.coeff(k).imag,
                            mu5.coeff(k).real, mu5.coeff(k).imag])
        rc = main(["moment-control", "--out", str(tmp_path / "r"),
                   "model=ch", "phi=1", "T=0.4", "count=5", "K=16",
                   "v0=0.1*cos(1x)", f"profile_file={path}"])
        assert rc == EXIT_OK
        summary = json.loads((tmp_path / "r" / "summary.json").read_text())
        assert float(summary["runs"][0]["terminal_residual"]) < 1e-3


class TestRemainingSubcommands:
    def test_synthesize_constant_exponent(self, tmp_path):
        rc = main(["synthesize", "--out", str(tmp_path / "r"),
                   "u0=1", "exponent=0.5", "eps=0.02", "T=0.3", "K=32",
                   "model=ks"])
        assert rc == EXIT_OK
        plan = json.loads((tmp_path / "r" / "plan.json").read_text())
        assert float(plan["eps_achieved"]) < 0.02

    def test_steer_same_sign_mode(self, tmp_path):
        rc = main(["steer", "--out", str(tmp_path / "r"), "mode=same-sign",
                   "u0=2", "u1=3", "eps=0.05", "T=0.3", "K=32", "model=ch"])
        assert rc == EXIT_OK
        plan = json.loads((tmp_path / "r" / "plan.json").read_text())
        assert float(plan["eps_achieved"]) < 0.05

    def test_global_pipeline_trivial_start(self, tmp_path):
        rc = main(["global-pipeline", "--out", str(tmp_path / "r"),
                   "u0=1", "phi=1", "T=0.6", "count=5", "K=32", "model=ch"])
        assert rc == EXIT_OK
        summary = json.loads((tmp_path / "r" / "summary.json").read_text())
        assert float(summary["terminal_error"]) < 1e-5
        assert (tmp_path / "r" / "schedule.json").exists()
