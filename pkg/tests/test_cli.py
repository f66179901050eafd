"""Command-line interface: parsing, outputs, exit codes, determinism."""

import json
import os

import pytest

from gradpde import cli
from gradpde.cli import ConfigError, main, parse_manifold


class TestParsing:
    def test_manifold_point(self):
        m = parse_manifold("point:0.5", 1)
        assert m.kind == "point" and m.location == (0.5,)

    def test_manifold_sphere(self):
        m = parse_manifold("l1_sphere:0.0,0.0,0.5", 2)
        assert m.center == (0.0, 0.0) and m.radius == 0.5

    def test_manifold_hyperplane(self):
        m = parse_manifold("axis_hyperplane:1,0.25", 2)
        assert m.axis == 1 and m.offset == 0.25

    @pytest.mark.parametrize(
        "text,dim",
        [("torus:1", 1), ("point:0.1,0.2", 1), ("l1_sphere:0.0,0.5", 2), ("point:abc", 1)],
    )
    def test_bad_manifolds(self, text, dim):
        with pytest.raises(ConfigError):
            parse_manifold(text, dim)

    def test_degrees_strictly_increasing(self):
        assert cli._parse_degrees("4,8,12") == [4, 8, 12]
        for bad in ("4,8", "4,8,8", "8,4,12", "4,x,12"):
            with pytest.raises(ConfigError):
                cli._parse_degrees(bad)

    def test_step_values(self):
        assert cli._parse_step("auto") == cli._flow.ONE_OVER_L
        assert cli._parse_step("0.5") == 0.5
        for bad in ("-1", "0", "fast"):
            with pytest.raises(ConfigError):
                cli._parse_step(bad)


class TestValidationExits:
    def test_missing_oracle_exits_2_without_files(self, tmp_path, capsys):
        code = main(["solve", "--problem", "poisson", "--out", str(tmp_path)])
        assert code == 2
        assert "error:" in capsys.readouterr().err
        assert os.listdir(tmp_path) == []

    def test_eikonal_missing_manifold_exits_2(self, capsys):
        assert main(["solve", "--problem", "eikonal", "--d", "1"]) == 2

    def test_unknown_oracle_exits_2(self, capsys):
        assert main(["solve", "--problem", "poisson", "--oracle", "cos_pi"]) == 2

    def test_dimension_oracle_mismatch_exits_2(self, capsys):
        assert main(["solve", "--problem", "poisson", "--oracle", "sin_pi", "--d", "2"]) == 2

    def test_unknown_config_field_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"problem": "poisson", "speed": "fast"}))
        assert main(["solve", "--config", str(cfg)]) == 2

    def test_malformed_config_json_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert main(["solve", "--config", str(cfg)]) == 2


class TestSolveCommands:
    def test_poisson_solve_prints_error(self, capsys):
        assert main(["solve", "--problem", "poisson", "--oracle", "sin_pi", "--n", "12"]) == 0
        out = capsys.readouterr().out
        assert "solved poisson n=12" in out
        assert "h1_err=" in out

    def test_reconstruct(self, capsys):
        code = main([
            "reconstruct", "--problem", "reconstruction", "--oracle", "sin_pi",
            "--n", "10", "--sobolev-order", "1",
        ])
        assert code == 0
        assert "reconstructed sin_pi" in capsys.readouterr().out

    def test_eikonal_solve_writes_trace(self, tmp_path, capsys):
        code = main([
            "solve", "--problem", "eikonal", "--manifold", "point:0.0",
            "--d", "1", "--n", "8", "--max-iters", "50", "--out", str(tmp_path),
        ])
        assert code == 0
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0] == "j,loss,grad_norm,err_ref"
        assert len(lines) >= 2

    def test_check_command(self, capsys):
        assert main(["check", "--problem", "poisson", "--oracle", "sin_pi", "--n", "6"]) == 0
        assert "max_rel_err=" in capsys.readouterr().out


class TestSweepAndClassify:
    def _sweep(self, out, extra=()):
        return main([
            "sweep", "--problem", "poisson", "--oracle", "sin_pi",
            "--degrees", "4,8,12,16", "--out", str(out), *extra,
        ])

    def test_sweep_writes_csv(self, tmp_path, capsys):
        assert self._sweep(tmp_path) == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "n,err,loss_final,iters"
        assert [int(l.split(",")[0]) for l in lines[1:]] == [4, 8, 12, 16]

    def test_sweep_requires_degrees(self, capsys):
        assert main(["sweep", "--problem", "poisson", "--oracle", "sin_pi"]) == 2

    def test_sweep_deterministic_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert self._sweep(a, ("--seed", "3")) == 0
        assert self._sweep(b, ("--seed", "3")) == 0
        assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()

    def test_sweep_jobs_matches_serial(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert self._sweep(a) == 0
        assert self._sweep(b, ("--jobs", "4")) == 0
        assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()

    def test_classify_poisson_report(self, tmp_path, capsys):
        code = main([
            "classify", "--problem", "poisson", "--oracle", "sin_pi",
            "--degrees", "4,8,12,16", "--out", str(tmp_path),
        ])
        assert code == 0
        assert "PolynomialTime" in capsys.readouterr().out
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["classification"] == "PolynomialTime"
        assert set(report) >= {
            "classification", "best_fit", "runner_up_ratio", "budgets",
            "sweep", "constants", "config_echo",
        }
        assert report["best_fit"]["model"] == "exponential"
        assert report["config_echo"]["oracle"] == "sin_pi"
        assert (tmp_path / "sweep.csv").exists()

    def test_classify_eikonal_report(self, tmp_path, capsys):
        code = main([
            "classify", "--problem", "eikonal", "--manifold", "point:0.0",
            "--d", "1", "--degrees", "4,8,16,32", "--max-iters", "300",
            "--out", str(tmp_path),
        ])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["classification"] == "BlowupCandidate"
        assert report["rho_est"] is None

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "problem": "poisson", "oracle": "sin_pi", "n": 4,
            "degrees": "4,8,12,16", "out": str(tmp_path),
        }))
        assert main(["solve", "--config", str(cfg), "--n", "12"]) == 0
        assert "n=12" in capsys.readouterr().out
