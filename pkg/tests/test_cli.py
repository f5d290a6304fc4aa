"""CLI subcommands, config handling, trace files, and exit codes."""

import numpy as np
import pytest

from katyusha_h.cli import main
from katyusha_h.experiment import (
    ConfigError,
    build_problem,
    load_config,
    read_trace,
    run_command,
    sweep_command,
)

BASE_CONFIG = """\
[problem]
family = least_squares
n = 30
d = 6
seed = 5
reg = l1
lam1 = 0.05
noise = 0.2

[solver]
method = katyusha_h
alpha = 0.5
b = 2
eta = auto

[run]
iterations = 40
seeds = 0 1

[output]
directory = {out}
trace_stride = 1
lyapunov = true

[reference]
tol = 1e-12
"""


@pytest.fixture
def config_path(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "exp.ini"
    path.write_text(BASE_CONFIG.format(out=out))
    return path


class TestConfig:
    def test_load_round_trip(self, config_path):
        cfg = load_config(config_path)
        assert cfg.problem.n == 30 and cfg.problem.reg == "l1"
        assert cfg.solver.eta is None  # auto
        assert cfg.run.seeds == (0, 1)
        assert cfg.reference is not None

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[problem]\nbogus = 1\n\n[run]\niterations = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[mystery]\nx = 1\n")
        with pytest.raises(ConfigError, match="mystery"):
            load_config(path)

    def test_type_error_names_key(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[run]\niterations = soon\n")
        with pytest.raises(ConfigError, match="iterations"):
            load_config(path)

    def test_epsilon_requires_reference(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[run]\nepsilon = 1e-4\n")
        with pytest.raises(ConfigError, match="reference"):
            load_config(path)

    def test_both_stopping_rules_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[run]\niterations = 5\nepsilon = 1e-4\n\n[reference]\ntol = 1e-10\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_missing_dataset_file(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[problem]\ndata = nowhere.txt\n\n[run]\niterations = 1\n")
        with pytest.raises(ConfigError, match="nowhere"):
            load_config(path)


class TestRunCommand:
    def test_one_file_per_seed_with_expected_rows(self, config_path, tmp_path):
        paths = run_command(load_config(config_path))
        assert len(paths) == 2
        header, rows = read_trace(paths[0])
        assert len(rows) == 41  # T+1 records at stride 1
        assert [r["t"] for r in rows] == list(range(41))
        assert header["method"] == "katyusha_h"
        assert "f_star" in header

    def test_seeds_diverge(self, config_path):
        p0, p1 = run_command(load_config(config_path))
        assert p0.read_bytes() != p1.read_bytes()

    def test_rerun_byte_identical(self, config_path):
        cfg = load_config(config_path)
        first = {p.name: p.read_bytes() for p in run_command(cfg)}
        second = {p.name: p.read_bytes() for p in run_command(load_config(config_path))}
        assert first == second

    def test_concurrent_seeds_match_sequential(self, config_path):
        cfg = load_config(config_path)
        sequential = {p.name: p.read_bytes() for p in run_command(cfg, jobs=1)}
        concurrent = {p.name: p.read_bytes() for p in run_command(cfg, jobs=4)}
        assert sequential == concurrent

    def test_ifo_monotone_and_gaps_finite(self, config_path):
        paths = run_command(load_config(config_path))
        _, rows = read_trace(paths[0])
        ifo = [r["ifo_total"] for r in rows]
        assert all(b >= a for a, b in zip(ifo, ifo[1:]))
        assert all(np.isfinite(r["F_w_gap"]) for r in rows)
        assert all(np.isfinite(r["lyapunov"]) for r in rows)

    def test_main_exit_zero(self, config_path, capsys):
        assert main(["run", "--config", str(config_path)]) == 0

    def test_seeds_flag_overrides_config(self, config_path, tmp_path, capsys):
        out = tmp_path / "override"
        assert main(["run", "--config", str(config_path), "--out", str(out),
                     "--seeds", "7"]) == 0
        files = sorted(p.name for p in out.iterdir())
        assert files == ["trace_katyusha_h_seed7.csv"]


class TestSweepCommand:
    def test_grid_rows(self, config_path):
        cfg = load_config(config_path)
        rows, path = sweep_command(cfg, alphas=(0.0, 0.5, 1.0), bs=(1,))
        assert len(rows) == 3
        assert [r.alpha for r in rows] == [0.0, 0.5, 1.0]
        text = path.read_text().strip().splitlines()
        assert len(text) == 4 and text[0].startswith("alpha,b,")

    def test_aggregation_is_mean_of_final_ifo(self, config_path):
        from katyusha_h.experiment import run_single

        cfg = load_config(config_path)
        rows, _ = sweep_command(cfg, alphas=(0.5,), bs=(2,))
        problem = build_problem(cfg)
        finals = [
            run_single(problem, cfg, seed, alpha=0.5, b=2)[-1].ifo_total
            for seed in cfg.run.seeds
        ]
        assert rows[0].mean_ifo == pytest.approx(float(np.mean(finals)))

    def test_grid_required(self, config_path):
        with pytest.raises(ConfigError):
            sweep_command(load_config(config_path))

    def test_epsilon_mode_aggregates_cost_to_target(self, tmp_path):
        out = tmp_path / "out"
        path = tmp_path / "exp.ini"
        path.write_text(
            "[problem]\nfamily = least_squares\nn = 40\nd = 6\nseed = 2\n\n"
            "[solver]\nmethod = katyusha_h\n\n"
            "[run]\nepsilon = 1e-4\nseeds = 0 1 2\n\n"
            f"[output]\ndirectory = {out}\n\n"
            "[reference]\ntol = 1e-12\n"
        )
        rows, _ = sweep_command(load_config(path), alphas=(1.0,), bs=(4,))
        assert rows[0].reached_target == 3
        assert rows[0].mean_final_gap <= 1e-4
        assert rows[0].mean_ifo > 0


class TestVerifyCommand:
    def test_default_scope_passes(self, capsys):
        code = main(["verify", "--t-max", "500", "--alpha-step", "0.1"])
        out = capsys.readouterr().out
        assert code == 0
        assert "overall: PASS" in out

    def test_fault_injection_fails(self, capsys):
        code = main([
            "verify", "--t-max", "500", "--alpha-step", "0.1",
            "--inject-fault", "xi=2",
        ])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out

    def test_bad_fault_spec_is_config_error(self, capsys):
        assert main(["verify", "--inject-fault", "tau=2"]) == 2

    def test_report_file(self, tmp_path, capsys):
        report = tmp_path / "cert.txt"
        code = main([
            "verify", "--t-max", "200", "--alpha-step", "0.25",
            "--growth-alphas", "1", "--report", str(report),
        ])
        assert code == 0
        assert "denominator-growth" in report.read_text()


class TestSelectAlphaCommand:
    def test_reference_values(self, capsys):
        assert main(["select-alpha", "10000", "1e-12"]) == 0
        out = capsys.readouterr().out
        assert "alpha = 0.502127" in out
        assert "[0.445604, 0.55865]" in out

    def test_infeasible_is_exit_two(self, capsys):
        assert main(["select-alpha", "10000", "1e-3"]) == 2
        assert "n < 1/epsilon" in capsys.readouterr().err


class TestSolveRefCommand:
    def test_writes_reference(self, config_path, tmp_path, capsys):
        out = tmp_path / "ref.txt"
        assert main(["solve-ref", "--config", str(config_path), "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("f_star = ")
        assert "x_star = " in text


class TestParseDataCommand:
    def test_happy_path_and_canonical_output(self, tmp_path, capsys):
        data = tmp_path / "d.txt"
        data.write_text("1 1:0.5 3:-2\n-1 2:1e-3\n")
        canon = tmp_path / "c.txt"
        assert main(["parse-data", str(data), "--out", str(canon)]) == 0
        assert canon.read_text() == "1.0 1:0.5 3:-2.0\n-1.0 2:0.001\n"

    def test_malformed_is_exit_two_with_line(self, tmp_path, capsys):
        data = tmp_path / "d.txt"
        data.write_text("1 1:0.5\n1 5:1 2:2\n")
        assert main(["parse-data", str(data)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["parse-data", str(tmp_path / "ghost.txt")]) == 2


class TestBaselineMethods:
    @pytest.mark.parametrize("method", ["fista", "pgd", "psgd"])
    def test_baselines_run_from_config(self, tmp_path, method):
        out = tmp_path / "out"
        path = tmp_path / "exp.ini"
        path.write_text(
            "[problem]\nfamily = least_squares\nn = 20\nd = 4\nseed = 3\n\n"
            f"[solver]\nmethod = {method}\n\n"
            "[run]\niterations = 10\nseeds = 0\n\n"
            f"[output]\ndirectory = {out}\n"
        )
        paths = run_command(load_config(path))
        header, rows = read_trace(paths[0])
        assert header["method"] == method
        assert len(rows) == 11
