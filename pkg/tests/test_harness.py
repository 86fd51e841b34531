"""Rate fitting, config parsing, study smoke runs, output determinism, CLI."""

import json
import math

import numpy as np
import pytest

from wickgp.harness import (
    ExperimentConfig,
    default_config,
    fit_rate,
    parse_config_file,
    run_study,
)


class TestFitRate:
    def test_exact_power_law(self):
        lams = [2.0, 3.0, 5.0, 8.0, 13.0]
        fit = fit_rate([(l, l**-0.5) for l in lams])
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.residual == pytest.approx(0.0, abs=1e-12)

    def test_constant_values(self):
        fit = fit_rate([(l, 3.7) for l in (2.0, 4.0, 8.0)])
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_noisy_power_law(self):
        rng = np.random.default_rng(0)
        lams = np.exp(np.linspace(0.5, 3.0, 8))
        pts = [(l, l**-0.5 * math.exp(0.01 * rng.standard_normal())) for l in lams]
        fit = fit_rate(pts)
        assert abs(fit.slope + 0.5) < 0.05
        assert fit.residual < 0.05

    def test_rejects_too_few_points(self):
        with pytest.raises(ValueError):
            fit_rate([(2.0, 1.0), (3.0, 0.5)])

    def test_rejects_nonpositive_values(self):
        with pytest.raises(ValueError):
            fit_rate([(2.0, 1.0), (3.0, 0.0), (4.0, 0.5)])


class TestConfig:
    def test_defaults_carry_kind(self):
        cfg = default_config("wick_rates")
        assert cfg.kind == "wick_rates"
        assert cfg.K == 96 and cfg.N_list == (8, 16, 32, 64)

    def test_invariants(self):
        with pytest.raises(ValueError):
            ExperimentConfig(kind="simulate", N_list=(8, 8))
        with pytest.raises(ValueError):
            ExperimentConfig(kind="simulate", K=16, N_list=(4, 20))
        with pytest.raises(ValueError):
            ExperimentConfig(kind="simulate", realizations=0)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="not_a_study")

    def test_parse_config_file(self, tmp_path):
        p = tmp_path / "study.cfg"
        p.write_text(
            "# comment line\n"
            "K = 32\n"
            "N_list = 4, 8, 16\n"
            "lambda = -1.0\n"
            "realizations=25   # trailing comment\n"
            "sigma_list = 1.5,1.9\n"
            "run_failing = true\n"
            "output_path = results\n"
        )
        vals = parse_config_file(p)
        assert vals == {
            "K": 32,
            "N_list": (4, 8, 16),
            "lam": -1.0,
            "realizations": 25,
            "sigma_list": (1.5, 1.9),
            "run_failing": True,
            "output_path": "results",
        }

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("frobnicate = 3\n")
        with pytest.raises(ValueError, match="unknown key"):
            parse_config_file(p)

    def test_bad_value_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("K = forty\n")
        with pytest.raises(ValueError, match="cannot parse"):
            parse_config_file(p)


SMALL = {
    "converge_N": dict(K=24, N_list=(4, 6, 8, 12), realizations=3, dt=5e-3, t_final=0.2),
    "noise_rates": dict(K=32, N_list=(4, 8, 16), realizations=100),
    "wick_rates": dict(K=32, N_list=(4, 8, 12, 16), realizations=100),
    "diverging_bound": dict(K=24, N_list=(4, 6, 8, 12), realizations=3, dt=5e-3, t_final=0.2),
    "inequalities": dict(K=16, realizations=40, N_list=(4,), lam=-1.0, dt=5e-3, t_final=0.1),
    "focusing_gate": dict(K=24, N_list=(8,), realizations=12, dt=5e-3, t_final=0.3),
    "simulate": dict(K=16, N_list=(4,), dt=5e-3, t_final=0.2),
}


def run_small(kind, tmp_path, **extra):
    kw = dict(SMALL[kind])
    kw.update(extra)
    kw.setdefault("output_path", str(tmp_path / kind))
    cfg = default_config(kind, **kw)
    result = run_study(cfg)
    result.write(cfg.output_path)
    return cfg, result


class TestStudies:
    def test_converge_n_outputs(self, tmp_path):
        cfg, result = run_small("converge_N", tmp_path)
        assert result.summary["fit"] is not None
        assert result.summary["fit"]["slope"] < 0.0
        table = (tmp_path / "converge_N" / "converge_N_gaps.csv").read_text().splitlines()
        assert table[0] == "M,N,lambda_M,gap_moment,gap_mean_stderr"
        assert len(table) == 4  # three consecutive pairs

    def test_converge_n_degenerate_without_noise(self, tmp_path):
        # zero noise switches the whole potential off: all levels integrate
        # the same flow and the fit is skipped with the degenerate flag
        cfg, result = run_small("converge_N", tmp_path, zero_noise=True)
        assert result.summary["degenerate"] is True
        assert result.summary["fit"] is None
        assert result.passed

    def test_converge_n_clt_stderr_scaling(self, tmp_path):
        errs = {}
        for R in (8, 32):
            cfg = default_config("converge_N", K=16, N_list=(2, 3, 4, 5), realizations=R,
                                 dt=5e-3, t_final=0.1, lam=0.0)
            s = run_study(cfg).summary
            errs[R] = np.mean(list(s["mean_gap_stderr"].values()))
        ratio = errs[8] / errs[32]
        # quadrupling R halves the standard error, within generous CLT slack
        assert 1.2 <= ratio <= 3.5

    def test_converge_n_fit_invalid_when_realizations_fail(self, monkeypatch, tmp_path):
        import wickgp.harness as hz

        real = hz.run_simulation
        calls = {"n": 0}

        def flaky(noise, N, v0, cfg, lam, **kw):
            res = real(noise, N, v0, cfg, lam, **kw)
            calls["n"] += 1
            if noise.stream_index == 0:
                res.status = "suspected_blowup"
            return res

        monkeypatch.setattr(hz, "run_simulation", flaky)
        cfg = default_config("converge_N", K=16, N_list=(2, 3, 4, 5), realizations=4,
                             dt=5e-3, t_final=0.05, lam=0.0)
        result = run_study(cfg)
        # 1 of 4 realizations failed (> 10%): fit flagged invalid
        assert result.summary["failed_realizations"] == 1
        assert not result.summary["assertions"]["fit_valid"]

    def test_wick_rates_table(self, tmp_path):
        cfg, result = run_small("wick_rates", tmp_path)
        s = result.summary
        assert s["fits"]["wick"]["slope"] <= -cfg.delta0
        assert 0 < s["admissible_upper_delta"]
        lines = (tmp_path / "wick_rates" / "wick_rates_gaps.csv").read_text().splitlines()
        assert lines[0] == "M,N,lambda_M,wick_gap_moment,raw_gap_moment"

    def test_wick_rates_rejects_inadmissible_delta0(self):
        with pytest.raises(ValueError, match="delta0"):
            run_study(default_config("wick_rates", **{**SMALL["wick_rates"], "delta0": 0.5}))

    def test_diverging_bound_argmax_sanity(self, tmp_path):
        cfg, result = run_small("diverging_bound", tmp_path)
        assert result.summary["assertions"]["argmax_times_in_horizon"]

    def test_diverging_bound_degenerate_without_noise(self, tmp_path):
        cfg, result = run_small("diverging_bound", tmp_path, zero_noise=True)
        assert result.summary["degenerate"] is True
        # level-independent dynamics: the fitted slope collapses to zero
        assert abs(result.summary["fits"]["sup_w22"]["slope"]) < 1e-9

    def test_noise_rates_zero_exponent_gap(self, tmp_path):
        cfg, result = run_small("noise_rates", tmp_path, a_exp=0.0)
        assert result.summary["fits"]["exp_gap_p2"] is None
        assert result.summary["assertions"]["exp_gap_decays"]

    def test_inequalities(self, tmp_path):
        cfg, result = run_small("inequalities", tmp_path)
        assert result.summary["gn_violations"] == 0
        assert result.summary["bg_relative_drift"] <= 0.2

    def test_focusing_gate_table(self, tmp_path):
        cfg, result = run_small("focusing_gate", tmp_path)
        lines = (tmp_path / "focusing_gate" / "focusing_gate_realizations.csv").read_text().splitlines()
        assert lines[0] == "r,value,margin,gate_passed,ran,sigma_ratio,status"
        assert len(lines) == 1 + cfg.realizations

    def test_focusing_gate_runs_failing_realizations_on_request(self, tmp_path):
        cfg, result = run_small("focusing_gate", tmp_path, realizations=10, t_final=0.1,
                                L=1.9, run_failing=True)
        rows = result.tables["realizations"][1]
        failed_ran = [r for r in rows if not r[3] and r[4]]
        assert failed_ran, "expected gate failures at this L"
        assert all(r[6] in ("completed", "suspected_blowup") for r in failed_ran)

    def test_focusing_gate_probability_monotone_in_l(self, tmp_path):
        fractions = []
        for L in (0.4, 0.1):
            cfg = default_config("focusing_gate", **{**SMALL["focusing_gate"], "L": L,
                                                     "realizations": 40, "t_final": 0.05})
            fractions.append(run_study(cfg).summary["gate_pass_fraction"])
        assert fractions[1] >= fractions[0]

    def test_simulate_writes_observables_and_checkpoint(self, tmp_path):
        cfg, result = run_small("simulate", tmp_path)
        outdir = tmp_path / "simulate"
        assert (outdir / "simulate_observables.csv").exists()
        assert (outdir / "simulate_final_checkpoint.json").exists()
        assert result.summary["mass_drift"] < 1e-5


class TestDeterminism:
    def test_byte_identical_outputs(self, tmp_path):
        blobs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            for kind in ("wick_rates", "inequalities"):
                cfg = default_config(kind, **{**SMALL[kind], "output_path": str(out)})
                run_study(cfg).write(str(out))
            blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert blobs[0] == blobs[1]

    def test_threading_does_not_change_results(self, tmp_path):
        blobs = []
        for tag, threads in (("t1", 1), ("t2", 2)):
            out = tmp_path / tag
            cfg = default_config("noise_rates", **{**SMALL["noise_rates"], "threads": threads,
                                                   "output_path": str(out)})
            run_study(cfg).write(str(out))
            blobs.append({p.name: p.read_bytes() for p in out.iterdir()})
        assert blobs[0] == blobs[1]


class TestCli:
    def test_study_and_report_round_trip(self, tmp_path, capsys):
        from wickgp.cli import main

        out = tmp_path / "cli_out"
        cfgfile = tmp_path / "tiny.cfg"
        cfgfile.write_text(
            "K = 16\nN_list = 4\nrealizations = 1\ndt = 0.005\nt_final = 0.1\n"
        )
        code = main(["simulate", "--config", str(cfgfile), "--out", str(out), "--seed", "7"])
        assert code == 0
        captured = capsys.readouterr().out
        assert "PASS" in captured
        assert (out / "simulate_summary.json").exists()
        summary = json.loads((out / "simulate_summary.json").read_text())
        assert summary["passed"] is True
        assert summary["config"]["seed"] == 7

        code = main(["report", "--out", str(out)])
        assert code == 0
        assert (out / "simulate_observables.png").exists()

    def test_exit_code_reflects_assertions(self, tmp_path):
        from wickgp.cli import main

        # an inadmissible config raises before any study runs
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("K = 16\nN_list = 4, 2\n")
        with pytest.raises(ValueError):
            main(["wick-rates", "--config", str(cfgfile), "--out", str(tmp_path / "x")])

    def test_exit_code_one_on_failed_assertion(self, tmp_path, capsys):
        from wickgp.cli import main

        # delta0 pushed next to the admissible endpoint: the small-scale
        # slope cannot reach it, so the study reports FAIL and exits 1
        cfgfile = tmp_path / "strict.cfg"
        cfgfile.write_text(
            "K = 32\nN_list = 4, 8, 12, 16\nrealizations = 100\nq = 4.0\ns = 0.9\ndelta0 = 0.26\n"
        )
        code = main(["wick-rates", "--config", str(cfgfile), "--out", str(tmp_path / "y")])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out

    def test_report_subcommand_renders_rate_figure(self, tmp_path):
        from wickgp.cli import main

        out = tmp_path / "rates"
        cfg = default_config("wick_rates", **{**SMALL["wick_rates"], "output_path": str(out)})
        run_study(cfg).write(str(out))
        assert main(["report", "--out", str(out)]) == 0
        assert (out / "wick_rates_rates.png").exists()
