import json

import numpy as np
import pytest

from linens import cli
from linens.config import ExperimentConfig, load_config
from linens.harness import (
    aggregate,
    build_environment,
    build_policy,
    checkpoints,
    confidence_params,
    emit_outputs,
    estimate_event_rates,
    resolve_ensemble_size,
    resolve_scale,
    run_equivalence_suite,
    run_monte_carlo,
    run_replication,
)
from linens.perturb import beta, ensemble_size
from linens.policies import EnsembleSampling, GreedyRidge, LinPHE, LinTS, LinUCB

BASE_INI = """\
[env]
dim = 2
arm_count = 4
sigma = 0.5

[policy]
name = ensemble
m = 4
delta = 0.1

[run]
horizon = 30
replications = 2
base_seed = 11
"""


def write_cfg(tmp_path, text=BASE_INI, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def small_cfg(**overrides) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.env.dim = 2
    cfg.env.arm_count = 4
    cfg.env.sigma = 0.5
    cfg.policy.m = 4
    cfg.run.horizon = 30
    cfg.run.replications = 2
    cfg.run.base_seed = 11
    for key, value in overrides.items():
        section, attr = key.split("__")
        setattr(getattr(cfg, section), attr, value)
    return cfg.validate()


class TestConfig:
    def test_load_round_trip(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path))
        assert cfg.env.dim == 2
        assert cfg.env.sigma == 0.5
        assert cfg.policy.name == "ensemble"
        assert cfg.policy.m == 4
        assert cfg.run.horizon == 30
        assert cfg.run.base_seed == 11
        # defaults survive
        assert cfg.policy.lam == 1.0
        assert cfg.run.diagnostics == "off"

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.ini")

    def test_unknown_section_rejected(self, tmp_path):
        path = write_cfg(tmp_path, BASE_INI + "\n[extra]\nfoo = 1\n")
        with pytest.raises(ValueError, match="unknown config sections"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_cfg(tmp_path, BASE_INI.replace("sigma = 0.5", "sigma = 0.5\ntypo = 3"))
        with pytest.raises(ValueError, match="unknown keys"):
            load_config(path)

    def test_explicit_arms(self, tmp_path):
        text = """\
[env]
arm_mode = explicit
arms = 1 0; 0 1; 0.6 0.6
theta_star = 0.9 0.3
sigma = 0

[policy]
name = greedy

[run]
horizon = 5
"""
        cfg = load_config(write_cfg(tmp_path, text))
        assert cfg.env.arm_count == 3
        assert cfg.env.dim == 2
        assert cfg.env.arms[2] == [0.6, 0.6]
        env = build_environment(cfg)
        assert env.optimal_arm_index == 0

    def test_explicit_mode_requires_arms(self):
        cfg = ExperimentConfig()
        cfg.env.arm_mode = "explicit"
        with pytest.raises(ValueError, match="arms"):
            cfg.validate()

    @pytest.mark.parametrize(
        "key,value,message",
        [
            ("delta = 0.1", "delta = 0", "delta"),
            ("delta = 0.1", "delta = 1.5", "delta"),
            ("name = ensemble", "name = bogus", "policy.name"),
            ("m = 4", "m = 0", "policy.m"),
        ],
    )
    def test_invalid_values(self, tmp_path, key, value, message):
        path = write_cfg(tmp_path, BASE_INI.replace(key, value))
        with pytest.raises(ValueError, match=message):
            load_config(path)

    def test_small_lambda_warns(self, tmp_path):
        path = write_cfg(tmp_path, BASE_INI.replace("delta = 0.1", "delta = 0.1\nlambda = 0.5"))
        with pytest.warns(UserWarning, match="lambda"):
            cfg = load_config(path)
        assert cfg.policy.lam == 0.5

    def test_auto_m(self, tmp_path):
        path = write_cfg(tmp_path, BASE_INI.replace("m = 4", "m = auto"))
        cfg = load_config(path)
        assert cfg.policy.m == "auto"
        env = build_environment(cfg)
        params = confidence_params(cfg, env)
        assert resolve_ensemble_size(cfg, params) == ensemble_size(params, 4)

    def test_to_dict_json_serializable(self):
        json.dumps(small_cfg().to_dict())


class TestPolicyResolution:
    def test_auto_scale_is_horizon_radius(self):
        cfg = small_cfg()
        params = confidence_params(cfg, build_environment(cfg))
        assert resolve_scale(cfg, params) == pytest.approx(beta(params, 30))

    def test_explicit_scale(self):
        cfg = small_cfg(policy__scale_mode="explicit", policy__scale=0.25)
        params = confidence_params(cfg, build_environment(cfg))
        assert resolve_scale(cfg, params) == 0.25

    @pytest.mark.parametrize(
        "name,cls",
        [
            ("ensemble", EnsembleSampling),
            ("phe", LinPHE),
            ("linucb", LinUCB),
            ("lints", LinTS),
            ("greedy", GreedyRidge),
        ],
    )
    def test_build_policy_types(self, name, cls):
        cfg = small_cfg(policy__name=name)
        env = build_environment(cfg)
        params = confidence_params(cfg, env)
        assert isinstance(build_policy(cfg, env, params, 0), cls)

    def test_environment_fixed_across_replications(self):
        cfg = small_cfg()
        a, b = build_environment(cfg), build_environment(cfg)
        np.testing.assert_array_equal(a.arms, b.arms)
        np.testing.assert_array_equal(a.theta_star, b.theta_star)

    def test_policy_streams_differ_across_replications(self):
        cfg = small_cfg()
        env = build_environment(cfg)
        params = confidence_params(cfg, env)
        p0 = build_policy(cfg, env, params, 0)
        p1 = build_policy(cfg, env, params, 1)
        assert not np.array_equal(p0.s_vectors, p1.s_vectors)


class TestRunReplication:
    def test_deterministic(self):
        cfg = small_cfg(run__diagnostics="monitors")
        a = run_replication(cfg, 0)
        b = run_replication(cfg, 0)
        assert a.steps == b.steps
        assert a.summary == b.summary

    def test_replications_differ(self):
        cfg = small_cfg()
        assert run_replication(cfg, 0).steps != run_replication(cfg, 1).steps

    def test_single_arm_zero_regret(self):
        cfg = small_cfg(env__arm_count=1)
        rec = run_replication(cfg, 0)
        assert rec.summary["final_regret"] == 0.0
        assert all(row[4] == 0.0 for row in rec.steps)

    def test_cumulative_regret_is_prefix_sum(self):
        rec = run_replication(small_cfg(), 0)
        cum = 0.0
        for row in rec.steps:
            cum += row[4]
            assert row[5] == pytest.approx(cum, abs=1e-12)
        assert rec.summary["final_regret"] == pytest.approx(cum)

    def test_monitor_columns_present_when_enabled(self):
        off = run_replication(small_cfg(), 0)
        on = run_replication(small_cfg(run__diagnostics="monitors"), 0)
        assert len(off.steps[0]) == 6
        assert len(on.steps[0]) == 9
        assert on.summary["checks"] == 30

    def test_full_trace_tracks_ensemble_fraction(self):
        rec = run_replication(small_cfg(run__diagnostics="full-trace"), 0)
        assert 0.0 <= rec.summary["min_ensemble_fraction"] <= 1.0


class TestMonteCarlo:
    def test_checkpoint_grid(self):
        assert checkpoints(1) == [1]
        assert checkpoints(10) == [1, 2, 4, 8, 10]
        assert checkpoints(16) == [1, 2, 4, 8, 16]

    def test_single_replication_aggregate_matches_record(self):
        cfg = small_cfg(run__replications=1)
        records, summary = run_monte_carlo(cfg)
        final = summary["checkpoints"][-1]
        assert final["t"] == 30
        assert final["mean"] == records[0].steps[-1][5]
        assert final["median"] == final["q10"] == final["q90"] == final["mean"]

    def test_zero_regret_quantiles(self):
        cfg = small_cfg(env__arm_count=1, run__replications=3)
        _, summary = run_monte_carlo(cfg)
        for cp in summary["checkpoints"]:
            assert cp["mean"] == cp["q10"] == cp["q90"] == 0.0

    def test_monitor_rates_aggregated(self):
        cfg = small_cfg(run__diagnostics="monitors", run__replications=3)
        _, summary = run_monte_carlo(cfg)
        mon = summary["monitors"]
        assert mon["total_checks"] == 90
        for key in (
            "all_concentrated_rate",
            "concentration_rate",
            "perturb_concentration_rate",
            "anti_conc_rate",
            "optimism_rate",
        ):
            assert 0.0 <= mon[key] <= 1.0

    def test_two_batches_agree_statistically(self):
        # disjoint replication blocks of the same config: means differ by
        # at most a few standard errors
        cfg = small_cfg(run__replications=120, env__sigma=1.0)
        records, _ = run_monte_carlo(cfg)
        finals = np.array([r.steps[-1][5] for r in records])
        a, b = finals[:60], finals[60:]
        se = np.sqrt(np.var(finals) * (1 / 60 + 1 / 60))
        assert abs(np.mean(a) - np.mean(b)) <= 4.0 * se + 1e-12

    def test_serial_and_parallel_identical(self):
        serial = small_cfg(run__replications=4)
        parallel = small_cfg(run__replications=4, run__workers=2)
        rec_s, sum_s = run_monte_carlo(serial)
        rec_p, sum_p = run_monte_carlo(parallel)
        for a, b in zip(rec_s, rec_p):
            assert a.steps == b.steps
        sum_p["config"]["run"]["workers"] = 1
        assert sum_s == sum_p


class TestOutputs:
    def test_emit_byte_stable(self, tmp_path):
        cfg = small_cfg(run__diagnostics="monitors")
        records, summary = run_monte_carlo(cfg)
        t1, s1 = emit_outputs(records, summary, tmp_path / "a")
        t2, s2 = emit_outputs(records, summary, tmp_path / "b")
        assert t1.read_bytes() == t2.read_bytes()
        assert s1.read_bytes() == s2.read_bytes()

    def test_trace_header_adapts_to_diagnostics(self, tmp_path):
        for diag, ncols in (("off", 7), ("monitors", 10)):
            cfg = small_cfg(run__diagnostics=diag)
            records, summary = run_monte_carlo(cfg)
            t, _ = emit_outputs(records, summary, tmp_path / diag)
            lines = t.read_text().splitlines()
            assert len(lines[0].split(",")) == ncols
            assert len(lines) == 1 + 2 * 30
            assert len(lines[1].split(",")) == ncols

    def test_trace_floats_round_trip(self, tmp_path):
        cfg = small_cfg()
        records, summary = run_monte_carlo(cfg)
        t, _ = emit_outputs(records, summary, tmp_path)
        row = t.read_text().splitlines()[1].split(",")
        assert float(row[4]) == records[0].steps[0][3]  # reward, exact via %.17g
        assert float(row[6]) == records[0].steps[0][5]

    def test_summary_json_round_trips(self, tmp_path):
        cfg = small_cfg(run__diagnostics="monitors")
        records, summary = run_monte_carlo(cfg)
        _, s = emit_outputs(records, summary, tmp_path)
        loaded = json.loads(s.read_text())
        assert loaded["replications"] == 2
        assert loaded["resolved_m"] == 4
        assert loaded["theoretical_regret_bound"] > 0


class TestEquivalenceSuite:
    def test_shared_streams_match(self):
        cfg = small_cfg(run__horizon=20)
        report = run_equivalence_suite(cfg, n_seeds=8)
        assert report.passed
        assert report.matches == 8
        assert report.failures == []

    def test_desynchronized_streams_diverge(self):
        # negative control: offsetting one stream must break the equality
        cfg = small_cfg(run__horizon=20)
        report = run_equivalence_suite(cfg, n_seeds=5, desync=True)
        assert not report.passed
        assert report.failures
        for seed, step, seq_a, seq_b in report.failures:
            assert 1 <= step <= 20
            assert seq_a[step - 1] != seq_b[step - 1]


class TestEventRates:
    def test_report_structure_and_ranges(self):
        cfg = small_cfg(run__horizon=25, run__diagnostics="full-trace")
        report = estimate_event_rates(cfg, reps=6)
        assert report["replications"] == 6
        assert report["total_checks"] == 150
        for key in ("all_concentrated_rate", "perturb_concentration_rate", "anti_conc_rate"):
            assert 0.0 <= report[key] <= 1.0
        assert report["ensemble_fraction_threshold"] == pytest.approx(
            0.158655253931457 / 4.0, abs=1e-12
        )
        assert 0.0 <= report["min_ensemble_fraction_pass_rate"] <= 1.0

    def test_rejects_zero_reps(self):
        with pytest.raises(ValueError):
            estimate_event_rates(small_cfg(), reps=0)


class TestCli:
    def test_run_command(self, tmp_path, capsys):
        cfg_path = write_cfg(tmp_path)
        out = tmp_path / "out"
        code = cli.main(["run", "--config", str(cfg_path), "--out", str(out)])
        assert code == 0
        assert (out / "trace.csv").exists()
        assert (out / "summary.json").exists()
        assert "mean final regret" in capsys.readouterr().out

    def test_run_overrides(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        out = tmp_path / "o2"
        cli.main([
            "run", "--config", str(cfg_path), "--out", str(out),
            "--reps", "1", "--seed", "99",
        ])
        summary = json.loads((out / "summary.json").read_text())
        assert summary["replications"] == 1
        assert summary["config"]["run"]["base_seed"] == 99

    def test_equivalence_command(self, tmp_path, capsys):
        cfg_path = write_cfg(tmp_path, BASE_INI.replace("horizon = 30", "horizon = 15"))
        code = cli.main(["equivalence", "--config", str(cfg_path), "--seeds", "4"])
        assert code == 0
        assert "PASS: 4/4" in capsys.readouterr().out

    def test_rates_command(self, tmp_path, capsys):
        cfg_path = write_cfg(tmp_path)
        code = cli.main(["rates", "--config", str(cfg_path), "--reps", "2"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["replications"] == 2

    def test_sweep_command(self, tmp_path, capsys):
        cfg_path = write_cfg(tmp_path)
        out = tmp_path / "sweep"
        code = cli.main([
            "sweep", "--config", str(cfg_path), "--param", "T",
            "--values", "10,20", "--out", str(out),
        ])
        assert code == 0
        combined = json.loads((out / "sweep_T.json").read_text())
        assert [c["value"] for c in combined] == [10, 20]
        assert (out / "sweep_T_10" / "summary.json").exists()
