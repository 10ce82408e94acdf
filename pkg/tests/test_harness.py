import csv
import io
import json
from dataclasses import replace

import numpy as np
import pytest

from helpers import random_symmetric_instance
from qtsp.cli import cli
from qtsp.harness import (
    ExperimentSpec,
    SweepSummary,
    TrialResult,
    default_search_space,
    default_target,
    load_summary,
    midpoint_hyperparams,
    midpoint_vmc_config,
    report_convergence,
    run_experiment,
    sample_trial_hyperparams,
    save_summary,
    sweep,
)
from qtsp.instance import brute_force_optimum, linear_instance, planted_optimum, save_instance


class TestDefaultTarget:
    def test_linear_instance_uses_planted_value(self):
        assert default_target(linear_instance(9)) == planted_optimum(9)

    def test_small_instance_uses_brute_force(self):
        inst = random_symmetric_instance(6, 0)
        assert default_target(inst) == brute_force_optimum(inst)[1]

    def test_large_opaque_instance_has_no_target(self):
        inst = random_symmetric_instance(11, 0)
        assert default_target(inst) is None


class TestMidpointDefaults:
    def test_qudit_midpoints(self):
        hyper = midpoint_hyperparams(12, "qudit")
        assert hyper["n_chains"] == 8
        assert hyper["n_swaps"] == 2
        assert hyper["max_swap_len"] == 6
        assert hyper["sample_size"] == 512
        assert hyper["learning_rate"] == pytest.approx(1e-2)
        assert hyper["n_channels"] == 4
        assert hyper["kernel_size"] == 4

    def test_qubit_midpoints(self):
        hyper = midpoint_hyperparams(6, "qubit")
        assert hyper["n_hidden"] == 12

    def test_search_space_kernel_respects_city_count(self):
        space = default_search_space(3, "qudit")
        assert max(space["kernel_size"]) <= 3


class TestRunExperiment:
    def test_converges_on_small_instance(self):
        inst = linear_instance(4)
        spec = ExperimentSpec(
            instance=inst,
            vmc=midpoint_vmc_config(4, "qudit", seed=0, max_steps=500),
            seed=3,
        )
        record = run_experiment(spec)
        assert record.converged
        assert record.best_energy == 6.0

    def test_seed_overrides_sampler_seed(self):
        inst = linear_instance(4)
        spec = ExperimentSpec(
            instance=inst,
            vmc=midpoint_vmc_config(4, "qudit", seed=999, max_steps=50),
            seed=3,
        )
        record = run_experiment(spec)
        assert record.config["sampler"]["seed"] == 3

    def test_deterministic(self):
        inst = linear_instance(6)
        spec = ExperimentSpec(
            instance=inst,
            vmc=midpoint_vmc_config(6, "qudit", seed=0, max_steps=200),
            seed=5,
        )
        a, b = run_experiment(spec), run_experiment(spec)
        assert a.converged == b.converged
        assert np.array_equal(a.best_tour, b.best_tour)

    def test_learning_is_necessary_at_sixteen_cities(self):
        """Negative control: with the learning rate zeroed the sampler alone
        does not find the planted optimum in a 200-step budget, while the
        same budget with learning succeeds."""
        inst = linear_instance(16)
        base = midpoint_vmc_config(16, "qudit", seed=0, max_steps=200)
        frozen = run_experiment(ExperimentSpec(
            instance=inst, vmc=replace(base, learning_rate=0.0), seed=1))
        assert not frozen.converged
        learned = run_experiment(ExperimentSpec(instance=inst, vmc=base, seed=1))
        assert learned.converged


class TestSweep:
    def test_trial_draws_are_deterministic(self):
        space = default_search_space(8, "qudit")
        a = [sample_trial_hyperparams(space, 7, t) for t in range(5)]
        b = [sample_trial_hyperparams(space, 7, t) for t in range(5)]
        assert a == b

    def test_trial_draws_cover_space(self):
        space = default_search_space(8, "qudit")
        picked = {sample_trial_hyperparams(space, 0, t)[0]["n_chains"] for t in range(30)}
        assert picked == {4, 8, 16}

    def test_single_point_space(self):
        space = {
            "n_chains": [4], "n_swaps": [1], "max_swap_len": [4],
            "sample_size": [256], "learning_rate": ("log-uniform", 1e-2, 1e-2),
            "n_channels": [4], "kernel_size": [2],
        }
        summary = sweep(linear_instance(4), "qudit", space, n_trials=3, seed=0, max_steps=50)
        for trial in summary.trials:
            assert trial.hyperparams == summary.trials[0].hyperparams

    def test_percentage_is_converged_over_total(self):
        summary = sweep(linear_instance(5), "qudit", None, n_trials=5, seed=1, max_steps=200)
        manual = 100.0 * sum(t.converged for t in summary.trials) / 5
        assert summary.percent_converged == manual
        assert summary.n_cities == 5 and summary.representation == "qudit"

    def test_jobs_do_not_change_results(self):
        kwargs = dict(n_trials=4, seed=2, max_steps=60)
        serial = sweep(linear_instance(4), "qudit", None, **kwargs)
        threaded = sweep(linear_instance(4), "qudit", None, jobs=2, **kwargs)
        assert [t.hyperparams for t in serial.trials] == [t.hyperparams for t in threaded.trials]
        assert [t.best_energy for t in serial.trials] == [t.best_energy for t in threaded.trials]

    def test_summary_round_trip(self, tmp_path):
        summary = sweep(linear_instance(4), "qudit", None, n_trials=2, seed=0, max_steps=40)
        path = tmp_path / "summary.json"
        save_summary(summary, path)
        loaded = load_summary(path)
        assert loaded == summary


def fake_summary(n_cities, representation, converged_flags, times):
    trials = [
        TrialResult(trial=i, hyperparams={}, seed=i, best_energy=0.0, converged=flag,
                    time_to_target_s=t, reason="target-reached" if flag else "max-steps",
                    n_steps=10, wall_s=1.0)
        for i, (flag, t) in enumerate(zip(converged_flags, times))
    ]
    hits = [t for f, t in zip(converged_flags, times) if f and t is not None]
    import statistics
    return SweepSummary(
        n_cities=n_cities, representation=representation, n_trials=len(trials),
        trials=trials,
        percent_converged=100.0 * sum(converged_flags) / len(trials),
        median_time_to_target_s=statistics.median(hits) if hits else None,
    )


class TestReport:
    def test_percentage_row(self):
        summary = fake_summary(6, "qudit", [True] * 8 + [False] * 2,
                               [1.0] * 8 + [None] * 2)
        rows = list(csv.reader(io.StringIO(report_convergence([summary]))))
        assert rows[0] == ["n_cities", "representation", "n_trials",
                           "percent_converged", "median_time_s"]
        assert rows[1][:4] == ["6", "qudit", "10", "80.0"]

    def test_empty_input_gives_header_only(self):
        text = report_convergence([])
        rows = list(csv.reader(io.StringIO(text)))
        assert len(rows) == 1

    def test_two_representations_two_rows(self):
        a = fake_summary(10, "qudit", [True], [0.5])
        b = fake_summary(10, "qubit", [True], [2.0])
        rows = list(csv.reader(io.StringIO(report_convergence([a, b]))))
        assert len(rows) == 3
        assert {r[1] for r in rows[1:]} == {"qubit", "qudit"}

    def test_unconverged_sweep_has_blank_median(self):
        summary = fake_summary(4, "qudit", [False, False], [None, None])
        rows = list(csv.reader(io.StringIO(report_convergence([summary]))))
        assert rows[1][4] == ""


class TestCli:
    def test_gen_then_exact(self, tmp_path, capsys):
        path = tmp_path / "lin4.json"
        assert cli(["gen", "--cities", "4", "--out", str(path)]) == 0
        assert cli(["exact", "--instance", str(path)]) == 0
        out = capsys.readouterr().out
        assert "tour: 1 2 3 4" in out
        assert "length: 6.0" in out

    def test_gen_to_stdout(self, capsys):
        assert cli(["gen", "--cities", "3"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_cities"] == 3

    def test_solve_writes_streaming_jsonl(self, tmp_path, capsys):
        out = tmp_path / "run.jsonl"
        code = cli(["solve", "--rep", "qudit", "--net", "cnn", "--cities", "5",
                    "--seed", "7", "--target", "auto", "--steps", "2000",
                    "--out", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "reason: target-reached" in stdout
        lines = [json.loads(line) for line in out.read_text().splitlines()]
        assert lines[0]["type"] == "header"
        assert lines[-1]["type"] == "footer"
        assert lines[-1]["best_energy"] == 8.0

    def test_solve_flag_overrides_land_in_config(self, tmp_path):
        out = tmp_path / "run.jsonl"
        assert cli(["solve", "--rep", "qudit", "--cities", "4", "--steps", "5",
                    "--chains", "4", "--swaps", "1", "--sample-size", "64",
                    "--lr", "0.005", "--channels", "2", "--kernel", "2",
                    "--out", str(out)]) == 0
        header = json.loads(out.read_text().splitlines()[0])
        cfg = header["config"]
        assert cfg["sampler"]["n_chains"] == 4
        assert cfg["sampler"]["sample_size"] == 64
        assert cfg["learning_rate"] == 0.005
        assert cfg["n_channels"] == 2

    def test_solve_qubit_rbm(self, capsys):
        assert cli(["solve", "--rep", "qubit", "--net", "rbm", "--cities", "4",
                    "--seed", "1", "--target", "auto", "--steps", "3000"]) == 0
        assert "converged: true" in capsys.readouterr().out

    def test_diag_matches_hand_matrix(self, capsys):
        assert cli(["diag", "--cities", "2", "--variant", "eq2", "--p", "100"]) == 0
        out = capsys.readouterr().out
        reported = float(out.split("ground_energy: ")[1].splitlines()[0])
        hand = np.full((4, 4), 100.0)
        hand[1, 1] = hand[2, 2] = 2.0
        expected = np.linalg.eigvalsh(hand)[0]
        assert reported == pytest.approx(expected, abs=1e-9)

    def test_diag_csv_export(self, tmp_path):
        path = tmp_path / "h.csv"
        assert cli(["diag", "--cities", "2", "--variant", "eq4", "--csv", str(path)]) == 0
        rows = list(csv.reader(io.StringIO(path.read_text())))
        assert len(rows) == 5  # header + 4 basis rows

    def test_sweep_and_report(self, tmp_path, capsys):
        summary_path = tmp_path / "s.json"
        assert cli(["sweep", "--cities", "4", "--rep", "qudit", "--trials", "2",
                    "--seed", "0", "--steps", "40", "--out", str(summary_path)]) == 0
        csv_path = tmp_path / "report.csv"
        assert cli(["report", str(summary_path), "--out", str(csv_path)]) == 0
        rows = list(csv.reader(io.StringIO(csv_path.read_text())))
        assert rows[0][0] == "n_cities"
        assert rows[1][0] == "4"

    def test_unknown_flag_is_usage_error(self):
        assert cli(["solve", "--rep", "qudit", "--cities", "4", "--bogus"]) == 1

    def test_missing_instance_is_usage_error(self):
        assert cli(["exact"]) == 1

    def test_both_instance_sources_is_usage_error(self, tmp_path):
        path = tmp_path / "i.json"
        save_instance(linear_instance(3), path)
        assert cli(["exact", "--cities", "3", "--instance", str(path)]) == 1

    def test_net_mismatch_is_usage_error(self):
        assert cli(["solve", "--rep", "qudit", "--net", "rbm", "--cities", "4"]) == 1

    def test_oversized_exact_is_runtime_error(self):
        assert cli(["exact", "--cities", "15"]) == 2

    def test_missing_file_is_runtime_error(self, tmp_path):
        assert cli(["exact", "--instance", str(tmp_path / "nope.json")]) == 2

    def test_target_auto_without_derivable_target_is_runtime_error(self, tmp_path):
        inst = random_symmetric_instance(11, 0)
        path = tmp_path / "big.json"
        save_instance(inst, path)
        assert cli(["solve", "--rep", "qudit", "--instance", str(path),
                    "--steps", "1", "--target", "auto"]) == 2

    def test_seed_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("QTSP_SEED", "31")
        out = tmp_path / "run.jsonl"
        assert cli(["solve", "--rep", "qudit", "--cities", "4", "--steps", "2",
                    "--out", str(out)]) == 0
        header = json.loads(out.read_text().splitlines()[0])
        assert header["config"]["sampler"]["seed"] == 31

    def test_help_exits_zero(self):
        assert cli(["--help"]) == 0
        assert cli(["solve", "--help"]) == 0
