"""Sweep admissibility, trend table, completion pairing, switch, histograms."""

import numpy as np
import pytest

from rbmevo.evolution import SurvivorSpec
from rbmevo.experiments import (
    CompletionConfig,
    FitnessSwitch,
    SweepCombo,
    SweepGrid,
    aggregate_curves,
    derive_seed,
    enumerate_combos,
    exclusion_reason,
    fitness_histogram,
    pick_best,
    run_completion_test,
    run_sweep,
    run_switch,
    run_trajectories,
    run_trend_table,
    SwitchConfig,
)
from rbmevo.sat import MaxSatFitness, ParityFitness, gen_uniform_ksat


def tiny_fitness(seed=3, n=25):
    return MaxSatFitness(gen_uniform_ksat(n, 3, 4.267, np.random.default_rng(seed)))


def rbm_combo(**kw):
    base = dict(
        model="rbm", N=1000, survivors=SurvivorSpec.top_percent(50),
        hidden_mult=1, iterations=20, eta=0.01, batch=10,
    )
    base.update(kw)
    return SweepCombo(**base)


def rm_combo(**kw):
    base = dict(model="rm", N=1000, survivors=SurvivorSpec.top_count(1), mu=1)
    base.update(kw)
    return SweepCombo(**base)


class TestAdmissibility:
    def test_rm_fractional_survivor_excluded(self):
        c = rm_combo(N=10, survivors=SurvivorSpec.top_percent(1))
        assert exclusion_reason(c, 10_000) == "fewer than 1 survivor"
        c5 = rm_combo(N=10, survivors=SurvivorSpec.top_percent(5))
        assert exclusion_reason(c5, 10_000) == "fewer than 1 survivor"

    def test_rm_ten_percent_of_ten_admissible(self):
        c = rm_combo(N=10, survivors=SurvivorSpec.top_percent(10))
        assert exclusion_reason(c, 10_000) is None

    def test_rbm_small_survivor_count_excluded(self):
        c = rbm_combo(N=100, survivors=SurvivorSpec.top_percent(5))
        assert exclusion_reason(c, 10_000) == "RBM survivors 5 < 50"

    def test_rbm_fifty_survivors_admissible(self):
        c = rbm_combo(N=100, survivors=SurvivorSpec.top_percent(50))
        assert exclusion_reason(c, 10_000) is None

    def test_batch_must_be_smaller_than_population(self):
        c = rbm_combo(N=100, batch=100)
        assert "batch size 100 not smaller" in exclusion_reason(c, 10_000)

    def test_batch_cannot_exceed_survivors(self):
        c = rbm_combo(N=10_000, survivors=SurvivorSpec.top_percent(5), batch=1000)
        assert "exceeds survivor count 500" in exclusion_reason(c, 10_000)

    def test_population_limited_by_n_max(self):
        assert "exceeds N_max" in exclusion_reason(rm_combo(N=1000), 100)

    def test_enumerate_matches_rule_by_rule_check(self):
        grid = SweepGrid(instances=[("x", tiny_fitness())], n_max_values=[1000])
        admissible, excluded = enumerate_combos(grid, 1000)
        for combo in admissible:
            if combo.model == "brg":
                continue
            assert exclusion_reason(combo, 1000) is None
            # independent re-derivation of the admissibility rules
            assert combo.N <= 1000
            if combo.model == "rm":
                assert round(combo.N * combo.survivors.value / 100) >= 1 or \
                    combo.survivors.kind == "count"
            else:
                s = max(1, combo.survivors.raw_count(combo.N))
                assert s >= 50 and combo.batch < combo.N and combo.batch <= s
        for combo, reason in excluded:
            assert exclusion_reason(combo, 1000) == reason
        # every grid point appears exactly once
        assert len(admissible) - 1 + len(excluded) == (
            len(grid.rbm_n) * len(grid.rbm_survivors) * len(grid.rbm_hidden_mult)
            * len(grid.rbm_iterations) * len(grid.rbm_eta) * len(grid.rbm_batch)
            + len(grid.rm_n) * len(grid.rm_survivors) * len(grid.rm_mu)
        )


class TestPickBest:
    def test_unique_maximum(self):
        a, b = rm_combo(mu=1), rm_combo(mu=2)
        assert pick_best([(a, 0.5), (b, 0.7)], np.random.default_rng(0)) is b

    def test_exact_tie_varies_with_seed(self):
        combos = [rm_combo(mu=m) for m in (1, 2, 3, 4, 5, 6)]
        rows = [(c, 0.9) for c in combos]
        picks = {pick_best(rows, np.random.default_rng(s)).mu for s in range(30)}
        assert len(picks) > 1


class TestSweep:
    def test_single_combination_report(self, tmp_path):
        grid = SweepGrid(
            instances=[("t", tiny_fitness())],
            n_max_values=[60],
            rbm_n=[], rbm_survivors=[], rbm_hidden_mult=[], rbm_iterations=[],
            rbm_eta=[], rbm_batch=[],
            rm_n=[60], rm_survivors=[SurvivorSpec.top_count(1)], rm_mu=[1],
            models=("rm", "brg"),
            checkpoints=(5, 10),
            generations=10,
        )
        report = run_sweep(grid, master_seed=1, out_dir=tmp_path / "out")
        assert ("t", 60, "rm", 5) in report.best
        assert ("t", 60, "rm", 10) in report.best
        combo, value = report.best[("t", 60, "rm", 10)]
        assert combo.mu == 1
        assert 0 <= value <= 1
        assert (tmp_path / "out" / "sweep.csv").exists()
        assert (tmp_path / "out" / "best.csv").exists()
        assert ("t", 60) in report.brg_best

    def test_resume_skips_completed_runs(self, tmp_path):
        grid = SweepGrid(
            instances=[("t", tiny_fitness())],
            n_max_values=[40],
            rbm_n=[], rbm_survivors=[], rbm_hidden_mult=[], rbm_iterations=[],
            rbm_eta=[], rbm_batch=[],
            rm_n=[40], rm_survivors=[SurvivorSpec.top_count(1)], rm_mu=[1, 2],
            models=("rm",),
            checkpoints=(5,),
            generations=5,
        )
        out = tmp_path / "sweep"
        first = run_sweep(grid, master_seed=3, out_dir=out)
        stamp = {p: p.stat().st_mtime for p in (out / "runs").iterdir()}
        second = run_sweep(grid, master_seed=3, out_dir=out)
        assert {p: p.stat().st_mtime for p in (out / "runs").iterdir()} == stamp
        for (k1, v1), (k2, v2) in zip(sorted(first.best.items(), key=str),
                                      sorted(second.best.items(), key=str)):
            assert k1 == k2 and v1[1] == v2[1]

    def test_empty_grid_rejected(self):
        grid = SweepGrid(
            instances=[("t", tiny_fitness())],
            n_max_values=[10],
            rbm_n=[], rbm_survivors=[], rbm_hidden_mult=[], rbm_iterations=[],
            rbm_eta=[], rbm_batch=[],
            rm_n=[100], rm_survivors=[SurvivorSpec.top_percent(1)], rm_mu=[1],
            models=("rm",),
            checkpoints=(5,), generations=5,
        )
        with pytest.raises(ValueError):
            run_sweep(grid, master_seed=0)


class TestTrendTable:
    def test_blank_cells_match_single_survivor_rule(self):
        fitness = tiny_fitness()
        table = run_trend_table(
            fitness,
            population_sizes=(2, 10, 100),
            survivor_specs=(SurvivorSpec.top_count(1), SurvivorSpec.top_percent(1),
                            SurvivorSpec.top_percent(50)),
            mu_values=(1,),
            generations=3,
            master_seed=0,
        )
        assert table.cell("1%", 1, 2) is None
        assert table.cell("1%", 1, 10) is None
        assert table.cell("1%", 1, 100) is None  # exactly one survivor -> blank
        assert table.cell("50%", 1, 2) is None  # one survivor -> blank
        assert table.cell("50%", 1, 10) is not None
        assert table.cell("1", 1, 2) is not None  # absolute count row always runs

    def test_values_are_final_mean_fitness(self):
        fitness = tiny_fitness()
        table = run_trend_table(
            fitness, population_sizes=(30,), survivor_specs=(SurvivorSpec.top_count(1),),
            mu_values=(1,), generations=10, runs=2, master_seed=5,
        )
        v = table.cell("1", 1, 30)
        assert 0.8 < v <= 1.0

    def test_csv_layout(self, tmp_path):
        fitness = tiny_fitness()
        table = run_trend_table(
            fitness, population_sizes=(2, 30), survivor_specs=(SurvivorSpec.top_count(1),
                                                               SurvivorSpec.top_percent(50)),
            mu_values=(1, 2), generations=2, master_seed=1,
        )
        path = tmp_path / "trend.csv"
        table.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "survivors,mu,N2,N30"
        assert len(lines) == 5
        assert lines[3].startswith("50%,1,,")  # blank cell at N=2


class TestCompletion:
    def test_shuffled_pair_count(self):
        cfg = CompletionConfig(parity_n=2, population_size=100, generations=2,
                               runs=1, completion_count=100, master_seed=0)
        res = run_completion_test(cfg)
        assert res.shuffled_per_generation == 4950
        assert res.generations.tolist() == [1, 2]
        assert res.sampled_with_replacement  # 50 survivors < 100 sources

    def test_without_replacement_when_survivors_sufficient(self):
        cfg = CompletionConfig(parity_n=2, population_size=400, generations=2,
                               runs=1, completion_count=100, master_seed=1)
        res = run_completion_test(cfg)
        assert not res.sampled_with_replacement

    def test_clamp_everything_gives_zero_gap(self):
        # with no free positions the shuffled genomes are copies of the
        # completed ones; means differ only through the unordered-pair
        # weighting of sources, so the gap is zero up to that reweighting
        cfg = CompletionConfig(parity_n=3, population_size=200, generations=3,
                               runs=2, clamp_length=3, master_seed=2)
        res = run_completion_test(cfg)
        assert np.allclose(res.inferred.mean, res.shuffled.mean, atol=0.02)
        assert res.inferred.mean[0] == res.shuffled.mean[0] == 1.0

    def test_symmetric_pairs_doubles_count(self):
        cfg = CompletionConfig(parity_n=2, population_size=100, generations=1,
                               runs=1, symmetric_pairs=True, master_seed=3)
        res = run_completion_test(cfg)
        assert res.shuffled_per_generation == 2 * 4950

    def test_invalid_arity(self):
        with pytest.raises(ValueError):
            CompletionConfig(parity_n=6)


class TestSwitch:
    def test_null_switch_identical_to_no_switch(self):
        a = tiny_fitness(seed=8, n=12)
        cfg_null = SwitchConfig(fitness_a=a, fitness_b=a, switch_generation=5,
                                population_size=100, generations=10, runs=2, master_seed=4)
        cfg_none = SwitchConfig(fitness_a=a, fitness_b=a, switch_generation=None,
                                population_size=100, generations=10, runs=2, master_seed=4)
        r1, r2 = run_switch(cfg_null), run_switch(cfg_none)
        assert np.array_equal(r1.fitness.mean, r2.fitness.mean)
        assert np.array_equal(r1.heterozygosity.mean, r2.heterozygosity.mean)

    def test_mismatched_sizes_rejected(self):
        with pytest.raises(ValueError):
            SwitchConfig(fitness_a=tiny_fitness(n=12), fitness_b=tiny_fitness(n=14))

    def test_fitness_switch_schedule(self):
        a, b = ParityFitness(4), ParityFitness(4)
        sw = FitnessSwitch(a, b, 10)
        assert sw.for_generation(0) is a
        assert sw.for_generation(9) is a
        assert sw.for_generation(10) is b
        none = FitnessSwitch(a, b, None)
        assert none.for_generation(100) is a


class TestHistogram:
    def test_single_value_lands_in_expected_bin(self):
        lower, density = fitness_histogram(np.full(50, 0.8751))
        idx = int(np.flatnonzero(density)[0])
        assert lower[idx] == pytest.approx(0.875)
        assert density[idx] == 1.0
        assert density.sum() == pytest.approx(1.0, abs=1e-9)

    def test_uniform_values_roughly_flat(self):
        rng = np.random.default_rng(0)
        _, density = fitness_histogram(rng.random(200_000))
        assert density.sum() == pytest.approx(1.0, abs=1e-9)
        assert density.max() < 3.0 / 200  # no bin much above the uniform level

    def test_normalization_by_population_size(self):
        _, density = fitness_histogram(np.array([0.5, 0.5]), population_size=4)
        assert density.sum() == pytest.approx(0.5)

    def test_exact_one_is_counted(self):
        _, density = fitness_histogram(np.array([1.0, 1.0]))
        assert density.sum() == pytest.approx(1.0, abs=1e-9)
        assert density[-1] == 1.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            fitness_histogram(np.array([1.2]))


class TestHelpers:
    def test_aggregate_curves_mean_and_se(self):
        stats = aggregate_curves([np.array([1.0, 2.0]), np.array([3.0, 2.0])])
        assert np.allclose(stats.mean, [2.0, 2.0])
        assert stats.n_runs == 2
        assert np.allclose(stats.se, [np.std([1, 3], ddof=1) / np.sqrt(2), 0.0])

    def test_single_run_has_zero_se(self):
        stats = aggregate_curves([np.array([1.0, 2.0])])
        assert np.all(stats.se == 0.0)

    def test_derived_seeds_are_stable_and_distinct(self):
        assert derive_seed(5, 0) == derive_seed(5, 0)
        assert derive_seed(5, 0) != derive_seed(5, 1)
        assert derive_seed(5, 0) != derive_seed(6, 0)

    def test_run_trajectories_deterministic(self):
        from rbmevo.evolution import ModelConfig, RmModel

        cfg = ModelConfig(RmModel(1, SurvivorSpec.top_count(1)), 20,
                          tiny_fitness(), 5, seed=0)
        a = run_trajectories(cfg, runs=3, master_seed=7)
        b = run_trajectories(cfg, runs=3, master_seed=7)
        for x, y in zip(a, b):
            assert np.array_equal(x["mean_fitness"], y["mean_fitness"])
        c = run_trajectories(cfg, runs=3, master_seed=8)
        assert not np.array_equal(a[0]["mean_fitness"], c[0]["mean_fitness"])
