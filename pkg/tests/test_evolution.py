"""Selection, reproduction models, statistics, and the generation loop."""

import numpy as np
import pytest

from rbmevo.evolution import (
    BrgModel,
    ModelConfig,
    Population,
    RbmModel,
    RmModel,
    SurvivorSpec,
    init_population,
    mean_expected_heterozygosity,
    run_generation_loop,
    select_top,
    step_rm,
)
from rbmevo.rbm import RbmConfig
from rbmevo.sat import MaxSatFitness, ParityFitness, gen_uniform_ksat


def small_fitness(seed=42, n=30):
    return MaxSatFitness(gen_uniform_ksat(n, 3, 4.267, np.random.default_rng(seed)))


class TestSurvivorSpec:
    def test_parse(self):
        assert SurvivorSpec.parse("50%") == SurvivorSpec.top_percent(50)
        assert SurvivorSpec.parse("3") == SurvivorSpec.top_count(3)

    def test_resolve_percent(self):
        assert SurvivorSpec.top_percent(50).resolve(10) == 5
        assert SurvivorSpec.top_percent(1).resolve(1000) == 10

    def test_minimum_one_survivor(self):
        assert SurvivorSpec.top_percent(1).resolve(10) == 1

    def test_raw_count_can_round_to_zero(self):
        assert SurvivorSpec.top_percent(5).raw_count(10) == 0
        assert SurvivorSpec.top_percent(10).raw_count(10) == 1

    def test_count_exceeding_population_rejected(self):
        with pytest.raises(ValueError):
            SurvivorSpec.top_count(11).resolve(10)

    def test_str(self):
        assert str(SurvivorSpec.top_percent(5)) == "5%"
        assert str(SurvivorSpec.top_count(1)) == "1"

    def test_invalid(self):
        with pytest.raises(ValueError):
            SurvivorSpec.top_percent(0)
        with pytest.raises(ValueError):
            SurvivorSpec.top_count(0)


class TestInitPopulation:
    def test_fair_coin_bits(self):
        rng = np.random.default_rng(0)
        pop = init_population(10_000, ParityFitness(100), rng)
        assert pop.genomes.shape == (10_000, 100)
        assert abs(pop.genomes.mean() - 0.5) < 0.005
        per_bit = pop.genomes.mean(axis=0)
        assert np.all(np.abs(per_bit - 0.5) < 0.015)

    def test_initial_maxsat_fitness_near_analytic_mean(self):
        rng = np.random.default_rng(1)
        pop = init_population(4000, small_fitness(n=90), rng)
        assert abs(pop.fitnesses.mean() - 0.875) < 0.01

    def test_single_individual(self):
        pop = init_population(1, ParityFitness(5), np.random.default_rng(3))
        assert pop.size == 1


class TestSelectTop:
    def test_distinct_fitness_takes_top(self):
        genomes = np.arange(10, dtype=np.uint8).reshape(10, 1) % 2
        fitness = np.linspace(0.1, 1.0, 10)
        pop = Population(np.tile(np.arange(10, dtype=np.uint8)[:, None], (1, 3)) % 2, fitness)
        survivors = select_top(pop, SurvivorSpec.top_percent(50), np.random.default_rng(0))
        assert survivors.shape == (5, 3)
        assert np.array_equal(
            np.sort(survivors[:, 0]), np.sort(pop.genomes[5:, 0])
        )

    def test_all_tied_selection_varies_with_seed(self):
        genomes = np.arange(100, dtype=np.uint8)[:, None] % 2
        ident = np.tile(np.arange(100, dtype=np.uint16)[:, None] % 256, (1, 4)).astype(np.uint8)
        pop = Population(ident, np.full(100, 0.5))
        a = select_top(pop, SurvivorSpec.top_percent(10), np.random.default_rng(1))
        b = select_top(pop, SurvivorSpec.top_percent(10), np.random.default_rng(2))
        assert a.shape == b.shape == (10, 4)
        assert not np.array_equal(a, b)

    def test_top_count_one_is_argmax(self):
        rng = np.random.default_rng(5)
        genomes = rng.integers(0, 2, size=(50, 8), dtype=np.uint8)
        fitness = rng.random(50)
        pop = Population(genomes, fitness)
        survivor = select_top(pop, SurvivorSpec.top_count(1), rng)
        assert np.array_equal(survivor[0], genomes[fitness.argmax()])

    def test_partial_tie_at_cutoff(self):
        genomes = np.arange(6, dtype=np.uint8)[:, None] * np.ones((1, 2), dtype=np.uint8)
        fitness = np.array([1.0, 0.8, 0.8, 0.8, 0.2, 0.1])
        pop = Population(genomes, fitness)
        survivors = select_top(pop, SurvivorSpec.top_count(3), np.random.default_rng(0))
        assert survivors.shape == (3, 2)
        assert 0 in survivors[:, 0]  # the strict top is always kept
        assert np.all(np.isin(survivors[:, 0], [0, 1, 2, 3]))


class TestStepRm:
    def test_full_flip_is_complement(self):
        survivors = np.array([[0, 1, 0, 1]], dtype=np.uint8)
        off = step_rm(survivors, 5, mu=4, rng=np.random.default_rng(0))
        assert np.all(off == np.array([1, 0, 1, 0], dtype=np.uint8))

    def test_hamming_distance_equals_mu(self):
        rng = np.random.default_rng(7)
        parent = rng.integers(0, 2, size=(1, 40), dtype=np.uint8)
        for mu in (1, 3, 17, 40):
            off = step_rm(parent, 200, mu=mu, rng=rng)
            dists = (off != parent).sum(axis=1)
            assert np.all(dists == mu)

    def test_single_survivor_single_flip_offspring_diversity(self):
        # flipping exactly one bit of one parent can produce at most n genomes
        rng = np.random.default_rng(3)
        parent = rng.integers(0, 2, size=(1, 12), dtype=np.uint8)
        off = step_rm(parent, 5000, mu=1, rng=rng)
        assert len(np.unique(off, axis=0)) <= 12

    def test_mu_bounds(self):
        survivors = np.zeros((2, 6), dtype=np.uint8)
        with pytest.raises(ValueError):
            step_rm(survivors, 4, mu=7, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            step_rm(survivors, 4, mu=0, rng=np.random.default_rng(0))

    def test_parents_drawn_with_replacement(self):
        rng = np.random.default_rng(11)
        survivors = np.vstack([np.zeros(8, dtype=np.uint8), np.ones(8, dtype=np.uint8)])
        off = step_rm(survivors, 2000, mu=1, rng=rng)
        frac_from_ones = (off.sum(axis=1) > 4).mean()
        assert 0.4 < frac_from_ones < 0.6


class TestHeterozygosity:
    def test_identical_population_is_zero(self):
        pop = Population(np.ones((20, 6), dtype=np.uint8), np.ones(20))
        assert mean_expected_heterozygosity(pop) == 0.0

    def test_half_frequency_is_half(self):
        genomes = np.vstack([np.zeros((10, 4)), np.ones((10, 4))]).astype(np.uint8)
        pop = Population(genomes, np.ones(20))
        assert mean_expected_heterozygosity(pop) == pytest.approx(0.5)

    def test_direct_formula(self):
        genomes = np.array([[0, 0], [1, 1], [1, 0]], dtype=np.uint8)
        pop = Population(genomes, np.ones(3))
        assert mean_expected_heterozygosity(pop) == pytest.approx(4 / 9)

    def test_matches_direct_enumeration(self):
        rng = np.random.default_rng(2)
        genomes = rng.integers(0, 2, size=(37, 9), dtype=np.uint8)
        expected = 0.0
        for locus in range(9):
            p = sum(int(g[locus]) for g in genomes) / 37
            expected += 1 - p * p - (1 - p) * (1 - p)
        expected /= 9
        pop = Population(genomes, np.ones(37))
        assert mean_expected_heterozygosity(pop) == pytest.approx(expected)

    def test_bounds(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            genomes = rng.integers(0, 2, size=(11, 5), dtype=np.uint8)
            h = mean_expected_heterozygosity(Population(genomes, np.ones(11)))
            assert 0.0 <= h <= 0.5


class TestGenerationLoop:
    def test_zero_generations_single_record(self):
        cfg = ModelConfig(
            RmModel(1, SurvivorSpec.top_count(1)), 20, small_fitness(), 0, seed=1
        )
        records = run_generation_loop(cfg)
        assert len(records) == 1
        assert records[0].generation == 0

    def test_deterministic_per_seed(self):
        cfg = ModelConfig(
            RmModel(2, SurvivorSpec.top_percent(10)), 50, small_fitness(), 20, seed=9
        )
        a = run_generation_loop(cfg)
        b = run_generation_loop(cfg)
        assert [r.mean_fitness for r in a] == [r.mean_fitness for r in b]
        assert [r.mean_heterozygosity for r in a] == [r.mean_heterozygosity for r in b]

    def test_record_invariants(self):
        cfg = ModelConfig(
            RmModel(1, SurvivorSpec.top_count(3)), 40, small_fitness(), 30, seed=2
        )
        for rec in run_generation_loop(cfg):
            assert 0.0 <= rec.mean_fitness <= rec.best_fitness <= 1.0
            assert 0.0 <= rec.mean_heterozygosity <= 0.5

    def test_rm_mean_fitness_increases(self):
        cfg = ModelConfig(
            RmModel(1, SurvivorSpec.top_count(1)), 100, small_fitness(), 60, seed=3
        )
        records = run_generation_loop(cfg)
        assert records[-1].mean_fitness > records[0].mean_fitness + 0.05

    def test_brg_best_is_monotone_running_max(self):
        cfg = ModelConfig(BrgModel(), 30, small_fitness(), 40, seed=4)
        records = run_generation_loop(cfg)
        best = [r.best_fitness for r in records]
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))

    def test_brg_single_guess_generation(self):
        cfg = ModelConfig(BrgModel(), 1, small_fitness(), 1, seed=5)
        records = run_generation_loop(cfg)
        assert records[1].best_fitness >= records[1].mean_fitness

    def test_rbm_model_runs_and_keeps_population_size(self):
        fitness = ParityFitness(4)
        cfg = ModelConfig(
            RbmModel(
                RbmConfig(num_hidden=4, learning_rate=0.05, iterations=5, batch_size=10),
                SurvivorSpec.top_percent(50),
            ),
            120,
            fitness,
            4,
            seed=6,
        )
        seen_sizes = []
        run_generation_loop(cfg, hooks=lambda g, pop, ctx: seen_sizes.append(pop.size))
        assert seen_sizes == [120] * 5

    def test_rbm_survivor_minimum_enforced(self):
        cfg = ModelConfig(
            RbmModel(
                RbmConfig(num_hidden=4, learning_rate=0.05, iterations=5, batch_size=10),
                SurvivorSpec.top_percent(10),
            ),
            100,  # 10 survivors < 50
            ParityFitness(4),
            2,
            seed=0,
        )
        with pytest.raises(ValueError):
            run_generation_loop(cfg)

    def test_rbm_collapsed_survivors_are_reproduced(self):
        # survivors all equal one genome: offspring concentrate near it
        from rbmevo.evolution import step_rbm

        rng = np.random.default_rng(8)
        g = rng.integers(0, 2, size=10, dtype=np.uint8)
        survivors = np.tile(g, (60, 1))
        cfg = RbmConfig(num_hidden=10, learning_rate=0.1, iterations=60, batch_size=10)
        offspring, _ = step_rbm(survivors, 400, cfg, rng)
        dist = (offspring != g).sum(axis=1)
        assert (dist <= 1).mean() >= 0.9

    def test_untrained_rbm_offspring_uniform(self):
        from rbmevo.evolution import step_rbm

        rng = np.random.default_rng(10)
        survivors = rng.integers(0, 2, size=(50, 12), dtype=np.uint8)
        cfg = RbmConfig(num_hidden=12, learning_rate=1e-12, iterations=1, batch_size=50)
        offspring, _ = step_rbm(survivors, 20_000, cfg, rng)
        assert np.all(np.abs(offspring.mean(axis=0) - 0.5) < 0.02)

    def test_hooks_fire_with_rbm_context(self):
        fitness = ParityFitness(4)
        cfg = ModelConfig(
            RbmModel(
                RbmConfig(num_hidden=4, learning_rate=0.05, iterations=5, batch_size=10),
                SurvivorSpec.top_percent(50),
            ),
            100,
            fitness,
            3,
            seed=7,
        )
        contexts = []
        run_generation_loop(cfg, hooks=lambda g, pop, ctx: contexts.append((g, sorted(ctx))))
        assert contexts[0] == (0, [])
        assert contexts[1] == (1, ["rbm", "survivors"])
        assert len(contexts) == 4

    def test_mu_larger_than_genome_rejected(self):
        cfg = ModelConfig(
            RmModel(40, SurvivorSpec.top_count(1)), 10, ParityFitness(8), 2, seed=0
        )
        with pytest.raises(ValueError):
            run_generation_loop(cfg)

    def test_persistent_rbm_mode(self):
        fitness = ParityFitness(4)
        cfg = ModelConfig(
            RbmModel(
                RbmConfig(num_hidden=4, learning_rate=0.05, iterations=5, batch_size=10),
                SurvivorSpec.top_percent(50),
                persistence="persistent",
            ),
            100,
            fitness,
            3,
            seed=7,
        )
        models = []
        run_generation_loop(cfg, hooks=lambda g, pop, ctx: models.append(ctx.get("rbm")))
        fitted = [m for m in models if m is not None]
        assert all(m is fitted[0] for m in fitted)
