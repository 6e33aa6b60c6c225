from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debias.engine import (
    BatchDE,
    Crossover,
    DEConfig,
    Mutation,
    Population,
    combine,
    crossover_bin,
    crossover_exp,
    draw_indices,
    init_population,
    mutate,
    run,
)
from debias.metrics import ad_pvalue, ad_statistic
from debias.sdis import SdisKind
from oracles import truncated_geometric_mean


def cfg(mutation="rand/1", crossover="bin", F=0.5, Cr=0.9, p=10, sdis="sat", n=5, budget=500, **kw):
    mutation = Mutation.parse(mutation)
    if mutation is Mutation.CURRENT_TO_RAND_1:
        crossover, Cr = "none", None
    return DEConfig(mutation, Crossover(crossover), F, Cr, p, SdisKind.parse(sdis), n=n, budget=budget, **kw)


ALL_VARIANTS = [(m, "none" if m is Mutation.CURRENT_TO_RAND_1 else c) for m in Mutation for c in ("bin", "exp")]
ALL_VARIANTS = sorted(set(ALL_VARIANTS), key=str)


class TestConfig:
    def test_cr_iff_not_current_to_rand(self):
        with pytest.raises(ValueError):
            DEConfig(Mutation.CURRENT_TO_RAND_1, Crossover.NONE, 0.5, 0.5, 10, SdisKind.SAT)
        with pytest.raises(ValueError):
            DEConfig(Mutation.CURRENT_TO_RAND_1, Crossover.BIN, 0.5, None, 10, SdisKind.SAT)
        with pytest.raises(ValueError):
            DEConfig(Mutation.RAND_1, Crossover.NONE, 0.5, None, 10, SdisKind.SAT)

    def test_population_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            cfg("rand/2", p=4)
        with pytest.raises(ValueError, match="too small"):
            cfg("rand/1", p=3)
        assert not cfg("rand/2", p=5).excludes_target
        assert cfg("rand/2", p=6).excludes_target

    def test_config_id(self):
        c = cfg("current-to-best/1", "exp", F=0.483, Cr=0.99, p=100, sdis="COTN")
        assert c.config_id == "DE/curr-to-best/1/exp-p100-COTN-F0.483-Cr0.990"
        assert c.file_stem == "DE_curr-to-best_1_exp-p100-COTN-F0.483-Cr0.990"
        assert cfg("curr-to-rand/1", F=0.05, p=100).config_id == "DE/curr-to-rand/1-p100-sat-F0.050"

    def test_parse_aliases(self):
        assert Mutation.parse("curr-to-rand/1") is Mutation.CURRENT_TO_RAND_1
        assert Mutation.parse("DE/best/2") is Mutation.BEST_2
        with pytest.raises(ValueError):
            Mutation.parse("target-to-best/1")


class TestIndices:
    def test_distinct_and_not_target(self):
        rng = np.random.default_rng(0)
        targets = np.broadcast_to(np.arange(6), (2000, 6))
        idx = draw_indices(rng, targets, 6, 5)
        allv = np.concatenate([idx, targets[..., None]], axis=-1)
        assert np.all(np.sort(allv, axis=-1) == np.arange(6))

    def test_best1_draws_10k(self):
        rng = np.random.default_rng(1)
        targets = rng.integers(0, 20, size=10**4)
        idx = draw_indices(rng, targets, 20, 2)
        assert np.all(idx[:, 0] != idx[:, 1])
        assert np.all(idx[:, 0] != targets) and np.all(idx[:, 1] != targets)

    def test_uniform_over_free_values(self):
        rng = np.random.default_rng(2)
        targets = np.full(60000, 3)
        idx = draw_indices(rng, targets, 7, 2)
        counts = np.bincount(idx[:, 1], minlength=7)
        assert counts[3] == 0
        free = counts[np.arange(7) != 3]
        assert np.all(np.abs(free / 60000 - 1 / 6) < 0.01)

    def test_relaxed_when_population_tight(self):
        rng = np.random.default_rng(3)
        idx = draw_indices(rng, np.zeros(100, dtype=int), 5, 5, exclude_target=False)
        assert np.all(np.sort(idx, axis=-1) == np.arange(5))
        with pytest.raises(ValueError):
            draw_indices(rng, np.zeros(3, dtype=int), 5, 5)


class TestMutation:
    def test_rand1_hand_example(self):
        X = np.array([[[0.9, 0.9], [0.2, 0.2], [0.5, 0.1], [0.1, 0.3]]])
        v = combine(Mutation.RAND_1, X, np.array([[0]]), np.array([[[1, 2, 3]]]), np.array([0]), 0.7)
        np.testing.assert_allclose(v[0, 0], [0.48, 0.06], atol=1e-12)

    @pytest.mark.parametrize("mutation", list(Mutation))
    def test_zero_scale_gives_base_vector(self, mutation):
        rng = np.random.default_rng(4)
        X = rng.random((1, 8, 3))
        idx = np.array([[[1, 2, 3, 4, 5]]])[..., : mutation.n_indices]
        best = np.array([6])
        v = combine(mutation, X, np.array([[0]]), idx, best, 0.0, K=0.0)[0, 0]
        base = {
            Mutation.RAND_1: X[0, 1], Mutation.RAND_2: X[0, 1], Mutation.RAND_TO_BEST_2: X[0, 1],
            Mutation.BEST_1: X[0, 6], Mutation.BEST_2: X[0, 6],
            Mutation.CURRENT_TO_BEST_1: X[0, 0], Mutation.CURRENT_TO_RAND_1: X[0, 0],
        }[mutation]
        np.testing.assert_array_equal(v, base)

    def test_formulas(self):
        rng = np.random.default_rng(5)
        X = rng.random((1, 8, 4))
        x = X[0]
        t, best, F, K = np.array([[0]]), np.array([7]), 0.6, 0.3
        idx = np.array([[[1, 2, 3, 4, 5]]])
        expect = {
            Mutation.RAND_2: x[1] + F * (x[2] - x[3]) + F * (x[4] - x[5]),
            Mutation.BEST_2: x[7] + F * (x[1] - x[2]) + F * (x[3] - x[4]),
            Mutation.CURRENT_TO_BEST_1: x[0] + F * (x[7] - x[0]) + F * (x[1] - x[2]),
            Mutation.RAND_TO_BEST_2: x[1] + F * (x[7] - x[1]) + F * (x[2] - x[3]) + F * (x[4] - x[5]),
            Mutation.CURRENT_TO_RAND_1: x[0] + K * (x[1] - x[0]) + F * (x[2] - x[3]),
        }
        for mut, want in expect.items():
            got = combine(mut, X, t, idx[..., : mut.n_indices], best, F, K)[0, 0]
            np.testing.assert_allclose(got, want, atol=1e-14)

    def test_mutate_single_target(self, rng):
        c = cfg("best/1", p=10, n=3)
        pop = init_population(c, rng)
        v = mutate(c, pop, 2, rng)
        assert v.shape == (3,)
        with pytest.raises(IndexError):
            mutate(c, pop, 10, rng)


class TestCrossover:
    def test_bin_extremes(self, rng):
        t = np.zeros((1000, 30))
        m = np.ones((1000, 30))
        assert np.all(crossover_bin(t, m, 0.0, rng).sum(axis=1) == 1)
        assert np.all(crossover_bin(t, m, 1.0, rng) == 1)

    def test_bin_mean_inherited(self, rng):
        t = np.zeros((10**5, 30))
        got = crossover_bin(t, np.ones_like(t), 0.5, rng).sum(axis=1).mean()
        assert got == pytest.approx(1 + 29 * 0.5, abs=0.1)

    def test_exp_extremes(self, rng):
        t = np.zeros((1000, 30))
        m = np.ones((1000, 30))
        assert np.all(crossover_exp(t, m, 0.0, rng).sum(axis=1) == 1)
        assert np.all(crossover_exp(t, m, 1.0, rng) == 1)

    def test_exp_segment_is_contiguous(self, rng):
        n = 9
        trial = crossover_exp(np.zeros((5000, n)), np.ones((5000, n)), 0.7, rng)
        # a single cyclic run of ones has at most one 0 -> 1 step around the ring
        rises = np.sum((np.roll(trial, 1, axis=1) == 0) & (trial == 1), axis=1)
        assert np.all(rises <= 1)

    @pytest.mark.parametrize("n", [5, 30])
    def test_exp_segment_length_distribution(self, rng, n):
        trials = 10**5
        lengths = crossover_exp(np.zeros((trials, n)), np.ones((trials, n)), 0.5, rng).sum(axis=1)
        mean = float(truncated_geometric_mean(Fraction(1, 2), n))
        var = 2.0  # geometric(1/2) variance bounds the truncated one
        assert abs(lengths.mean() - mean) < 3 * np.sqrt(var / trials)
        for k in range(1, min(n, 5)):
            assert np.mean(lengths == k) == pytest.approx(0.5**k, abs=0.01)


class TestRun:
    def test_init_population(self, rng):
        c = cfg(p=5, n=30)
        pop = init_population(c, rng)
        assert pop.positions.shape == (5, 30) and len(pop) == 5
        assert np.all((pop.positions >= 0) & (pop.positions <= 1))
        assert pop.best_index == int(np.argmin(pop.fitness))
        with pytest.raises(ValueError, match="budget exhausted"):
            init_population(cfg(p=5, budget=3), rng)

    def test_initial_populations_are_uniform(self):
        passes = total = 0
        for rep in range(50):
            eng = BatchDE(cfg(p=5, n=30, budget=5), runs=600, seed=rep)
            pooled = eng.X.reshape(-1, 30)
            for j in range(30):
                passes += ad_pvalue(ad_statistic(pooled[:, j]), pooled.shape[0]) > 0.01
                total += 1
        assert passes / total >= 0.98

    def test_budget_equal_to_population(self):
        c = cfg(p=8, budget=8)
        eng = BatchDE(c, seed=3)
        init_best = eng.X[0, np.argmin(eng.fitness[0])].copy()
        res = run(c, seed=3)
        assert res.evaluations_used == 8 and res.generations == 0
        np.testing.assert_array_equal(res.final_best, init_best)

    def test_ties_best_index(self):
        pop = Population(np.zeros((3, 2)), np.array([0.5, 0.1, 0.1]))
        assert pop.best_index == 1

    @pytest.mark.parametrize("mutation, crossover", ALL_VARIANTS)
    @pytest.mark.parametrize("sdis", [k.value for k in SdisKind])
    def test_generation_invariants(self, mutation, crossover, sdis):
        c = cfg(mutation.value, crossover, F=1.2, Cr=0.8, p=6, sdis=sdis, n=4, budget=6 + 6 * 15 + 3)
        eng = BatchDE(c, runs=7, seed=11)
        best = eng.fitness.min(axis=1)
        prev_fit = eng.fitness.copy()
        while not eng.done.all():
            eng.step()
            assert np.all((eng.X >= 0) & (eng.X <= 1))
            assert np.all(eng.fitness <= prev_fit)
            assert np.all(eng.fitness.min(axis=1) <= best)
            prev_fit = eng.fitness.copy()
            best = eng.fitness.min(axis=1)
        assert np.all(eng.evaluations <= c.budget)
        assert eng.objective.evaluations == eng.evaluations.sum()

    def test_partial_final_generation(self):
        c = cfg(p=5, budget=5 + 5 + 2, sdis="sat", F=0.3)
        eng = BatchDE(c, runs=50, seed=4)
        eng.step()
        before = eng.X.copy()
        eng.step()
        assert np.all(eng.evaluations == 12)
        np.testing.assert_array_equal(eng.X[:, 2:], before[:, 2:])
        assert eng.done.all()

    def test_dis_consumes_no_evaluation(self):
        c = cfg("rand/1", F=2.0, Cr=1.0, p=6, sdis="dis", n=10, budget=6 + 30)
        eng = BatchDE(c, runs=20, seed=5)
        eng.step()
        assert np.all(eng.evaluations < 12)
        assert eng.objective.evaluations == eng.evaluations.sum()

    def test_dis_counting_switch(self):
        c = cfg("rand/1", F=2.0, Cr=1.0, p=6, sdis="dis", n=10, budget=36, dis_counts_evaluation=True)
        eng = BatchDE(c, runs=20, seed=5)
        eng.step()
        assert np.all(eng.evaluations == 12)
        assert eng.objective.evaluations < eng.evaluations.sum()

    def test_dis_stall_terminates(self):
        c = cfg("rand/1", F=50.0, Cr=1.0, p=6, sdis="dis", n=30, budget=10**6, stall_limit=20)
        res = run(c, seed=1)
        assert res.evaluations_used < c.budget

    def test_same_seed_bitwise_identical(self):
        c = cfg("rand-to-best/2", "exp", p=7, sdis="COTN", budget=300)
        a, b = run(c, seed=9), run(c, seed=9)
        assert a.final_best.tobytes() == b.final_best.tobytes()
        assert a.final_best_fitness == b.final_best_fitness and a.evaluations_used == b.evaluations_used
        assert run(c, seed=10).final_best.tobytes() != a.final_best.tobytes()

    def test_final_best_is_best_so_far(self):
        c = cfg(p=10, budget=400)
        eng = BatchDE(c, runs=5, seed=2)
        lowest = eng.fitness.min(axis=1)
        while not eng.done.all():
            eng.step()
            lowest = np.minimum(lowest, eng.fitness.min(axis=1))
        np.testing.assert_array_equal([r.final_best_fitness for r in eng.results()], lowest)

    @settings(max_examples=25, deadline=None)
    @given(p=st.integers(6, 12), n=st.integers(1, 6), extra=st.integers(0, 40))
    def test_evaluation_accounting(self, p, n, extra):
        c = cfg("best/2", p=p, n=n, budget=p + extra, sdis="mir")
        eng = BatchDE(c, runs=3, seed=p * n + extra).run()
        assert np.all(eng.evaluations == c.budget)
        assert eng.objective.evaluations == 3 * c.budget

    def test_smoke_feasibility_paper_setting(self):
        # DE/rand/1/bin p20 F0.9 Cr0.9 COTN; desk budget keeps this quick
        c = DEConfig(Mutation.RAND_1, Crossover.BIN, 0.9, 0.9, 20, SdisKind.COTN, n=30, budget=3000)
        pts = BatchDE(c, runs=600, seed=0).run().final_points()
        assert pts.shape == (600, 30)
        assert np.all((pts >= 0) & (pts <= 1))
