"""Tests for heatmap-guided construction and 2-opt improvement."""

import numpy as np
import pytest

from qubotsp import (
    Heatmap,
    NoImprovement,
    SearchParams,
    Tour,
    TspInstance,
    candidate_scores,
    expand_tour,
    generate_instances,
    guided_search,
    held_karp,
    HeatmapConfig,
    optimize_heatmap,
)


def one_hot_heatmap(n, order):
    """Adjacency indicator of the cycle visiting `order`."""
    H = np.zeros((n, n))
    for j in range(n):
        u, v = order[j], order[(j + 1) % n]
        H[u, v] = 1.0
        H[v, u] = 1.0
    return Heatmap(H=H)


def equilateral():
    return TspInstance(n=3, dist=np.ones((3, 3)) - np.eye(3), coords=None)


class TestSearchParams:
    def test_defaults(self):
        p = SearchParams()
        assert (p.k_max, p.m_top, p.t_attempts, p.max_restarts) == (10, 5, 50, 20)

    @pytest.mark.parametrize("kwargs", [
        {"k_max": 0},
        {"m_top": 0},
        {"t_attempts": 0},
        {"max_restarts": 0},
        {"time_budget": 0.0},
        {"lam": -0.5},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            SearchParams(**kwargs)


class TestCandidateScores:
    def test_hot_edges_rank_first(self):
        inst = generate_instances(6, 1, seed=1)[0]
        exact = held_karp(inst)
        order = exact.optimal_tour.order
        heatmap = one_hot_heatmap(6, order)
        params = SearchParams()
        for j, u in enumerate(order):
            succ = order[(j + 1) % 6]
            pred = order[(j - 1) % 6]
            cities, scores, weights = candidate_scores(
                inst, heatmap, params, current=u, visited=set())
            # Both cycle neighbours carry heat 1.0; everything else is at
            # most lam, so they occupy the top two slots.
            assert set(cities[:2]) == {succ, pred}
            assert scores[0] >= scores[1] >= scores[2]
            assert weights.sum() == pytest.approx(1.0)

    def test_zero_heat_zero_lam_is_uniform(self):
        inst = generate_instances(5, 1, seed=2)[0]
        heatmap = Heatmap(H=np.zeros((5, 5)))
        params = SearchParams(lam=0.0)
        cities, scores, weights = candidate_scores(
            inst, heatmap, params, current=0, visited=set())
        assert scores == pytest.approx(np.zeros(4))
        assert weights == pytest.approx(np.full(4, 0.25))

    def test_visited_cities_are_excluded(self):
        inst = generate_instances(5, 1, seed=3)[0]
        heatmap = Heatmap(H=np.zeros((5, 5)))
        cities, _, _ = candidate_scores(
            inst, heatmap, SearchParams(), current=0, visited={1, 3})
        assert set(cities.tolist()) == {2, 4}

    def test_truncates_to_m_top(self):
        inst = generate_instances(8, 1, seed=4)[0]
        heatmap = Heatmap(H=np.zeros((8, 8)))
        cities, _, _ = candidate_scores(
            inst, heatmap, SearchParams(m_top=3), current=5, visited=set())
        assert cities.shape == (3,)

    def test_all_visited_raises(self):
        inst = generate_instances(3, 1, seed=5)[0]
        heatmap = Heatmap(H=np.zeros((3, 3)))
        with pytest.raises(ValueError, match="visited"):
            candidate_scores(inst, heatmap, SearchParams(), current=0,
                             visited={1, 2})


class TestConstruction:
    def test_three_cities_give_the_unique_cycle(self):
        inst = generate_instances(3, 1, seed=6)[0]
        heatmap = Heatmap(H=np.zeros((3, 3)))
        exact = held_karp(inst)
        for seed in range(5):
            tour = expand_tour(inst, heatmap, SearchParams(),
                               np.random.default_rng(seed))
            assert isinstance(tour, Tour)
            assert tour.length == pytest.approx(exact.optimal_length)

    def test_greedy_follows_one_hot_cycle(self):
        inst = generate_instances(8, 1, seed=7)[0]
        exact = held_karp(inst)
        heatmap = one_hot_heatmap(8, exact.optimal_tour.order)
        params = SearchParams(m_top=1)
        for seed in range(10):
            tour = expand_tour(inst, heatmap, params, np.random.default_rng(seed))
            assert tour.length == pytest.approx(exact.optimal_length, abs=1e-9)

    def test_uniform_weights_sample_all_cycles(self):
        # With no heat and lam = 0 the walk is a uniform random permutation,
        # so the three undirected 4-cycles appear in equal proportion.
        inst = generate_instances(4, 1, seed=8)[0]
        heatmap = Heatmap(H=np.zeros((4, 4)))
        params = SearchParams(lam=0.0)
        counts: dict[frozenset, int] = {}
        draws = 3000
        for seed in range(draws):
            tour = expand_tour(inst, heatmap, params, np.random.default_rng(seed))
            edges = frozenset(
                frozenset((tour.order[j], tour.order[(j + 1) % 4]))
                for j in range(4))
            counts[edges] = counts.get(edges, 0) + 1
        assert len(counts) == 3
        # Multinomial(3000, 1/3): sigma ~ 25.8, allow well past 4 sigma.
        for c in counts.values():
            assert abs(c - draws / 3.0) < 120


class TestImprovement:
    def test_returns_no_improvement_at_local_optimum(self):
        # Every tour of the equilateral triangle has length 3, so no 2-opt
        # exchange can strictly improve and the sentinel comes back.
        inst = equilateral()
        heatmap = Heatmap(H=np.zeros((3, 3)))
        incumbent = Tour.from_order(inst, (0, 1, 2))
        params = SearchParams(k_max=1, t_attempts=30)
        result = expand_tour(inst, heatmap, params, np.random.default_rng(0),
                             incumbent=incumbent)
        assert isinstance(result, NoImprovement)
        assert result.attempts == 30

    def test_improves_a_bad_tour(self):
        inst = generate_instances(10, 1, seed=9)[0]
        exact = held_karp(inst)
        heatmap = one_hot_heatmap(10, exact.optimal_tour.order)
        rng = np.random.default_rng(1)
        worst = Tour.from_order(inst, tuple(np.roll(np.argsort(
            [inst.dist[0, v] for v in range(10)]), 3).tolist()))
        result = expand_tour(inst, heatmap, SearchParams(), rng, incumbent=worst)
        assert isinstance(result, Tour)
        assert result.length < worst.length
        assert sorted(result.order) == list(range(10))


class TestGuidedSearch:
    def test_equilateral(self):
        result = guided_search(equilateral(), Heatmap(H=np.zeros((3, 3))),
                               SearchParams(max_restarts=2, m_top=2))
        assert result.best_tour.length == pytest.approx(3.0)

    def test_one_hot_heatmap_recovers_optimum(self):
        hits = 0
        for seed in range(20):
            inst = generate_instances(8, 1, seed=600 + seed)[0]
            exact = held_karp(inst)
            heatmap = one_hot_heatmap(8, exact.optimal_tour.order)
            result = guided_search(inst, heatmap,
                                   SearchParams(max_restarts=1, seed=seed))
            if result.best_tour.length <= exact.optimal_length + 1e-9:
                hits += 1
        assert hits >= 19

    def test_learned_heatmap_near_optimal(self):
        hits = 0
        for seed in range(10):
            inst = generate_instances(12, 1, seed=700 + seed)[0]
            _, heatmap, _ = optimize_heatmap(inst, HeatmapConfig(seed=seed))
            exact = held_karp(inst)
            result = guided_search(inst, heatmap, SearchParams(seed=seed))
            if result.best_tour.length <= 1.02 * exact.optimal_length:
                hits += 1
        assert hits >= 9

    def test_result_is_valid_permutation(self):
        inst = generate_instances(15, 1, seed=10)[0]
        heatmap = Heatmap(H=np.zeros((15, 15)))
        result = guided_search(inst, heatmap, SearchParams(seed=3))
        assert sorted(result.best_tour.order) == list(range(15))
        assert result.restarts_used == 20
        assert result.attempts_used > 0

    def test_trace_lengths_strictly_decrease(self):
        inst = generate_instances(15, 1, seed=11)[0]
        _, heatmap, _ = optimize_heatmap(inst, HeatmapConfig(seed=0, steps=100))
        result = guided_search(inst, heatmap, SearchParams(seed=0))
        lengths = [length for _, length in result.improvement_trace]
        assert len(lengths) >= 1
        assert all(b < a for a, b in zip(lengths, lengths[1:]))
        assert lengths[-1] == pytest.approx(result.best_tour.length)

    def test_determinism(self):
        inst = generate_instances(12, 1, seed=12)[0]
        _, heatmap, _ = optimize_heatmap(inst, HeatmapConfig(seed=0, steps=100))
        a = guided_search(inst, heatmap, SearchParams(seed=5))
        b = guided_search(inst, heatmap, SearchParams(seed=5))
        assert a.best_tour.order == b.best_tour.order
        assert a.best_tour.length == b.best_tour.length
        assert a.attempts_used == b.attempts_used
        lengths_a = [length for _, length in a.improvement_trace]
        lengths_b = [length for _, length in b.improvement_trace]
        assert lengths_a == lengths_b
        c = guided_search(inst, heatmap, SearchParams(seed=6))
        assert c.best_tour.length == pytest.approx(a.best_tour.length, rel=0.2)

    def test_tiny_time_budget_still_returns_a_tour(self):
        inst = generate_instances(10, 1, seed=13)[0]
        heatmap = Heatmap(H=np.zeros((10, 10)))
        result = guided_search(inst, heatmap,
                               SearchParams(seed=0, time_budget=1e-9))
        assert result.restarts_used == 1
        assert sorted(result.best_tour.order) == list(range(10))

    def test_rejects_oversized_m_top(self):
        inst = equilateral()
        with pytest.raises(ValueError, match="m_top"):
            guided_search(inst, Heatmap(H=np.zeros((3, 3))),
                          SearchParams(m_top=5))

    def test_rejects_mismatched_heatmap(self):
        inst = generate_instances(5, 1, seed=14)[0]
        with pytest.raises(ValueError, match="heatmap"):
            guided_search(inst, Heatmap(H=np.zeros((4, 4))),
                          SearchParams(m_top=2))
