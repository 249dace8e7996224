"""Tests for the relaxed-QUBO heatmap optimizer."""

import numpy as np
import pytest

from qubotsp import (
    DivergenceError,
    EncoderWeights,
    Heatmap,
    HeatmapConfig,
    SoftAssignment,
    TspInstance,
    decode_heatmap,
    default_penalty,
    encoder_gradients,
    encode_tour,
    generate_instances,
    load_heatmap,
    optimize_heatmap,
    save_heatmap,
    soft_qubo_loss,
    Tour,
)
from qubotsp.heatmap import (
    build_edge_weights,
    init_encoder,
    init_logits,
    loss_gradient,
    softmax_columns,
)


def equilateral():
    return TspInstance(n=3, dist=np.ones((3, 3)) - np.eye(3), coords=None)


def reference_loss(instance, penalty_a, T):
    """Independent term-by-term evaluation of the relaxed objective."""
    n = instance.n
    total = 0.0
    for u in range(n):
        total += penalty_a * (T[u, :].sum() - 1.0) ** 2
    for j in range(n):
        total += penalty_a * (T[:, j].sum() - 1.0) ** 2
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            w = penalty_a if (min(u, v), max(u, v)) in instance.non_edges \
                else instance.dist[u, v]
            for j in range(n):
                total += w * T[u, j] * T[v, (j + 1) % n]
    return total


def permutation_T(order):
    n = len(order)
    T = np.zeros((n, n))
    for j, u in enumerate(order):
        T[u, j] = 1.0
    return T


class TestConfigValidation:
    def test_defaults_are_valid(self):
        cfg = HeatmapConfig()
        assert cfg.mode == "direct_logits"
        assert cfg.steps == 500

    @pytest.mark.parametrize("kwargs", [
        {"tau": 0.0},
        {"steps": 0},
        {"learning_rate": -0.1},
        {"mode": "transformer"},
        {"hidden_dim": 0},
        {"penalty_a": 0.0},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            HeatmapConfig(**kwargs)


class TestEdgeWeights:
    def test_zero_distance_gives_unit_weight(self):
        inst = equilateral()
        W = build_edge_weights(inst, tau=1.0)
        assert np.diag(W) == pytest.approx(np.ones(3))

    def test_matches_exponential(self):
        inst = generate_instances(5, 1, seed=4)[0]
        W = build_edge_weights(inst, tau=0.7)
        assert W == pytest.approx(np.exp(-inst.dist / 0.7))

    def test_large_tau_flattens(self):
        inst = generate_instances(5, 1, seed=4)[0]
        W = build_edge_weights(inst, tau=1e9)
        assert W == pytest.approx(np.ones((5, 5)), abs=1e-6)

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            build_edge_weights(equilateral(), tau=0.0)


class TestSoftAssignment:
    def test_columns_are_stochastic(self):
        rng = np.random.default_rng(0)
        assign = SoftAssignment.from_logits(rng.normal(size=(6, 6)))
        assert assign.T.sum(axis=0) == pytest.approx(np.ones(6))
        assert assign.T.min() >= 0.0

    def test_softmax_shift_invariance(self):
        rng = np.random.default_rng(1)
        S = rng.normal(size=(4, 4))
        shifted = S + rng.normal(size=(1, 4))
        assert softmax_columns(shifted) == pytest.approx(softmax_columns(S))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError, match="square"):
            SoftAssignment.from_logits(np.zeros((2, 3)))

    def test_rejects_non_finite(self):
        S = np.zeros((3, 3))
        S[0, 0] = np.inf
        with pytest.raises(ValueError, match="finite"):
            SoftAssignment.from_logits(S)


class TestHeatmapValidation:
    def test_accepts_valid(self):
        H = np.array([[0.0, 0.5], [0.5, 0.0]])
        assert Heatmap(H=H).n == 2

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            Heatmap(H=np.array([[0.0, 0.2], [0.3, 0.0]]))

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError, match="diagonal"):
            Heatmap(H=np.array([[0.1, 0.0], [0.0, 0.0]]))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="lie in"):
            Heatmap(H=np.array([[0.0, 1.5], [1.5, 0.0]]))


class TestSoftQuboLoss:
    def test_permutation_recovers_tour_length(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            n = int(rng.integers(3, 9))
            inst = generate_instances(n, 1, seed=int(rng.integers(10 ** 6)))[0]
            order = tuple(rng.permutation(n).tolist())
            tour = Tour.from_order(inst, order)
            loss = soft_qubo_loss(inst, permutation_T(order), default_penalty(inst))
            assert loss == pytest.approx(tour.length, abs=1e-9)

    def test_matches_reference_on_random_T(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            n = int(rng.integers(3, 7))
            inst = generate_instances(n, 1, seed=int(rng.integers(10 ** 6)))[0]
            T = rng.uniform(size=(n, n))
            a = default_penalty(inst)
            assert soft_qubo_loss(inst, T, a) == pytest.approx(
                reference_loss(inst, a, T), abs=1e-9)

    def test_uniform_T_costs_mean_edge(self):
        inst = generate_instances(3, 1, seed=8)[0]
        T = np.full((3, 3), 1.0 / 3.0)
        # Row and column sums are exactly one, so only the soft tour cost
        # remains: every ordered pair contributes D_uv / n.
        expected = inst.dist.sum() / 3.0
        assert soft_qubo_loss(inst, T, default_penalty(inst)) == pytest.approx(expected)

    def test_all_zero_T_pays_both_penalties(self):
        inst = generate_instances(4, 1, seed=9)[0]
        a = default_penalty(inst)
        assert soft_qubo_loss(inst, np.zeros((4, 4)), a) == pytest.approx(2 * 4 * a)

    def test_doubling_distances_doubles_tour_cost(self):
        inst = generate_instances(5, 1, seed=10)[0]
        doubled = TspInstance(n=5, dist=2.0 * inst.dist, coords=None)
        order = (2, 0, 4, 1, 3)
        T = permutation_T(order)
        a = default_penalty(inst)
        assert soft_qubo_loss(doubled, T, a) == pytest.approx(
            2.0 * soft_qubo_loss(inst, T, a), abs=1e-9)


class TestLossGradient:
    def test_matches_finite_differences_direct(self):
        h = 1e-5
        for n in (3, 5, 8):
            for seed in range(3):
                inst = generate_instances(n, 1, seed=100 + seed)[0]
                cfg = HeatmapConfig(seed=seed)
                S = init_logits(inst, cfg)
                a = default_penalty(inst)
                g = loss_gradient(inst, S, cfg)
                for i in range(n):
                    for j in range(n):
                        Sp = S.copy()
                        Sp[i, j] += h
                        Sm = S.copy()
                        Sm[i, j] -= h
                        fd = (soft_qubo_loss(inst, softmax_columns(Sp), a)
                              - soft_qubo_loss(inst, softmax_columns(Sm), a)) / (2 * h)
                        assert abs(g[i, j] - fd) / max(1.0, abs(fd)) <= 1e-4

    def test_matches_finite_differences_encoder(self):
        h = 1e-5
        for n in (3, 5):
            inst = generate_instances(n, 1, seed=200)[0]
            cfg = HeatmapConfig(seed=0, mode="encoder", hidden_dim=6)
            w = init_encoder(inst, cfg)
            loss, gi, gm, go = encoder_gradients(inst, w, cfg)
            parts = {"theta_in": (w.theta_in, gi),
                     "theta_msg": (w.theta_msg, gm),
                     "theta_out": (w.theta_out, go)}
            for name, (mat, g) in parts.items():
                it = np.nditer(mat, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index

                    def perturbed(delta):
                        pieces = {k: v[0].copy() for k, v in parts.items()}
                        pieces[name][idx] += delta
                        return EncoderWeights(**pieces)

                    lp, *_ = encoder_gradients(inst, perturbed(h), cfg)
                    lm, *_ = encoder_gradients(inst, perturbed(-h), cfg)
                    fd = (lp - lm) / (2 * h)
                    assert abs(g[idx] - fd) / max(1.0, abs(fd)) <= 1e-4

    def test_uniform_point_on_equilateral_is_stationary(self):
        # Zero logits give the uniform T; by symmetry every direction
        # looks the same and the projected gradient vanishes.
        g = loss_gradient(equilateral(), np.zeros((3, 3)), HeatmapConfig())
        assert np.abs(g).max() <= 1e-12

    def test_encoder_requires_coordinates(self):
        cfg = HeatmapConfig(mode="encoder")
        with pytest.raises(ValueError, match="coordinates"):
            init_encoder(equilateral(), cfg)


class TestOptimizeHeatmap:
    def test_equilateral_settles_at_uniform_plateau(self):
        # With all edges length 1 the relaxed optimum is the uniform T:
        # its soft cost is sum(D) / n = 6/3 = 2, below the 3.0 of any
        # permutation, and descent reaches it to machine precision.
        for seed in range(3):
            assign, heatmap, trace = optimize_heatmap(
                equilateral(), HeatmapConfig(seed=seed, steps=2000))
            assert trace[-1] == pytest.approx(2.0, abs=1e-6)
            g = loss_gradient(equilateral(), assign.logits, HeatmapConfig(seed=seed))
            assert np.abs(g).max() <= 1e-9
            assert heatmap.H[0, 1] == pytest.approx(2.0 / 3.0, abs=1e-6)

    def test_two_cities(self):
        inst = TspInstance(n=2, dist=np.array([[0.0, 1.4], [1.4, 0.0]]),
                           coords=None)
        assign, heatmap, trace = optimize_heatmap(inst, HeatmapConfig(seed=0))
        assert trace[-1] == pytest.approx(1.4, abs=1e-9)
        assert heatmap.H[0, 1] == pytest.approx(1.0)

    def test_default_config_descends(self):
        inst = generate_instances(20, 1, seed=3)[0]
        for seed in range(2):
            _, _, trace = optimize_heatmap(inst, HeatmapConfig(seed=seed))
            assert trace.shape == (501,)
            assert trace[-1] <= 0.5 * trace[0]
            steps_down = (np.diff(trace) < 0).mean()
            assert steps_down >= 0.9

    def test_encoder_mode_descends(self):
        inst = generate_instances(8, 1, seed=6)[0]
        assign, heatmap, trace = optimize_heatmap(
            inst, HeatmapConfig(seed=1, mode="encoder", hidden_dim=16, steps=300))
        assert trace[-1] < trace[0]
        assert assign.T.sum(axis=0) == pytest.approx(np.ones(8))
        assert heatmap.n == 8

    def test_determinism(self):
        inst = generate_instances(10, 1, seed=12)[0]
        a1, h1, t1 = optimize_heatmap(inst, HeatmapConfig(seed=7, steps=100))
        a2, h2, t2 = optimize_heatmap(inst, HeatmapConfig(seed=7, steps=100))
        assert np.array_equal(t1, t2)
        assert np.array_equal(h1.H, h2.H)
        assert np.array_equal(a1.logits, a2.logits)
        _, h3, _ = optimize_heatmap(inst, HeatmapConfig(seed=8, steps=100))
        assert not np.array_equal(h1.H, h3.H)

    def test_divergence_guard_fires(self):
        # One enormous edge makes the penalty weight huge relative to the
        # near-uniform starting loss; an aggressive step then overshoots
        # past ten times the initial value.
        d = np.array([[0.0, 1e-3, 1e-3],
                      [1e-3, 0.0, 1e3],
                      [1e-3, 1e3, 0.0]])
        inst = TspInstance(n=3, dist=d, coords=None)
        with pytest.raises(DivergenceError, match="learning rate"):
            optimize_heatmap(inst, HeatmapConfig(seed=0, learning_rate=0.5,
                                                 steps=100))


class TestDecodeHeatmap:
    def test_permutation_marks_cycle_edges(self):
        order = (3, 0, 2, 4, 1)
        heatmap = decode_heatmap(permutation_T(order))
        n = len(order)
        expected = np.zeros((n, n))
        for j in range(n):
            u, v = order[j], order[(j + 1) % n]
            expected[u, v] = 1.0
            expected[v, u] = 1.0
        assert heatmap.H == pytest.approx(expected)

    def test_uniform_T_gives_two_over_n(self):
        n = 4
        heatmap = decode_heatmap(np.full((n, n), 1.0 / n))
        expected = np.full((n, n), 2.0 / n)
        np.fill_diagonal(expected, 0.0)
        assert heatmap.H == pytest.approx(expected)

    def test_matches_explicit_marginal(self):
        rng = np.random.default_rng(31)
        n = 5
        T = softmax_columns(rng.normal(size=(n, n)))
        heatmap = decode_heatmap(T)
        for u in range(n):
            for v in range(n):
                if u == v:
                    continue
                succ = sum(T[u, j] * T[v, (j + 1) % n] for j in range(n))
                pred = sum(T[v, j] * T[u, (j + 1) % n] for j in range(n))
                assert heatmap.H[u, v] == pytest.approx(
                    min(1.0, succ + pred), abs=1e-12)

    def test_encoded_tour_matches_tour_edges(self):
        inst = generate_instances(6, 1, seed=13)[0]
        order = (5, 2, 0, 3, 1, 4)
        x = encode_tour(inst, Tour.from_order(inst, order))
        heatmap = decode_heatmap(x.reshape(6, 6))
        for j in range(6):
            u, v = order[j], order[(j + 1) % 6]
            assert heatmap.H[u, v] == pytest.approx(1.0)


class TestSaveLoad:
    def test_roundtrip_exact(self, tmp_path):
        inst = generate_instances(7, 1, seed=14)[0]
        _, heatmap, _ = optimize_heatmap(inst, HeatmapConfig(seed=0, steps=50))
        path = tmp_path / "heatmap.csv"
        save_heatmap(heatmap, path)
        loaded = load_heatmap(path)
        assert np.array_equal(loaded.H, heatmap.H)

    def test_loaded_file_is_plain_csv(self, tmp_path):
        heatmap = Heatmap(H=np.array([[0.0, 0.25], [0.25, 0.0]]))
        path = tmp_path / "h.csv"
        save_heatmap(heatmap, path)
        rows = path.read_text().strip().splitlines()
        assert len(rows) == 2
        assert float(rows[0].split(",")[1]) == pytest.approx(0.25)
