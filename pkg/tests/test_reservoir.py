import numpy as np
import pytest

from dfa_esn.errors import NumericsError, ShapeError
from dfa_esn.numerics import SeededRng, Uniform
from dfa_esn.reservoir import (
    DeepEsn,
    ReservoirLayer,
    build_deep_esn,
    build_layer,
    classify,
    forward_stack,
    readout,
    run_series,
    sample_indices,
    step_layer,
)


def logistic(z):
    return 1.0 / (1.0 + np.exp(-z))


def tiny_layer(alpha=1.0, activation="sigmoid"):
    w_in = np.array([[0.2, -0.1], [0.4, 0.3]])
    w_rec = np.array([[0.1, 0.05], [-0.2, 0.15]])
    return ReservoirLayer(w_in, w_rec, alpha, activation=activation)


class TestReservoirLayer:
    def test_zero_weights_alpha_one_sigmoid_gives_half(self):
        layer = ReservoirLayer(np.zeros((3, 2)), np.zeros((3, 3)), 1.0)
        state = layer.step([1.0, -1.0])
        assert np.allclose(state, 0.5)

    def test_alpha_one_overwrites_state(self):
        layer = tiny_layer(alpha=1.0)
        u = np.array([0.3, -0.7])
        got = layer.step(u)
        # alpha = 1: new state is exactly f(W_in u + W_rec * 0)
        assert np.allclose(got, logistic(layer.w_in @ u), atol=1e-12)

    def test_two_neuron_hand_computed_step(self):
        layer = tiny_layer(alpha=0.4)
        layer.state = np.array([0.5, -0.25])
        u = np.array([1.0, 2.0])
        expected = 0.6 * np.array([0.5, -0.25]) + 0.4 * logistic(
            layer.w_in @ u + layer.w_rec @ np.array([0.5, -0.25])
        )
        got = step_layer(layer, u)
        assert np.allclose(got, expected, rtol=0, atol=1e-12)

    def test_tanh_activation(self):
        layer = tiny_layer(alpha=1.0, activation="tanh")
        u = np.array([0.3, -0.7])
        assert np.allclose(layer.step(u), np.tanh(layer.w_in @ u), atol=1e-12)

    def test_input_length_checked(self):
        with pytest.raises(ShapeError):
            tiny_layer().step([1.0, 2.0, 3.0])

    def test_bad_alpha_rejected(self):
        with pytest.raises(NumericsError):
            ReservoirLayer(np.zeros((2, 1)), np.zeros((2, 2)), 0.0)

    def test_unstable_recurrent_rejected(self):
        with pytest.raises(NumericsError, match=">= 1"):
            ReservoirLayer(np.zeros((2, 1)), np.diag([1.5, 0.2]), 0.5)

    def test_unstable_override_for_experiments(self):
        layer = ReservoirLayer(
            np.zeros((2, 1)), np.diag([1.5, 0.2]), 0.5, enforce_stability=False
        )
        assert layer.measured_rho == pytest.approx(1.5, rel=1e-6)


class TestBuildLayer:
    def test_paper_scale_shapes(self):
        rng = SeededRng(0)
        layer = build_layer(rng, 800, 6, 0.1, 0.9, Uniform(-0.5, 0.5))
        assert layer.w_in.shape == (800, 6)
        assert layer.w_rec.shape == (800, 800)
        assert layer.state.shape == (800,)

    def test_target_radius_remeasured(self):
        layer = build_layer(SeededRng(0), 200, 4, 0.1, 0.9, Uniform(-0.5, 0.5))
        assert 0.899 <= layer.measured_rho <= 0.901

    def test_same_seed_same_layer(self):
        a = build_layer(SeededRng(5), 50, 3, 0.2, 0.8, Uniform(-1, 1))
        b = build_layer(SeededRng(5), 50, 3, 0.2, 0.8, Uniform(-1, 1))
        assert np.array_equal(a.w_in, b.w_in)
        assert np.array_equal(a.w_rec, b.w_rec)

    def test_bad_target_rho(self):
        with pytest.raises(NumericsError):
            build_layer(SeededRng(0), 10, 2, 0.5, 1.2, Uniform(-1, 1))


class TestReadout:
    def test_identity(self):
        x = np.array([0.1, -0.2, 0.3])
        assert np.allclose(readout(np.eye(3), x), x)

    def test_zero_state(self):
        assert np.allclose(readout(np.ones((4, 3)), np.zeros(3)), np.zeros(4))

    def test_paper_scale_output(self):
        rng = np.random.default_rng(0)
        w_out = rng.uniform(-1, 1, (4, 800))
        y = readout(w_out, rng.uniform(0, 1, 800))
        assert y.shape == (4,)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            readout(np.ones((2, 3)), np.ones(4))


def small_esn(depth=2, n=10, input_dim=3, output_dim=4, seed=0, feedback="random"):
    return build_deep_esn(
        SeededRng(seed),
        depth,
        n,
        input_dim,
        output_dim,
        leak_alpha=0.3,
        target_rho=0.8,
        input_dist=Uniform(-0.5, 0.5),
        feedback=feedback,
    )


class TestDeepEsn:
    def test_layer_chaining_validated(self):
        l0 = build_layer(SeededRng(0), 8, 3, 0.5, 0.8, Uniform(-1, 1), label="a")
        l1_bad = build_layer(SeededRng(0), 8, 5, 0.5, 0.8, Uniform(-1, 1), label="b")
        with pytest.raises(ShapeError, match="layer 1"):
            DeepEsn([l0, l1_bad], np.zeros((2, 8)), [np.zeros((8, 2))])

    def test_w_out_columns_validated(self):
        l0 = build_layer(SeededRng(0), 8, 3, 0.5, 0.8, Uniform(-1, 1))
        with pytest.raises(ShapeError, match="w_out"):
            DeepEsn([l0], np.zeros((2, 9)))

    def test_feedback_count_validated(self):
        esn = small_esn(depth=3)
        with pytest.raises(ShapeError, match="feedback"):
            DeepEsn(esn.layers, esn.w_out, esn.feedback[:1])

    def test_feedback_shape_validated(self):
        esn = small_esn(depth=2)
        with pytest.raises(ShapeError, match=r"feedback\[0\]"):
            DeepEsn(esn.layers, esn.w_out, [np.zeros((10, 7))])

    def test_zero_feedback_variant(self):
        esn = small_esn(feedback="zero")
        assert all(not fb.any() for fb in esn.feedback)


class TestSampling:
    def test_documented_example(self):
        assert sample_indices(100, 20, 10) == [20, 30, 40, 50, 60, 70, 80, 90, 99]

    def test_final_step_not_duplicated(self):
        assert sample_indices(21, 0, 10) == [0, 10, 20]

    def test_bad_washout(self):
        with pytest.raises(NumericsError):
            sample_indices(10, 10, 2)


class TestRunSeries:
    def test_trace_shapes_single_layer(self):
        esn = small_esn(depth=1)
        series = np.random.default_rng(0).standard_normal((40, 3))
        trace = run_series(esn, series, washout=4, sample_every=10)
        assert trace.sample_times == [4, 14, 24, 34, 39]
        assert all(len(per_layer) == 1 for per_layer in trace.states)
        assert trace.states[0][0].shape == (10,)

    def test_deterministic_and_state_reset(self):
        esn = small_esn(depth=3)
        series = np.random.default_rng(1).standard_normal((30, 3))
        t1 = run_series(esn, series, 3, 7)
        t2 = run_series(esn, series, 3, 7)
        for a, b in zip(t1.states, t2.states):
            for xa, xb in zip(a, b):
                assert np.array_equal(xa, xb)

    def test_inputs_recorded_per_layer(self):
        esn = small_esn(depth=2)
        series = np.random.default_rng(2).standard_normal((20, 3))
        trace = run_series(esn, series, 2, 5)
        for t, per_layer in zip(trace.sample_times, trace.inputs):
            assert np.array_equal(per_layer[0], series[t])
            # layer 1's input is layer 0's state at the same step
            assert np.array_equal(per_layer[1], trace.states[trace.sample_times.index(t)][0])

    def test_too_short_series_names_it(self):
        esn = small_esn()

        class S:
            values = np.zeros((5, 3))
            source_id = "tiny-series"

        with pytest.raises(NumericsError, match="tiny-series"):
            run_series(esn, S(), washout=5, sample_every=1)

    def test_weights_untouched_by_forward(self):
        esn = small_esn(depth=2)
        before = [l.w_in.copy() for l in esn.layers] + [esn.w_out.copy()]
        run_series(esn, np.random.default_rng(3).standard_normal((25, 3)), 2, 6)
        after = [l.w_in for l in esn.layers] + [esn.w_out]
        for a, b in zip(before, after):
            assert np.array_equal(a, b)

    def test_matches_stepwise_simulation(self):
        esn = small_esn(depth=2)
        rng = np.random.default_rng(4)
        series = rng.standard_normal((15, 3))
        trace = run_series(esn, series, 0, 1)
        # replay with step_layer
        for layer in esn.layers:
            layer.reset()
        for t in range(15):
            u = series[t]
            states = []
            for layer in esn.layers:
                u = layer.step(u)
                states.append(u.copy())
            for i in range(2):
                assert np.allclose(trace.states[t][i], states[i], atol=1e-12)


class TestClassify:
    def test_one_hot_scores(self):
        esn = small_esn(depth=1, n=4, output_dim=4)
        esn.w_out = np.eye(4)
        one_hot = np.array([0.0, 0.0, 1.0, 0.0])
        trace_states = [[one_hot], [one_hot]]
        from dfa_esn.reservoir import StateTrace

        trace = StateTrace([0, 1], trace_states, [[one_hot], [one_hot]])
        label, scores = classify(esn, trace)
        assert label == 2
        assert np.allclose(scores, one_hot)

    def test_tie_breaks_to_lowest_index(self):
        esn = small_esn(depth=1, n=4, output_dim=4)
        esn.w_out = np.eye(4)
        tied = np.array([0.5, 0.0, 0.0, 0.5])
        from dfa_esn.reservoir import StateTrace

        trace = StateTrace([0], [[tied]], [[tied]])
        label, _ = classify(esn, trace)
        assert label == 0

    def test_mean_of_two_samples_hand_case(self):
        esn = small_esn(depth=1, n=3, output_dim=2)
        esn.w_out = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        s1, s2 = np.array([0.2, 0.8, 0.0]), np.array([0.6, 0.0, 0.4])
        from dfa_esn.reservoir import StateTrace

        trace = StateTrace([3, 7], [[s1], [s2]], [[s1], [s2]])
        label, scores = classify(esn, trace)
        assert np.allclose(scores, [(0.2 + 0.6) / 2, (0.8 + 0.0) / 2])
        assert label == 0


class TestEchoStateProperty:
    def test_fading_memory_contracts_below_unit_radius(self):
        # two runs from different random states, same input, end close together
        distances = []
        for seed in range(10):
            layer = build_layer(SeededRng(seed), 60, 2, 0.3, 0.9, Uniform(-0.5, 0.5))
            rng = np.random.default_rng(seed)
            inputs = rng.standard_normal((500, 2))
            xa = rng.uniform(0, 1, 60)
            xb = rng.uniform(0, 1, 60)
            for name, x0 in (("a", xa), ("b", xb)):
                layer.state = x0.copy()
                for t in range(500):
                    layer.step(inputs[t])
                if name == "a":
                    end_a = layer.state.copy()
            distances.append(np.linalg.norm(layer.state - end_a))
        assert np.mean(distances) < 1e-3

    def test_sigmoid_envelope_and_no_nan(self):
        layer = build_layer(SeededRng(3), 40, 3, 0.7, 0.8, Uniform(-2, 2))
        rng = np.random.default_rng(3)
        for t in range(200):
            state = layer.step(rng.standard_normal(3) * 3)
            assert np.all(np.isfinite(state))
            assert np.all(state >= 0.0) and np.all(state <= 1.0)


class TestForwardStack:
    def test_batch_matches_per_series(self):
        esn = small_esn(depth=2)
        rng = np.random.default_rng(7)
        batch = rng.standard_normal((12, 5, 3))
        seqs = forward_stack(esn, batch)
        for s in range(5):
            single = forward_stack(esn, batch[:, s : s + 1, :])
            for i in range(2):
                assert np.allclose(seqs[i][:, s], single[i][:, 0], atol=1e-12)

    def test_input_dim_checked(self):
        esn = small_esn()
        with pytest.raises(ShapeError):
            forward_stack(esn, np.zeros((10, 2, 5)))
