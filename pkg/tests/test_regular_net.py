import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from staircase.fourier import cube
from staircase.regular_net import (
    Hyperparams,
    NetworkTopology,
    build_topology,
    dumps_checkpoint,
    forward,
    gaussian_params,
    loads_checkpoint,
    network_output,
    neuron_grad,
    neuron_params,
    pointwise_loss,
    population_loss,
    regularizer,
    set_neuron_params,
    theorem_hyperparams,
    zero_params,
)
from staircase.targets import make_staircase
from staircase.verify import central_difference, regular_net_gradcheck, rel_error


def product_net():
    """n=3, one hidden neuron (id 4) fed by x_1 and x_2."""
    top = NetworkTopology(3, 1, 1, 1.0, 1.0, 0, np.array([1, 2]), np.array([4, 4]))
    p = zero_params(top)
    p.a[:] = 1 / math.sqrt(2)
    p.b[0] = -1.0
    return top, p


class TestTopology:
    def test_complete(self):
        top = build_topology(4, 3, 3, 1.0, 1.0, 0)
        assert top.num_edges == 5 * 3 * 3 + 3 * 3 * 2
        v = top.layer_neurons(2)[0]
        assert sorted(top.parents(v).tolist()) == list(range(5)) + list(top.layer_neurons(1))

    def test_empty(self):
        top = build_topology(4, 3, 2, 0.0, 0.0, 0)
        p = zero_params(top)
        p.b[:] = np.arange(6) * 0.5
        assert top.num_edges == 0
        assert np.allclose(network_output(top, p, cube(4)), 7.5)

    def test_expected_input_edges(self):
        n, W, L, p1 = 6, 10, 3, 0.3
        counts = [np.count_nonzero(build_topology(n, W, L, p1, 0.5, s).input_edge_mask()) for s in range(100)]
        expected = (n + 1) * W * L * p1
        assert abs(np.mean(counts) - expected) / expected < 0.05

    def test_layer_bookkeeping(self):
        top = build_topology(3, 4, 3, 0.5, 0.5, 1)
        assert top.num_inputs == 4 and top.num_hidden == 12 and top.num_neurons == 16
        assert top.layer_of(0) == 0 and top.layer_of(4) == 1 and top.layer_of(15) == 3
        assert list(top.hidden()) == list(range(4, 16))
        for e in range(top.num_edges):
            assert top.edge_index(int(top.src[e]), int(top.dst[e])) == e

    def test_edges_sorted(self):
        top = build_topology(5, 6, 3, 0.4, 0.4, 2)
        keys = list(zip(top.dst.tolist(), top.src.tolist()))
        assert keys == sorted(keys)

    def test_illegal_edge(self):
        with pytest.raises(ValueError):
            NetworkTopology(2, 2, 3, 1.0, 1.0, 0, np.array([3]), np.array([8]))  # layer 1 -> layer 3
        with pytest.raises(ValueError):
            NetworkTopology(2, 2, 2, 1.0, 1.0, 0, np.array([3]), np.array([1]))  # into an input

    def test_deterministic(self):
        a, b = build_topology(5, 4, 3, 0.3, 0.3, 7), build_topology(5, 4, 3, 0.3, 0.3, 7)
        assert np.array_equal(a.src, b.src) and np.array_equal(a.dst, b.dst)


class TestForward:
    def test_zero_params(self):
        top = build_topology(4, 3, 2, 0.7, 0.7, 0)
        rec = forward(top, zero_params(top), cube(4))
        assert np.all(rec.values[:, top.num_inputs :] == 0) and np.all(rec.output == 0)

    def test_product_identity(self):
        top, p = product_net()
        X = cube(3)
        assert np.allclose(forward(top, p, X).values[:, 4], X[:, 0] * X[:, 1])
        p.b[0] = 0.0
        assert np.allclose(network_output(top, p, X), X[:, 0] * X[:, 1] + 1)

    def test_single_point(self):
        top, p = product_net()
        rec = forward(top, p, np.array([1.0, -1.0, 1.0]))
        assert rec.output.shape == (1,) and rec.output[0] == pytest.approx(-1.0)

    def test_output_sums_all_hidden(self):
        top = build_topology(3, 2, 2, 0.8, 0.8, 3)
        p = gaussian_params(top, 0.5, 3)
        rec = forward(top, p, cube(3), debug=True)
        assert np.allclose(rec.output, rec.values[:, top.num_inputs :].sum(axis=1))


class TestLosses:
    def test_regularizer(self):
        top, p = product_net()
        assert regularizer(top, zero_params(top), 1.0, 1.0) == 0.0
        q = zero_params(top)
        q.a[0] = 2.0
        assert regularizer(top, q, 0.5, 9.0) == 1.0
        assert regularizer(top, _scaled(p, 3.0), 0.2, 0.3) == pytest.approx(9 * regularizer(top, p, 0.2, 0.3))

    def test_pointwise(self):
        top = build_topology(5, 2, 2, 0.5, 0.5, 0)
        assert pointwise_loss(top, zero_params(top), np.ones(5), make_staircase(5, 3)(np.ones(5)), 0.1, 0.1) == 4.5

    def test_population_zero_params(self):
        top = build_topology(8, 2, 2, 0.5, 0.5, 0)
        assert population_loss(top, zero_params(top), make_staircase(8, 3)) == 1.5

    def test_population_exact_fit(self):
        top, p = product_net()
        target = lambda x: x[:, 0] * x[:, 1]  # noqa: E731
        assert population_loss(top, p, target) == pytest.approx(0.0, abs=1e-15)
        assert population_loss(top, p, target, 0.1, 0.2) == pytest.approx(regularizer(top, p, 0.1, 0.2))

    def test_population_sampled_for_large_n(self):
        top = build_topology(24, 1, 1, 0.1, 0.1, 0)
        assert population_loss(top, zero_params(top), make_staircase(24, 3), samples=50_000) == pytest.approx(1.5, rel=0.05)


def _scaled(p, c):
    q = p.copy()
    q.a *= c
    return q


class TestNeuronGrad:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_finite_differences(self, seed):
        assert regular_net_gradcheck(seed) < 1e-6

    def test_zero_weights(self):
        top = build_topology(4, 3, 2, 1.0, 1.0, 0)
        p = zero_params(top)
        rng = np.random.default_rng(0)
        x = rng.choice([-1.0, 1.0], size=(6, 4))
        y = rng.normal(size=6)
        v = top.layer_neurons(1)[1]
        g = neuron_grad(top, p, v, x, y, 0.3, 0.3)
        assert np.all(g[:-1] == 0) and g[-1] == pytest.approx(np.mean(-y))

    def test_bias_gradient_is_residual(self):
        top = build_topology(4, 3, 2, 0.7, 0.7, 1)
        p = gaussian_params(top, 0.6, 1)
        x = np.ones(4)
        for v in top.layer_neurons(2):
            g = neuron_grad(top, p, v, x, 0.25, 0.0, 0.0)
            assert g[-1] == pytest.approx(network_output(top, p, x)[0] - 0.25)

    def test_hidden_neuron_with_children(self):
        top = build_topology(3, 2, 3, 1.0, 1.0, 4)
        p = gaussian_params(top, 0.5, 4)
        v = top.layer_neurons(1)[0]
        x = cube(3)
        y = x[:, 0]
        g = neuron_grad(top, p, v, x, y, 0.01, 0.02)

        def loss(w):
            q = p.copy()
            set_neuron_params(top, q, v, w)
            return float(np.mean(pointwise_loss(top, q, x, y, 0.01, 0.02)))

        assert rel_error(g, central_difference(loss, neuron_params(top, p, v))) < 1e-6

    def test_input_rejected(self):
        top, p = product_net()
        with pytest.raises(KeyError):
            neuron_grad(top, p, 2, np.ones(3), 0.0, 0.0, 0.0)


class TestTheoremHyperparams:
    def test_depth_and_eta(self):
        for n in (2, 7, 50):
            hp = theorem_hyperparams(n, 3, 2.0, 0.1, 0.1)
            assert hp.L == n
            assert hp.eta == pytest.approx(4 * hp.tau, rel=1e-14)

    def test_tau_value(self):
        # 2^20 * 2^7 * 4 = 2^29
        hp = theorem_hyperparams(4, 3, 2.0, 0.1, 0.1)
        assert hp.tau == pytest.approx(2.0**-29, rel=1e-13)

    def test_lambda_ratio(self):
        hp = theorem_hyperparams(5, 2, 1.5, 0.1, 0.1)
        lg = hp.log10
        assert 0.5 * (lg["lam1"] - lg["lam2"]) == pytest.approx(-math.log10(64 * 1.5**2 * 5), abs=1e-12)
        assert lg["lam1"] <= lg["lam2"]

    def test_out_of_range_is_reported(self):
        hp = theorem_hyperparams(30, 10, 1.5, 0.1, 0.1)
        assert math.isinf(hp.B) and hp.eps_stop == 0.0 and math.isfinite(hp.W)
        assert any("overflows" in d for d in hp.diagnostics)
        assert any("underflows" in d for d in hp.diagnostics)

    def test_domain(self):
        with pytest.raises(ValueError):
            theorem_hyperparams(4, 3, 1.0, 0.1, 0.1)
        with pytest.raises(ValueError):
            theorem_hyperparams(4, 3, 2.0, 1.5, 0.1)


class TestHyperparams:
    def test_validate(self):
        base = dict(W=4, L=2, p1=0.5, p2=0.5, lam1=1e-3, lam2=1e-3, eta=0.1, B=8, eps_stop=1e-3, alpha=0.1, tau=0.02)
        Hyperparams(**base).validate()
        for key, bad in [("p1", 0.0), ("alpha", -1.0), ("batch_mode", "x"), ("on_violation", "ignore")]:
            with pytest.raises(ValueError):
                Hyperparams(**{**base, key: bad}).validate()


class TestCheckpoint:
    def test_roundtrip_exact(self):
        top = build_topology(6, 5, 3, 0.4, 0.3, 11)
        p = gaussian_params(top, 0.37, 11)
        p.b[:] = np.random.default_rng(0).normal(size=p.b.size)
        top2, p2 = loads_checkpoint(dumps_checkpoint(top, p))
        assert np.array_equal(top.src, top2.src) and np.array_equal(top.dst, top2.dst)
        assert p2 == p
        assert (top2.n, top2.W, top2.L, top2.p1, top2.p2, top2.seed) == (6, 5, 3, 0.4, 0.3, 11)

    def test_header(self):
        top, p = product_net()
        text = dumps_checkpoint(top, p)
        assert text.splitlines()[0] == "regular-net 1"
        assert "1 4 " + (1 / math.sqrt(2)).hex() in text

    def test_bad_version(self):
        top, p = product_net()
        with pytest.raises(ValueError):
            loads_checkpoint(dumps_checkpoint(top, p).replace("regular-net 1", "regular-net 9"))

