import math

import numpy as np
import pytest

from staircase.fourier import cube, subset
from staircase.layerwise import classify_neuron
from staircase.regular_net import forward
from staircase.verify import ALL, SUITES, Check, build_probe, central_difference, expand, rel_error, run_suites


class TestHelpers:
    def test_check_line(self):
        c = Check("s", "thing", 0.5, 1.0, "<")
        assert c.passed and c.line().startswith("PASS  s: thing")
        assert not Check("s", "thing", 2.0, 1.0, "<").passed
        assert Check("s", "count", 10, 10, ">=").passed

    def test_rel_error_floor(self):
        assert rel_error(np.array([0.0]), np.array([1e-9])) == pytest.approx(1e-3)
        assert rel_error(np.array([2.0]), np.array([1.0])) == 0.5

    def test_central_difference(self):
        g = central_difference(lambda w: float(w @ w), np.array([1.0, -2.0]))
        assert np.allclose(g, [2.0, -4.0])


class TestProbe:
    def test_layer_one_computes_monomials(self):
        probe = build_probe(5, [(subset(2, 4), -0.7), (subset(3), 1.5), None], [("h", 0), ("h", 1)])
        X = cube(5)
        vals = forward(probe.topology, probe.params, X).values
        l1 = probe.topology.layer_neurons(1)
        assert np.allclose(vals[:, l1[0]], -0.7 * X[:, 1] * X[:, 3])
        assert np.allclose(vals[:, l1[1]], 1.5 * X[:, 2])
        assert np.all(vals[:, l1[2]] == 0)
        assert classify_neuron(probe.topology, probe.params, probe.v).tag == "Blank"

    def test_input_parents(self):
        probe = build_probe(4, [None], [0, 3])
        assert sorted(probe.topology.parents(probe.v).tolist()) == [0, 3]


class TestRegistry:
    def test_expand(self):
        assert expand(["all"]) == ALL
        assert "resnet-slow" not in ALL and "resnet-slow" in SUITES
        assert expand(["fourier", "fourier"]) == ["fourier"]
        with pytest.raises(KeyError):
            expand(["nope"])

    def test_run_cheap_suites(self):
        lines = []
        assert run_suites(["staircase", "theorem-hyperparams"], out=lines.append) == 0
        assert lines and all(not l.startswith("FAIL") for l in lines)
