import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import hadamard

from staircase.fourier import (
    SparsePolynomial,
    chain,
    check_staircase,
    column_label,
    cube,
    cube_values,
    degree,
    estimate_fourier,
    eval_monomial,
    eval_poly,
    exact_fourier,
    format_subset,
    indices,
    max_abs_on_cube,
    naive_fourier,
    parseval_norm,
    subset,
    walsh_hadamard,
)
from staircase.sampling import Measure, make_stream
from staircase.targets import make_parity, make_staircase, normalize_to_unit


@st.composite
def sparse_polys(draw, max_n=10):
    n = draw(st.integers(1, max_n))
    terms = draw(
        st.dictionaries(
            st.integers(0, (1 << n) - 1),
            st.floats(-5, 5, allow_nan=False).filter(lambda c: abs(c) > 1e-6),
            max_size=8,
        )
    )
    return SparsePolynomial(n, terms)


class TestSubsets:
    def test_bitmask_convention(self):
        assert subset(1) == 1
        assert subset(1, 3) == 0b101
        assert subset([2, 3]) == 0b110
        assert indices(0b1011) == (1, 2, 4)
        assert degree(subset(1, 5, 9)) == 3

    def test_chain(self):
        assert chain(1, 3) == subset(1, 2, 3)
        assert chain(4, 4) == subset(4)
        assert chain(3, 2) == 0

    def test_labels(self):
        assert format_subset(subset(1, 2)) == "1,2"
        assert column_label(subset(1, 2)) == "1_2"
        assert column_label(0) == "empty"

    def test_bad_index(self):
        with pytest.raises(ValueError):
            subset(0)


class TestEvaluation:
    def test_monomial_examples(self):
        x = np.array([1.0, -1.0, 1.0, 1.0])
        assert eval_monomial(0, x) == 1.0
        assert eval_monomial(subset(1, 2), x) == -1.0
        assert eval_monomial(subset(1, 2, 3), -np.ones(4)) == -1.0

    def test_poly_examples(self):
        assert eval_poly(make_staircase(5, 3), np.ones(5)) == 3.0
        x = np.ones(12)
        x[0] = -1
        assert eval_poly(make_parity(12, 10), x) == -1.0
        assert eval_poly(SparsePolynomial.zero(4), x[:4]) == 0.0

    def test_batch_matches_pointwise(self):
        g = make_staircase(6, 4)
        X = cube(6)
        vals = eval_poly(g, X)
        assert vals.shape == (64,)
        assert vals[5] == eval_poly(g, X[5])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_poly(make_staircase(4, 2), np.ones(3))


class TestTransform:
    def test_fast_matches_naive(self):
        rng = np.random.default_rng(0)
        for n in range(1, 9):
            v = rng.normal(size=1 << n)
            assert np.allclose(walsh_hadamard(v), naive_fourier(v), atol=1e-12)

    def test_matches_sylvester_hadamard(self):
        # Sylvester ordering agrees with the bitmask convention
        rng = np.random.default_rng(1)
        v = rng.normal(size=64)
        assert np.allclose(walsh_hadamard(v), hadamard(64) @ v / 64, atol=1e-12)

    def test_staircase_coefficients(self):
        g = exact_fourier(lambda x: x[:, 0] + x[:, 0] * x[:, 1] + x[:, 0] * x[:, 1] * x[:, 2], 5)
        assert g.terms == {subset(1): 1.0, subset(1, 2): 1.0, subset(1, 2, 3): 1.0}

    def test_zero_function(self):
        assert exact_fourier(lambda x: np.zeros(len(x)), 6).terms == {}

    def test_non_power_of_two(self):
        with pytest.raises(ValueError):
            walsh_hadamard(np.ones(6))

    @settings(max_examples=60, deadline=None)
    @given(sparse_polys())
    def test_roundtrip(self, g):
        h = exact_fourier(g)
        for S in set(g.terms) | set(h.terms):
            assert abs(g.coefficient(S) - h.coefficient(S)) <= 1e-10

    @settings(max_examples=60, deadline=None)
    @given(sparse_polys())
    def test_parseval(self, g):
        vals = cube_values(g)
        assert float(np.mean(vals**2)) == pytest.approx(parseval_norm(g), rel=1e-9, abs=1e-12)


class TestEstimate:
    def _stream(self, g, n, seed=0):
        return make_stream(Measure("unbiased", n), g, seed)

    def test_orthonormal_estimates(self):
        g = SparsePolynomial(6, {subset(1, 2): 1.0})
        est, se = estimate_fourier(self._stream(g, 6), subset(1, 2), 30000)
        assert abs(est - 1.0) <= 3 * se + 1e-12
        est, se = estimate_fourier(self._stream(g, 6, 1), subset(1), 30000)
        assert abs(est) <= 3 * se

    def test_normalized_staircase(self):
        g = normalize_to_unit(make_staircase(30, 10))
        est, se = estimate_fourier(self._stream(g, 30), subset(1), 30000)
        assert abs(est - 1 / math.sqrt(10)) <= 3 * se

    def test_needs_m_for_stream(self):
        with pytest.raises(ValueError):
            estimate_fourier(self._stream(make_staircase(3, 1), 3), 1)


class TestStaircaseCheck:
    @pytest.mark.parametrize("k", [1, 2, 5, 10])
    def test_staircases_pass(self, k):
        rep = check_staircase(make_staircase(12, k), 1.0)
        assert rep.satisfies and rep.M_required == 1.0

    def test_parity_witness(self):
        rep = check_staircase(make_parity(5, 3), 100.0)
        assert not rep.satisfies and rep.violating_subset == subset(1, 2, 3)

    def test_skipped_degree(self):
        g = SparsePolynomial(4, {subset(1): 1.0, subset(1, 2, 3): 1.0})
        rep = check_staircase(g, 1.0)
        assert not rep.satisfies and rep.violating_subset == subset(1, 2, 3)

    def test_magnitude_range(self):
        g = SparsePolynomial(3, {subset(1): 1.0, subset(1, 2): 0.25})
        assert not check_staircase(g, 2.0).satisfies
        rep = check_staircase(g, 4.0)
        assert rep.satisfies and rep.M_required == 4.0

    def test_singletons_and_constant_need_no_predecessor(self):
        g = SparsePolynomial(3, {0: 1.0, subset(2): 1.0, subset(3): -1.0})
        assert check_staircase(g, 1.0).satisfies

    def test_m_below_one(self):
        with pytest.raises(ValueError):
            check_staircase(make_staircase(3, 2), 0.5)


class TestParseval:
    def test_examples(self):
        assert parseval_norm(make_staircase(10, 7)) == 7.0
        assert parseval_norm(SparsePolynomial.zero(3)) == 0.0

    def test_against_sampling(self):
        rng = np.random.default_rng(3)
        g = SparsePolynomial(8, {int(S): float(rng.normal()) for S in rng.integers(0, 256, 6)})
        x = rng.choice([-1.0, 1.0], size=(200000, 8))
        sq = eval_poly(g, x) ** 2
        assert abs(sq.mean() - parseval_norm(g)) <= 3 * sq.std() / math.sqrt(sq.size)

    def test_max_abs(self):
        assert max_abs_on_cube(make_staircase(6, 4)) == 4.0


class TestTextFormat:
    @settings(max_examples=60, deadline=None)
    @given(sparse_polys())
    def test_roundtrip(self, g):
        assert SparsePolynomial.from_text(g.to_text()) == g

    def test_parse(self):
        g = SparsePolynomial.from_text("# comment\n1:1.0\n1,2:0.5\n\n")
        assert g.terms == {1: 1.0, 3: 0.5}
        assert g.n == 2

    def test_header_sets_n(self):
        assert SparsePolynomial.from_text("# n=7\n2:1\n").n == 7

    def test_errors(self):
        with pytest.raises(ValueError):
            SparsePolynomial.from_text("1,2 1.0\n")
        with pytest.raises(ValueError):
            SparsePolynomial.from_text("1:1\n1:2\n")

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            SparsePolynomial(2, {subset(3): 1.0})
        with pytest.raises(ValueError):
            SparsePolynomial(2, {1: math.nan})
