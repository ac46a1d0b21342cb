from math import prod

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randtucker.sketch import (
    GAUSSIAN,
    SRHT,
    PlanningError,
    RngSpec,
    draw_sketch_matrix,
    gen_gaussian,
    gen_srht,
    plan_subrank_matrix,
    plan_subrank_vector,
    resolve_distribution,
    validate_subrank_matrix,
    validate_subrank_vector,
)


class TestGaussian:
    def test_deterministic(self):
        a = gen_gaussian(5, 7, RngSpec(3, ("x", 1)))
        b = gen_gaussian(5, 7, RngSpec(3, ("x", 1)))
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        assert not np.array_equal(gen_gaussian(4, 4, RngSpec(3, (1,))), gen_gaussian(4, 4, RngSpec(3, (2,))))

    def test_moments(self):
        g = gen_gaussian(100, 1000, RngSpec(0))
        assert abs(g.mean()) < 0.02 and abs(g.var() - 1) < 0.05

    def test_child_stream(self):
        assert RngSpec(1, ("a",)).child(2, 3) == RngSpec(1, ("a", 2, 3))


class TestSRHT:
    def test_small_by_hand(self):
        P = gen_srht(4, 2, RngSpec(0))
        assert set(np.round(np.abs(P), 12).ravel()) == {0.5}
        assert np.allclose(P.T @ P, np.eye(2), atol=1e-15)

    def test_full_is_orthogonal(self):
        P = gen_srht(8, 8, RngSpec(1))
        assert np.allclose(P @ P.T, np.eye(8), atol=1e-14)

    def test_kronecker_orthonormal(self):
        O = np.kron(gen_srht(8, 3, RngSpec(1)), gen_srht(4, 2, RngSpec(2)))
        assert np.linalg.norm(O.T @ O - np.eye(6)) <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(k=st.integers(0, 7), data=st.data(), seed=st.integers(0, 10**6))
    def test_exact_orthonormality(self, k, data, seed):
        n = 2**k
        s = data.draw(st.integers(1, n))
        P = gen_srht(n, s, RngSpec(seed))
        assert np.abs(P.T @ P - np.eye(s)).max() <= 1e-14

    def test_requires_power_of_two(self):
        with pytest.raises(ValueError):
            gen_srht(6, 2, RngSpec(0))

    def test_fallback_recorded(self):
        fb = []
        M = draw_sketch_matrix(3, 10, SRHT, RngSpec(0), fb)
        assert M.shape == (3, 10) and len(fb) == 1

    def test_resolve_defaults(self):
        assert resolve_distribution(None, [8, 16]) == (SRHT, [])
        assert resolve_distribution(None, [8, 10]) == (GAUSSIAN, [])
        dist, fb = resolve_distribution(SRHT, [10])
        assert dist == GAUSSIAN and fb


class TestSubrankMatrix:
    def test_l15_balanced(self):
        S, adj = plan_subrank_matrix((100, 100, 100), (10, 10, 10), 5)
        assert adj == [15, 15, 15]
        for j in range(3):
            assert sorted(int(v) for k, v in enumerate(S[j]) if k != j) == [3, 5]

    def test_large_ells(self):
        dims = (1000, 1000, 1000)
        ells = (507, 510, 366)
        S, adj = plan_subrank_matrix(dims, [l - 5 for l in ells], 5)
        for j in range(3):
            assert prod(int(v) for v in S[j]) == adj[j] >= ells[j]
        validate_subrank_matrix(np.array([[1, 39, 13], [30, 1, 17], [6, 61, 1]]), ells, dims)

    def test_d2(self):
        S, _ = plan_subrank_matrix((20, 30), (4, 6), 2)
        assert S[0, 1] == 6 and S[1, 0] == 8

    def test_prime_adjusts_upward(self):
        # 13 has no factorization with both factors >= 2
        S, adj = plan_subrank_matrix((50, 50, 50), (8, 8, 8), 5)
        assert adj[0] == 14 and prod(S[0]) == 14

    def test_infeasible(self):
        with pytest.raises(PlanningError):
            plan_subrank_matrix((4, 4, 4), (4, 4, 4), 2)

    @settings(max_examples=60, deadline=None)
    @given(d=st.integers(2, 4), data=st.data())
    def test_constraints_hold(self, d, data):
        dims = data.draw(st.lists(st.integers(4, 40), min_size=d, max_size=d))
        p = data.draw(st.integers(0, 5))
        ranks = [data.draw(st.integers(1, n - p)) for n in dims if n - p >= 1]
        if len(ranks) != d:
            return
        try:
            S, adj = plan_subrank_matrix(dims, ranks, p)
        except PlanningError:
            return
        validate_subrank_matrix(S, [r + p for r in ranks], dims)
        for j in range(d):
            assert prod(int(v) for v in S[j]) == adj[j]


class TestSubrankVector:
    def test_l15(self):
        s = plan_subrank_vector((10, 10, 10), 5)
        assert list(s) == [4, 4, 4]

    def test_d2(self):
        assert list(plan_subrank_vector((3, 7), 1)) == [8, 4]

    def test_all_ones(self):
        assert list(plan_subrank_vector((1, 1, 1, 1), 0)) == [1, 1, 1, 1]

    def test_exceeds_dim(self):
        with pytest.raises(PlanningError):
            plan_subrank_vector((2, 2, 30), 0, dims=(4, 4, 40))

    @settings(max_examples=80, deadline=None)
    @given(ells=st.lists(st.integers(1, 60), min_size=2, max_size=5))
    def test_constraints_hold(self, ells):
        s = plan_subrank_vector(ells, 0)
        validate_subrank_vector(s, ells)
        d = len(ells)
        for i in range(d):
            if s[i] > 1:
                # minimality of each s_i
                assert ((s[i] - 1) * ells[i]) ** (d - 1) < prod(ells)
