import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randtucker.algorithms import relative_error, rhosvd_kron_reuse, rsthosvd_kron
from randtucker.dimtree import all_mode_sketches
from randtucker.gridsim import (
    DivisibilityError,
    Grid,
    aao_mttm,
    aao_payload,
    all_modes_multi_ttm,
    cost_model,
    distribute,
    gather,
    is_first_payload,
    is_mttm,
    mttm_flops,
    parallel_rhkron_re,
    parallel_rsthosvd_kron,
    parallel_ttm,
)
from randtucker.synth import synth_exact_lowrank, synth_geometric
from randtucker.tensor import FlopCounter, multi_ttm, tensor_norm, ttm


def rand(shape, seed=0):
    return np.asfortranarray(np.random.default_rng(seed).standard_normal(shape))


def rel(a, b):
    return tensor_norm(a - b) / tensor_norm(b)


def conserved(grid):
    return all(c.words_sent == c.words_recv for c in grid.stats.collectives)


class TestGrid:
    def test_rank_coords_bijective(self):
        g = Grid((2, 3, 4))
        assert sorted(g.rank(g.coords(r)) for r in g.ranks()) == list(range(24))
        assert g.coords(1) == (1, 0, 0)

    def test_fiber_and_slice(self):
        g = Grid((2, 2, 2))
        assert g.fiber(0, 1) == [0, 2]
        assert g.slice(2, 1) == [4, 5, 6, 7]

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            Grid((2, 0))


class TestDistribution:
    def test_worked_example(self):
        X = rand((8, 6, 2))
        D = distribute(X, Grid((2, 3, 1)))
        assert all(b.shape == (4, 2, 2) for b in D.blocks)

    def test_trivial_grid(self):
        X = rand((3, 4, 5))
        assert np.array_equal(distribute(X, Grid((1, 1, 1))).blocks[0], X)

    @settings(max_examples=30, deadline=None)
    @given(q=st.lists(st.integers(1, 3), min_size=1, max_size=4), m=st.data(), seed=st.integers(0, 99))
    def test_roundtrip_bitwise(self, q, m, seed):
        dims = tuple(qk * m.draw(st.integers(1, 3)) for qk in q)
        X = rand(dims, seed)
        assert np.array_equal(gather(distribute(X, Grid(q))), X)

    def test_nondivisible(self):
        with pytest.raises(DivisibilityError):
            distribute(rand((5, 4)), Grid((2, 2)))


class TestCollectives:
    def test_singleton(self):
        g = Grid((1,))
        out = g.reduce_scatter([0], [np.arange(4.0)])
        assert np.array_equal(out[0], np.arange(4.0))
        assert g.stats.total("words_sent") == 0

    def test_reduce_scatter_by_hand(self):
        g = Grid((2,))
        a = np.array([1.0, 2, 3, 4])
        out = g.reduce_scatter([0, 1], [a, a])
        assert np.array_equal(out[0], [2, 4]) and np.array_equal(out[1], [6, 8])

    def test_reduce_scatter_words(self):
        g = Grid((4,))
        g.reduce_scatter(list(range(4)), [np.ones(80)] * 4)
        assert all(g.stats.get(r, key="words_sent") == 60 for r in range(4))
        assert all(g.stats.get(r, key="messages") == 2 for r in range(4))

    def test_reduce_scatter_errors(self):
        g = Grid((2,))
        with pytest.raises(ValueError):
            g.reduce_scatter([0, 1], [np.ones(4), np.ones(3)])
        with pytest.raises(DivisibilityError):
            g.reduce_scatter([0, 1], [np.ones(3), np.ones(3)])

    def test_all_gather(self):
        g = Grid((2,))
        out = g.all_gather([0, 1], [np.array([1.0]), np.array([2.0])])
        assert all(np.array_equal(np.concatenate(o), [1, 2]) for o in out)
        assert g.stats.get(0, key="words_recv") == 1

    def test_all_gather_singleton(self):
        g = Grid((1,))
        assert np.array_equal(g.all_gather([0], [np.array([3.0])])[0][0], [3.0])

    def test_all_reduce(self):
        g = Grid((4,))
        out = g.all_reduce(list(range(4)), [np.full(8, float(r)) for r in range(4)])
        assert all(np.array_equal(o, np.full(8, 6.0)) for o in out)
        assert g.stats.get(0, key="words_sent") == 2 * 3 * 8 // 4

    def test_all_reduce_mismatch(self):
        with pytest.raises(ValueError):
            Grid((2,)).all_reduce([0, 1], [np.ones(2), np.ones(3)])

    @settings(max_examples=40, deadline=None)
    @given(g=st.integers(1, 6), k=st.integers(1, 5), kind=st.sampled_from(["rs", "ag", "ar"]))
    def test_conservation(self, g, k, kind):
        grid = Grid((g,))
        group = list(range(g))
        if kind == "rs":
            grid.reduce_scatter(group, [np.ones(g * k)] * g)
        elif kind == "ag":
            grid.all_gather(group, [np.ones(k + t) for t in range(g)])
        else:
            grid.all_reduce(group, [np.ones(k)] * g)
        assert conserved(grid)
        assert grid.stats.total("words_sent") == grid.stats.total("words_recv")

    def test_csv(self):
        g = Grid((2,))
        with g.in_phase("x"):
            g.reduce_scatter([0, 1], [np.ones(4)] * 2)
        text = g.stats.to_csv()
        assert text.splitlines()[0] == "rank,phase,flops,words_sent,words_recv,messages,payload"
        assert len(text.splitlines()) == 3
        buf = io.StringIO()
        g.stats.to_csv(buf)
        assert buf.getvalue() == text


class TestParallelTTM:
    def test_identity_unchanged(self):
        X = rand((4, 6, 4))
        D = distribute(X, Grid((1, 2, 1)))
        assert np.array_equal(parallel_ttm(D, np.eye(6), 1).gather(), X)

    def test_vs_serial(self):
        X, U = rand((8, 8, 8)), rand((4, 8), 1)
        g = Grid((2, 2, 2))
        Y = parallel_ttm(distribute(X, g), U, 1).gather()
        assert rel(Y, ttm(X, U, 1)) <= 1e-12
        assert conserved(g)

    def test_first_sthosvd_ttm_words(self):
        n, q, r = 16, 2, 4
        g = Grid((q, q, q))
        parallel_ttm(distribute(rand((n, n, n)), g), rand((n, r), 1), 0, transpose=True)
        payload = r * (n // q) ** 2
        assert g.stats.get(0, key="payload") == payload
        assert g.stats.get(0, key="words_sent") == (q - 1) * payload // q

    def test_nondivisible_rows(self):
        with pytest.raises(DivisibilityError):
            parallel_ttm(distribute(rand((4, 4)), Grid((2, 2))), rand((3, 4)), 0)
        Y = parallel_ttm(distribute(rand((4, 4)), Grid((2, 2))), np.eye(3, 4), 0, even=False)
        assert Y.dims == (3, 4)

    def test_shape_error(self):
        with pytest.raises(ValueError):
            parallel_ttm(distribute(rand((4, 4)), Grid((2, 2))), rand((2, 3)), 0)


class TestMultiTTM:
    def test_trivial_grid_identity(self):
        X = rand((3, 4, 5))
        D = distribute(X, Grid((1, 1, 1)))
        assert np.array_equal(is_mttm(D, {k: np.eye(n) for k, n in enumerate(X.shape)}).gather(), X)

    def test_aao_trivial_grid(self):
        X = rand((3, 4, 5))
        M = {1: rand((2, 4), 1), 2: rand((2, 5), 2)}
        g = Grid((1, 1, 1))
        Y = aao_mttm(distribute(X, g), M, skip=0).gather()
        assert rel(Y, multi_ttm(X, M)) <= 1e-14
        assert g.stats.total("words_sent") == 0

    def test_is_and_aao_vs_serial(self):
        X = rand((8, 8, 8))
        M = {k: rand((2, 8), k + 1) for k in range(3)}
        ref = multi_ttm(X, {0: M[0], 2: M[2]})
        D = distribute(X, Grid((2, 2, 2)))
        a = is_mttm(D, M, skip=1).gather()
        b = aao_mttm(D, M, skip=1).gather()
        assert rel(a, ref) <= 1e-12 and rel(b, a) <= 1e-10

    def test_is_flops_formula(self):
        n, q, s, d = 16, 2, 2, 3
        g = Grid((q,) * d)
        is_mttm(distribute(rand((n,) * d), g), {k: rand((s, n), k) for k in range(d)})
        assert g.stats.get(0, key="flops") == mttm_flops(n, s, d, q, "is")

    def test_aao_flops_formula(self):
        n, q, s, d = 16, 2, 2, 3
        g = Grid((q,) * d)
        M = {k: rand((s, n), k) for k in range(d)}
        aao_mttm(distribute(rand((n,) * d), g), M, skip=0)
        m = n // q
        exact = sum(2 * s**i * m ** (d - i + 1) for i in range(1, d))
        assert g.stats.get(0, key="flops") == exact

    @pytest.mark.parametrize("n,q,s", [(800, 4, 20), (64, 4, 2)])
    def test_payload_formulas(self, n, q, s):
        assert aao_payload(n, s, 3, q) == s * s * n // q
        assert is_first_payload(n, s, 3, q) == s * (n // q) ** 2

    def test_payloads_counted(self):
        n, q, s, d = 32, 4, 2, 3
        X = rand((n,) * d)
        M = {k: rand((s, n), k) for k in range(d)}
        g1, g2 = Grid((q,) * d), Grid((q,) * d)
        aao_mttm(distribute(X, g1), M, skip=0)
        is_mttm(distribute(X, g2), M, skip=0, even=False)
        assert g1.stats.collectives[0].payload == aao_payload(n, s, d, q)
        assert g2.stats.collectives[0].payload == is_first_payload(n, s, d, q)
        g = q ** (d - 1)
        assert g1.stats.get(0, key="words_sent") == (g - 1) * aao_payload(n, s, d, q) // g


class TestAllModes:
    def test_d2(self):
        X = rand((4, 6))
        P = [rand((2, 4), 1), rand((2, 6), 2)]
        out = all_modes_multi_ttm(distribute(X, Grid((2, 2))), P)
        assert rel(out[0].gather(), X @ P[1].T) <= 1e-12
        assert rel(out[1].gather(), P[0] @ X) <= 1e-12

    def test_d4_vs_serial(self):
        X = rand((8, 8, 8, 8))
        P = [rand((2, 8), k) for k in range(4)]
        g = Grid((2, 2, 2, 2))
        out = all_modes_multi_ttm(distribute(X, g), P)
        for a, b in zip(out, all_mode_sketches(X, P)):
            assert rel(a.gather(), b) <= 1e-10
        assert conserved(g)

    def test_local_flops_leading_term(self):
        n, q, s, d = 32, 2, 2, 3
        X = rand((n,) * d)
        P = [rand((s, n), k) for k in range(d)]
        c = FlopCounter()
        all_mode_sketches(X, P, c)
        g = Grid((q,) * d)
        all_modes_multi_ttm(distribute(X, g), P)
        local = g.stats.get(0, key="flops")
        # the leading two products scale exactly by 1/P
        assert local >= 4 * s * n**d // q**d
        assert abs(local - c.total() / q**d) <= 0.1 * c.total() / q**d


@pytest.fixture(scope="module")
def geom40():
    return synth_geometric((40, 40, 40), 0.4, seed=1)


class TestDrivers:
    @pytest.mark.parametrize("mttm", ["aao", "is"])
    @pytest.mark.parametrize("r,p", [((5, 5, 5), 3), ((10, 10, 10), 5)])
    def test_alg11_matches_serial(self, geom40, mttm, r, p):
        g = Grid((2, 2, 2))
        T = parallel_rsthosvd_kron(distribute(geom40, g), r, p, seed=3, mttm=mttm)
        S = rsthosvd_kron(geom40, r, p, seed=3)
        assert relative_error(geom40, T) == pytest.approx(relative_error(geom40, S), rel=1e-8)
        for U, V in zip(T.factors, S.factors):
            assert np.linalg.norm(U @ U.T - V @ V.T) <= 1e-8
        assert conserved(g)

    @pytest.mark.parametrize("dimtree", [True, False])
    def test_alg12_matches_serial(self, geom40, dimtree):
        g = Grid((2, 2, 2))
        T = parallel_rhkron_re(distribute(geom40, g), (10, 10, 10), 5, seed=3, use_dimtree=dimtree)
        S = rhosvd_kron_reuse(geom40, (10, 10, 10), 5, seed=3)
        assert relative_error(geom40, T) == pytest.approx(relative_error(geom40, S), rel=1e-8)
        for U, V in zip(T.factors, S.factors):
            assert np.linalg.norm(U @ U.T - V @ V.T) <= 1e-8

    @pytest.mark.parametrize("func", [parallel_rsthosvd_kron, parallel_rhkron_re])
    def test_distributed_truncation(self, geom40, func):
        a = func(distribute(geom40, Grid((2, 2, 2))), (5, 5, 5), 3, seed=1)
        g = Grid((2, 2, 2))
        b = func(distribute(geom40, g), (5, 5, 5), 3, seed=1, core_threshold=0)
        assert a.provenance["core_policy"] == "replicated" and b.provenance["core_policy"] == "distributed"
        assert relative_error(geom40, b) == pytest.approx(relative_error(geom40, a), rel=1e-8)
        assert conserved(g)

    @pytest.mark.parametrize("func", [parallel_rsthosvd_kron, parallel_rhkron_re])
    def test_exact_rank(self, func):
        X = synth_exact_lowrank((16, 16, 16), (3, 3, 3), seed=0)
        T = func(distribute(X, Grid((2, 2, 2))), (3, 3, 3), 3)
        assert relative_error(X, T) <= 1e-8

    def test_deterministic(self, geom40):
        a = parallel_rhkron_re(distribute(geom40, Grid((2, 2, 2))), (5, 5, 5), 3, seed=2)
        b = parallel_rhkron_re(distribute(geom40, Grid((2, 2, 2))), (5, 5, 5), 3, seed=2)
        assert np.array_equal(a.core, b.core)

    def test_factor_words_leading_order(self):
        n, q, d = 64, 2, 3
        g = Grid((q,) * d)
        parallel_rsthosvd_kron(distribute(rand((n,) * d), g), (2, 2, 2), 2)
        ell = 4
        rs = [c for c in g.stats.collectives if c.kind == "reduce_scatter" and c.phase == "sketch"]
        assert sum(c.payload for c in rs if 0 in c.group) == d * ell * n // q


class TestCostModel:
    def test_rows(self):
        n, r, d, q = 64, 4, 3, 2
        P = q**d
        assert cost_model("sthosvd", n, r, d, q)["factor_flops"] == n ** (d + 1) / P
        assert cost_model("alg11", n, r, d, q)["factor_flops"] == pytest.approx(2 * 2 * n**d / P)
        assert cost_model("alg12", n, r, d, q)["factor_flops"] == pytest.approx(4 * 2 * n**d / P)
        for alg in ("sthosvd", "alg11", "alg12"):
            assert cost_model(alg, n, r, d, q)["core_flops"] == 2 * r * n**d / P
        assert cost_model("choi", n, r, d, q)["core_flops"] is None

    def test_unknown(self):
        with pytest.raises(ValueError):
            cost_model("x", 8, 2, 3, 2)

    @staticmethod
    def _sketch_flops(func, n):
        rng = np.random.default_rng(n)
        g = Grid((2, 2, 2))
        func(distribute(np.asfortranarray(rng.standard_normal((n, n, n))), g), (2, 2, 2), 2)
        return g.stats.max_over_ranks("flops", "sketch")

    def test_alg12_flops_converge(self):
        ratios = [self._sketch_flops(parallel_rhkron_re, n) / cost_model("alg12", n, 4, 3, 2)["factor_flops"]
                  for n in (32, 64)]
        assert ratios[1] < ratios[0] and abs(ratios[1] - 1) <= 0.10

    def test_alg11_flops_converge(self):
        ratios = [self._sketch_flops(parallel_rsthosvd_kron, n) / cost_model("alg11", n, 4, 3, 2)["factor_flops"]
                  for n in (32, 64, 128)]
        assert ratios[0] > ratios[1] > ratios[2] and abs(ratios[2] - 1) <= 0.10
