"""Parallel randomized Tucker drivers on a simulated processor grid.

Random factors are drawn from the same ``(seed, stream)`` specs as the
serial algorithms, as if every processor drew them redundantly, so a
parallel run and its serial counterpart use identical sketches.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..algorithms import (
    DEFAULT_OVERSAMPLING,
    TuckerDecomposition,
    _check_ranks,
    _provenance,
    draw_reuse_factors,
    sthosvd,
    sthosvd_kron_phis,
)
from ..sketch import RngSpec, plan_subrank_matrix, plan_subrank_vector, resolve_distribution
from ..tensor import FlopCounter, thin_qr, top_eigvecs, unfold
from .dist import DistTensor
from .mttm import aao_mttm, all_modes_multi_ttm, is_mttm, parallel_ttm

SMALL_CORE_ENTRIES = 10**6
MTTM_VARIANTS = ("aao", "is")


def _sketch(G: DistTensor, phis: dict, j: int, mttm: str) -> np.ndarray:
    if mttm == "aao":
        return aao_mttm(G, phis, skip=j).allgather()
    if mttm == "is":
        return is_mttm(G, phis, skip=j, even=False).allgather()
    raise ValueError(f"unknown mttm variant {mttm!r}; choose from {MTTM_VARIANTS}")


def _distributed_sthosvd(G: DistTensor, r: Sequence[int]) -> tuple[np.ndarray, list]:
    grid = G.grid
    d = len(G.dims)
    V = []
    for j in range(d):
        # full mode-j rows per fiber, then sum the fiber-local Grams across the slice
        full = {}
        for fiber in grid.fibers(j):
            grid.all_gather(fiber, [G.blocks[q].ravel(order="F") for q in fiber])
            stacked = np.concatenate([G.blocks[q] for q in fiber], axis=j)
            for q in fiber:
                full[q] = stacked
        grams = {}
        for q in grid.ranks():
            M = unfold(full[q], j)
            grams[q] = M @ M.T
            grid.charge_flops(q, 2 * M.shape[0] ** 2 * M.shape[1])
        gram = None
        for t in range(grid.shape[j]):
            group = grid.slice(j, t)
            gram = grid.all_reduce(group, [grams[q] for q in group])[0]
        Uj, _ = top_eigvecs(gram, r[j])
        V.append(Uj)
        G = parallel_ttm(G, Uj, j, transpose=True, even=False)
    return G.allgather(), V


def _truncate(G: DistTensor, r: Sequence[int], threshold: int) -> tuple[np.ndarray, list, str]:
    grid = G.grid
    with grid.in_phase("truncate"):
        if G.size <= threshold:
            G_hat = G.allgather()
            c = FlopCounter()
            T = sthosvd(G_hat, r, method="svd", counter=c)
            for q in grid.ranks():
                grid.charge_flops(q, c.total())
            return T.core, T.factors, "replicated"
        core, V = _distributed_sthosvd(G, r)
        return core, V, "distributed"


def _result(core, V, bases, prov, G_hat, keep_debug) -> TuckerDecomposition:
    factors = [np.asfortranarray(Q @ Vj) for Q, Vj in zip(bases, V)]
    debug = {"core_hat": G_hat.gather(), "bases": bases} if keep_debug else {}
    return TuckerDecomposition(np.asfortranarray(core), factors, prov, debug)


def parallel_rsthosvd_kron(X: DistTensor, r: Sequence[int], p: int = DEFAULT_OVERSAMPLING,
                           distribution: str | None = None, seed: int = 0, mttm: str = "aao",
                           core_threshold: int = SMALL_CORE_ENTRIES, p_max_adjust: int = 16,
                           keep_debug: bool = False) -> TuckerDecomposition:
    """Sequentially truncated Kronecker-sketched Tucker on a processor grid.

    Per mode: sketch the partially truncated core (all-at-once or
    in-sequence multi-TTM), all-gather the small sketch, take its QR on
    every processor, and truncate the distributed core with a parallel TTM.
    The input must be evenly distributed; intermediate cores whose sizes
    come from ``l_j`` may split unevenly.
    """
    grid = X.grid
    dims = X.dims
    r = _check_ranks(dims, r, p)
    d = len(dims)
    S, ells = plan_subrank_matrix(dims, r, p, p_max_adjust)
    dist, fallbacks = resolve_distribution(distribution, dims)
    base = RngSpec(seed, ("rsthosvd_kron",))
    G = X
    bases = []
    for j in range(d):
        phis = sthosvd_kron_phis(dims, ells, S, j, dist, base, fallbacks)
        with grid.in_phase("sketch"):
            Y = _sketch(G, phis, j, mttm)
        Q = thin_qr(unfold(Y, j))[0]
        bases.append(Q)
        with grid.in_phase("core"):
            G = parallel_ttm(G, Q, j, transpose=True, even=False)
    core, V, policy = _truncate(G, r, core_threshold)
    prov = _provenance("rsthosvd-kron", r, p, seed, dist, fallbacks, subranks=S.tolist(),
                       adjusted_l=ells, grid=list(grid.shape), mttm=mttm, core_policy=policy)
    return _result(core, V, bases, prov, G, keep_debug)


def parallel_rhkron_re(X: DistTensor, r: Sequence[int], p: int = DEFAULT_OVERSAMPLING,
                       distribution: str | None = None, seed: int = 0, use_dimtree: bool = True,
                       core_threshold: int = SMALL_CORE_ENTRIES,
                       keep_debug: bool = False) -> TuckerDecomposition:
    """Kronecker-reuse randomized HOSVD on a processor grid.

    One draw of ``d`` factors, all mode sketches through the distributed
    dimension tree (or one all-at-once multi-TTM per mode), redundant QRs,
    then in-sequence core formation with every ``Q_j^T``.
    """
    grid = X.grid
    dims = X.dims
    r = _check_ranks(dims, r, p)
    d = len(dims)
    s = plan_subrank_vector(r, p, dims)
    dist, fallbacks = resolve_distribution(distribution, dims)
    phis = draw_reuse_factors(dims, s, dist, seed, fallbacks)
    with grid.in_phase("sketch"):
        if use_dimtree:
            scattered = all_modes_multi_ttm(X, phis)
        else:
            scattered = [aao_mttm(X, dict(enumerate(phis)), skip=j) for j in range(d)]
        sketches = [sc.allgather() for sc in scattered]
    bases = [thin_qr(unfold(Y, j))[0] for j, Y in enumerate(sketches)]
    with grid.in_phase("core"):
        G = is_mttm(X, {j: (Q, True) for j, Q in enumerate(bases)}, even=False)
    core, V, policy = _truncate(G, r, core_threshold)
    prov = _provenance("rhkron-re", r, p, seed, dist, fallbacks, subranks=s.tolist(),
                       dimtree=bool(use_dimtree), grid=list(grid.shape), core_policy=policy)
    return _result(core, V, bases, prov, G, keep_debug)


PARALLEL_ALGORITHMS = {"alg11": parallel_rsthosvd_kron, "alg12": parallel_rhkron_re}

