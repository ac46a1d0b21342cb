"""Deterministic and randomized Tucker decompositions."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Sequence

import numpy as np

from .sketch import (
    RngSpec,
    draw_sketch_matrix,
    draw_test_matrix,
    plan_subrank_matrix,
    plan_subrank_vector,
    resolve_distribution,
)
from .tensor import (
    FlopCounter,
    leading_left_singular_vectors,
    multi_ttm,
    tensor_norm,
    thin_qr,
    thin_svd,
    ttm,
    unfold,
)

DEFAULT_OVERSAMPLING = 5

ALGORITHMS = ("hosvd", "sthosvd", "rhosvd", "rsthosvd", "rhosvd-kron", "rsthosvd-kron", "rhkron-re")


class RankError(ValueError):
    """Requested ranks are infeasible for the tensor dimensions."""


@dataclass
class TuckerDecomposition:
    """Core tensor plus one factor matrix per mode.

    ``provenance`` records how the decomposition was produced (algorithm,
    ranks, oversampling, seed, distribution, subrank plan, fallbacks).
    ``debug`` optionally holds intermediates such as the untruncated core
    and the range-finder bases.
    """

    core: np.ndarray
    factors: list
    provenance: dict = field(default_factory=dict)
    debug: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.factors) != self.core.ndim:
            raise ValueError("need one factor per core mode")
        for j, U in enumerate(self.factors):
            if U.shape[1] != self.core.shape[j]:
                raise ValueError(f"factor {j} has {U.shape[1]} columns, core dim is {self.core.shape[j]}")

    @property
    def ranks(self) -> tuple:
        return self.core.shape

    @property
    def dims(self) -> tuple:
        return tuple(U.shape[0] for U in self.factors)


def _check_ranks(dims: Sequence[int], ranks: Sequence[int], p: int = 0) -> tuple:
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(dims):
        raise RankError(f"{len(ranks)} ranks given for a {len(dims)}-way tensor")
    for j, (n, r) in enumerate(zip(dims, ranks)):
        if r < 1 or r + p > n:
            raise RankError(f"mode {j}: rank {r} (+{p} oversampling) infeasible for dim {n}")
    return ranks


def reconstruct(T: TuckerDecomposition) -> np.ndarray:
    """Full tensor ``G x_1 U_1 ... x_d U_d``."""
    return multi_ttm(T.core, {j: U for j, U in enumerate(T.factors)})


def relative_error(X: np.ndarray, T: TuckerDecomposition) -> float:
    if tuple(X.shape) != T.dims:
        raise ValueError(f"tensor dims {X.shape} != decomposition dims {T.dims}")
    return tensor_norm(X - reconstruct(T)) / tensor_norm(X)


# --- deterministic -------------------------------------------------------------

def hosvd(X: np.ndarray, r: Sequence[int], counter: FlopCounter | None = None) -> TuckerDecomposition:
    r = _check_ranks(X.shape, r)
    factors = [leading_left_singular_vectors(unfold(X, j), r[j])[0] for j in range(X.ndim)]
    core = multi_ttm(X, {j: (U, True) for j, U in enumerate(factors)}, counter=counter)
    return TuckerDecomposition(core, factors, {"algorithm": "hosvd", "ranks": list(r)})


def sthosvd(X: np.ndarray, r: Sequence[int], mode_order: Sequence[int] | None = None,
            method: str = "gram", counter: FlopCounter | None = None) -> TuckerDecomposition:
    """Sequentially truncated HOSVD.

    ``method="gram"`` takes singular vectors from the Gram matrix of each
    unfolding; ``"svd"`` uses a direct SVD (better for small cores).
    """
    r = _check_ranks(X.shape, r)
    d = X.ndim
    order = list(range(d)) if mode_order is None else [int(j) for j in mode_order]
    if sorted(order) != list(range(d)):
        raise ValueError(f"mode_order {order} is not a permutation of 0..{d - 1}")
    G = X
    factors: list = [None] * d
    for j in order:
        Gj = unfold(G, j)
        if method == "svd":
            U = thin_svd(Gj)[0][:, :r[j]]
        else:
            U = leading_left_singular_vectors(Gj, r[j])[0]
        factors[j] = U
        G = ttm(G, U, j, transpose=True, counter=counter)
    return TuckerDecomposition(np.asfortranarray(G), factors,
                               {"algorithm": "sthosvd", "ranks": list(r), "mode_order": order})


# --- matrix building blocks ----------------------------------------------------

def rand_range_finder(M: np.ndarray, Omega: np.ndarray) -> np.ndarray:
    """Orthonormal basis ``Q`` for the range of ``M @ Omega``."""
    if Omega.shape[0] != M.shape[1]:
        raise ValueError(f"Omega has {Omega.shape[0]} rows, M has {M.shape[1]} columns")
    if Omega.shape[1] > M.shape[0]:
        raise ValueError("Omega must have no more columns than M has rows")
    return thin_qr(M @ Omega)[0]


def rand_svd(M: np.ndarray, r: int, Omega: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Randomized SVD: range finder, then an SVD of ``Q^T M`` truncated to rank ``r``."""
    if r > Omega.shape[1]:
        raise ValueError(f"rank {r} exceeds sketch size {Omega.shape[1]}")
    Q = rand_range_finder(M, Omega)
    Uh, s, V = thin_svd(Q.T @ M)
    return Q @ Uh[:, :r], s[:r], V[:, :r]


def truncate_core(G_hat: np.ndarray, r: Sequence[int]) -> tuple[np.ndarray, list]:
    """Deterministic STHOSVD of the small core; returns ``(G, [V_j])``."""
    r = _check_ranks(G_hat.shape, r)
    T = sthosvd(G_hat, r, method="svd")
    return T.core, T.factors


def _finish(X_hat_core: np.ndarray, bases: list, r: tuple, provenance: dict,
            truncate: bool, keep_debug: bool) -> TuckerDecomposition:
    debug = {"core_hat": X_hat_core, "bases": bases} if keep_debug else {}
    if not truncate:
        provenance["output_rank"] = list(X_hat_core.shape)
        return TuckerDecomposition(np.asfortranarray(X_hat_core), list(bases), provenance, debug)
    G, V = truncate_core(X_hat_core, r)
    factors = [np.asfortranarray(Q @ Vj) for Q, Vj in zip(bases, V)]
    provenance["output_rank"] = list(r)
    return TuckerDecomposition(G, factors, provenance, debug)


def _provenance(name, r, p, seed, dist, fallbacks, **extra):
    prov = {"algorithm": name, "ranks": list(r), "oversampling": int(p), "seed": int(seed),
            "distribution": dist, "fallbacks": fallbacks}
    prov.update(extra)
    return prov


# --- randomized, unstructured test matrices -------------------------------------

def rhosvd(X: np.ndarray, r: Sequence[int], p: int = DEFAULT_OVERSAMPLING, distribution: str | None = None,
           seed: int = 0, truncate: bool = True, keep_debug: bool = False,
           counter: FlopCounter | None = None) -> TuckerDecomposition:
    """Randomized HOSVD with one dense test matrix per mode."""
    r = _check_ranks(X.shape, r, p)
    d = X.ndim
    long_dims = [prod(X.shape) // X.shape[j] for j in range(d)]
    dist, fallbacks = resolve_distribution(distribution, long_dims)
    base = RngSpec(seed, ("rhosvd",))
    bases = []
    for j in range(d):
        Omega = draw_test_matrix(long_dims[j], r[j] + p, dist, base.child(j), fallbacks)
        Xj = unfold(X, j)
        if counter is not None:
            counter.add(2 * Xj.shape[0] * Xj.shape[1] * Omega.shape[1], "sketch")
        bases.append(rand_range_finder(Xj, Omega))
    G_hat = multi_ttm(X, {j: (Q, True) for j, Q in enumerate(bases)}, counter=counter)
    return _finish(G_hat, bases, r, _provenance("rhosvd", r, p, seed, dist, fallbacks), truncate, keep_debug)


def rsthosvd(X: np.ndarray, r: Sequence[int], p: int = DEFAULT_OVERSAMPLING, distribution: str | None = None,
             seed: int = 0, truncate: bool = True, keep_debug: bool = False,
             counter: FlopCounter | None = None) -> TuckerDecomposition:
    """Randomized STHOSVD: the mode-``j`` test matrix has ``prod(l_<j) * prod(n_>j)`` rows."""
    r = _check_ranks(X.shape, r, p)
    d = X.ndim
    ells = [rj + p for rj in r]
    long_dims = [prod(ells[:j]) * prod(X.shape[j + 1:]) for j in range(d)]
    dist, fallbacks = resolve_distribution(distribution, long_dims)
    base = RngSpec(seed, ("rsthosvd",))
    G = X
    bases = []
    for j in range(d):
        Gj = unfold(G, j)
        Omega = draw_test_matrix(Gj.shape[1], ells[j], dist, base.child(j), fallbacks)
        if counter is not None:
            counter.add(2 * Gj.shape[0] * Gj.shape[1] * ells[j], "sketch")
        Q = rand_range_finder(Gj, Omega)
        bases.append(Q)
        G = ttm(G, Q, j, transpose=True, counter=counter)
    return _finish(G, bases, r, _provenance("rsthosvd", r, p, seed, dist, fallbacks), truncate, keep_debug)


# --- randomized, Kronecker-structured sketches ----------------------------------

def rhosvd_kron(X: np.ndarray, r: Sequence[int], p: int = DEFAULT_OVERSAMPLING,
                distribution: str | None = None, seed: int = 0, truncate: bool = True,
                keep_debug: bool = False, counter: FlopCounter | None = None,
                p_max_adjust: int = 16) -> TuckerDecomposition:
    """Randomized HOSVD with a fresh Kronecker sketch (``d-1`` small factors) per mode."""
    r = _check_ranks(X.shape, r, p)
    d = X.ndim
    S, adjusted = plan_subrank_matrix(X.shape, r, p, p_max_adjust)
    dist, fallbacks = resolve_distribution(distribution, X.shape)
    base = RngSpec(seed, ("rhosvd_kron",))
    bases = []
    for j in range(d):
        phis = {k: draw_sketch_matrix(int(S[j, k]), X.shape[k], dist, base.child(j, k), fallbacks)
                for k in range(d) if k != j}
        Y = multi_ttm(X, phis, counter=counter)
        bases.append(thin_qr(unfold(Y, j))[0])
    G_hat = multi_ttm(X, {j: (Q, True) for j, Q in enumerate(bases)}, counter=counter)
    prov = _provenance("rhosvd-kron", r, p, seed, dist, fallbacks,
                       subranks=S.tolist(), adjusted_l=adjusted)
    return _finish(G_hat, bases, r, prov, truncate, keep_debug)


def sthosvd_kron_phis(dims: Sequence[int], ells: Sequence[int], S: np.ndarray, j: int, dist: str,
                      base: RngSpec, fallbacks: list | None = None) -> dict:
    """Random factors for mode ``j`` of the sequentially truncated Kronecker sketch.

    Factor ``k`` has ``s_jk`` rows and ``l_k`` columns (the planned,
    possibly adjusted, sketch size) for processed modes
    ``k < j``, ``n_k`` columns otherwise.
    """
    phis = {}
    for k in range(len(dims)):
        if k == j:
            continue
        long_dim = ells[k] if k < j else dims[k]
        phis[k] = draw_sketch_matrix(int(S[j, k]), long_dim, dist, base.child(j, k), fallbacks)
    return phis


def rsthosvd_kron(X: np.ndarray, r: Sequence[int], p: int = DEFAULT_OVERSAMPLING,
                  distribution: str | None = None, seed: int = 0, truncate: bool = True,
                  keep_debug: bool = False, counter: FlopCounter | None = None,
                  p_max_adjust: int = 16) -> TuckerDecomposition:
    """Randomized STHOSVD where each mode's sketch multiplies the partially truncated core."""
    r = _check_ranks(X.shape, r, p)
    d = X.ndim
    S, ells = plan_subrank_matrix(X.shape, r, p, p_max_adjust)
    dist, fallbacks = resolve_distribution(distribution, X.shape)
    base = RngSpec(seed, ("rsthosvd_kron",))
    G = X
    bases = []
    partial_dims = []
    for j in range(d):
        phis = sthosvd_kron_phis(X.shape, ells, S, j, dist, base, fallbacks)
        Y = multi_ttm(G, phis, counter=counter)
        Q = thin_qr(unfold(Y, j))[0]
        bases.append(Q)
        G = ttm(G, Q, j, transpose=True, counter=counter)
        partial_dims.append(G.shape)
    prov = _provenance("rsthosvd-kron", r, p, seed, dist, fallbacks,
                       subranks=S.tolist(), adjusted_l=ells)
    T = _finish(G, bases, r, prov, truncate, keep_debug)
    if keep_debug:
        T.debug["partial_core_dims"] = partial_dims
    return T


def draw_reuse_factors(dims: Sequence[int], s: Sequence[int], dist: str, seed: int,
                       fallbacks: list | None = None) -> list:
    """The ``d`` shared Kronecker factors ``Phi_k`` (``s_k x n_k``)."""
    base = RngSpec(seed, ("rhkron_re",))
    return [draw_sketch_matrix(int(s[k]), dims[k], dist, base.child(k), fallbacks)
            for k in range(len(dims))]


def rhosvd_kron_reuse(X: np.ndarray, r: Sequence[int], p: int = DEFAULT_OVERSAMPLING,
                      distribution: str | None = None, seed: int = 0, use_dimtree: bool = True,
                      truncate: bool = True, keep_debug: bool = False,
                      counter: FlopCounter | None = None) -> TuckerDecomposition:
    """Randomized HOSVD reusing ``d`` Kronecker factors across all mode sketches."""
    from .dimtree import all_mode_sketches, naive_mode_sketches

    r = _check_ranks(X.shape, r, p)
    d = X.ndim
    s = plan_subrank_vector(r, p, X.shape)
    dist, fallbacks = resolve_distribution(distribution, X.shape)
    phis = draw_reuse_factors(X.shape, s, dist, seed, fallbacks)
    if use_dimtree:
        sketches = all_mode_sketches(X, phis, counter=counter)
    else:
        sketches = naive_mode_sketches(X, phis, counter=counter)
    bases = [thin_qr(unfold(Y, j))[0] for j, Y in enumerate(sketches)]
    G_hat = multi_ttm(X, {j: (Q, True) for j, Q in enumerate(bases)}, counter=counter)
    prov = _provenance("rhkron-re", r, p, seed, dist, fallbacks, subranks=s.tolist(),
                       dimtree=bool(use_dimtree))
    return _finish(G_hat, bases, r, prov, truncate, keep_debug)


def decompose(X: np.ndarray, algorithm: str, r: Sequence[int], p: int = DEFAULT_OVERSAMPLING,
              distribution: str | None = None, seed: int = 0, **kwargs) -> TuckerDecomposition:
    """Dispatch by algorithm name (see :data:`ALGORITHMS`)."""
    if algorithm == "hosvd":
        return hosvd(X, r)
    if algorithm == "sthosvd":
        return sthosvd(X, r, **kwargs)
    funcs = {"rhosvd": rhosvd, "rsthosvd": rsthosvd, "rhosvd-kron": rhosvd_kron,
             "rsthosvd-kron": rsthosvd_kron, "rhkron-re": rhosvd_kron_reuse}
    if algorithm not in funcs:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    return funcs[algorithm](X, r, p, distribution=distribution, seed=seed, **kwargs)
