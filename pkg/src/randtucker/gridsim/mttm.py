"""Parallel TTM, in-sequence and all-at-once multi-TTM, and the distributed dimension tree."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..dimtree import _traverse
from ..tensor import FlopCounter, ShapeError, multi_ttm, ttm
from .dist import DistTensor, ScatteredTensor, block_offsets


def _oriented(mats: Mapping[int, object]) -> dict:
    out = {}
    for k, v in mats.items():
        if isinstance(v, tuple):
            A, tr = v
            out[k] = np.asarray(A).T if tr else np.asarray(A)
        else:
            out[k] = np.asarray(v)
    return out


def _check(T: DistTensor, ops: dict) -> None:
    for k, A in ops.items():
        if not 0 <= k < len(T.dims):
            raise IndexError(f"mode {k} out of range")
        if A.ndim != 2 or A.shape[1] != T.dims[k]:
            raise ShapeError(f"mode {k}: matrix {A.shape} vs dim {T.dims[k]}")


def parallel_ttm(T: DistTensor, U: np.ndarray, j: int, transpose: bool = False,
                 even: bool = True) -> DistTensor:
    """``T x_j op(U)`` with a replicated matrix.

    Each processor multiplies its column block of ``op(U)`` into its local
    tensor, then every mode-``j`` fiber reduce-scatters the result so that
    member ``t`` keeps row block ``t``.  ``even=False`` allows an uneven
    row split when ``q_j`` does not divide the new dimension.
    """
    grid = T.grid
    op = _oriented({j: (U, transpose)})[j]
    _check(T, {j: op})
    m = op.shape[0]
    new_off = block_offsets(m, grid.shape[j], even)
    contribs = {}
    for r in grid.ranks():
        c = FlopCounter()
        contribs[r] = ttm(T.blocks[r], op[:, T.col_block(r, j)], j, counter=c)
        grid.charge_flops(r, c.total())
    dims = list(T.dims)
    dims[j] = m
    offsets = list(T.offsets)
    offsets[j] = new_off
    out = DistTensor(grid, tuple(dims), offsets, [None] * grid.P)
    nd = len(dims)
    for fiber in grid.fibers(j):
        parts = []
        for t in range(len(fiber)):
            idx = [slice(None)] * nd
            idx[j] = slice(new_off[t], new_off[t + 1])
            parts.append(tuple(idx))
        blocks = grid.reduce_scatter(fiber, [contribs[r] for r in fiber], parts)
        for r, b in zip(fiber, blocks):
            out.blocks[r] = b
    return out


def is_mttm(T: DistTensor, mats: Mapping[int, object], skip: int | None = None,
            even: bool = True) -> DistTensor:
    """In-sequence multi-TTM: one :func:`parallel_ttm` per mode, ascending, skipping ``skip``."""
    ops = {k: v for k, v in _oriented(mats).items() if k != skip}
    _check(T, ops)
    for k in sorted(ops):
        T = parallel_ttm(T, ops[k], k, even=even)
    return T


def _local_ops(T: DistTensor, ops: dict, rank: int) -> dict:
    return {k: A[:, T.col_block(rank, k)] for k, A in ops.items()}


def _slice_scatter(T: DistTensor, j: int, local: dict, out_dims: tuple) -> ScatteredTensor:
    grid = T.grid
    chunks = [None] * grid.P
    for t in range(grid.shape[j]):
        group = grid.slice(j, t)
        parts = grid.reduce_scatter(group, [local[r] for r in group])
        for r, b in zip(group, parts):
            chunks[r] = b
    return ScatteredTensor(grid, j, out_dims, list(T.offsets[j]), chunks)


def aao_mttm(T: DistTensor, mats: Mapping[int, object], skip: int) -> ScatteredTensor:
    """All-at-once multi-TTM over every mode except ``skip``.

    All local multiplies happen first; a single reduce-scatter over each
    mode-``skip`` processor slice then sums the partial results.
    """
    grid = T.grid
    ops = {k: v for k, v in _oriented(mats).items() if k != skip}
    if sorted(ops) != [k for k in range(len(T.dims)) if k != skip]:
        raise ValueError("aao_mttm needs a matrix for every mode except the skipped one")
    _check(T, ops)
    local = {}
    for r in grid.ranks():
        c = FlopCounter()
        local[r] = multi_ttm(T.blocks[r], _local_ops(T, ops, r), counter=c)
        grid.charge_flops(r, c.total())
    dims = tuple(ops[k].shape[0] if k != skip else n for k, n in enumerate(T.dims))
    return _slice_scatter(T, skip, local, dims)


def all_modes_multi_ttm(T: DistTensor, phis) -> list:
    """Every sketch ``T x_{k != j} Phi_k`` with local dimension-tree reuse.

    Each processor walks the tree on its own block; every leaf ends in one
    reduce-scatter over the withheld mode's processor slice.
    """
    grid = T.grid
    d = len(T.dims)
    ops = _oriented(dict(enumerate(phis)))
    if len(ops) != d:
        raise ShapeError(f"need {d} random factors, got {len(ops)}")
    _check(T, ops)
    leaves = [dict() for _ in range(d)]
    for r in grid.ranks():
        c = FlopCounter()
        lops = _local_ops(T, ops, r)

        def apply(Y, modes):
            return multi_ttm(Y, {k: lops[k] for k in modes}, counter=c)

        def on_leaf(j, Y, r=r):
            leaves[j][r] = Y

        if d == 1:
            leaves[0][r] = T.blocks[r]
        else:
            _traverse(T.blocks[r], d, apply, on_leaf)
        grid.charge_flops(r, c.total())
    out = []
    for j in range(d):
        dims = tuple(ops[k].shape[0] if k != j else n for k, n in enumerate(T.dims))
        out.append(_slice_scatter(T, j, leaves[j], dims))
    return out
