"""Block-distributed tensors over a :class:`Grid`."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from ..tensor import ShapeError
from .grid import DivisibilityError, Grid


def block_offsets(n: int, q: int, even: bool = True) -> list:
    """Boundaries of ``q`` contiguous blocks of ``range(n)``.

    With ``even`` the blocks must be equal; otherwise the first ``n % q``
    blocks get one extra index (trailing blocks may be empty).
    """
    if even and n % q:
        raise DivisibilityError(f"dimension {n} is not divisible by {q} processors")
    base, extra = divmod(n, q)
    sizes = [base + (1 if t < extra else 0) for t in range(q)]
    return [0] + list(np.cumsum(sizes).tolist())


@dataclass
class DistTensor:
    """Global ``dims`` with processor ``p`` owning the box ``offsets[k][p_k]:offsets[k][p_k+1]``."""

    grid: Grid
    dims: tuple
    offsets: list
    blocks: list

    def box(self, rank: int) -> tuple:
        c = self.grid.coords(rank)
        return tuple(slice(self.offsets[k][c[k]], self.offsets[k][c[k] + 1]) for k in range(len(self.dims)))

    def local(self, rank: int) -> np.ndarray:
        return self.blocks[rank]

    def col_block(self, rank: int, mode: int) -> slice:
        t = self.grid.coords(rank)[mode]
        return slice(self.offsets[mode][t], self.offsets[mode][t + 1])

    def gather(self) -> np.ndarray:
        """Assemble the global tensor (bookkeeping only, no counters)."""
        out = np.zeros(self.dims, order="F")
        for r in self.grid.ranks():
            out[self.box(r)] = self.blocks[r]
        return out

    def allgather(self) -> np.ndarray:
        """Replicate the global tensor on every processor, charging an all-gather."""
        ranks = list(self.grid.ranks())
        self.grid.all_gather(ranks, [b.ravel(order="F") for b in self.blocks])
        return self.gather()

    @property
    def size(self) -> int:
        return prod(self.dims)


def distribute(X: np.ndarray, grid: Grid) -> DistTensor:
    """Split ``X`` into equal contiguous blocks; each ``q_k`` must divide ``n_k``."""
    if X.ndim != grid.ndim:
        raise ShapeError(f"{X.ndim}-way tensor on a {grid.ndim}-way grid")
    offsets = [block_offsets(n, q) for n, q in zip(X.shape, grid.shape)]
    T = DistTensor(grid, tuple(X.shape), offsets, [None] * grid.P)
    for r in grid.ranks():
        T.blocks[r] = np.array(X[T.box(r)], order="F", copy=True)
    return T


def gather(T: DistTensor) -> np.ndarray:
    return T.gather()


@dataclass
class ScatteredTensor:
    """Result of a slice-wise reduce-scatter for withheld mode ``mode``.

    Each mode-``mode`` slice of processors owns the global tensor restricted
    to its ``mode`` block; member ``t`` of the slice holds the ``t``-th equal
    chunk of that block flattened mode-1-fastest.
    """

    grid: Grid
    mode: int
    dims: tuple
    offsets: list
    chunks: list

    def slice_shape(self, t: int) -> tuple:
        dims = list(self.dims)
        dims[self.mode] = self.offsets[t + 1] - self.offsets[t]
        return tuple(dims)

    def _assemble(self, chunks: Sequence[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.dims, order="F")
        j = self.mode
        for t in range(self.grid.shape[j]):
            group = self.grid.slice(j, t)
            flat = np.concatenate([chunks[r] for r in group])
            idx = [slice(None)] * len(self.dims)
            idx[j] = slice(self.offsets[t], self.offsets[t + 1])
            out[tuple(idx)] = flat.reshape(self.slice_shape(t), order="F")
        return out

    def gather(self) -> np.ndarray:
        """Assemble without charging communication."""
        return self._assemble(self.chunks)

    def allgather(self) -> np.ndarray:
        """Replicate on every processor, charging one all-gather over the whole grid."""
        ranks = list(self.grid.ranks())
        self.grid.all_gather(ranks, [self.chunks[r] for r in ranks])
        return self._assemble(self.chunks)
