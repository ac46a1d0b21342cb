"""Dimension-tree memoization for computing every mode sketch ``X x_{k != j} Phi_k``.

The tree is binary over consecutive modes.  A node splitting mode set
``m`` into halves ``m1`` (the larger half when ``|m|`` is odd) and ``m2``
passes ``Y x_{m2} Phi`` to the ``m1`` subtree and ``Y x_{m1} Phi`` to the
``m2`` subtree; a leaf for mode ``j`` holds ``X`` multiplied in every
other mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Callable, Sequence

import numpy as np

from .tensor import FlopCounter, ShapeError, multi_ttm

__all__ = [
    "DimTree",
    "FlopCounter",
    "all_mode_sketches",
    "build_tree",
    "measured_flops",
    "naive_mode_sketches",
    "predicted_sketch_flops",
    "simulate_sketch_flops",
    "ttm_calls",
]


@dataclass
class DimTree:
    """A node of the dimension tree.

    ``modes`` are the leaves below this node; ``applied`` are the modes
    whose random factor has been multiplied in at this node.
    """

    modes: tuple
    applied: tuple
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return len(self.modes) == 1

    def leaves(self):
        if self.is_leaf:
            yield self
        for c in self.children:
            yield from c.leaves()

    def internal_nodes(self):
        if not self.is_leaf:
            yield self
            for c in self.children:
                yield from c.internal_nodes()


def split_modes(modes: Sequence[int]) -> tuple[tuple, tuple]:
    h = (len(modes) + 1) // 2
    return tuple(modes[:h]), tuple(modes[h:])


def build_tree(d: int) -> DimTree:
    def grow(modes, applied):
        node = DimTree(tuple(modes), tuple(sorted(applied)))
        if len(modes) > 1:
            m1, m2 = split_modes(modes)
            node.children = [grow(m1, set(applied) | set(m2)), grow(m2, set(applied) | set(m1))]
        return node

    return grow(tuple(range(d)), set())


def _traverse(root, d: int, apply: Callable, on_leaf: Callable) -> None:
    # depth-first; a node's result is dropped once both children consumed it
    def visit(Y, modes):
        if len(modes) == 1:
            on_leaf(modes[0], Y)
            return
        m1, m2 = split_modes(modes)
        visit(apply(Y, m2), m1)
        visit(apply(Y, m1), m2)

    visit(root, tuple(range(d)))


def _check_phis(dims: Sequence[int], phis: Sequence[np.ndarray]) -> None:
    if len(phis) != len(dims):
        raise ShapeError(f"need {len(dims)} random factors, got {len(phis)}")
    for k, (n, P) in enumerate(zip(dims, phis)):
        if P.ndim != 2 or P.shape[1] != n:
            raise ShapeError(f"factor {k} has shape {P.shape}, mode dim is {n}")


def all_mode_sketches(X: np.ndarray, phis: Sequence[np.ndarray],
                      counter: FlopCounter | None = None) -> list:
    """All ``d`` sketches ``Y^(j) = X x_{k != j} Phi_k`` with shared partial products."""
    _check_phis(X.shape, phis)
    d = X.ndim
    out: list = [None] * d

    def apply(Y, modes):
        return multi_ttm(Y, {k: phis[k] for k in modes}, counter=counter)

    def on_leaf(j, Y):
        out[j] = Y

    if d == 1:
        return [X]
    _traverse(X, d, apply, on_leaf)
    return out


def naive_mode_sketches(X: np.ndarray, phis: Sequence[np.ndarray],
                        counter: FlopCounter | None = None) -> list:
    """Independent multi-TTM per mode, no reuse."""
    _check_phis(X.shape, phis)
    d = X.ndim
    return [multi_ttm(X, {k: phis[k] for k in range(d) if k != j}, counter=counter) for j in range(d)]


def _shape_apply(counter: FlopCounter, rows: Sequence[int]):
    def apply(dims, modes):
        dims = list(dims)
        # same order policy as multi_ttm
        for k in sorted(modes, key=lambda k: (-dims[k], k)):
            contraction = dims[k]
            dims[k] = rows[k]
            counter.add(2 * prod(dims) * contraction)
        return tuple(dims)

    return apply


def simulate_sketch_flops(dims: Sequence[int], rows: Sequence[int], with_tree: bool = True,
                          counter: FlopCounter | None = None) -> int:
    """Run the sketch schedule on shapes alone and count its flops.

    Uses the same traversal and mode ordering as the numeric paths, so for
    any tensor it equals the count those paths record.
    """
    dims = tuple(int(n) for n in dims)
    d = len(dims)
    counter = FlopCounter() if counter is None else counter
    apply = _shape_apply(counter, rows)
    if with_tree:
        if d > 1:
            _traverse(dims, d, apply, lambda j, Y: None)
    else:
        for j in range(d):
            apply(dims, [k for k in range(d) if k != j])
    return counter.total()


def predicted_sketch_flops(n: int, r: int, d: int, with_tree: bool = True) -> int:
    """Sketch cost for a cubic ``n^d`` tensor and ``r x n`` factors.

    Closed forms for ``d`` in 3..5; other orders fall back to the shape
    simulation.
    """
    if with_tree:
        closed = {
            3: 2 * (2 * r * n**3 + 3 * r**2 * n**2),
            4: 2 * (2 * r * n**4 + 2 * r**2 * n**3 + 4 * r**3 * n**2),
            5: 2 * (2 * r * n**5 + 2 * r**2 * n**4 + 3 * r**3 * n**3 + 5 * r**4 * n**2),
        }
    else:
        closed = {
            3: 2 * (3 * r * n**3 + 3 * r**2 * n**2),
            4: 2 * (4 * r * n**4 + 4 * r**2 * n**3 + 4 * r**3 * n**2),
            5: 2 * (5 * r * n**5 + 5 * r**2 * n**4 + 5 * r**3 * n**3 + 5 * r**4 * n**2),
        }
    if d in closed:
        return closed[d]
    return simulate_sketch_flops((n,) * d, (r,) * d, with_tree)


def ttm_calls(d: int, with_tree: bool = True) -> int:
    """Number of single-mode TTMs in the sketch schedule.

    With the tree each internal node over ``m`` leaves issues ``|m|`` TTMs
    (each child gets its sibling's modes); without it every leaf costs ``d-1``.
    """
    if not with_tree:
        return d * (d - 1)
    return sum(len(node.modes) for node in build_tree(d).internal_nodes())


def measured_flops(counter: FlopCounter) -> dict:
    return counter.as_dict()
