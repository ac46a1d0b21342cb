"""Logical processor grid, per-processor counters and the three collectives.

Processors are numbered mode-1-fastest over grid coordinates.  All data
exchange between logical processors goes through :meth:`Grid.reduce_scatter`,
:meth:`Grid.all_gather` or :meth:`Grid.all_reduce`; reductions sum in
ascending group-rank order so results do not depend on scheduling.
"""

from __future__ import annotations

import contextlib
import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from math import ceil, log2, prod
from typing import NamedTuple, Sequence

import numpy as np

COUNTER_FIELDS = ("flops", "words_sent", "words_recv", "messages", "payload")


class DivisibilityError(ValueError):
    """Block or scatter sizes do not divide evenly."""


def _log2_messages(g: int) -> int:
    return 0 if g <= 1 else ceil(log2(g))


class CollectiveRecord(NamedTuple):
    kind: str
    phase: str
    group: tuple
    words_sent: int
    words_recv: int
    payload: int


@dataclass
class CommStats:
    """Per-processor, per-phase counters plus a log of every collective."""

    counters: dict = field(default_factory=lambda: defaultdict(lambda: dict.fromkeys(COUNTER_FIELDS, 0)))
    collectives: list = field(default_factory=list)

    def add(self, rank: int, phase: str, **amounts) -> None:
        row = self.counters[(rank, phase)]
        for k, v in amounts.items():
            row[k] += int(v)

    def get(self, rank: int, phase: str | None = None, key: str = "flops") -> int:
        if phase is not None:
            return self.counters.get((rank, phase), {}).get(key, 0)
        return sum(v[key] for (r, _), v in self.counters.items() if r == rank)

    def phases(self) -> list:
        seen = []
        for _, ph in self.counters:
            if ph not in seen:
                seen.append(ph)
        return seen

    def total(self, key: str, phase: str | None = None) -> int:
        return sum(v[key] for (_, ph), v in self.counters.items() if phase is None or ph == phase)

    def max_over_ranks(self, key: str, phase: str | None = None) -> int:
        per = defaultdict(int)
        for (r, ph), v in self.counters.items():
            if phase is None or ph == phase:
                per[r] += v[key]
        return max(per.values()) if per else 0

    def rows(self) -> list:
        out = []
        for (rank, phase) in sorted(self.counters, key=lambda k: (k[0], k[1])):
            out.append({"rank": rank, "phase": phase, **self.counters[(rank, phase)]})
        return out

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        w = csv.DictWriter(buf, fieldnames=("rank", "phase") + COUNTER_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow(row)
        return buf.getvalue() if fh is None else ""


class Grid:
    """A ``q_1 x ... x q_d`` grid of logical processors with shared accounting."""

    def __init__(self, shape: Sequence[int]):
        self.shape = tuple(int(q) for q in shape)
        if not self.shape or any(q < 1 for q in self.shape):
            raise ValueError(f"invalid grid shape {shape}")
        self.P = prod(self.shape)
        self.stats = CommStats()
        self.phase = "default"

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def coords(self, rank: int) -> tuple:
        if not 0 <= rank < self.P:
            raise IndexError(rank)
        return tuple(int(c) for c in np.unravel_index(rank, self.shape, order="F"))

    def rank(self, coords: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coords), self.shape, order="F"))

    def ranks(self) -> range:
        return range(self.P)

    def fiber(self, rank: int, mode: int) -> list:
        """Processors sharing every coordinate of ``rank`` except ``mode``, by that coordinate."""
        c = list(self.coords(rank))
        out = []
        for t in range(self.shape[mode]):
            c[mode] = t
            out.append(self.rank(c))
        return out

    def slice(self, mode: int, index: int) -> list:
        """Processors whose ``mode`` coordinate equals ``index``, ascending rank."""
        return [r for r in self.ranks() if self.coords(r)[mode] == index]

    def fibers(self, mode: int) -> list:
        seen, out = set(), []
        for r in self.ranks():
            f = tuple(self.fiber(r, mode))
            if f not in seen:
                seen.add(f)
                out.append(list(f))
        return out

    @contextlib.contextmanager
    def in_phase(self, name: str):
        prev, self.phase = self.phase, name
        try:
            yield self
        finally:
            self.phase = prev

    def charge_flops(self, rank: int, flops: int) -> None:
        self.stats.add(rank, self.phase, flops=flops)

    # --- collectives ---------------------------------------------------------

    def reduce_scatter(self, group: Sequence[int], contributions: Sequence[np.ndarray],
                       parts: Sequence | None = None) -> list:
        """Sum the members' contributions and hand member ``t`` its part.

        ``parts[t]`` is an index expression into the summed array; by default
        the flattened (mode-1-fastest) sum is cut into equal contiguous
        blocks by group rank.  Each member is charged the words it does not
        keep, ``(g-1) * |own part|`` words received and ``ceil(log2 g)``
        messages.
        """
        g = len(group)
        if len(contributions) != g:
            raise ValueError("one contribution per group member required")
        shape = np.shape(contributions[0])
        if any(np.shape(c) != shape for c in contributions):
            raise ValueError("reduce_scatter contributions differ in shape")
        total = np.array(contributions[0], dtype=np.float64, order="F", copy=True)
        for c in contributions[1:]:
            total += c
        E = total.size
        if parts is None:
            if E % g:
                raise DivisibilityError(f"{E} elements do not split evenly over {g} processors")
            flat = total.ravel(order="F")
            b = E // g
            out = [flat[t * b:(t + 1) * b].copy() for t in range(g)]
        else:
            out = [np.asfortranarray(total[parts[t]]) for t in range(g)]
        sent = recv = 0
        for t, rank in enumerate(group):
            own = out[t].size
            s, r = (E - own, (g - 1) * own) if g > 1 else (0, 0)
            sent += s
            recv += r
            self.stats.add(rank, self.phase, words_sent=s, words_recv=r,
                           messages=_log2_messages(g), payload=E)
        self.stats.collectives.append(CollectiveRecord("reduce_scatter", self.phase, tuple(group), sent, recv, E))
        return out

    def all_gather(self, group: Sequence[int], blocks: Sequence[np.ndarray]) -> list:
        """Every member receives the list of all members' blocks (in group order)."""
        g = len(group)
        if len(blocks) != g:
            raise ValueError("one block per group member required")
        sizes = [np.size(b) for b in blocks]
        total = sum(sizes)
        sent = recv = 0
        for t, rank in enumerate(group):
            s, r = ((g - 1) * sizes[t], total - sizes[t]) if g > 1 else (0, 0)
            sent += s
            recv += r
            self.stats.add(rank, self.phase, words_sent=s, words_recv=r,
                           messages=_log2_messages(g), payload=sizes[t])
        self.stats.collectives.append(CollectiveRecord("all_gather", self.phase, tuple(group), sent, recv, total))
        gathered = [np.array(b, copy=True) for b in blocks]
        return [gathered for _ in range(g)]

    def all_reduce(self, group: Sequence[int], contributions: Sequence[np.ndarray]) -> list:
        """Every member receives the full sum.

        Charged as a reduce-scatter followed by an all-gather, which is
        ``2 (g-1)/g`` of the elements each way when ``g`` divides them.
        """
        g = len(group)
        if len(contributions) != g:
            raise ValueError("one contribution per group member required")
        shape = np.shape(contributions[0])
        if any(np.shape(c) != shape for c in contributions):
            raise ValueError("all_reduce contributions differ in shape")
        total = np.array(contributions[0], dtype=np.float64, copy=True)
        for c in contributions[1:]:
            total += c
        E = total.size
        # reduce-scatter then all-gather over balanced blocks
        base, extra = divmod(E, g)
        moved = 0
        for t, rank in enumerate(group):
            b = base + (1 if t < extra else 0)
            words = (E - b) + (g - 1) * b if g > 1 else 0
            moved += words
            self.stats.add(rank, self.phase, words_sent=words, words_recv=words,
                           messages=2 * _log2_messages(g), payload=E)
        self.stats.collectives.append(CollectiveRecord("all_reduce", self.phase, tuple(group), moved, moved, E))
        return [total.copy() for _ in range(g)]
