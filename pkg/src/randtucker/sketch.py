"""Seeded random test matrices and subrank planning for Kronecker sketches."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

GAUSSIAN = "gaussian"
SRHT = "srht"
RADEMACHER = "rademacher"
DISTRIBUTIONS = (GAUSSIAN, SRHT, RADEMACHER)


class PlanningError(ValueError):
    """No subrank plan satisfies the constraints."""


@dataclass(frozen=True)
class RngSpec:
    """A reproducible random stream: the same ``(seed, stream)`` always yields the same draws.

    ``stream`` is a tuple of small non-negative integers or strings, e.g.
    ``("rhosvd_kron", mode, factor, trial)``.
    """

    seed: int
    stream: tuple = ()

    def child(self, *tags) -> "RngSpec":
        return RngSpec(self.seed, self.stream + tuple(tags))

    def generator(self) -> np.random.Generator:
        key = tuple(_tag_to_int(t) for t in self.stream)
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if tag < 0:
            raise ValueError("stream tags must be non-negative")
        return int(tag)
    return zlib.crc32(str(tag).encode("utf-8"))


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def gen_gaussian(rows: int, cols: int, rng: RngSpec) -> np.ndarray:
    """i.i.d. standard normal ``rows x cols`` matrix (Fortran order)."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    return np.asfortranarray(rng.generator().standard_normal((rows, cols)))


def gen_rademacher(rows: int, cols: int, rng: RngSpec) -> np.ndarray:
    """Random signs scaled by ``1/sqrt(rows)`` so columns have unit expected norm."""
    g = rng.generator()
    signs = g.integers(0, 2, size=(rows, cols)) * 2.0 - 1.0
    return np.asfortranarray(signs / np.sqrt(rows))


def hadamard_columns(n: int, cols: Sequence[int]) -> np.ndarray:
    """Selected columns of the Sylvester Walsh-Hadamard matrix of order ``n``, scaled by 1/sqrt(n).

    Entry ``(i, c)`` is ``(-1)**popcount(i & c) / sqrt(n)``; only the
    requested columns are materialized.
    """
    if not is_power_of_two(n):
        raise ValueError(f"Hadamard order {n} is not a power of two")
    i = np.arange(n, dtype=np.int64)[:, None]
    c = np.asarray(cols, dtype=np.int64)[None, :]
    bits = np.bitwise_and(i, c)
    parity = np.zeros_like(bits)
    while np.any(bits):
        parity ^= bits & 1
        bits >>= 1
    return np.where(parity == 1, -1.0, 1.0) / np.sqrt(n)


def gen_srht(n: int, s: int, rng: RngSpec) -> np.ndarray:
    """SRHT matrix ``D H`` of shape ``n x s`` with exactly orthonormal columns.

    ``D`` is a Rademacher diagonal and ``H`` holds ``s`` distinct columns of
    the scaled Walsh-Hadamard matrix sampled without replacement.
    """
    if not is_power_of_two(n):
        raise ValueError(f"SRHT needs a power-of-two dimension, got {n}")
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= s <= n, got s={s}, n={n}")
    g = rng.generator()
    d = g.integers(0, 2, size=n) * 2.0 - 1.0
    cols = g.choice(n, size=s, replace=False)
    return np.asfortranarray(d[:, None] * hadamard_columns(n, cols))


def resolve_distribution(requested: str | None, long_dims: Sequence[int]) -> tuple[str, list[str]]:
    """Pick the distribution to use and report any fallback.

    ``None`` selects SRHT when every long dimension is a power of two and
    Gaussian otherwise.  An explicit SRHT request on a non-power-of-two
    dimension falls back to Gaussian and the fallback is returned.
    """
    all_pow2 = all(is_power_of_two(int(n)) for n in long_dims)
    if requested is None:
        return (SRHT if all_pow2 else GAUSSIAN), []
    if requested not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {requested!r}")
    if requested == SRHT and not all_pow2:
        bad = [int(n) for n in long_dims if not is_power_of_two(int(n))]
        return GAUSSIAN, [f"srht->gaussian (dims {bad} not powers of two)"]
    return requested, []


def draw_sketch_matrix(rows: int, long_dim: int, dist: str, rng: RngSpec,
                       fallbacks: list | None = None) -> np.ndarray:
    """A ``rows x long_dim`` random matrix for use as a TTM operand (a Kronecker factor).

    For SRHT this is the transpose of :func:`gen_srht`; non-power-of-two
    ``long_dim`` or ``rows > long_dim`` drops to Gaussian and is appended to
    ``fallbacks``.
    """
    if dist == SRHT:
        if is_power_of_two(long_dim) and rows <= long_dim:
            return np.asfortranarray(gen_srht(long_dim, rows, rng).T)
        if fallbacks is not None:
            fallbacks.append(f"srht->gaussian for {rows}x{long_dim} factor")
        dist = GAUSSIAN
    if dist == RADEMACHER:
        return np.asfortranarray(gen_rademacher(long_dim, rows, rng).T)
    return gen_gaussian(rows, long_dim, rng)


def draw_test_matrix(long_dim: int, cols: int, dist: str, rng: RngSpec,
                     fallbacks: list | None = None) -> np.ndarray:
    """A dense ``long_dim x cols`` range-finder test matrix."""
    return np.asfortranarray(draw_sketch_matrix(cols, long_dim, dist, rng, fallbacks).T)


# --- subrank planning ----------------------------------------------------------

def _ordered_factorizations(value: int, parts: int, min_factor: int):
    """All ordered tuples of ``parts`` integers >= ``min_factor`` with product ``value``."""
    if parts == 1:
        if value >= min_factor:
            yield (value,)
        return
    for f in range(max(min_factor, 1), value + 1):
        if value % f == 0:
            for rest in _ordered_factorizations(value // f, parts - 1, min_factor):
                yield (f,) + rest


def _best_row(value: int, caps: Sequence[int]) -> tuple | None:
    parts = len(caps)
    min_factor = 2 if value >= 2 ** parts else 1
    best = None
    for fac in _ordered_factorizations(value, parts, min_factor):
        if any(f > c for f, c in zip(fac, caps)):
            continue
        key = (max(fac) / min(fac), fac)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


def plan_subrank_matrix(dims: Sequence[int], ranks: Sequence[int], p: int,
                        p_max_adjust: int = 16) -> tuple[np.ndarray, list[int]]:
    """Subrank matrix ``S`` for Kronecker sketches with per-mode random factors.

    Row ``j`` holds ``d-1`` integer factors (diagonal 1) whose product is
    the smallest ``l'_j >= r_j + p`` (within ``p_max_adjust`` and at most
    ``n_j``) admitting a
    factorization.  Once ``l'_j >= 2**(d-1)`` every factor must be at
    least 2.  Among admissible factorizations the most balanced
    (min max/min) wins, ties broken lexicographically.  Factor ``k`` never
    exceeds ``dims[k]``.

    Returns ``(S, adjusted_l)``.
    """
    d = len(dims)
    if d < 2:
        raise ValueError("subrank planning needs d >= 2")
    if len(ranks) != d:
        raise ValueError("ranks and dims differ in length")
    S = np.ones((d, d), dtype=np.int64)
    adjusted = []
    for j in range(d):
        ell = ranks[j] + p
        if ell > dims[j]:
            raise PlanningError(f"mode {j}: r+p={ell} exceeds dim {dims[j]}")
        others = [k for k in range(d) if k != j]
        caps = [dims[k] for k in others]
        # the sketch must stay no wider than the mode it spans
        for value in range(ell, min(ell + p_max_adjust, dims[j]) + 1):
            row = _best_row(value, caps)
            if row is not None:
                break
        else:
            raise PlanningError(
                f"mode {j}: no factorization of {ell}..{min(ell + p_max_adjust, dims[j])} into {d - 1} "
                f"factors bounded by {caps}")
        for k, f in zip(others, row):
            S[j, k] = f
        adjusted.append(value)
        if value != ell:
            log.debug("mode %d: oversampling adjusted %d -> %d", j, ell, value)
    validate_subrank_matrix(S, [r + p for r in ranks], dims)
    return S, adjusted


def validate_subrank_matrix(S: np.ndarray, ells: Sequence[int], dims: Sequence[int] | None = None) -> None:
    S = np.asarray(S)
    d = S.shape[0]
    if S.shape != (d, d) or np.any(np.diag(S) != 1) or np.any(S < 1):
        raise PlanningError("subrank matrix must be square with unit diagonal and positive entries")
    for j in range(d):
        if prod(int(v) for v in S[j]) < ells[j]:
            raise PlanningError(f"row {j} product {prod(S[j])} < l_j={ells[j]}")
        if dims is not None:
            for k in range(d):
                if k != j and S[j, k] > dims[k]:
                    raise PlanningError(f"s[{j},{k}]={S[j, k]} exceeds dim {dims[k]}")


def plan_subrank_vector(ranks: Sequence[int], p: int, dims: Sequence[int] | None = None) -> np.ndarray:
    """Shared subranks ``s_i = ceil(prod(l)^(1/(d-1)) / l_i)`` with ``l = r + p``.

    Evaluated in exact integer arithmetic as the smallest ``s`` with
    ``(s * l_i)**(d-1) >= prod(l)``.
    """
    d = len(ranks)
    if d < 2:
        raise ValueError("subrank planning needs d >= 2")
    ells = [int(r) + int(p) for r in ranks]
    total = prod(ells)
    s = []
    for li in ells:
        # integer ceil of the real root, then step to the exact threshold
        guess = max(1, int(np.floor(total ** (1.0 / (d - 1)) / li)) - 1)
        while (guess * li) ** (d - 1) < total:
            guess += 1
        while guess > 1 and ((guess - 1) * li) ** (d - 1) >= total:
            guess -= 1
        s.append(guess)
    s = np.array(s, dtype=np.int64)
    validate_subrank_vector(s, ells, dims)
    return s


def validate_subrank_vector(s: Sequence[int], ells: Sequence[int], dims: Sequence[int] | None = None) -> None:
    d = len(s)
    for j in range(d):
        if prod(int(s[k]) for k in range(d) if k != j) < ells[j]:
            raise PlanningError(f"mode {j}: subrank product below l_j={ells[j]}")
    if dims is not None:
        for i in range(d):
            if s[i] > dims[i]:
                raise PlanningError(
                    f"subrank s_{i}={s[i]} exceeds dim {dims[i]}; skewed modes, use per-mode subranks")

