"""Synthetic tensors matching the accuracy and scaling experiments."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .sketch import RngSpec
from .tensor import multi_ttm, tensor_norm, thin_qr


def random_orthonormal(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``n x k`` matrix with orthonormal columns, Haar-distributed up to the QR sign convention."""
    return thin_qr(rng.standard_normal((n, k)))[0]


def superdiagonal(dims: Sequence[int], values: Sequence[float]) -> np.ndarray:
    T = np.zeros(tuple(dims), order="F")
    idx = np.arange(len(values))
    T[(idx,) * len(dims)] = values
    return T


def synth_geometric(dims: Sequence[int], decay: float = 0.4, seed: int = 0) -> np.ndarray:
    """Superdiagonal tensor with entries ``decay**i`` (largest 1), rotated by a random orthogonal matrix per mode."""
    if not 0.0 < decay < 1.0:
        raise ValueError("decay must lie in (0, 1)")
    dims = tuple(int(n) for n in dims)
    values = decay ** np.arange(min(dims))
    rng = RngSpec(seed, ("synth_geometric",)).generator()
    rots = {k: random_orthonormal(n, n, rng) for k, n in enumerate(dims)}
    return multi_ttm(superdiagonal(dims, values), rots)


def synth_lowrank_noise(dims: Sequence[int], true_rank: Sequence[int], noise_rel: float = 1e-4,
                        seed: int = 0) -> np.ndarray:
    """Random Tucker tensor (Gaussian core, orthonormal factors) of unit norm plus relative Gaussian noise."""
    dims = tuple(int(n) for n in dims)
    true_rank = tuple(int(r) for r in true_rank)
    if any(r > n for r, n in zip(true_rank, dims)):
        raise ValueError("true_rank exceeds dims")
    rng = RngSpec(seed, ("synth_lowrank_noise",)).generator()
    core = np.asfortranarray(rng.standard_normal(true_rank))
    factors = {k: random_orthonormal(n, r, rng) for k, (n, r) in enumerate(zip(dims, true_rank))}
    signal = multi_ttm(core, factors)
    signal /= tensor_norm(signal)
    if noise_rel == 0:
        return signal
    noise = np.asfortranarray(rng.standard_normal(dims))
    return np.asfortranarray(signal + noise * (noise_rel / tensor_norm(noise)))


def synth_exact_lowrank(dims: Sequence[int], rank: Sequence[int], seed: int = 0) -> np.ndarray:
    """Random core times a random (non-orthogonal) Gaussian matrix in every mode; no noise."""
    dims = tuple(int(n) for n in dims)
    rank = tuple(int(r) for r in rank)
    rng = RngSpec(seed, ("synth_exact_lowrank",)).generator()
    core = np.asfortranarray(rng.standard_normal(rank))
    mats = {k: rng.standard_normal((n, r)) for k, (n, r) in enumerate(zip(dims, rank))}
    return multi_ttm(core, mats)


GENERATORS = {
    "geometric": synth_geometric,
    "lowrank-noise": synth_lowrank_noise,
    "exact-lowrank": synth_exact_lowrank,
}
