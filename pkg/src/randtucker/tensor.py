"""Dense tensor kernels: unfolding, TTM, multi-TTM, thin QR and SVD helpers.

Tensors are plain :class:`numpy.ndarray` objects in Fortran (mode-1-fastest)
order.  Mode indices are 0-based throughout the library.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from math import prod
from typing import Mapping, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operands are not conformable."""


@dataclass
class FlopCounter:
    """Accumulates shape-derived flop counts per labeled phase.

    One multiply-add counts as 2 flops, so a TTM producing an output with
    ``E`` entries from a contraction of length ``c`` costs ``2 * E * c``.
    """

    counts: dict = field(default_factory=lambda: defaultdict(int))
    calls: dict = field(default_factory=lambda: defaultdict(int))
    phase: str = "default"

    def add(self, flops: int, phase: str | None = None) -> None:
        key = phase or self.phase
        self.counts[key] += int(flops)
        self.calls[key] += 1

    def total(self) -> int:
        return sum(self.counts.values())

    def as_dict(self) -> dict:
        return dict(self.counts)


def as_tensor(data, dims: Sequence[int] | None = None) -> np.ndarray:
    """Return ``data`` as a float64 Fortran-ordered array.

    With ``dims`` given, ``data`` is read as a flat mode-1-fastest payload.
    """
    arr = np.asarray(data, dtype=np.float64)
    if dims is not None:
        dims = tuple(int(n) for n in dims)
        if arr.size != prod(dims):
            raise ShapeError(f"payload has {arr.size} entries, dims {dims} need {prod(dims)}")
        arr = arr.reshape(dims, order="F")
    if arr.ndim == 0:
        arr = arr.reshape((1,))
    if any(n < 1 for n in arr.shape):
        raise ShapeError(f"all dims must be positive, got {arr.shape}")
    return np.asfortranarray(arr)


def _check_mode(ndim: int, j: int) -> int:
    if not 0 <= j < ndim:
        raise IndexError(f"mode {j} out of range for a {ndim}-way tensor")
    return j


def unfold(T: np.ndarray, j: int) -> np.ndarray:
    """Mode-``j`` unfolding: an ``n_j x prod(other dims)`` matrix.

    Columns enumerate the remaining indices mode-1-fastest.  For ``j == 0``
    and a Fortran-contiguous input the result is a view.
    """
    _check_mode(T.ndim, j)
    cols = prod(T.shape[:j] + T.shape[j + 1:])
    return np.reshape(np.moveaxis(T, j, 0), (T.shape[j], cols), order="F")


def fold(M: np.ndarray, j: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    dims = tuple(int(n) for n in dims)
    _check_mode(len(dims), j)
    M = np.asarray(M)
    rest = prod(dims[:j] + dims[j + 1:])
    if M.shape != (dims[j], rest):
        raise ShapeError(f"matrix {M.shape} cannot fold into mode {j} of {dims}")
    moved = (dims[j],) + dims[:j] + dims[j + 1:]
    return np.asfortranarray(np.moveaxis(np.reshape(M, moved, order="F"), 0, j))


def ttm(T: np.ndarray, A: np.ndarray, j: int, transpose: bool = False,
        counter: FlopCounter | None = None) -> np.ndarray:
    """Tensor-times-matrix in mode ``j``: ``Y_(j) = A @ T_(j)`` (``A.T`` if ``transpose``)."""
    _check_mode(T.ndim, j)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ShapeError("TTM matrix must be 2-D")
    op = A.T if transpose else A
    if op.shape[1] != T.shape[j]:
        raise ShapeError(
            f"matrix contraction dim {op.shape[1]} != tensor mode-{j} dim {T.shape[j]}")
    out_dims = T.shape[:j] + (op.shape[0],) + T.shape[j + 1:]
    if counter is not None:
        counter.add(2 * prod(out_dims) * T.shape[j])
    return fold(op @ unfold(T, j), j, out_dims)


def _default_order(dims: Sequence[int], modes: Sequence[int]) -> list[int]:
    # descending current mode size, ties by ascending mode index
    return sorted(modes, key=lambda k: (-dims[k], k))


def multi_ttm(T: np.ndarray, mats: Mapping[int, np.ndarray | tuple], order: Sequence[int] | None = None,
              counter: FlopCounter | None = None) -> np.ndarray:
    """Apply one matrix per mode.

    ``mats`` maps mode -> matrix, or mode -> ``(matrix, transpose_flag)``.
    The default order processes modes by descending size of the input mode.
    """
    norm: dict[int, tuple[np.ndarray, bool]] = {}
    for k, v in mats.items():
        _check_mode(T.ndim, k)
        if isinstance(v, tuple):
            norm[k] = (v[0], bool(v[1]))
        else:
            norm[k] = (v, False)
    if order is None:
        order = _default_order(T.shape, list(norm))
    else:
        order = list(order)
        if len(set(order)) != len(order):
            raise ValueError(f"duplicate mode in order {order}")
        if sorted(order) != sorted(norm):
            raise ValueError("order must list exactly the modes being multiplied")
    Y = T
    for k in order:
        A, tr = norm[k]
        Y = ttm(Y, A, k, transpose=tr, counter=counter)
    return Y


def tensor_norm(T: np.ndarray) -> float:
    return float(np.linalg.norm(np.ravel(T)))


def thin_qr(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR with a nonnegative diagonal in ``R``."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ShapeError(f"thin_qr needs rows >= cols, got {M.shape}")
    Q, R = np.linalg.qr(M, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def _fix_signs(U: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def leading_left_singular_vectors(M: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` left singular vectors of ``M`` from the Gram matrix ``M M^T``.

    Returns ``(U, sigma)`` with ``sigma`` in descending order.  Squaring
    the matrix costs half the digits of tiny singular values.
    """
    M = np.asarray(M, dtype=np.float64)
    m = M.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k={k} must lie in [1, {m}]")
    return top_eigvecs(M @ M.T, k)


def top_eigvecs(gram: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading ``k`` eigenvectors of a symmetric PSD matrix and the square roots of their eigenvalues."""
    w, V = np.linalg.eigh(gram)
    w = w[::-1][:k]
    V = V[:, ::-1][:, :k]
    sigma = np.sqrt(np.clip(w, 0.0, None))
    return _fix_signs(V), sigma


def thin_svd(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Direct thin SVD ``M = U diag(s) V^T`` with fixed singular-vector signs."""
    M = np.asarray(M, dtype=np.float64)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, s, Vt.T * signs


def is_orthonormal(F: np.ndarray, tol: float | None = None) -> bool:
    k = F.shape[1]
    tol = 1e-10 * k if tol is None else tol
    return bool(np.linalg.norm(F.T @ F - np.eye(k)) <= tol)


def kron_unfolding_product(T: np.ndarray, mats: Mapping[int, np.ndarray], j: int) -> np.ndarray:
    """``A_j T_(j) (A_d kron ... kron A_1)^T`` with the Kronecker matrix formed explicitly.

    Missing modes use the identity.  Intended as a brute-force reference.
    """
    d = T.ndim
    eye = {k: np.eye(T.shape[k]) for k in range(d)}
    kron = np.ones((1, 1))
    for k in range(d):
        if k == j:
            continue
        # later modes go on the left
        kron = np.kron(np.asarray(mats.get(k, eye[k])), kron)
    Aj = np.asarray(mats.get(j, eye[j]))
    return Aj @ unfold(T, j) @ kron.T
