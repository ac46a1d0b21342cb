"""Error bounds for Kronecker-sketched Tucker approximations and their empirical checks."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from math import prod, sqrt
from typing import Iterable, Sequence

import numpy as np

from .algorithms import TuckerDecomposition, reconstruct
from .sketch import RngSpec, gen_srht, is_power_of_two
from .synth import random_orthonormal
from .tensor import is_orthonormal, multi_ttm, tensor_norm, unfold


class InadmissibleWarning(UserWarning):
    """Sketch parameters fall outside the range where the bound is proven."""


@dataclass
class SpectralProfile:
    """Descending singular values of every mode unfolding."""

    dims: tuple
    svals: list

    def tail(self, j: int, k: int) -> float:
        """``sum_{i > k} sigma_i^2`` of the mode-``j`` unfolding (1-based ``i``)."""
        s = self.svals[j]
        return float(np.sum(s[k:] ** 2))

    def band(self, j: int, lo: int, hi: int) -> float:
        """``sum_{i=lo+1}^{hi} sigma_i^2`` of the mode-``j`` unfolding."""
        s = self.svals[j]
        return float(np.sum(s[lo:hi] ** 2))


def spectral_profile(X: np.ndarray) -> SpectralProfile:
    return SpectralProfile(tuple(X.shape),
                           [np.linalg.svd(unfold(X, j), compute_uv=False) for j in range(X.ndim)])


def admissibility_threshold(r: int, alpha: float, beta: float) -> float:
    """Smallest sketch size ``l`` allowed for rank ``r``: ``alpha^2 beta / (alpha-1)^2 (r^2 + r)``."""
    if alpha <= 1 or beta <= 1:
        raise ValueError("alpha and beta must exceed 1")
    return alpha**2 * beta / (alpha - 1) ** 2 * (r * r + r)


def is_admissible(r: int, ell: int, m: int, n: int, alpha: float, beta: float) -> bool:
    return min(m, n) > ell >= admissibility_threshold(r, alpha, beta)


@dataclass
class BoundParams:
    """Per-mode ``alpha_j, beta_j`` and sketch sizes ``l_j``."""

    alpha: tuple
    beta: tuple
    ell: tuple

    @classmethod
    def uniform(cls, d: int, alpha: float, beta: float, ell: Sequence[int]) -> "BoundParams":
        return cls((alpha,) * d, (beta,) * d, tuple(int(x) for x in ell))

    @property
    def failure_probability(self) -> float:
        return float(sum(1.0 / b**2 for b in self.beta))

    def admissible(self, dims: Sequence[int], r: Sequence[int]) -> list:
        N = prod(dims)
        return [is_admissible(r[j], self.ell[j], dims[j], N // dims[j], self.alpha[j], self.beta[j])
                for j in range(len(dims))]


def _warn_inadmissible(what: str) -> None:
    warnings.warn(f"{what}: parameters violate the admissibility condition", InadmissibleWarning,
                  stacklevel=3)


def matrix_bound_rhs(svals: Sequence[float], r: int, ell: int, n: int, alpha: float,
                     beta: float = 2.0, m: int | None = None) -> float:
    """``sqrt((1 + alpha n / l) sum_{i > r} sigma_i^2)`` for the range finder on an ``m x n`` matrix.

    Holds with probability ``1 - 1/beta^2`` for admissible parameters;
    outside that range a warning is issued and the value is still returned.
    """
    s = np.asarray(svals, dtype=np.float64)
    m = len(s) if m is None else m
    if not is_admissible(r, ell, m, n, alpha, beta):
        _warn_inadmissible("matrix bound")
    return sqrt((1.0 + alpha * n / ell) * float(np.sum(s[r:] ** 2)))


def _params(profile: SpectralProfile, r, p, alpha, beta, ell) -> BoundParams:
    d = len(profile.dims)
    ell = [rj + p for rj in r] if ell is None else list(ell)
    a = tuple(alpha) if np.ndim(alpha) else (float(alpha),) * d
    b = tuple(beta) if np.ndim(beta) else (float(beta),) * d
    return BoundParams(a, b, tuple(ell))


def tensor_bound_rhs(profile: SpectralProfile, r: Sequence[int], p: int, alpha, beta,
                     ell: Sequence[int] | None = None) -> tuple[float, float]:
    """Probabilistic bound on ``||X - X_hat||`` and its failure probability.

    ``sqrt(sum_j (1 + alpha_j n_j' / l_j) tail(j, l_j)) + sqrt(sum_j band(j, r_j, l_j))``
    where ``n_j'`` is the product of the other dimensions and ``l_j = r_j + p``
    unless given.
    """
    params = _params(profile, r, p, alpha, beta, ell)
    dims = profile.dims
    N = prod(dims)
    if not all(params.admissible(dims, r)):
        _warn_inadmissible("tensor bound")
    rand = sum((1.0 + params.alpha[j] * (N // dims[j]) / params.ell[j]) * profile.tail(j, params.ell[j])
               for j in range(len(dims)))
    core = sum(profile.band(j, r[j], params.ell[j]) for j in range(len(dims)))
    return sqrt(rand) + sqrt(core), params.failure_probability


def sthosvd_bound_rhs(profile: SpectralProfile, r: Sequence[int], p: int, alpha, beta,
                      ell: Sequence[int] | None = None) -> tuple[float, float]:
    """Bound for the sequentially truncated variant; its right-hand side has the same form."""
    return tensor_bound_rhs(profile, r, p, alpha, beta, ell)


def kron_srht(ns: Sequence[int], ss: Sequence[int], rng: RngSpec) -> np.ndarray:
    """``Phi_q kron ... kron Phi_1`` of independent ``n_k x s_k`` SRHT factors."""
    out = np.ones((1, 1))
    for k, (n, s) in enumerate(zip(ns, ss)):
        out = np.kron(gen_srht(n, s, rng.child(k)), out)
    return out


@dataclass
class MonteCarloResult:
    violations: int
    trials: int
    threshold: float
    failure_probability: float
    values: np.ndarray

    @property
    def rate(self) -> float:
        return self.violations / self.trials

    @property
    def stderr(self) -> float:
        q = self.failure_probability
        return sqrt(max(q * (1 - q), 0.0) / self.trials)

    @property
    def within_margin(self) -> bool:
        return self.rate <= self.failure_probability + 3 * self.stderr


def omega1_monte_carlo(ns: Sequence[int], ss: Sequence[int], r: int, trials: int, alpha: float,
                       beta: float, seed: int = 0) -> MonteCarloResult:
    """Empirical rate of ``1/sigma_min^2(V1^T Omega) > alpha n / l`` for Kronecker SRHT ``Omega``.

    ``V1`` is a Haar-random ``n x r`` orthonormal basis drawn fresh in each
    trial, which covers any fixed singular subspace as a special case.
    """
    if not all(is_power_of_two(n) for n in ns):
        raise ValueError("SRHT factors need power-of-two dimensions")
    n, ell = prod(ns), prod(ss)
    if not ell >= admissibility_threshold(r, alpha, beta) or not n >= ell:
        _warn_inadmissible("omega1 bound")
    threshold = alpha * n / ell
    base = RngSpec(seed, ("omega1",))
    vals = np.empty(trials)
    for t in range(trials):
        Omega = kron_srht(ns, ss, base.child(t, "phi"))
        V1 = random_orthonormal(n, r, base.child(t, "v").generator())
        smin = np.linalg.svd(V1.T @ Omega, compute_uv=False)[-1]
        vals[t] = np.inf if smin == 0 else 1.0 / smin**2
    viol = int(np.sum(vals > threshold * (1 + 1e-12)))
    return MonteCarloResult(viol, trials, threshold, 1.0 / beta**2, vals)


@dataclass
class CoreSvalsReport:
    passed: bool
    max_excess: float
    per_mode: list


def lemma_core_svals_check(X: np.ndarray, Us: Sequence[np.ndarray], tol: float = 1e-10) -> CoreSvalsReport:
    """Check ``sigma_i(Y_(j)) <= sigma_i(X_(j))`` for ``Y = X x_1 U_1^T ... x_d U_d^T``."""
    for j, U in enumerate(Us):
        if U.shape[0] != X.shape[j] or not is_orthonormal(U):
            raise ValueError(f"factor {j} must have orthonormal columns and {X.shape[j]} rows")
    Y = multi_ttm(X, {j: (U, True) for j, U in enumerate(Us)})
    per_mode = []
    for j in range(X.ndim):
        sy = np.linalg.svd(unfold(Y, j), compute_uv=False)
        sx = np.linalg.svd(unfold(X, j), compute_uv=False)
        k = min(len(sy), len(sx))
        per_mode.append(float(np.max(sy[:k] - sx[:k])))
    worst = max(per_mode)
    return CoreSvalsReport(worst <= tol, worst, per_mode)


@dataclass
class ErrorDecomposition:
    total: float
    rand: float
    core: float
    core_bound: float

    @property
    def triangle_ok(self) -> bool:
        return self.total <= self.rand + self.core + 1e-10

    @property
    def core_ok(self) -> bool:
        return self.core**2 <= self.core_bound + 1e-10


def error_decomposition(X: np.ndarray, T: TuckerDecomposition,
                        profile: SpectralProfile | None = None) -> ErrorDecomposition:
    """Split the absolute error into the sketch part and the core-truncation part.

    Needs ``T.debug`` from a run with ``keep_debug=True``.
    """
    if "core_hat" not in T.debug or "bases" not in T.debug:
        raise ValueError("decomposition lacks the untruncated core; rerun with keep_debug=True")
    G_hat, Q = T.debug["core_hat"], T.debug["bases"]
    profile = spectral_profile(X) if profile is None else profile
    total = tensor_norm(X - reconstruct(T))
    rand = tensor_norm(X - multi_ttm(G_hat, dict(enumerate(Q))))
    # truncated core expressed in the sketch bases
    V = [Qj.T @ Uj for Qj, Uj in zip(Q, T.factors)]
    core = tensor_norm(G_hat - multi_ttm(T.core, dict(enumerate(V))))
    ranks = T.ranks
    bound = sum(profile.band(j, ranks[j], G_hat.shape[j]) for j in range(X.ndim))
    return ErrorDecomposition(total, rand, core, bound)


def write_csv(rows: Iterable[dict], fh=None, fields: Sequence[str] | None = None) -> str:
    """Write dict rows as CSV with a header; returns the text when ``fh`` is omitted."""
    rows = list(rows)
    buf = io.StringIO() if fh is None else fh
    fields = list(fields or (rows[0].keys() if rows else []))
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue() if fh is None else ""
