"""Leading-order per-processor cost model for parallel Tucker algorithms.

Cubic case: an ``n^d`` tensor, rank ``r`` in every mode, and a ``q^d``
grid with ``P = q^d``.  Kronecker methods use subranks ``s = r^(1/(d-1))``.
Entries are the leading terms only; ``None`` marks costs a row does not model.
"""

from __future__ import annotations

from math import log2

COST_ALGORITHMS = ("sthosvd", "choi", "alg11", "alg12")


def mttm_flops(n: int, s: int, d: int, q: int, variant: str) -> float:
    """Per-processor flops of one multi-TTM over ``d`` modes with ``s x n`` matrices."""
    if variant == "aao":
        return float(sum(2 * s**i * n ** (d - i + 1) / q ** (d - i + 1) for i in range(1, d + 1)))
    if variant == "is":
        return float(sum(2 * s**i * n ** (d - i + 1) / q**d for i in range(1, d + 1)))
    raise ValueError(f"unknown variant {variant!r}")


def aao_payload(n: int, s: int, d: int, q: int) -> int:
    """Words each processor contributes to the all-at-once reduce-scatter."""
    return s ** (d - 1) * n // q


def is_first_payload(n: int, s: int, d: int, q: int) -> int:
    """Words each processor contributes to the first in-sequence reduce-scatter."""
    return s * (n // q) ** (d - 1)


def cost_model(alg: str, n: int, r: int, d: int, q: int) -> dict:
    """Predicted factor-formation and core-formation costs per processor.

    Keys: ``factor_flops``, ``factor_words``, ``factor_messages``,
    ``core_flops``, ``core_words``, ``core_messages``.  ``choi`` is listed
    for comparison only and has no simulated counterpart.
    """
    P = q**d
    s = r ** (1.0 / (d - 1))
    core = {
        "core_flops": 2.0 * r * n**d / P,
        "core_words": r * n ** (d - 1) / P ** (1 - 1 / d),
        "core_messages": d * log2(P) if P > 1 else 0.0,
    }
    if alg == "sthosvd":
        factor = {"factor_flops": float(n ** (d + 1)) / P, "factor_words": float(n**d) / P,
                  "factor_messages": d * P ** (1 / d)}
    elif alg == "choi":
        factor = {"factor_flops": float(n ** (d + 1)) / P, "factor_words": float(n**d) / P,
                  "factor_messages": float(d * P)}
        core = dict.fromkeys(core)
    elif alg in ("alg11", "alg12"):
        mult = 2.0 if alg == "alg11" else 4.0
        factor = {"factor_flops": mult * s * n**d / P, "factor_words": d * r * n / P ** (1 / d),
                  "factor_messages": d * log2(P) if P > 1 else 0.0}
    else:
        raise ValueError(f"unknown algorithm {alg!r}; choose from {COST_ALGORITHMS}")
    return {**factor, **core}
