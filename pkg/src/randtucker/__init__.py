"""Randomized Tucker decompositions with Kronecker-structured sketches."""

from .algorithms import (
    ALGORITHMS,
    DEFAULT_OVERSAMPLING,
    RankError,
    TuckerDecomposition,
    decompose,
    hosvd,
    reconstruct,
    relative_error,
    rhosvd,
    rhosvd_kron,
    rhosvd_kron_reuse,
    rsthosvd,
    rsthosvd_kron,
    sthosvd,
)
from .sketch import PlanningError, RngSpec, plan_subrank_matrix, plan_subrank_vector
from .synth import synth_exact_lowrank, synth_geometric, synth_lowrank_noise
from .tensor import FlopCounter, ShapeError, fold, multi_ttm, tensor_norm, ttm, unfold

__all__ = [
    "ALGORITHMS", "DEFAULT_OVERSAMPLING", "FlopCounter", "PlanningError", "RankError", "RngSpec",
    "ShapeError", "TuckerDecomposition", "decompose", "fold", "hosvd", "multi_ttm",
    "plan_subrank_matrix", "plan_subrank_vector", "reconstruct", "relative_error", "rhosvd",
    "rhosvd_kron", "rhosvd_kron_reuse", "rsthosvd", "rsthosvd_kron", "sthosvd",
    "synth_exact_lowrank", "synth_geometric", "synth_lowrank_noise", "tensor_norm", "ttm", "unfold",
]
