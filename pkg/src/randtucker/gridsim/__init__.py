"""Simulated processor grid for the parallel algorithms."""

from .cost import COST_ALGORITHMS, aao_payload, cost_model, is_first_payload, mttm_flops
from .dist import DistTensor, ScatteredTensor, block_offsets, distribute, gather
from .drivers import (
    MTTM_VARIANTS,
    PARALLEL_ALGORITHMS,
    SMALL_CORE_ENTRIES,
    parallel_rhkron_re,
    parallel_rsthosvd_kron,
)
from .grid import COUNTER_FIELDS, CollectiveRecord, CommStats, DivisibilityError, Grid
from .mttm import aao_mttm, all_modes_multi_ttm, is_mttm, parallel_ttm

__all__ = [
    "COST_ALGORITHMS", "COUNTER_FIELDS", "CollectiveRecord", "CommStats", "DistTensor", "DivisibilityError", "Grid",
    "MTTM_VARIANTS", "PARALLEL_ALGORITHMS", "SMALL_CORE_ENTRIES", "ScatteredTensor", "aao_mttm", "aao_payload", "is_first_payload",
    "all_modes_multi_ttm", "block_offsets", "cost_model", "distribute", "gather", "is_mttm",
    "mttm_flops", "parallel_rhkron_re", "parallel_rsthosvd_kron", "parallel_ttm",
]
