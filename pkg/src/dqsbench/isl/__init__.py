"""Recursive recompilation of Trotter steps into shallow dressed-CNOT circuits."""

from .ansatz import Ansatz, DressedCnotLayer, isl_simplify
from .engine import CostEvaluator, rotosolve_angle
from .recompiler import (
    CostRecord,
    IslConfig,
    IslEvolution,
    StepResult,
    cost,
    recompile_evolution,
    recompile_step,
    rotoselect_layer,
    rotosolve_all,
    select_pair,
)
from .tomography import concurrence, entanglement_of_formation, pairwise_qst

__all__ = [
    "Ansatz",
    "CostEvaluator",
    "CostRecord",
    "DressedCnotLayer",
    "IslConfig",
    "IslEvolution",
    "StepResult",
    "concurrence",
    "cost",
    "entanglement_of_formation",
    "isl_simplify",
    "pairwise_qst",
    "recompile_evolution",
    "recompile_step",
    "rotoselect_layer",
    "rotosolve_all",
    "rotosolve_angle",
    "select_pair",
]
