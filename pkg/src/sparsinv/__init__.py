"""Structured H2 controller synthesis through sparsity invariance."""

from .invariance import InvarianceVerdict, check, counterexample, numeric_probe
from .sparsity import (
    Partition,
    PatternError,
    SparsityPattern,
    block_diag_permutation,
    bool_add,
    bool_mul,
    bool_power,
    closure,
    connected_components,
    leq,
    lt,
    structure_of,
)
from .structure_opt import enumerate_feasible_R, is_feasible_R, optimize_R, verify_optimality
from .synthesis import (
    InvarianceError,
    LinearSystem,
    SynthesisOptions,
    SynthesisResult,
    centralized,
    h2_norm,
    is_hurwitz,
    separability_certificate,
    synthesize,
)
from .witness import WitnessConfig, construct_dense_inverse, construct_full_product

__version__ = "0.1.0"

__all__ = [
    "InvarianceError", "InvarianceVerdict", "LinearSystem", "Partition", "PatternError",
    "SparsityPattern", "SynthesisOptions", "SynthesisResult", "WitnessConfig",
    "block_diag_permutation", "bool_add", "bool_mul", "bool_power", "centralized", "check",
    "closure", "connected_components", "construct_dense_inverse", "construct_full_product",
    "counterexample", "enumerate_feasible_R", "h2_norm", "is_feasible_R", "is_hurwitz", "leq",
    "lt", "numeric_probe", "optimize_R", "separability_certificate", "structure_of",
    "synthesize", "verify_optimality",
]
