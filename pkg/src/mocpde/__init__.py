"""Numerical laboratory for moduli of continuity of fully nonlinear parabolic equations."""

from .admissible import (AdmissibleTuple, BlockHessian, block_hessian, check_trace_inequality, is_admissible,
                         sample_admissible, sample_tuples)
from .errors import (CFLError, DimensionError, DomainError, EvaluationError, HypothesisError, MocPdeError,
                     SolverError, SymmetryError)
from .modulus import ModulusCurve, compute_moc, is_bounded_by
from .operators import (Jet1D, OneDimKind, OneDimOp, OperatorKind, OperatorSpec, builtin_pairs, eval_f,
                        eval_F, get_pair, pair_from_json)
from .solver import GridField, Trajectory, cfl_limit, gradient_sup, grid, solve, step
from .structure import SCReport, check_all_builtin, check_pair

__version__ = "0.1.0"

__all__ = [
    "AdmissibleTuple", "BlockHessian", "block_hessian", "check_trace_inequality", "is_admissible", "sample_admissible",
    "sample_tuples",
    "CFLError", "DimensionError", "DomainError", "EvaluationError", "HypothesisError", "MocPdeError",
    "SolverError", "SymmetryError",
    "ModulusCurve", "compute_moc", "is_bounded_by",
    "Jet1D", "OneDimKind", "OneDimOp", "OperatorKind", "OperatorSpec", "builtin_pairs", "eval_f", "eval_F",
    "get_pair", "pair_from_json",
    "GridField", "Trajectory", "cfl_limit", "gradient_sup", "grid", "solve", "step",
    "SCReport", "check_all_builtin", "check_pair",
]
