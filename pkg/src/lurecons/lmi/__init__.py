"""LMI assembly, SDP backend adapter, synthesis and verification."""

from .affine import LMI, AffineExpr, ConstraintSystem, VariableSpace, trace
from .backend import solve_system
from .synthesis import (AnalysisResult, SynthesisProblem, SynthesisResult, VerificationReport,
                        analyze_fixed_gain, assemble, feasible_gain_interval, gain_feasible,
                        max_epsilon, solve, verify_synthesis)

__all__ = [
    "LMI", "AffineExpr", "ConstraintSystem", "VariableSpace", "trace", "solve_system",
    "AnalysisResult", "SynthesisProblem", "SynthesisResult", "VerificationReport",
    "analyze_fixed_gain", "assemble", "feasible_gain_interval", "gain_feasible",
    "max_epsilon", "solve", "verify_synthesis",
]
