"""Certified bi-Lipschitz networks, their inversion, and PL surrogate losses."""

from .bilip import (
    BiLipModel,
    ConditionedBiLipModel,
    conditioned_forward,
    conditioned_inverse,
    g_forward,
    g_inverse,
    g_inverse_info,
)
from .cayley import OrthogonalSpec, cayley
from .errors import (
    CertificationError,
    ConfigError,
    ContractError,
    DimensionError,
    NonConvergenceError,
    NumericalError,
)
from .io import load_model, save_model
from .monlip import LayerWeights, MonLipSpec, certificate_check, materialize, param_count
from .pl import PLNet, VerificationReport, empirical_bilip, f_eval, global_min, grad_f, pl_check
from .solvers import SolverConfig, SolveResult, dys_solve, fsm_solve, prox

__version__ = "0.1.0"

__all__ = [
    "BiLipModel",
    "CertificationError",
    "ConditionedBiLipModel",
    "ConfigError",
    "ContractError",
    "DimensionError",
    "LayerWeights",
    "MonLipSpec",
    "NonConvergenceError",
    "NumericalError",
    "OrthogonalSpec",
    "PLNet",
    "SolveResult",
    "SolverConfig",
    "VerificationReport",
    "cayley",
    "certificate_check",
    "conditioned_forward",
    "conditioned_inverse",
    "dys_solve",
    "empirical_bilip",
    "f_eval",
    "fsm_solve",
    "g_forward",
    "g_inverse",
    "g_inverse_info",
    "global_min",
    "grad_f",
    "load_model",
    "materialize",
    "param_count",
    "pl_check",
    "prox",
    "save_model",
]
