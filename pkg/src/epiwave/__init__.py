"""Age- and space-structured epidemic solver with damped-wave relaxation."""

from .birth import BirthLaws, BirthValues, make_compatible, nonlinear_birth_term, solve_birth_step
from .char_solver import CharState, StepContext, propagate_characteristic, step
from .fields import NormReport, StateField, diff_norms, norm_H, norm_V
from .mesh import Mesh, build_mesh, characteristic_cells, characteristic_ids
from .operators import (
    KernelSet,
    KernelTerm,
    LinearPart,
    attach_tilde,
    delta_lambda_apply,
    g_op,
    lambda_at_zero,
    lambda_op,
    laplacian_neumann,
)
from .parabolic_model import derived_initial_slope, run_parabolic
from .relaxed_model import ModelSpec, Run, SolverConfig, residual_check, run_relaxed
from .study import SweepResult, compatibility_setup, front_tracker, tau_sweep
from .svir import SvirParams, build_svir, newborn_routing

__all__ = [
    "BirthLaws",
    "BirthValues",
    "CharState",
    "KernelSet",
    "KernelTerm",
    "LinearPart",
    "Mesh",
    "ModelSpec",
    "NormReport",
    "Run",
    "SolverConfig",
    "StateField",
    "StepContext",
    "SvirParams",
    "SweepResult",
    "attach_tilde",
    "build_mesh",
    "build_svir",
    "characteristic_cells",
    "characteristic_ids",
    "compatibility_setup",
    "delta_lambda_apply",
    "derived_initial_slope",
    "diff_norms",
    "front_tracker",
    "g_op",
    "lambda_at_zero",
    "lambda_op",
    "laplacian_neumann",
    "make_compatible",
    "newborn_routing",
    "nonlinear_birth_term",
    "norm_H",
    "norm_V",
    "propagate_characteristic",
    "residual_check",
    "run_parabolic",
    "run_relaxed",
    "solve_birth_step",
    "step",
    "tau_sweep",
]

__version__ = "0.1.0"
