"""Monge-Ampere type equations on Carnot groups: frames, horizontal
calculus, a policy-iteration solver and comparison-principle checks."""

__version__ = "0.1.0"

from .bellman import (BellmanControl, DomainError, DoublingPair, best_control, bellman_value,
                      check_doubling_membership, control_grid, logdet_exact)
from .carnot import (CarnotFrame, Dilation, FrameError, LayerSignature, builtin_frame, engel, euclidean,
                     group_dilate, heisenberg, lie_bracket, load_frame, validate_frame)
from .comparison import (PerturbationParams, certify_strict_subsolution, gradient_bound, lipschitz_h_check,
                         perturb, strictness_sweep, verify_comparison)
from .estimator import MongeAmpereSolver
from .grid import Box, Grid, GridFunction, read_grid_function, write_grid_function
from .hamiltonian import Hamiltonian, HamiltonianError
from .horizontal import Convexity, certify_convexity, horizontal_jet, horizontal_jets
from .polynomial import Polynomial
from .solver import DirichletProblem, SolverConfig, policy_improve, policy_solve, residual, solve
from .specfile import SpecError, parse_spec

__all__ = [
    "BellmanControl", "Box", "CarnotFrame", "Convexity", "Dilation", "DirichletProblem", "DomainError",
    "DoublingPair", "FrameError", "Grid", "GridFunction", "Hamiltonian", "HamiltonianError",
    "LayerSignature", "MongeAmpereSolver", "PerturbationParams", "Polynomial", "SolverConfig", "SpecError",
    "bellman_value", "best_control", "builtin_frame", "certify_convexity", "certify_strict_subsolution",
    "check_doubling_membership", "control_grid", "engel", "euclidean", "gradient_bound", "group_dilate",
    "heisenberg", "horizontal_jet", "horizontal_jets", "lie_bracket", "lipschitz_h_check", "load_frame",
    "logdet_exact", "parse_spec", "perturb", "policy_improve", "policy_solve", "read_grid_function",
    "residual", "solve", "strictness_sweep", "validate_frame", "verify_comparison", "write_grid_function",
]
