"""Radial Klein-Gordon-Maxwell solver on a ball with Neumann flux data."""

from .elliptic import BoundaryData, NearSingular, apply_L, build_screened, solve_chi
from .functional import (
    DomainConstants,
    compute_constants,
    domain_constants,
    evaluate_J,
    gradient_J,
    verify_bound_lemma,
)
from .grid import BC, GridFunction, RadialDomain
from .reduction import CouplingField, InvariantViolation, PhysicsParams, ReducedState, reduce
from .solver import NoNewSolution, SolveOptions, SolveResult, Status, deflate_and_resolve, minimize

__all__ = [
    "BC",
    "BoundaryData",
    "CouplingField",
    "DomainConstants",
    "GridFunction",
    "InvariantViolation",
    "NearSingular",
    "NoNewSolution",
    "PhysicsParams",
    "RadialDomain",
    "ReducedState",
    "SolveOptions",
    "SolveResult",
    "Status",
    "apply_L",
    "build_screened",
    "compute_constants",
    "deflate_and_resolve",
    "domain_constants",
    "evaluate_J",
    "gradient_J",
    "minimize",
    "reduce",
    "solve_chi",
    "verify_bound_lemma",
]
