"""Exact linear-velocity solutions of the 1-D compressible Euler equations.

Construction of the solution family, blowup classification and PDE residual
verification.
"""

from .classifier import Classification, Verdict, classify, blowup_time_quadrature, energy
from .ode_core import ModelParams, SeedData, Status, Trajectory, TrajectoryState, integrate
from .solution_field import eval_density, eval_velocity, quadratic_coeffs, support
from .verifier import GridSpec, ResidualReport, total_mass, verify

__all__ = [
    "Classification", "GridSpec", "ModelParams", "ResidualReport", "SeedData", "Status",
    "Trajectory", "TrajectoryState", "Verdict", "blowup_time_quadrature", "classify",
    "energy", "eval_density", "eval_velocity", "integrate", "quadratic_coeffs", "support",
    "total_mass", "verify",
]
