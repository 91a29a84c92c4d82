"""Numerical lab for compressible Navier-Stokes with degenerate viscosity near vacuum.

Modules: regime (parameter constants), fields (grids and stencils), burgers
(background flow), odebound (comparison ODE), initdata, solver, diagnostics,
config, experiments and cli.
"""
from .regime import Params, classify, derived_constants, predicted_decay, validate
from .fields import Field, Grid
from .burgers import BurgersFlow, InitialVelocity
from .odebound import OdeSpec, closed_form, threshold_lambda
from .solver import ReformState, SolverConfig, picard_solve, run

__all__ = ["Params", "classify", "derived_constants", "predicted_decay", "validate", "Field", "Grid",
           "BurgersFlow", "InitialVelocity", "OdeSpec", "closed_form", "threshold_lambda",
           "ReformState", "SolverConfig", "picard_solve", "run"]
