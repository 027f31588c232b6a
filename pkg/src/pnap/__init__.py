"""Asymptotic-preserving IMEX P_N solver for gray radiative transfer."""

from .discretization import BoundaryCondition, BoundarySpec, Mesh
from .harmonics import PnOperator, build_operator
from .integrator import ARS222, ARS443, EULER, PnSystem, SolverState, advance
from .physics import OpacityModel, PhysicalConstants, solve_temperature_update
from .scenarios import Scenario, builtin, load_config, run_simulation, save_config

__version__ = "0.1.0"

__all__ = [
    "ARS222", "ARS443", "EULER", "BoundaryCondition", "BoundarySpec", "Mesh", "OpacityModel",
    "PhysicalConstants", "PnOperator", "PnSystem", "Scenario", "SolverState", "advance",
    "build_operator", "builtin", "load_config", "run_simulation", "save_config",
    "solve_temperature_update",
]
