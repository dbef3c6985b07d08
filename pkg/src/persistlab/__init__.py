"""Numerical laboratory for a prey-predator model with an infectious disease in the predator."""
from .models import CounterexampleParams, ModelParams, DEFAULT_PARAMS
from .ode import SolverSettings, Trajectory

__version__ = "0.1.0"

__all__ = ["ModelParams", "CounterexampleParams", "DEFAULT_PARAMS", "SolverSettings", "Trajectory"]
