"""Numerical conjugacies between hyperbolic linear systems and their perturbations."""
from ._accel import BACKEND
from .shadowing import rho, sigma
from .segments import rho_flow
from .systems import (HyperbolicLinearField, HyperbolicLinearMap, HypothesisError, MapSystem, OdeSystem,
                      Perturbation, Splitting)

__all__ = ["BACKEND", "HyperbolicLinearField", "HyperbolicLinearMap", "HypothesisError", "MapSystem",
           "OdeSystem", "Perturbation", "Splitting", "rho", "rho_flow", "sigma"]
__version__ = "0.1.0"
