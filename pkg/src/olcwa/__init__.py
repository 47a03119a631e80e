"""Online linear classification with drift-aware weighted averaging."""

from .errors import OlcwaError
from .geometry import ParamVector
from .model import AlphaSchedule, OlcwaConfig, OlcwaModel, init, ovr_init, ovr_predict, ovr_step, predict, step
from .solver import MiniBatch, SolverConfig, fit_logistic

__all__ = [
    "AlphaSchedule",
    "MiniBatch",
    "OlcwaConfig",
    "OlcwaError",
    "OlcwaModel",
    "ParamVector",
    "SolverConfig",
    "fit_logistic",
    "init",
    "ovr_init",
    "ovr_predict",
    "ovr_step",
    "predict",
    "step",
]

__version__ = "0.1.0"
