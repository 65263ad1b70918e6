"""Fast-slow analysis toolkit for the FitzHugh-Nagumo system."""

__version__ = "0.1.0"

from .core import Jacobian2x2, PhasePoint, SystemParams, TimeScale

__all__ = ["Jacobian2x2", "PhasePoint", "SystemParams", "TimeScale", "__version__"]
