"""Pumping-cycle airborne wind energy: kite simulator, phase environments and TD3 agents."""
from .kernel import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
