"""Desk-scale numerical laboratory for criticality-enhanced sensing in the
open Rabi model: steady-state and dynamic critical scaling, photon-counting
Fisher information, and global quantum Fisher information."""

__version__ = "0.1.0"

from .model import ModelParams, g_critical, params_at

__all__ = ["ModelParams", "g_critical", "params_at", "__version__"]
