"""Chemotaxis-Navier-Stokes perturbations of Couette flow in sheared coordinates.

Pseudo-spectral simulation of the cell density N and vorticity Omega with
exact integration of the sheared diffusion, the Fourier multipliers used
for the stability energy estimates, and the diagnostics that monitor them.
"""

from .spectral import Grid, SpectralField, make_grid
from .multipliers import MultiplierSpec, verify_lemma_suite
from .dynamics import PhysParams, SimState, Switches, run, step
from .config import parse_config, load_config

__all__ = [
    "Grid",
    "SpectralField",
    "make_grid",
    "MultiplierSpec",
    "verify_lemma_suite",
    "PhysParams",
    "SimState",
    "Switches",
    "run",
    "step",
    "parse_config",
    "load_config",
]
__version__ = "0.1.0"
