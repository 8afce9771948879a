"""Simulation and entropy diagnostics for a degenerate energy-transport system in 1-D."""

from .admissible import nbeta_membership, nstar_membership, quad_form_coeffs, region_scan, RegionScanSpec
from .config import RunConfig, load_config, preset_section4
from .discretization import Dirichlet, Grid1D, NeumannZeroFlux, State
from .model import Constant, DomainError, EntropyPair, ModelParams, TemperatureDependent
from .solver import SolverConfig, advance, newton_solve

__version__ = "0.1.0"
