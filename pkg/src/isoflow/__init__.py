"""Isopycnal hydrostatic and non-hydrostatic ocean models on a periodic domain.

The horizontal domain is a ``d``-torus (``d`` = 1 or 2) discretized
pseudo-spectrally; the vertical coordinate is density on a uniform
node grid. The main entry points are re-exported here.
"""
from .errors import (
    CFLError,
    ConfigError,
    FieldError,
    IsoflowError,
    SolverError,
    StratificationError,
)
from .grid import Grid
from .state import (
    BackgroundProfile,
    HydroState,
    NonHydroState,
    Params,
    check_stratification,
    compute_H,
    init_w,
)
from .hydrostatic import rhs_hydro, run_hydro, step_hydro
from .nonhydrostatic import rhs_nonhydro, run_nonhydro, step_nonhydro
from .pressure import solve_pressure
from .diagnostics import control_functional, diagnostics_record, hsk_norm
from .config import RunConfig, emit_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "CFLError", "ConfigError", "FieldError", "IsoflowError", "SolverError", "StratificationError",
    "Grid", "BackgroundProfile", "HydroState", "NonHydroState", "Params",
    "check_stratification", "compute_H", "init_w",
    "rhs_hydro", "run_hydro", "step_hydro",
    "rhs_nonhydro", "run_nonhydro", "step_nonhydro",
    "solve_pressure", "control_functional", "diagnostics_record", "hsk_norm",
    "RunConfig", "emit_config", "parse_config",
]
