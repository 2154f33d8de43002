"""Exact classical emulator of stator-based stroboscopic simulation of the 2+1d Z2 gauge theory."""

from .errors import CapacityError, ConfigError, ConvergenceError, ProjectionError
from .lattice import LatticeGeometry, LoopSpec, build_lattice
from .statevec import PauliString, QubitRegister
from .gauge_dual import DualEngine, dual_map, exact_ground_state
from .protocol import (
    Layout,
    Schedule,
    build_U,
    measure_wilson_stator,
    prepare_magnetic_gs,
    run_adiabatic,
    select_engine,
)
from .photonics import (
    GradientSpec,
    InteractionModel,
    collision_report,
    effective_interaction,
    error_budget,
    resonant_pairs,
)
from .analysis import find_crossing, fit_slope

__version__ = "0.1.0"
