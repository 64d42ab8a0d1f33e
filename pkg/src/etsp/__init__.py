"""
etsp: coupled energy-transport / Schrodinger / Poisson simulation of a
nanoscale double-gate MOSFET with subband decomposition.
"""

__version__ = "0.1.0"

from .device_config import (  # noqa: F401
    CONSTANTS,
    ConfigError,
    DeviceSpec,
    DopingProfile,
    PhysicalConstants,
    Tolerances,
    build_doping,
    default_spec,
    load_config,
    save_config,
    scale_device,
)
from .mesh import Mesh2D, NodeTag, SliceGrid, TransportGrid, build_grids  # noqa: F401
from .schrodinger1d import SolverError, SubbandLadder, solve_ladder  # noqa: F401
from .et_solver import ConvergenceError, EtSolution, EtState, newton_solve  # noqa: F401
from .coupler import BiasPoint, Simulator, SweepResult, bias_sweep  # noqa: F401
