"""Waveform relaxation (Jacobi, Gauss-Seidel, asynchronous) for coupled heat problems."""
from .model import (MATERIAL_PAIRS, MATERIALS, CoupledPartition, HeatProblemConfig, MaterialParams,
                    MonolithicSystem, Splitting, assemble_heat, realized_splitting, splitting)
from .timeint import LMMethod, crank_nicolson, implicit_euler, lmm_solve_monolithic, trapezoidal
from .interp import TimeGrid, Waveform, enclosing_interval, union_grid
from .relaxopt import RelaxTable, optimal_thetas, relax_table, s_operator
from .rma import ScheduleController, Trace, Window
from .wr import (WRConfig, WRProblem, WRResult, compute_reference, run, run_async, run_gauss_seidel,
                 run_jacobi)

__version__ = "0.1.0"
