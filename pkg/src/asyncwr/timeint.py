"""Linear multistep time stepping for monolithic and split linear systems.

An ``m``-step method applied to ``B u' + A u = f`` reads::

    sum_l (a_l B + b_l dt A) u_{n+l} = dt sum_l b_l f(t_{n+l}),   l = 0..m.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .interp import TimeGrid, Waveform
from .model import CoupledPartition, MonolithicSystem

__all__ = [
    "LMMethod",
    "TimeGrid",
    "implicit_euler",
    "trapezoidal",
    "crank_nicolson",
    "StepSolver",
    "SplitSubproblem",
    "lmm_solve_monolithic",
    "split_step",
]


class LMMethod:
    """Coefficients ``a_0..a_m`` and ``b_0..b_m`` of a linear multistep method.

    The constructor rejects methods that are not consistent or violate the
    root condition for ``rho(z) = sum a_l z**l``.
    """

    def __init__(self, a: Sequence[float], b: Sequence[float], name: str = ""):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim != 1 or a.shape != b.shape or a.size < 2:
            raise ValueError("a and b must be 1-d arrays of equal length >= 2")
        if a[-1] == 0:
            raise ValueError("a_m must be nonzero")
        self.a, self.b, self.name = a, b, name
        self._check_consistency()
        self._check_root_condition()

    @property
    def m(self) -> int:
        return self.a.size - 1

    def _check_consistency(self):
        ell = np.arange(self.a.size)
        rho1 = self.a.sum()
        drho1 = (ell * self.a).sum()
        scale = np.abs(self.a).sum()
        if abs(rho1) > 1e-12 * scale or abs(drho1 - self.b.sum()) > 1e-12 * scale:
            raise ValueError(f"method {self.name!r} is not consistent")

    def _check_root_condition(self, tol=1e-8):
        roots = np.roots(self.a[::-1])
        for i, z in enumerate(roots):
            if abs(z) > 1 + tol:
                raise ValueError(f"method {self.name!r} is not zero-stable: root {z}")
            if abs(abs(z) - 1) <= tol:
                others = np.delete(roots, i)
                if np.any(np.abs(others - z) <= 1e-6):
                    raise ValueError(f"method {self.name!r} has a repeated root {z} on the unit circle")

    def __repr__(self):
        return f"LMMethod(a={self.a.tolist()}, b={self.b.tolist()}, name={self.name!r})"


def implicit_euler() -> LMMethod:
    return LMMethod([-1.0, 1.0], [0.0, 1.0], "implicit-euler")


def trapezoidal() -> LMMethod:
    return LMMethod([-1.0, 1.0], [0.5, 0.5], "trapezoidal")


crank_nicolson = trapezoidal


class StepSolver:
    """Solves with ``a_m B + b_m dt A``.

    With ``reuse=True`` the LU factorization is computed once; otherwise it is
    recomputed for every solve.  Both give bitwise identical results since
    the factorization is deterministic.
    """

    def __init__(self, B, A, method: LMMethod, dt: float, reuse: bool = True):
        self.matrix = sp.csc_matrix(method.a[-1] * B + (method.b[-1] * dt) * A)
        self.reuse = reuse
        self._lu = self._factorize() if reuse else None

    def _factorize(self):
        if self.matrix.shape[0] == 0:
            return None
        try:
            return spla.splu(self.matrix)
        except RuntimeError as exc:
            raise np.linalg.LinAlgError(f"singular step matrix: {exc}") from None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.matrix.shape[0] == 0:
            return np.zeros(0)
        lu = self._lu if self.reuse else self._factorize()
        x = lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise np.linalg.LinAlgError("singular step matrix")
        return x


def _history_terms(method, B, A, dt, history):
    """``sum_{l<m} (a_l B + b_l dt A) x_{n+l}``."""
    acc = 0.0
    for ell in range(method.m):
        x = history[ell]
        acc = acc + method.a[ell] * (B @ x) + (method.b[ell] * dt) * (A @ x)
    return acc


def lmm_solve_monolithic(system: MonolithicSystem, method: LMMethod, grid: TimeGrid,
                         starting_values: Optional[Sequence[np.ndarray]] = None,
                         reuse: bool = True) -> Waveform:
    """Discrete monolithic solution on ``grid``.

    ``starting_values`` supplies ``u_1..u_{m-1}`` for multistep methods
    (``u_0`` is taken from the system).
    """
    m = method.m
    extra = [] if starting_values is None else [np.asarray(s, dtype=float) for s in starting_values]
    if len(extra) != m - 1:
        raise ValueError(f"method needs {m - 1} starting values beyond u0, got {len(extra)}")
    if grid.Tf != system.Tf:
        raise ValueError("grid and system disagree on Tf")
    dt = grid.dt
    solver = StepSolver(system.B, system.A, method, dt, reuse)
    U = np.empty((grid.N + 1, system.d))
    U[0] = system.u0
    for j, s in enumerate(extra, start=1):
        U[j] = s
    f = system.f
    for n in range(grid.N - m + 1):
        rhs = dt * sum(method.b[ell] * f(grid.t(n + ell)) for ell in range(m + 1))
        rhs = rhs - _history_terms(method, system.B, system.A, dt, U[n:n + m])
        U[n + m] = solver.solve(rhs)
    return Waveform(grid, U)


class SplitSubproblem:
    """One subsystem of a partitioned system with its coupling columns.

    ``side`` is ``"v"`` or ``"w"``.  The subsystem only couples to the peer
    through the peer's exchanged unknowns; anything else raises.

    Attributes
    ----------
    B_own, A_own : sparse
        Diagonal blocks.
    B_in, A_in : sparse
        Columns of the peer's exchanged unknowns.
    gamma_local : ndarray
        Positions of this side's exchanged unknowns in the local vector.
    """

    def __init__(self, system: MonolithicSystem, partition: CoupledPartition, side: str):
        if side not in ("v", "w"):
            raise ValueError("side must be 'v' or 'w'")
        own = partition.v_indices if side == "v" else partition.w_indices
        peer = partition.w_indices if side == "v" else partition.v_indices
        peer_gamma = partition.gamma_w if side == "v" else partition.gamma_v
        B, A = system.B.tocsr(), system.A.tocsr()
        rest = np.setdiff1d(peer, peer_gamma)
        if rest.size and (abs(B[own][:, rest]).sum() > 0 or abs(A[own][:, rest]).sum() > 0):
            raise ValueError(f"subsystem {side} couples to non-exchanged peer unknowns")
        self.side = side
        self.own = own
        self.B_own = B[own][:, own].tocsr()
        self.A_own = A[own][:, own].tocsr()
        self.B_in = B[own][:, peer_gamma].tocsr()
        self.A_in = A[own][:, peer_gamma].tocsr()
        self.gamma_local = partition.local_gamma(side)
        self.u0 = system.u0[own]
        self._f = system.f
        self._zero_f = getattr(system, "zero_forcing", False)

    @property
    def size(self) -> int:
        return self.own.size

    def f(self, t: float) -> np.ndarray:
        if self._zero_f:
            return np.zeros(self.size)
        return np.asarray(self._f(t), dtype=float)[self.own]

    def solver(self, method: LMMethod, dt: float, reuse: bool = True) -> StepSolver:
        return StepSolver(self.B_own, self.A_own, method, dt, reuse)


def split_step(sub: SplitSubproblem, method: LMMethod, grid: TimeGrid, n: int,
               own_history: Sequence[np.ndarray], peer_values: Sequence[np.ndarray],
               solver: Optional[StepSolver] = None) -> np.ndarray:
    """One LMM step ``n -> n + m`` of a subsystem.

    Parameters
    ----------
    own_history : sequence of m arrays
        ``x_n .. x_{n+m-1}``.
    peer_values : sequence of m + 1 arrays, or callable
        The peer's exchanged unknowns at ``t_n .. t_{n+m}``.  A callable is
        evaluated at those times.
    solver : StepSolver, optional
        Pre-factorized step matrix; built on the fly when omitted.
    """
    m = method.m
    if len(own_history) != m:
        raise ValueError(f"need {m} history values")
    if not 0 <= n <= grid.N - m:
        raise IndexError(f"step {n} outside grid")
    dt = grid.dt
    if callable(peer_values):
        peer_values = [peer_values(grid.t(n + ell)) for ell in range(m + 1)]
    if solver is None:
        solver = sub.solver(method, dt)
    rhs = 0.0
    if not sub._zero_f:
        rhs = dt * sum(method.b[ell] * sub.f(grid.t(n + ell)) for ell in range(m + 1))
    rhs = rhs - _history_terms(method, sub.B_own, sub.A_own, dt, own_history)
    for ell in range(m + 1):
        y = peer_values[ell]
        rhs = rhs - (method.a[ell] * (sub.B_in @ y) + (method.b[ell] * dt) * (sub.A_in @ y))
    return solver.solve(np.broadcast_to(rhs, (sub.size,)).astype(float))
