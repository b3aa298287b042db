"""Waveform relaxation drivers: Jacobi, Gauss-Seidel and asynchronous.

Two subsystems, ``v`` (left domain plus the interface flux ``q``) and ``w``
(interface temperature ``uG`` plus the right domain), are integrated over
the whole time window in every sweep.  Each side keeps the data it receives
from its peer in a :class:`UnionInterpolant` living on the union of both time
grids.  Relaxation is applied by the receiver when data enters that
interpolant::

    x_new = (1 - theta) * x_old + theta * x_raw

All methods use the same step and relaxation code, so the asynchronous
solver reproduces Jacobi and Gauss-Seidel bit for bit under the schedules
that force those data dependencies.

Asynchronous sweep, per actor and step ``n``:

1. sync the receive buffer and update indicators,
2. find the peer-grid interval around ``[t_n, t_{n+1}]`` and read the
   indicator of its right end: set means the peer is ahead,
3. mark unmarked union points in the interval (GS if ahead, else Jacobi)
   and, if ahead, relax the not yet relaxed points in it,
4. take the time step, then put its exchanged values and indicator.

After the sweep each actor sends its set of GS points, both meet at a
barrier, relax every remaining point (copy if the peer took it as GS,
Jacobi relaxation otherwise), clear indicators, exchange the termination
value and meet again.
"""
from __future__ import annotations

import bisect
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from .interp import TimeGrid, Waveform, enclosing_interval, lerp, union_grid
from .model import CoupledPartition, HeatProblemConfig, MonolithicSystem, assemble_heat
from .relaxopt import RelaxTable
from .rma import EXCLUSIVE, SHARED, Event, ScheduleController, Trace, Window
from .timeint import LMMethod, SplitSubproblem, split_step, trapezoidal

__all__ = [
    "METHODS",
    "WRProblem",
    "WRConfig",
    "IterationRecord",
    "SweepLog",
    "WRResult",
    "RelaxationConflict",
    "ProtocolError",
    "UnionInterpolant",
    "relax",
    "run_jacobi",
    "run_gauss_seidel",
    "run_async",
    "run",
    "compute_reference",
]

METHODS = ("jacobi", "gs-dn", "gs-nd", "async")


class RelaxationConflict(RuntimeError):
    """A union-grid point would be relaxed twice in one sweep."""


class ProtocolError(RuntimeError):
    """The two asynchronous actors disagree on shared decisions."""


def relax(old, new, theta: float) -> np.ndarray:
    if theta == 1.0:
        return np.array(new, dtype=float)
    return (1.0 - theta) * old + theta * new


class WRProblem:
    """A partitioned linear system with one time grid per side.

    Parameters
    ----------
    system, partition
        Monolithic system and its split.
    method : LMMethod
        One-step method (``m = 1``) used by both sides.
    Nv, Nw : int
        Step counts; ``Nw`` defaults to ``Nv``.
    """

    def __init__(self, system: MonolithicSystem, partition: CoupledPartition,
                 method: Optional[LMMethod] = None, Nv: int = 50, Nw: Optional[int] = None):
        method = trapezoidal() if method is None else method
        if method.m != 1:
            raise NotImplementedError("waveform relaxation is implemented for one-step methods")
        self.system = system
        self.partition = partition
        self.method = method
        self.grid_v = TimeGrid(system.Tf, Nv)
        self.grid_w = TimeGrid(system.Tf, Nv if Nw is None else Nw)
        self.sub_v = SplitSubproblem(system, partition, "v")
        self.sub_w = SplitSubproblem(system, partition, "w")
        self.union = union_grid(self.grid_v, self.grid_w)
        self.q0 = system.u0[partition.gamma_v]
        self.uG0 = system.u0[partition.gamma_w]

    @classmethod
    def from_config(cls, config: HeatProblemConfig, method: Optional[LMMethod] = None) -> "WRProblem":
        system, partition = assemble_heat(config)
        return cls(system, partition, method, config.Nv, config.Nw)

    @property
    def matching(self) -> bool:
        return self.grid_v == self.grid_w

    def interface_norm(self, y) -> float:
        return self.partition.interface_norm(y)


@dataclass
class WRConfig:
    """Settings of a WR run.

    ``relax`` is a :class:`RelaxTable`, a scalar used for every shape, or
    ``None`` (no relaxation).  ``variant`` selects the asynchronous flavour:
    ``"variable"`` relaxes on arrival with shape-dependent parameters,
    ``"constant"`` relaxes with one parameter before sending.

    ``termination="interface"`` stops on the relative update of ``uG(Tf)``.
    ``"exchanged"`` also requires the update of ``q(Tf)``, measured in
    temperature units through the weight of
    :func:`~asyncwr.analysis.interface_weights`, to be below the same
    threshold.  The first test alone can stop early when ``uG(Tf)``
    happens to repeat between two sweeps while ``q`` still moves.
    """

    method: str = "jacobi"
    relax: object = None
    tol: float = 1e-10
    kmax: int = 50
    schedule: str = "lockstep"
    seed: Optional[int] = 0
    variant: str = "variable"
    delay_factor: float = 0.5
    replay: Optional[Trace] = None
    termination: str = "interface"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.kmax < 1:
            raise ValueError("kmax must be at least 1")
        if self.variant not in ("variable", "constant"):
            raise ValueError("variant must be 'variable' or 'constant'")
        if self.termination not in ("interface", "exchanged"):
            raise ValueError("termination must be 'interface' or 'exchanged'")

    def table(self) -> RelaxTable:
        if self.relax is None:
            return RelaxTable.uniform(1.0)
        if isinstance(self.relax, RelaxTable):
            return self.relax
        return RelaxTable.uniform(float(self.relax))


@dataclass
class IterationRecord:
    k: int
    update_norm: float
    interface_error: float
    wall_time: float
    shape_log: str = ""


@dataclass
class SweepLog:
    """What one sweep actually did.

    ``v_new[n, l]`` is true when the step ``n`` of ``v`` read the current
    sweep's ``uG`` at ``t_{n+l}``; ``w_new`` likewise for ``q``.
    ``theta_u`` / ``theta_q`` hold the parameter each union point was
    relaxed with (1 for copies and for ``t = 0``).  ``marks_v`` /
    ``marks_w`` are each side's J/G marks over the union grid.
    """

    v_new: np.ndarray
    w_new: np.ndarray
    theta_u: np.ndarray
    theta_q: np.ndarray
    marks_v: str
    marks_w: str

    @property
    def shape_log(self) -> str:
        """Per union point: ``J`` (Jacobi), ``D`` (w used new q), ``N`` (v used new uG)."""
        out = []
        for a, b in zip(self.marks_v, self.marks_w):
            if a == "G" and b == "G":
                out.append("X")
            elif b == "G":
                out.append("D")
            elif a == "G":
                out.append("N")
            else:
                out.append("J")
        return "".join(out)


@dataclass
class WRResult:
    method: str
    v: Waveform
    w: Waveform
    records: List[IterationRecord]
    converged: bool
    sweeps: List[SweepLog] = field(default_factory=list)
    history: List[np.ndarray] = field(default_factory=list)
    trace: Optional[Trace] = None

    @property
    def iterations(self) -> int:
        return len(self.records)


class UnionInterpolant:
    """Peer data on the union grid, one sweep at a time.

    Points of the peer grid receive relaxed peer values; the remaining
    union points are linear interpolants of their two neighbouring peer
    points, filled in once both neighbours hold current data.
    """

    def __init__(self, union: Sequence[Fraction], peer_grid: TimeGrid, initial):
        initial = np.atleast_2d(np.asarray(initial, dtype=float))
        n = len(union)
        if initial.shape[0] == 1:
            initial = np.tile(initial, (n, 1))
        self.points = list(union)
        self.peer_grid = peer_grid
        self.peer_of = [peer_grid.index_of(p) for p in self.points]
        self.union_of_peer = [j for j, i in enumerate(self.peer_of) if i is not None]
        self.bracket = {}
        self.dependents = {j: [] for j in self.union_of_peer}
        N = peer_grid.N
        for j, p in enumerate(self.points):
            if self.peer_of[j] is None:
                s = p * N
                i = s.numerator // s.denominator
                jl, jr = self.union_of_peer[i], self.union_of_peer[i + 1]
                self.bracket[j] = (jl, jr, float(s - i))
                self.dependents[jl].append(j)
                self.dependents[jr].append(j)
        self.cur = initial.copy()
        self.old = initial.copy()
        n = len(self.points)
        self.relaxed = np.zeros(n, dtype=bool)
        self.fresh = np.zeros(n, dtype=bool)
        self.theta = np.ones(n)
        self.marks = [""] * n

    def begin_sweep(self):
        self.old = self.cur.copy()
        self.relaxed[:] = False
        self.relaxed[0] = True
        self.fresh[:] = False
        self.theta[:] = np.nan
        self.theta[0] = 1.0
        self.marks = [""] * len(self.points)

    def indices_between(self, lo: Fraction, hi: Fraction) -> range:
        return range(bisect.bisect_left(self.points, lo), bisect.bisect_right(self.points, hi))

    def mark(self, lo: Fraction, hi: Fraction, tag: str):
        for j in self.indices_between(lo, hi):
            if not self.marks[j]:
                self.marks[j] = tag

    def relax_peer_point(self, i_peer: int, raw, theta: float):
        j = self.union_of_peer[i_peer]
        if self.relaxed[j]:
            raise RelaxationConflict(f"union point {self.points[j]} relaxed twice")
        self.cur[j] = relax(self.old[j], raw, theta)
        self.relaxed[j] = self.fresh[j] = True
        self.theta[j] = theta
        for jj in self.dependents[j]:
            jl, jr, wgt = self.bracket[jj]
            if self.relaxed[jl] and self.relaxed[jr]:
                self.cur[jj] = lerp(self.cur[jl], self.cur[jr], wgt)
                self.relaxed[jj] = self.fresh[jj] = True

    def pending_peer_points(self):
        return [i for i, j in enumerate(self.union_of_peer) if not self.relaxed[j]]

    def peer_values(self) -> np.ndarray:
        return self.cur[self.union_of_peer]


class _Side:
    """State of one subsystem: its solver and its view of the peer."""

    def __init__(self, problem: WRProblem, side: str, peer_initial):
        self.side = side
        self.problem = problem
        if side == "v":
            self.sub, self.grid, self.peer_grid = problem.sub_v, problem.grid_v, problem.grid_w
        else:
            self.sub, self.grid, self.peer_grid = problem.sub_w, problem.grid_w, problem.grid_v
        self.method = problem.method
        self.solver = self.sub.solver(self.method, self.grid.dt)
        self.interp = UnionInterpolant(problem.union, self.peer_grid, peer_initial)
        self.own_to_union = [problem.union.index(p) for p in self.grid.points]
        self.X = np.empty((self.grid.N + 1, self.sub.size))
        self.X[0] = self.sub.u0
        self.new = np.zeros((self.grid.N, 2), dtype=bool)

    def begin_sweep(self):
        self.interp.begin_sweep()
        self.X = np.empty_like(self.X)
        self.X[0] = self.sub.u0
        self.new = np.zeros_like(self.new)

    def step(self, n: int):
        a, b = self.own_to_union[n], self.own_to_union[n + 1]
        I = self.interp
        self.new[n] = (I.fresh[a], I.fresh[b])
        self.X[n + 1] = split_step(self.sub, self.method, self.grid, n, [self.X[n]],
                                   [I.cur[a], I.cur[b]], self.solver)

    def sweep(self):
        for n in range(self.grid.N):
            self.step(n)

    def outgoing(self, i: int) -> np.ndarray:
        return self.X[i, self.sub.gamma_local]

    def receive_all(self, peer: "_Side", theta: float):
        for i in self.interp.pending_peer_points():
            self.interp.relax_peer_point(i, peer.outgoing(i), theta)

    def own_iterate(self, peer: "_Side") -> np.ndarray:
        """Own states with the exchanged unknowns replaced by the peer's relaxed copy."""
        X = self.X.copy()
        X[:, self.sub.gamma_local] = peer.interp.cur[self.own_to_union]
        return X


class _Monitor:
    """Termination test and error bookkeeping on ``uG(Tf)``."""

    def __init__(self, problem: WRProblem, config: "WRConfig", reference=None):
        self.problem = problem
        self.tol = config.tol
        self.scale = problem.interface_norm(problem.uG0)
        self.reference = None if reference is None else np.asarray(reference, dtype=float)
        self.flux_weight = None
        if config.termination == "exchanged":
            from .analysis import interface_weights
            w = interface_weights(problem.system, problem.partition, problem.method, problem.grid_v.dt)
            self.flux_weight = float(w[problem.partition.gamma_v[0]])
        self.t0 = time.perf_counter()

    def check(self, prev, new, prev_q=None, new_q=None):
        """Update norm of ``uG(Tf)`` and the stop decision."""
        upd = self.problem.interface_norm(new - prev)
        converged = upd < self.tol * self.scale or upd == 0.0
        if self.flux_weight is not None:
            upd_q = self.flux_weight * self.problem.interface_norm(new_q - prev_q)
            converged = converged and (upd_q < self.tol * self.scale or upd_q == 0.0)
        return upd, converged

    def error(self, uG_Tf) -> float:
        if self.reference is None:
            return float("nan")
        err = self.problem.interface_norm(uG_Tf - self.reference)
        return err / self.scale if self.scale > 0 else err

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0


def _initial_views(problem: WRProblem, initial):
    """Peer data each side starts from: constant extrapolation unless given.

    ``initial`` is ``(q_values, uG_values)`` on the v and w grids; their
    values at ``t = 0`` are replaced by the initial condition.
    """
    if initial is None:
        return problem.uG0, problem.q0
    q_vals, uG_vals = (np.asarray(x, dtype=float) for x in initial)
    u_on_union = Waveform(problem.grid_w, uG_vals)
    q_on_union = Waveform(problem.grid_v, q_vals)
    uv = np.array([u_on_union.eval_point(p) for p in problem.union])
    qv = np.array([q_on_union.eval_point(p) for p in problem.union])
    # t = 0 carries the initial condition, which no sweep ever changes
    uv[0], qv[0] = problem.uG0, problem.q0
    return uv, qv


def _sweep_log(sv: _Side, sw: _Side) -> SweepLog:
    return SweepLog(sv.new.copy(), sw.new.copy(), sv.interp.theta.copy(), sw.interp.theta.copy(),
                    "".join(m or "J" for m in sv.interp.marks),
                    "".join(m or "J" for m in sw.interp.marks))


def _history_entry(problem: WRProblem, sv: _Side, sw: _Side) -> Optional[np.ndarray]:
    if not problem.matching:
        return None
    U = np.empty((problem.grid_v.N + 1, problem.system.d))
    U[:, problem.partition.v_indices] = sv.own_iterate(sw)
    U[:, problem.partition.w_indices] = sw.own_iterate(sv)
    return U


def _result(method, problem, sv, sw, records, converged, sweeps, history, trace=None):
    v = Waveform(problem.grid_v, sv.own_iterate(sw))
    w = Waveform(problem.grid_w, sw.own_iterate(sv))
    return WRResult(method, v, w, records, converged, sweeps, history, trace)


def _run_sync(problem: WRProblem, order: str, config: WRConfig, reference=None,
              initial=None, keep_history: bool = False) -> WRResult:
    table = config.table()
    u_init, q_init = _initial_views(problem, initial)
    sv = _Side(problem, "v", u_init)
    sw = _Side(problem, "w", q_init)
    mon = _Monitor(problem, config, reference)
    prev = sv.interp.cur[-1].copy()
    prev_q = sw.interp.cur[-1].copy()
    records, sweeps, history = [], [], []
    converged = False
    for k in range(1, config.kmax + 1):
        sv.begin_sweep()
        sw.begin_sweep()
        if order == "jacobi":
            sv.sweep()
            sw.sweep()
            sv.receive_all(sw, table.theta_jacobi)
            sw.receive_all(sv, table.theta_jacobi)
            sv.interp.marks = ["J"] * len(problem.union)
            sw.interp.marks = ["J"] * len(problem.union)
        elif order == "gs-dn":
            sv.sweep()
            sw.receive_all(sv, table.theta_gs_dn)
            sw.sweep()
            sv.receive_all(sw, 1.0)
            sv.interp.marks = ["J"] * len(problem.union)
            sw.interp.marks = ["G"] * len(problem.union)
        elif order == "gs-nd":
            sw.sweep()
            sv.receive_all(sw, table.theta_gs_nd)
            sv.sweep()
            sw.receive_all(sv, 1.0)
            sv.interp.marks = ["G"] * len(problem.union)
            sw.interp.marks = ["J"] * len(problem.union)
        else:
            raise ValueError(f"unknown order {order!r}")
        new = sv.interp.cur[-1].copy()
        new_q = sw.interp.cur[-1].copy()
        upd, converged = mon.check(prev, new, prev_q, new_q)
        prev, prev_q = new, new_q
        log = _sweep_log(sv, sw)
        sweeps.append(log)
        if keep_history:
            history.append(_history_entry(problem, sv, sw))
        records.append(IterationRecord(k, upd, mon.error(new), mon.elapsed(), log.shape_log))
        if converged:
            break
    return _result(order, problem, sv, sw, records, converged, sweeps, history)


def run_jacobi(problem: WRProblem, config: WRConfig, reference=None, initial=None,
               keep_history: bool = False) -> WRResult:
    """Jacobi WR: both sides integrate against the previous sweep's data.

    Parameters
    ----------
    reference : array, optional
        ``uG(Tf)`` of a reference solution; enables ``interface_error``.
    initial : (q_values, uG_values), optional
        Initial guesses on the v and w grids.  Constant extrapolation of the
        initial value when omitted.
    keep_history : bool
        Store every iterate in monolithic layout (matching grids only).
    """
    return _run_sync(problem, "jacobi", config, reference, initial, keep_history)


def run_gauss_seidel(problem: WRProblem, config: WRConfig, order: str = "DN", reference=None,
                     initial=None, keep_history: bool = False) -> WRResult:
    """Gauss-Seidel WR.

    ``order="DN"`` integrates ``v`` (Dirichlet side) first and relaxes the
    flux it hands over; ``"ND"`` integrates ``w`` first and relaxes ``uG``.
    """
    order = order.upper()
    if order not in ("DN", "ND"):
        raise ValueError("order must be 'DN' or 'ND'")
    return _run_sync(problem, "gs-" + order.lower(), config, reference, initial, keep_history)


# ---------------------------------------------------------------------------
# asynchronous WR
# ---------------------------------------------------------------------------

class _Actor(_Side):
    """A side running as a schedulable generator."""

    def __init__(self, problem, side, peer_initial, actor_id, config, table, windows, monitor,
                 lock_timeout):
        super().__init__(problem, side, peer_initial)
        self.id = actor_id
        self.peer_id = 1 - actor_id
        self.config = config
        self.table = table
        self.win = windows
        self.monitor = monitor
        self.lock_timeout = lock_timeout
        self.records: List[IterationRecord] = []
        self.decisions: List[bool] = []
        self.sweep_state = []
        self.converged = False
        self.prev_tf = None
        self.prev_q_tf = None
        self.theta_gs = table.theta_gs_nd if side == "v" else table.theta_gs_dn
        # constant variant: own relaxed output, relaxed before it is sent
        self.sent = np.tile(self.sub.u0[self.sub.gamma_local], (self.grid.N + 1, 1))
        self.theta_const = table.theta_jacobi

    # window helpers ---------------------------------------------------------
    def _sync(self, name):
        w = self.win[name][self.id]
        ep = w.lock(SHARED, self.id, self.lock_timeout)
        w.sync(self.id)
        ep.unlock()

    def _put(self, name, offset, payload):
        w = self.win[name][self.peer_id]
        ep = w.lock(EXCLUSIVE, self.id, self.lock_timeout)
        ep.put(offset, payload)
        ep.unlock()

    def _event(self, action, target, step, k):
        return Event(self.id, action, target, step, k)

    # program ----------------------------------------------------------------
    def program(self):
        variable = self.config.variant == "variable"
        N = self.grid.N
        for k in range(1, self.config.kmax + 1):
            self.begin_sweep()
            for n in range(N):
                yield self._event("sync", "buffer", n, k)
                self._sync("buffer")
                self._sync("indicator")
                if variable:
                    self._prepare_variable(n)
                else:
                    self._prepare_constant(n)
                self.step(n)
                yield self._event("put", "buffer", n, k)
                payload = self.outgoing(n + 1)
                if not variable:
                    payload = relax(self.sent[n + 1], payload, self.theta_const)
                    self.sent[n + 1] = payload
                self._put("buffer", n + 1, payload)
                self._put("indicator", n + 1, 1.0)
            if variable:
                yield self._event("put", "marks", N, k)
                gs = np.array([m == "G" for m in self.interp.marks], dtype=float)
                self._put("marks", 0, gs)
            yield self._event("barrier", "F1", N, k)
            self._sync("buffer")
            self._sync("marks")
            if variable:
                self._finalize_variable()
            else:
                self._finalize_constant()
            self.win["indicator"][self.id].write_local(slice(None), 0.0, self.id)
            self.win["marks"][self.id].write_local(slice(None), 0.0, self.id)
            # v sends its relaxed uG(Tf), w its relaxed q(Tf)
            yield self._event("put", "tf", N, k)
            self._put("tf", 0, self.interp.cur[-1])
            self.sweep_state.append((self.X.copy(), self.interp.cur.copy(), self.new.copy(),
                                     self.interp.theta.copy(),
                                     "".join(m or "J" for m in self.interp.marks)))
            yield self._event("barrier", "F2", N, k)
            self._sync("tf")
            if self.side == "v":
                uG_Tf = self.interp.cur[-1].copy()
                q_Tf = self.win["tf"][self.id].read(0)
            else:
                uG_Tf = self.win["tf"][self.id].read(0)
                q_Tf = self.interp.cur[-1].copy()
            upd, conv = self.monitor.check(self.prev_tf, uG_Tf, self.prev_q_tf, q_Tf)
            self.prev_tf, self.prev_q_tf = uG_Tf, q_Tf
            self.decisions.append(conv)
            self.records.append(IterationRecord(k, upd, self.monitor.error(uG_Tf),
                                                self.monitor.elapsed()))
            if conv:
                self.converged = True
                break

    def _prepare_variable(self, n):
        I = self.interp
        t_n, t_np1 = self.grid.point(n), self.grid.point(n + 1)
        lo, hi, i_plus = enclosing_interval(self.peer_grid, t_n, t_np1)
        ahead = self.win["indicator"][self.id].read(i_plus)[0] != 0.0
        I.mark(lo, hi, "G" if ahead else "J")
        if not ahead:
            return
        buf = self.win["buffer"][self.id]
        for j in I.indices_between(lo, hi):
            i = I.peer_of[j]
            if i is None or I.relaxed[j]:
                continue
            theta = self.theta_gs if I.marks[j] == "G" else self.table.theta_jacobi
            I.relax_peer_point(i, buf.read(i), theta)

    def _prepare_constant(self, n):
        # the peer already relaxed; take every point that arrived this sweep
        I = self.interp
        ind = self.win["indicator"][self.id]
        buf = self.win["buffer"][self.id]
        t_n, t_np1 = self.grid.point(n), self.grid.point(n + 1)
        lo, hi, i_plus = enclosing_interval(self.peer_grid, t_n, t_np1)
        I.mark(lo, hi, "G" if ind.read(i_plus)[0] != 0.0 else "J")
        for i in I.pending_peer_points():
            if ind.read(i)[0] != 0.0:
                I.relax_peer_point(i, buf.read(i), 1.0)

    def _finalize_variable(self):
        I = self.interp
        peer_gs = self.win["marks"][self.id].read(0)
        buf = self.win["buffer"][self.id]
        pending = I.pending_peer_points()
        # points the peer treated as Gauss-Seidel first
        for i in pending:
            j = I.union_of_peer[i]
            if peer_gs[j] != 0.0:
                if I.marks[j] == "G":
                    raise ProtocolError(f"point {I.points[j]} is GS on both sides")
                I.relax_peer_point(i, buf.read(i), 1.0)
        for i in I.pending_peer_points():
            j = I.union_of_peer[i]
            if I.marks[j] == "G":
                raise ProtocolError(f"GS point {I.points[j]} left unrelaxed during the sweep")
            I.relax_peer_point(i, buf.read(i), self.table.theta_jacobi)

    def _finalize_constant(self):
        I = self.interp
        buf = self.win["buffer"][self.id]
        for i in I.pending_peer_points():
            I.relax_peer_point(i, buf.read(i), 1.0)
        I.theta[1:] = self.theta_const


def run_async(problem: WRProblem, config: WRConfig, reference=None, initial=None,
              keep_history: bool = False, controller: Optional[ScheduleController] = None) -> WRResult:
    """Asynchronous WR over emulated one-sided communication.

    Both sides step concurrently under ``config.schedule`` (or an explicit
    ``controller``); the returned result carries the recorded trace.
    """
    if initial is not None and config.variant == "constant":
        raise NotImplementedError("custom initial guesses are supported by the variable variant only")
    mode = {"p0-ahead": "process0_ahead", "p1-ahead": "process1_ahead"}.get(config.schedule, config.schedule)
    if controller is None:
        controller = ScheduleController(mode, seed=config.seed, delay_factor=config.delay_factor,
                                        replay=config.replay)
    table = config.table()
    u_init, q_init = _initial_views(problem, initial)
    nT = len(problem.union)
    nq, nu = problem.q0.size, problem.uG0.size
    Nv, Nw = problem.grid_v.N, problem.grid_w.N
    # window[name][owner]; actor 0 is v, actor 1 is w
    windows = {
        "buffer": [Window(Nw + 1, nu, 0, "buffer-v", problem.uG0),
                   Window(Nv + 1, nq, 1, "buffer-w", problem.q0)],
        "indicator": [Window(Nw + 1, 1, 0, "indicator-v"), Window(Nv + 1, 1, 1, "indicator-w")],
        "marks": [Window(1, nT, 0, "marks-v"), Window(1, nT, 1, "marks-w")],
        "tf": [Window(1, nq, 0, "tf-v"), Window(1, nu, 1, "tf-w")],
    }
    mon = _Monitor(problem, config, reference)
    timeout = controller.lock_timeout
    av = _Actor(problem, "v", u_init, 0, config, table, windows, mon, timeout)
    aw = _Actor(problem, "w", q_init, 1, config, table, windows, mon, timeout)
    av.prev_tf = aw.prev_tf = av.interp.cur[-1].copy()
    av.prev_q_tf = aw.prev_q_tf = aw.interp.cur[-1].copy()
    controller.run([av.program(), aw.program()], costs=[1.0 / Nv, 1.0 / Nw])

    if av.decisions != aw.decisions:
        raise ProtocolError("actors disagree on termination")
    for w_list in windows.values():
        for w in w_list:
            if not w.verify():
                raise ProtocolError(f"window {w.name} holds a torn slot")

    sweeps, history = [], []
    sv, sw = _Side(problem, "v", u_init), _Side(problem, "w", q_init)
    for (Xv, Iv, nv, thv, mv), (Xw, Iw, nw, thw, mw) in zip(av.sweep_state, aw.sweep_state):
        sweeps.append(SweepLog(nv, nw, thv, thw, mv, mw))
        if keep_history and problem.matching:
            sv.X, sv.interp.cur = Xv, Iv
            sw.X, sw.interp.cur = Xw, Iw
            history.append(_history_entry(problem, sv, sw))
    for rec, log in zip(av.records, sweeps):
        rec.shape_log = log.shape_log
    return _result("async", problem, av, aw, av.records, av.converged, sweeps, history,
                   controller.recorded())


def run(problem: WRProblem, config: WRConfig, reference=None, initial=None,
        keep_history: bool = False) -> WRResult:
    """Dispatch on ``config.method``."""
    if config.method == "jacobi":
        return run_jacobi(problem, config, reference, initial, keep_history)
    if config.method == "gs-dn":
        return run_gauss_seidel(problem, config, "DN", reference, initial, keep_history)
    if config.method == "gs-nd":
        return run_gauss_seidel(problem, config, "ND", reference, initial, keep_history)
    return run_async(problem, config, reference, initial, keep_history)


def compute_reference(problem: WRProblem, relax=None, tol: float = 1e-11, kmax: int = 500) -> np.ndarray:
    """``uG(Tf)`` of Gauss-Seidel (DN) WR converged to ``tol``."""
    res = run_gauss_seidel(problem, WRConfig("gs-dn", relax, tol, kmax), "DN")
    if not res.converged:
        raise RuntimeError(f"reference run did not converge in {kmax} iterations")
    return res.w.values[-1, problem.sub_w.gamma_local].copy()
