"""Convergence analysis of discrete WR iterations written as matrix splittings.

With ``B = MB - NB`` and ``A = MA - NA`` the error ``e = u - u_mono`` of a
WR iterate obeys, for every step ``n``::

    sum_l C_{n,l} e^{k+1}_{n+l} = sum_l D_{n,l} e^k_{n+l}
    C_{n,l} = a_l MB + b_l dt MA,   D_{n,l} = a_l NB + b_l dt NA.

Stacking all steps gives block lower-banded matrices ``C`` and ``D`` (the
all-at-once system).  The iteration converges when every ``C_{n,m}`` is
nonsingular and ``||C_{n,m}^{-1} D_{n,m}|| < 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import CoupledPartition, MonolithicSystem, Splitting, realized_splitting, splitting
from .timeint import LMMethod

__all__ = [
    "BlockPair",
    "Theorem1Report",
    "blocks_from_splitting",
    "blocks_from_sweep",
    "build_all_at_once",
    "theorem1_check",
    "max_realized_block_norm",
    "error_recursion",
    "iteration_spectral_radius",
    "observed_contraction",
    "step_error_norms",
    "flux_scaling",
    "interface_weights",
]


@dataclass
class BlockPair:
    """``C[n][l]`` and ``D[n][l]`` for ``n = 0..N-m`` and ``l = 0..m``."""

    C: List[List[np.ndarray]]
    D: List[List[np.ndarray]]
    m: int

    def __post_init__(self):
        if len(self.C) != len(self.D):
            raise ValueError("C and D cover different numbers of steps")
        for n, (cr, dr) in enumerate(zip(self.C, self.D)):
            if len(cr) != self.m + 1 or len(dr) != self.m + 1:
                raise ValueError(f"missing block at step {n}")

    @property
    def steps(self) -> int:
        return len(self.C)

    @property
    def N(self) -> int:
        return self.steps + self.m - 1

    @property
    def d(self) -> int:
        return self.C[0][0].shape[0]


def _blocks(split: Splitting, method: LMMethod, dt: float):
    C = [method.a[l] * split.MB + (method.b[l] * dt) * split.MA for l in range(method.m + 1)]
    D = [method.a[l] * split.NB + (method.b[l] * dt) * split.NA for l in range(method.m + 1)]
    return C, D


def blocks_from_splitting(split: Splitting, method: LMMethod, dt: float, N: int) -> BlockPair:
    """Blocks of a constant splitting on ``N`` steps."""
    C, D = _blocks(split, method, dt)
    steps = N - method.m + 1
    return BlockPair([C] * steps, [D] * steps, method.m)


def blocks_from_sweep(system: MonolithicSystem, partition: CoupledPartition, method: LMMethod,
                      dt: float, log) -> BlockPair:
    """Blocks realized by one recorded sweep (a :class:`~asyncwr.wr.SweepLog`).

    Grids must match.  At ``(n, l)`` the flux is relaxed with
    ``theta_q[n+l]``, the interface temperature with ``theta_u[n+l]``, and
    each side used new or old peer data as logged.
    """
    N = log.v_new.shape[0]
    if log.w_new.shape[0] != N:
        raise ValueError("realized blocks need matching time grids")
    cache: Dict[tuple, Tuple[list, list]] = {}
    Cs, Ds = [], []
    for n in range(N - method.m + 1):
        crow, drow = [], []
        for l in range(method.m + 1):
            j = n + l
            th_q = 1.0 if j == 0 else float(log.theta_q[j])
            th_u = 1.0 if j == 0 else float(log.theta_u[j])
            key = (th_q, th_u, bool(log.v_new[n, l]), bool(log.w_new[n, l]))
            if key not in cache:
                cache[key] = realized_splitting(system, partition, th_q, th_u, key[2], key[3])
            s = cache[key]
            crow.append(method.a[l] * s.MB + (method.b[l] * dt) * s.MA)
            drow.append(method.a[l] * s.NB + (method.b[l] * dt) * s.NA)
        Cs.append(crow)
        Ds.append(drow)
    return BlockPair(Cs, Ds, method.m)


def build_all_at_once(blocks: BlockPair) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """Block lower-banded ``C`` and ``D`` acting on ``(e_m, ..., e_N)``.

    Block row ``i`` (step ``n = i``) holds ``C_{i,m}`` on the diagonal and
    ``C_{i,l}`` in block column ``i - (m - l)``; columns before ``e_m``
    belong to starting errors, which are zero, and are dropped.
    """
    m, S, d = blocks.m, blocks.steps, blocks.d
    Crows, Drows = [], []
    for i in range(S):
        cr = [None] * S
        dr = [None] * S
        for l in range(m + 1):
            col = i - (m - l)
            if col >= 0:
                cr[col] = sp.csr_matrix(blocks.C[i][l])
                dr[col] = sp.csr_matrix(blocks.D[i][l])
        cr[i] = sp.csr_matrix(blocks.C[i][m])
        dr[i] = sp.csr_matrix(blocks.D[i][m])
        Crows.append(cr)
        Drows.append(dr)
    shape_fix = sp.csr_matrix((d, d))
    for rows in (Crows, Drows):
        for r in rows:
            if all(b is None for b in r):
                r[0] = shape_fix
    C = sp.bmat(Crows, format="csr")
    D = sp.bmat(Drows, format="csr")
    return C, D


def flux_scaling(partition: CoupledPartition, factor: float) -> np.ndarray:
    """Diagonal weights ``1`` on temperatures and ``factor`` on flux unknowns.

    Fluxes are a product of conductivity and gradient and are many orders
    of magnitude away from temperatures; measuring them in a rescaled unit
    makes the 2-norm meaningful for the mixed vector.
    """
    w = np.ones(partition.d)
    w[partition.gamma_v] = factor
    return w


@dataclass
class Theorem1Report:
    singular: List[int]
    norm2: np.ndarray
    norm_inf: np.ndarray
    cond: np.ndarray
    weights: Optional[np.ndarray] = None
    norm: str = "2"

    @property
    def max_norm(self) -> float:
        vals = self.norm2 if self.norm == "2" else self.norm_inf
        return float(np.max(vals)) if vals.size else 0.0

    @property
    def passed(self) -> bool:
        return not self.singular and self.max_norm < 1.0

    def to_text(self, prefix: str = "") -> str:
        lines = [
            f"{prefix}passed = {self.passed}",
            f"{prefix}norm = {self.norm}",
            f"{prefix}max_norm2 = {float(np.max(self.norm2)) if self.norm2.size else 0.0:.16e}",
            f"{prefix}max_norm_inf = {float(np.max(self.norm_inf)) if self.norm_inf.size else 0.0:.16e}",
            f"{prefix}max_cond = {float(np.max(self.cond)) if self.cond.size else 0.0:.16e}",
            f"{prefix}singular_steps = {','.join(map(str, self.singular)) or 'none'}",
        ]
        return "\n".join(lines)


def theorem1_check(blocks: BlockPair, norm: str = "2", weights: Optional[np.ndarray] = None,
                   cond_limit: float = 1e14) -> Theorem1Report:
    """Nonsingularity of ``C_{n,m}`` and the norms of ``C_{n,m}^{-1} D_{n,m}`` for every step.

    ``weights`` selects the weighted norm ``||W x||``, i.e. the norms of
    ``W C^{-1} D W^{-1}``.  Identical blocks are evaluated once.
    """
    if norm not in ("2", "inf"):
        raise ValueError("norm must be '2' or 'inf'")
    m = blocks.m
    n2, ninf, conds, singular = [], [], [], []
    seen: Dict[int, tuple] = {}
    for n in range(blocks.steps):
        Cm, Dm = blocks.C[n][m], blocks.D[n][m]
        key = (id(Cm), id(Dm))
        if key not in seen:
            c = np.linalg.cond(Cm)
            if not np.isfinite(c) or c > cond_limit:
                seen[key] = (np.inf, np.inf, c, True)
            else:
                K = np.linalg.solve(Cm, Dm)
                if weights is not None:
                    K = weights[:, None] * K / weights[None, :]
                seen[key] = (np.linalg.norm(K, 2), np.linalg.norm(K, np.inf), c, False)
        a, b, c, bad = seen[key]
        n2.append(a)
        ninf.append(b)
        conds.append(c)
        if bad:
            singular.append(n)
    return Theorem1Report(singular, np.array(n2), np.array(ninf), np.array(conds), weights, norm)


def max_realized_block_norm(system: MonolithicSystem, partition: CoupledPartition, method: LMMethod,
                            dt: float, logs, weights: Optional[np.ndarray] = None,
                            norm: str = "2") -> float:
    """Largest ``||C_{n,m}^{-1} D_{n,m}||`` over the diagonal blocks of several recorded sweeps.

    Equivalent to the maximum of :func:`theorem1_check` over
    :func:`blocks_from_sweep` of every log, but each distinct combination of
    relaxation parameters and data dependencies is evaluated once.
    """
    m = method.m
    keys = set()
    for log in logs:
        for n in range(log.v_new.shape[0] - m + 1):
            j = n + m
            keys.add((float(log.theta_q[j]), float(log.theta_u[j]), bool(log.v_new[n, m]),
                      bool(log.w_new[n, m])))
    worst = 0.0
    for th_q, th_u, v_new, w_new in keys:
        s = realized_splitting(system, partition, th_q, th_u, v_new, w_new)
        C = method.a[m] * s.MB + (method.b[m] * dt) * s.MA
        D = method.a[m] * s.NB + (method.b[m] * dt) * s.NA
        rep = theorem1_check(BlockPair([[C] * (m + 1)], [[D] * (m + 1)], m), norm, weights)
        if rep.singular:
            return float("inf")
        worst = max(worst, rep.max_norm)
    return worst


def error_recursion(blocks, e0, iterations: Optional[int] = None):
    """Iterate ``C e^{k+1} = D e^k`` by forward substitution over the steps.

    Parameters
    ----------
    blocks : BlockPair or sequence of BlockPair
        One pair for all iterations, or the pair realized in each iteration
        (iteration ``k + 1`` uses ``blocks[k]``).
    e0 : array, shape (N + 1, d)
        Initial error history; its first ``m`` entries (starting errors)
        must be zero.
    iterations : int, optional
        Number of iterations; defaults to ``len(blocks)`` for a sequence.

    Returns
    -------
    errors : ndarray, shape (K + 1, N + 1, d)
    norms : ndarray, shape (K + 1, N + 1)
        Euclidean norms ``||e_n^{(k)}||``.
    """
    seq = [blocks] if isinstance(blocks, BlockPair) else list(blocks)
    if iterations is None:
        iterations = len(seq) if not isinstance(blocks, BlockPair) else 1
    e = np.array(e0, dtype=float)
    m = seq[0].m
    if np.any(e[:m] != 0):
        raise ValueError("starting errors must be zero")
    out = [e.copy()]
    lu_cache: Dict[int, tuple] = {}
    for k in range(iterations):
        bp = seq[min(k, len(seq) - 1)]
        new = np.zeros_like(e)
        for n in range(bp.steps):
            rhs = sum(bp.D[n][l] @ e[n + l] for l in range(m + 1))
            for l in range(m):
                rhs = rhs - bp.C[n][l] @ new[n + l]
            Cm = bp.C[n][m]
            key = id(Cm)
            if key not in lu_cache:
                lu_cache[key] = (Cm, sla.lu_factor(Cm))
            new[n + m] = sla.lu_solve(lu_cache[key][1], rhs)
        e = new
        out.append(e.copy())
    errors = np.array(out)
    return errors, np.linalg.norm(errors, axis=2)


def iteration_spectral_radius(blocks: BlockPair, max_dim: int = 3000) -> float:
    """Spectral radius of ``C^{-1} D`` of the all-at-once system (dense)."""
    C, D = build_all_at_once(blocks)
    if C.shape[0] > max_dim:
        raise ValueError(f"dimension {C.shape[0]} exceeds max_dim={max_dim}")
    K = np.linalg.solve(C.toarray(), D.toarray())
    return float(np.max(np.abs(np.linalg.eigvals(K)))) if K.size else 0.0


def observed_contraction(errors: Sequence[float], floor: float = 0.0) -> float:
    """Largest ratio ``err[k+1] / err[k]`` over consecutive iterates above ``floor``.

    ``errors`` are per-iteration error norms in any fixed norm.
    """
    errs = np.asarray(errors, dtype=float)
    ratios = [errs[k + 1] / errs[k] for k in range(len(errs) - 1)
              if errs[k] > floor and errs[k + 1] > floor]
    return float(max(ratios)) if ratios else 0.0


def step_error_norms(history: Sequence[np.ndarray], reference: np.ndarray, step: int,
                     weights: Optional[np.ndarray] = None) -> np.ndarray:
    """``||W (u^k_step - u_step)||`` for each iterate of a history.

    For ``step = m`` the error obeys ``e^{k+1}_m = C_{0,m}^{-1} D_{0,m} e^k_m``
    exactly (starting errors vanish), so its per-iteration ratios are
    bounded by the norm of that diagonal block.
    """
    ref = np.asarray(reference, dtype=float)[step]
    w = 1.0 if weights is None else np.asarray(weights, dtype=float)
    return np.array([np.linalg.norm(w * (np.asarray(h)[step] - ref)) for h in history])


def interface_weights(system: MonolithicSystem, partition: CoupledPartition, method: LMMethod,
                      dt: float, interior: float = 1e-3) -> np.ndarray:
    """Diagonal weights of an interface-dominated norm.

    Temperatures on the interface get weight 1, interior unknowns
    ``interior`` and fluxes ``c = sqrt(||dG/dq|| / ||dq/dG||)``, where the two
    factors are the one-step responses of unrelaxed Jacobi (interface
    temperature to flux, and back).  The factor balances the interface
    iteration, which otherwise mixes quantities about ``S`` apart in size.
    """
    s = splitting(system, partition, "jacobi", 1.0)
    m = method.m
    C = sp.csc_matrix(method.a[m] * s.MB + (method.b[m] * dt) * s.MA)
    D = method.a[m] * s.NB + (method.b[m] * dt) * s.NA
    gv, gw = partition.gamma_v, partition.gamma_w
    lu = spla.splu(C)
    K_from_q = lu.solve(np.ascontiguousarray(D[:, gv]))
    K_from_u = lu.solve(np.ascontiguousarray(D[:, gw]))
    uq = np.linalg.norm(K_from_q[gw], 2)
    qu = np.linalg.norm(K_from_u[gv], 2)
    c = np.sqrt(uq / qu) if uq > 0 and qu > 0 else 1.0
    w = np.full(partition.d, float(interior))
    w[gw] = 1.0
    w[gv] = c
    return w
