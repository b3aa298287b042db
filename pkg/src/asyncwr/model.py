"""Linear coupled systems, their two-block partition, and WR splittings.

The benchmark is the coupled heat equation on ``[-1, 0] x [0, 1]`` (air, water
or steel on each side) discretized with P1 finite elements.  The unknown
vector is ordered as::

    v = [u1 (interior nodes of the left domain), q (interface flux)]
    w = [uG (interface temperature), u2 (interior nodes of the right domain)]

and the semi-discrete system reads ``B du/dt + A u = f``.

The flux ``q`` is an algebraic unknown: its row is the left domain's weak form
tested with the interface hat functions, ``q = (M1 du1/dt + K1 u1)|_G``, so the
column of ``B`` belonging to ``q`` is zero.  Time stepping only needs the step
matrix ``a_m B + b_m dt A`` to be nonsingular.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MaterialParams",
    "MATERIALS",
    "MATERIAL_PAIRS",
    "MonolithicSystem",
    "CoupledPartition",
    "HeatProblemConfig",
    "Splitting",
    "SPLITTING_KINDS",
    "assemble_heat",
    "initial_flux",
    "initial_state",
    "benchmark_initial_temperature",
    "single_domain_heat",
    "splitting",
    "realized_splitting",
]


@dataclass(frozen=True)
class MaterialParams:
    """Volumetric heat capacity ``alpha = rho * c_p`` and conductivity ``lam``."""

    alpha: float
    lam: float
    name: str = ""

    def __post_init__(self):
        if not (self.alpha > 0 and self.lam > 0):
            raise ValueError(f"material {self.name!r}: alpha and lambda must be positive")

    @property
    def diffusivity(self) -> float:
        return self.lam / self.alpha


MATERIALS = {
    "air": MaterialParams(1.293 * 1005, 0.0243, "air"),
    "water": MaterialParams(999.7 * 4192.1, 0.58, "water"),
    "steel": MaterialParams(7836 * 443, 48.9, "steel"),
}

MATERIAL_PAIRS = {
    "air-steel": (MATERIALS["air"], MATERIALS["steel"]),
    "air-water": (MATERIALS["air"], MATERIALS["water"]),
    "water-steel": (MATERIALS["water"], MATERIALS["steel"]),
}


def _zero_forcing(d):
    def f(t):
        return np.zeros(d)
    return f


@dataclass
class MonolithicSystem:
    """``B u' + A u = f(t)``, ``u(0) = u0`` on ``[0, Tf]``.

    ``B`` and ``A`` are stored as CSR matrices.  ``B`` may be singular when the
    system carries algebraic unknowns; see the module docstring.
    """

    B: sp.csr_matrix
    A: sp.csr_matrix
    u0: np.ndarray
    Tf: float
    f: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        self.B = sp.csr_matrix(self.B, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.u0 = np.asarray(self.u0, dtype=float)
        d = self.u0.shape[0]
        if self.B.shape != (d, d) or self.A.shape != (d, d):
            raise ValueError(f"B {self.B.shape} and A {self.A.shape} must be {d}x{d}")
        if not self.Tf > 0:
            raise ValueError("Tf must be positive")
        if self.f is None:
            self.f = _zero_forcing(d)
            self.zero_forcing = True
        else:
            self.zero_forcing = False

    @property
    def d(self) -> int:
        return self.u0.shape[0]


@dataclass
class CoupledPartition:
    """Index sets of the two subsystems and of the exchanged unknowns.

    ``gamma_v`` are the v-unknowns the w-equations depend on (the flux),
    ``gamma_w`` the w-unknowns the v-equations depend on (interface
    temperature).  ``interface_measure`` is the weight of the discrete
    interface L2 norm, ``sqrt(measure * sum(y**2))``.
    """

    v_indices: np.ndarray
    w_indices: np.ndarray
    gamma_v: np.ndarray
    gamma_w: np.ndarray
    interface_measure: float = 1.0

    def __post_init__(self):
        for name in ("v_indices", "w_indices", "gamma_v", "gamma_w"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.intp))
        v, w = set(self.v_indices.tolist()), set(self.w_indices.tolist())
        if v & w:
            raise ValueError("v and w index sets overlap")
        d = len(v) + len(w)
        if v | w != set(range(d)):
            raise ValueError("v and w indices must cover 0..d-1")
        if not set(self.gamma_v.tolist()) <= v or not set(self.gamma_w.tolist()) <= w:
            raise ValueError("exchanged unknowns must belong to their own subsystem")

    @property
    def d(self) -> int:
        return len(self.v_indices) + len(self.w_indices)

    def local_gamma(self, side: str) -> np.ndarray:
        """Positions of the exchanged unknowns inside the subsystem vector."""
        own, gamma = (self.v_indices, self.gamma_v) if side == "v" else (self.w_indices, self.gamma_w)
        where = {g: i for i, g in enumerate(own.tolist())}
        return np.array([where[g] for g in gamma.tolist()], dtype=np.intp)

    def interface_norm(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(np.sqrt(self.interface_measure * np.sum(y * y)))


def benchmark_initial_temperature(x) -> float:
    """``500 sin(pi/2 (x1 + 1)) sin(pi x2)``; the second factor is dropped in 1D."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    val = 500.0 * np.sin(np.pi / 2 * (x[0] + 1.0))
    if x.shape[0] > 1:
        val = val * np.sin(np.pi * x[1])
    return float(val)


@dataclass
class HeatProblemConfig:
    dimension: int = 1
    dx: float = 1.0 / 64
    materials: tuple = field(default_factory=lambda: MATERIAL_PAIRS["air-steel"])
    Tf: float = 1.0e4
    Nv: int = 50
    Nw: int = 50
    initial_temperature: Callable = benchmark_initial_temperature
    # d u0 / d x1; estimated by central differences when omitted
    initial_gradient: Optional[Callable] = None

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        inv = 1.0 / self.dx
        if abs(inv - round(inv)) > 1e-9 * inv:
            raise ValueError(f"1/dx = {inv} is not an integer; the mesh must be uniform")
        if round(inv) < 2:
            raise ValueError("mesh needs at least one interior node per subdomain")
        if self.Nv < 1 or self.Nw < 1:
            raise ValueError("Nv and Nw must be at least 1")
        if isinstance(self.materials, str):
            if self.materials not in MATERIAL_PAIRS:
                raise ValueError(f"unknown material pair {self.materials!r}")
            self.materials = MATERIAL_PAIRS[self.materials]

    @property
    def cells(self) -> int:
        return int(round(1.0 / self.dx))


# ---------------------------------------------------------------------------
# P1 finite elements
# ---------------------------------------------------------------------------

def _p1_1d(n_cells: int, h: float, mat: MaterialParams):
    """Mass and stiffness over ``n_cells`` uniform cells, all ``n_cells + 1`` nodes."""
    n = n_cells + 1
    main_m = np.full(n, 2.0)
    main_m[1:-1] = 4.0
    main_k = np.full(n, 1.0)
    main_k[1:-1] = 2.0
    off = np.ones(n - 1)
    M = mat.alpha * h / 6.0 * sp.diags([off, main_m, off], [-1, 0, 1])
    K = mat.lam / h * sp.diags([-off, main_k, -off], [-1, 0, 1])
    return sp.csr_matrix(M), sp.csr_matrix(K)


def _p1_2d(n_cells: int, h: float, mat: MaterialParams):
    """P1 matrices on a square of side ``n_cells * h``.

    Every grid square is cut along its lower-left to upper-right diagonal.
    Node ``(i, j)`` (``i`` along x1) has number ``i * (n_cells + 1) + j``.
    """
    n1 = n_cells + 1
    ii, jj = np.meshgrid(np.arange(n_cells), np.arange(n_cells), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    node = lambda i, j: i * n1 + j  # noqa: E731
    lower = np.stack([node(ii, jj), node(ii + 1, jj), node(ii + 1, jj + 1)], axis=1)
    upper = np.stack([node(ii, jj), node(ii + 1, jj + 1), node(ii, jj + 1)], axis=1)
    tris = np.concatenate([lower, upper])

    # both triangle types are right triangles with legs h
    mloc = mat.alpha * (h * h / 2) / 12.0 * (np.ones((3, 3)) + np.eye(3))
    grads_lower = np.array([[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]]) / h
    grads_upper = np.array([[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]]) / h
    kl = mat.lam * (h * h / 2) * grads_lower @ grads_lower.T
    ku = mat.lam * (h * h / 2) * grads_upper @ grads_upper.T

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    nt = len(lower)
    mvals = np.tile(mloc.ravel(), 2 * nt)
    kvals = np.concatenate([np.tile(kl.ravel(), nt), np.tile(ku.ravel(), nt)])
    shape = (n1 * n1, n1 * n1)
    M = sp.coo_matrix((mvals, (rows, cols)), shape=shape).tocsr()
    K = sp.coo_matrix((kvals, (rows, cols)), shape=shape).tocsr()
    return M, K


def _node_sets(config: HeatProblemConfig):
    """Global node numbers of (interior, interface) for the left and right square.

    Both squares use the local numbering of :func:`_p1_2d` / :func:`_p1_1d`
    with x1 measured from the square's left edge.
    """
    n = config.cells
    if config.dimension == 1:
        left_int = np.arange(1, n)
        left_gamma = np.array([n])
        right_gamma = np.array([0])
        right_int = np.arange(1, n)
        return left_int, left_gamma, right_gamma, right_int
    n1 = n + 1
    inner = np.arange(1, n)
    left_int = (inner[:, None] * n1 + inner[None, :]).ravel()
    left_gamma = n * n1 + inner
    right_gamma = 0 * n1 + inner
    right_int = (inner[:, None] * n1 + inner[None, :]).ravel()
    return left_int, left_gamma, right_gamma, right_int


def _node_coords(config: HeatProblemConfig, nodes, x_offset):
    n = config.cells
    h = config.dx
    if config.dimension == 1:
        return [np.array([x_offset + h * k]) for k in nodes]
    n1 = n + 1
    return [np.array([x_offset + h * (k // n1), h * (k % n1)]) for k in nodes]


def assemble_heat(config: HeatProblemConfig):
    """Assemble the coupled heat benchmark as ``(MonolithicSystem, CoupledPartition)``.

    Outer Dirichlet nodes are eliminated.  Rows, in order: left interior
    nodes, flux definition, interface node of the right domain (carrying
    ``+q``), right interior nodes.
    """
    mat1, mat2 = config.materials
    assemble = _p1_1d if config.dimension == 1 else _p1_2d
    M1, K1 = assemble(config.cells, config.dx, mat1)
    M2, K2 = assemble(config.cells, config.dx, mat2)
    li, lg, rg, ri = _node_sets(config)

    n1, ng, n2 = len(li), len(lg), len(ri)
    # global unknown layout
    off_q = n1
    off_g = n1 + ng
    off_2 = off_g + ng
    d = off_2 + n2

    B = sp.lil_matrix((d, d))
    A = sp.lil_matrix((d, d))

    def put(dst, rows, cols, src):
        dst[np.ix_(rows, cols)] = src.toarray() if sp.issparse(src) else src

    I1 = np.arange(n1)
    Q = off_q + np.arange(ng)
    G = off_g + np.arange(ng)
    I2 = off_2 + np.arange(n2)

    # left domain: interior rows, with the interface temperature as Dirichlet datum
    put(B, I1, I1, M1[li][:, li])
    put(B, I1, G, M1[li][:, lg])
    put(A, I1, I1, K1[li][:, li])
    put(A, I1, G, K1[li][:, lg])
    # flux rows: q - (M1 u1' + K1 u1) tested with interface hats = 0
    put(B, Q, I1, -M1[lg][:, li])
    put(B, Q, G, -M1[lg][:, lg])
    put(A, Q, I1, -K1[lg][:, li])
    put(A, Q, G, -K1[lg][:, lg])
    put(A, Q, Q, np.eye(ng))
    # right domain: interface rows get the Neumann datum +q
    put(B, G, G, M2[rg][:, rg])
    put(B, G, I2, M2[rg][:, ri])
    put(A, G, G, K2[rg][:, rg])
    put(A, G, I2, K2[rg][:, ri])
    put(A, G, Q, np.eye(ng))
    put(B, I2, G, M2[ri][:, rg])
    put(B, I2, I2, M2[ri][:, ri])
    put(A, I2, G, K2[ri][:, rg])
    put(A, I2, I2, K2[ri][:, ri])

    u0 = initial_state(config)
    system = MonolithicSystem(B.tocsr(), A.tocsr(), u0, config.Tf)
    measure = 1.0 if config.dimension == 1 else config.dx
    partition = CoupledPartition(
        v_indices=np.concatenate([I1, Q]),
        w_indices=np.concatenate([G, I2]),
        gamma_v=Q,
        gamma_w=G,
        interface_measure=measure,
    )
    return system, partition


def initial_state(config: HeatProblemConfig) -> np.ndarray:
    li, lg, rg, ri = _node_sets(config)
    u0 = config.initial_temperature
    left = [u0(x) for x in _node_coords(config, li, -1.0)]
    gamma = [u0(x) for x in _node_coords(config, rg, 0.0)]
    right = [u0(x) for x in _node_coords(config, ri, 0.0)]
    q0 = initial_flux(config)
    return np.concatenate([left, q0, gamma, right]).astype(float)


def _gradient_x1(config: HeatProblemConfig):
    if config.initial_gradient is not None:
        return config.initial_gradient
    u0 = config.initial_temperature
    eps = 1e-6

    def grad(x):
        x = np.asarray(x, dtype=float)
        xp, xm = x.copy(), x.copy()
        xp[0] += eps
        xm[0] -= eps
        return (u0(xp) - u0(xm)) / (2 * eps)
    return grad


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)


def initial_flux(config: HeatProblemConfig) -> np.ndarray:
    """``q0_j = lam1 * int_G (grad u0 . n1) phi_j dS`` for each interface hat ``phi_j``.

    ``n1 = (1, 0)``.  In 1D the interface is a point and ``q0 = lam1 u0'(0)``.
    The surface integral uses 5-point Gauss-Legendre on each interface cell.
    """
    lam1 = config.materials[0].lam
    g = _gradient_x1(config)
    if config.dimension == 1:
        return np.array([lam1 * g(np.array([0.0]))])
    n = config.cells
    h = config.dx
    q0 = np.zeros(n - 1)
    for j in range(1, n):
        total = 0.0
        for a, b, rising in ((j - 1, j, True), (j, j + 1, False)):
            xs = a * h + (_GAUSS_X + 1.0) * h / 2
            ws = _GAUSS_W * h / 2
            phi = (xs - a * h) / h if rising else (b * h - xs) / h
            vals = np.array([g(np.array([0.0, s])) for s in xs])
            total += np.sum(ws * phi * vals)
        q0[j - 1] = lam1 * total
    return q0


def single_domain_heat(config: HeatProblemConfig, mat: MaterialParams):
    """Mass and stiffness of one material over the whole domain, interior nodes only.

    Node order matches the u-unknowns of :func:`assemble_heat` (left interior,
    interface, right interior).  Used to check the equal-material reduction.
    """
    n = config.cells
    if config.dimension == 1:
        M, K = _p1_1d(2 * n, config.dx, mat)
        keep = np.arange(1, 2 * n)
        return M[keep][:, keep], K[keep][:, keep]
    # two squares glued at x1 = 0, same diagonal orientation
    n1 = n + 1
    ML, KL = _p1_2d(n, config.dx, mat)
    li, lg, rg, ri = _node_sets(config)
    inner = np.arange(1, n)
    # map: left square nodes -> global ids 0..n*n1+n, right square shares x1 = 0 column
    total = (2 * n + 1) * n1
    left_ids = np.arange(n1 * n1)
    right_ids = n * n1 + np.arange(n1 * n1)
    Mg = sp.lil_matrix((total, total))
    Kg = sp.lil_matrix((total, total))
    for ids in (left_ids, right_ids):
        Mg[np.ix_(ids, ids)] = Mg[np.ix_(ids, ids)].toarray() + ML.toarray()
        Kg[np.ix_(ids, ids)] = Kg[np.ix_(ids, ids)].toarray() + KL.toarray()
    keep = np.concatenate([li, n * n1 + inner, n * n1 + ri])
    Mg, Kg = Mg.tocsr(), Kg.tocsr()
    return Mg[keep][:, keep], Kg[keep][:, keep]


# ---------------------------------------------------------------------------
# Splittings
# ---------------------------------------------------------------------------

SPLITTING_KINDS = ("jacobi", "gs-dn", "gs-nd")


@dataclass
class Splitting:
    MB: np.ndarray
    NB: np.ndarray
    MA: np.ndarray
    NA: np.ndarray
    kind: str
    theta: tuple


def _check_theta(theta):
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"relaxation parameter {theta} outside (0, 1]")


def realized_splitting(system: MonolithicSystem, partition: CoupledPartition,
                       theta_v: float, theta_w: float, v_new: bool, w_new: bool,
                       kind: str = "") -> Splitting:
    """Splitting for one time point of a (possibly varying) WR iteration.

    ``theta_v`` relaxes the flux produced by v, ``theta_w`` the interface
    temperature produced by w.  ``v_new`` says the v-equations used the
    current iterate of w (otherwise the previous one); ``w_new`` likewise.
    Relaxation ``x_new = (1 - th) x_old + th x_hat`` is folded in through
    ``x_hat = x_old + (x_new - x_old) / th``.
    """
    _check_theta(theta_v)
    _check_theta(theta_w)
    B = system.B.toarray()
    A = system.A.toarray()
    d = system.d
    scale = np.ones(d)
    scale[partition.gamma_v] = 1.0 / theta_v
    scale[partition.gamma_w] = 1.0 / theta_w

    v, w = partition.v_indices, partition.w_indices
    MB, NB, MA, NA = (np.zeros((d, d)) for _ in range(4))
    for own in (v, w):
        blk = np.ix_(own, own)
        MB[blk] = B[blk] * scale[own]
        NB[blk] = B[blk] * (scale[own] - 1.0)
        MA[blk] = A[blk] * scale[own]
        NA[blk] = A[blk] * (scale[own] - 1.0)
    for rows, cols, new in ((v, w, v_new), (w, v, w_new)):
        blk = np.ix_(rows, cols)
        if new:
            MB[blk] = B[blk]
            MA[blk] = A[blk]
        else:
            NB[blk] = -B[blk]
            NA[blk] = -A[blk]
    return Splitting(MB, NB, MA, NA, kind, (theta_v, theta_w))


def splitting(system: MonolithicSystem, partition: CoupledPartition, kind: str,
              theta=None) -> Splitting:
    """Constant splitting of Jacobi, GS-DN or GS-ND WR with relaxation folded in.

    ``theta`` is a ``RelaxTable`` (or anything with ``theta_jacobi`` and
    ``theta_gs_dn`` / ``theta_gs_nd``), a scalar used for every shape, or
    ``None`` for no relaxation.

    Relaxation acts on the data handed from the process that goes first to
    the one that goes second: GS-DN relaxes the flux, GS-ND the interface
    temperature, Jacobi both.
    """
    kind = kind.lower()
    if kind not in SPLITTING_KINDS:
        raise ValueError(f"unknown splitting kind {kind!r}")
    if theta is None:
        th = 1.0
    elif np.isscalar(theta):
        th = float(theta)
    else:
        th = {"jacobi": theta.theta_jacobi, "gs-dn": theta.theta_gs_dn,
              "gs-nd": theta.theta_gs_nd}[kind]
    if kind == "jacobi":
        return realized_splitting(system, partition, th, th, False, False, kind)
    if kind == "gs-dn":
        return realized_splitting(system, partition, th, 1.0, False, True, kind)
    return realized_splitting(system, partition, 1.0, th, True, False, kind)
