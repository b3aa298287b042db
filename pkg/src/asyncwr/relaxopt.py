"""Interface operators and optimal relaxation for the 1D heat model problem.

For implicit Euler on matching grids, the Dirichlet-to-Neumann map of each
1D subdomain reduces to a scalar ``S`` per time step.  Jacobi WR with
relaxation ``theta`` on both exchanged quantities has the interface
iteration matrix with eigenvalues ``1 - th +- i th sqrt(S1/S2)``, whose
modulus is minimized by
``theta = 1 / (S1/S2 + 1)``.  Gauss-Seidel with a single relaxation of
``theta = 1 / |1 + S1/S2|`` has spectral radius zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MaterialParams

__all__ = [
    "RelaxTable",
    "s_operator",
    "optimal_thetas",
    "relax_table",
    "jacobi_interface_matrix",
    "gauss_seidel_interface_matrix",
]


@dataclass(frozen=True)
class RelaxTable:
    theta_jacobi: float
    theta_gs_dn: float
    theta_gs_nd: float
    rho_jacobi: float
    S1: float = float("nan")
    S2: float = float("nan")

    def __post_init__(self):
        for name in ("theta_jacobi", "theta_gs_dn", "theta_gs_nd"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} = {v} outside (0, 1]")
        if not 0 <= self.rho_jacobi < 1:
            raise ValueError(f"rho_jacobi = {self.rho_jacobi} outside [0, 1)")

    @classmethod
    def uniform(cls, theta: float) -> "RelaxTable":
        """The same ``theta`` for every shape; ``rho_jacobi`` is left at 0."""
        return cls(theta, theta, theta, 0.0)


def s_operator(mat: MaterialParams, dt: float, dx: float, N: int = None) -> float:
    """Discrete Dirichlet-to-Neumann factor ``S`` of a 1D P1 / implicit Euler subdomain.

    Parameters
    ----------
    mat : MaterialParams
    dt, dx : float
        Time step and mesh width.
    N : int, optional
        Number of interior nodes, ``1/dx - 1`` by default.

    Returns
    -------
    float
        ``S = [6 dt dx (a dx^2 + 3 l dt) - (a dx^2 - 6 l dt)^2 s] / (18 dt dx^3)``
        with ``s = sum_i 3 dt dx^2 sin^2(i pi dx) / (2 a dx^2 + 6 l dt + (a dx^2 - 6 l dt) cos(i pi dx))``.
    """
    if not (dt > 0 and dx > 0):
        raise ValueError("dt and dx must be positive")
    if N is None:
        N = int(round(1.0 / dx)) - 1
    if N < 1:
        raise ValueError("need at least one interior node")
    a, lam = mat.alpha, mat.lam
    i = np.arange(1, N + 1)
    c = np.cos(i * np.pi * dx)
    den = 2 * a * dx**2 + 6 * lam * dt + (a * dx**2 - 6 * lam * dt) * c
    scale = abs(2 * a * dx**2) + abs(6 * lam * dt) + abs(a * dx**2 - 6 * lam * dt)
    if np.any(np.abs(den) <= 1e-14 * scale):
        raise ZeroDivisionError("degenerate dt/dx combination: vanishing denominator")
    s = np.sum(3 * dt * dx**2 * np.sin(i * np.pi * dx) ** 2 / den)
    num = 6 * dt * dx * (a * dx**2 + 3 * lam * dt) - (a * dx**2 - 6 * lam * dt) ** 2 * s
    return float(num / (18 * dt * dx**3))


def optimal_thetas(S1: float, S2: float) -> RelaxTable:
    """Optimal relaxation parameters for the three local shapes."""
    if not S1 * S2 > 0:
        raise ValueError("S1 / S2 must be positive")
    r = S1 / S2
    theta_gs = 1.0 / abs(1.0 + r)
    return RelaxTable(
        theta_jacobi=1.0 / (r + 1.0),
        theta_gs_dn=theta_gs,
        theta_gs_nd=theta_gs,
        rho_jacobi=float(np.sqrt(r / (r + 1.0))),
        S1=float(S1),
        S2=float(S2),
    )


def relax_table(materials, dt: float, dx: float) -> RelaxTable:
    """``optimal_thetas`` for a pair of materials."""
    m1, m2 = materials
    return optimal_thetas(s_operator(m1, dt, dx), s_operator(m2, dt, dx))


def jacobi_interface_matrix(S1: float, S2: float, theta: float) -> np.ndarray:
    """Interface iteration matrix of relaxed Jacobi on ``(u_G, q)``.

    The first subdomain returns ``q = -S1 u_G``, the second ``u_G = q / S2``;
    both outputs are relaxed with ``theta``.
    """
    return np.array([[1.0 - theta, theta / S2],
                     [-theta * S1, 1.0 - theta]])


def gauss_seidel_interface_matrix(S1: float, S2: float, theta: float) -> np.ndarray:
    """Interface iteration matrix of Gauss-Seidel, flux first, relaxing the flux once.

    ``q_new = (1 - th) q - th S1 u_G`` followed by ``u_G = q_new / S2``.
    """
    row_q = np.array([-theta * S1, 1.0 - theta])
    return np.vstack([row_q / S2, row_q])
