"""Optimal relaxation for the three material pairs.

The 1D Dirichlet-to-Neumann factor S of each subdomain decides everything:
the Jacobi rate sqrt(r / (1 + r)) with r = S1 / S2, and the Gauss-Seidel
parameter that makes the interface iteration nilpotent.
"""
import numpy as np

from asyncwr.model import MATERIAL_PAIRS
from asyncwr.relaxopt import gauss_seidel_interface_matrix, jacobi_interface_matrix, relax_table

for dx, dt, label in ((1 / 64, 200.0, "desk scale"), (1 / 513, 5.0, "fine scale")):
    print(f"--- {label}: dx = {dx:.5g}, dt = {dt:g}")
    for name, pair in MATERIAL_PAIRS.items():
        tab = relax_table(pair, dt, dx)
        print(f"{name:12s} S1 = {tab.S1:10.4g}  S2 = {tab.S2:10.4g}  "
              f"theta_J = {tab.theta_jacobi:.6f}  rho_J = {tab.rho_jacobi:.5f}")

# The closed-form rate is the spectral radius of the 2x2 interface matrix ...
tab = relax_table(MATERIAL_PAIRS["water-steel"], 200.0, 1 / 64)
J = jacobi_interface_matrix(tab.S1, tab.S2, tab.theta_jacobi)
print("\neigenvalues of the relaxed Jacobi interface matrix:", np.linalg.eigvals(J))
print("their modulus:", np.abs(np.linalg.eigvals(J)), "predicted:", tab.rho_jacobi)

# ... and the Gauss-Seidel matrix has rank one with zero trace, so it is nilpotent.
G = gauss_seidel_interface_matrix(tab.S1, tab.S2, tab.theta_gs_dn)
print("Gauss-Seidel interface matrix trace:", np.trace(G))

# A theta away from the optimum is slower.
for theta in (0.5 * tab.theta_jacobi, tab.theta_jacobi, min(1.0, 1.5 * tab.theta_jacobi)):
    rho = np.max(np.abs(np.linalg.eigvals(jacobi_interface_matrix(tab.S1, tab.S2, theta))))
    print(f"theta = {theta:.4f}: rho = {rho:.4f}")
