from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asyncwr.model import MATERIAL_PAIRS, MATERIALS, MaterialParams
from asyncwr.relaxopt import (RelaxTable, gauss_seidel_interface_matrix, jacobi_interface_matrix,
                              optimal_thetas, relax_table, s_operator)


def schur_oracle(mat, dt, dx):
    """Interface Schur complement of M + dt K on [0, 1], Dirichlet at 0, divided by dx."""
    n = int(round(1 / dx))
    M = np.zeros((n + 1, n + 1))
    K = np.zeros((n + 1, n + 1))
    for c in range(n):
        M[c:c + 2, c:c + 2] += mat.alpha * dx / 6 * np.array([[2, 1], [1, 2]])
        K[c:c + 2, c:c + 2] += mat.lam / dx * np.array([[1, -1], [-1, 1]])
    S = (M + dt * K)[1:, 1:]
    a, b, c = S[:-1, :-1], S[:-1, -1], S[-1, -1]
    return (c - b @ np.linalg.solve(a, b)) / dx


@pytest.mark.parametrize("name", sorted(MATERIALS))
@pytest.mark.parametrize("dx, dt", [(1 / 4, 200.0), (1 / 16, 500.0), (1 / 64, 200.0)])
def test_s_operator_equals_discrete_schur_complement(name, dx, dt):
    mat = MATERIALS[name]
    assert s_operator(mat, dt, dx) == pytest.approx(schur_oracle(mat, dt, dx), rel=1e-10)


def test_s_operator_frozen_values():
    # frozen from the dense Schur complement at dx = 1/4, dt = 200
    assert s_operator(MATERIALS["air"], 200.0, 0.25) == pytest.approx(491.6949964364363, rel=1e-12)
    assert s_operator(MATERIALS["steel"], 200.0, 0.25) == pytest.approx(1243940.5206834332, rel=1e-12)


def test_s_operator_errors():
    with pytest.raises(ValueError):
        s_operator(MATERIALS["air"], 0.0, 0.1)
    with pytest.raises(ValueError):
        s_operator(MATERIALS["air"], 1.0, 0.1, N=0)
    # positive parameters keep every denominator positive; a surrogate with
    # negative conductivity makes 2 a dx^2 + 6 l dt vanish while cos(pi/2) = 0
    degenerate = SimpleNamespace(alpha=1.0, lam=-1.0 / 12)
    with pytest.raises(ZeroDivisionError):
        s_operator(degenerate, 1.0, 0.5, N=1)


def test_optimal_thetas_formulas():
    t = optimal_thetas(2.0, 6.0)
    assert t.theta_jacobi == pytest.approx(0.75)
    assert t.theta_gs_dn == pytest.approx(0.75) and t.theta_gs_nd == pytest.approx(0.75)
    assert t.rho_jacobi == pytest.approx(np.sqrt(1 / 3 / (4 / 3)))
    with pytest.raises(ValueError):
        optimal_thetas(-1.0, 2.0)


@settings(max_examples=60, deadline=None)
@given(s1=st.floats(1e-3, 1e6), s2=st.floats(1e-3, 1e6))
def test_optimal_jacobi_rate_is_spectral_radius_and_minimal(s1, s2):
    t = optimal_thetas(s1, s2)
    rho = lambda th: np.max(np.abs(np.linalg.eigvals(jacobi_interface_matrix(s1, s2, th))))  # noqa: E731
    assert rho(t.theta_jacobi) == pytest.approx(t.rho_jacobi, rel=1e-8, abs=1e-12)
    for th in (0.5 * t.theta_jacobi, min(1.0, 1.5 * t.theta_jacobi)):
        assert rho(th) >= t.rho_jacobi * (1 - 1e-9)


@settings(max_examples=60, deadline=None)
@given(s1=st.floats(1e-3, 1e6), s2=st.floats(1e-3, 1e6))
def test_gauss_seidel_optimal_parameter_is_nilpotent(s1, s2):
    t = optimal_thetas(s1, s2)
    G = gauss_seidel_interface_matrix(s1, s2, t.theta_gs_dn)
    # G has rank one; its only nonzero eigenvalue is its trace
    assert abs(np.trace(G)) <= 1e-10
    assert abs(np.linalg.det(G)) <= 1e-10 * max(1.0, abs(G).max() ** 2)


def test_relax_table_uses_both_materials():
    t = relax_table(MATERIAL_PAIRS["air-steel"], 5.0, 1 / 513)
    assert t.S1 == pytest.approx(s_operator(MATERIALS["air"], 5.0, 1 / 513))
    assert t.S2 == pytest.approx(s_operator(MATERIALS["steel"], 5.0, 1 / 513))
    assert 0 < t.rho_jacobi < 1


def test_relax_table_validation():
    with pytest.raises(ValueError):
        RelaxTable(0.0, 0.5, 0.5, 0.1)
    with pytest.raises(ValueError):
        RelaxTable(0.5, 0.5, 0.5, 1.0)
    assert RelaxTable.uniform(0.3).theta_gs_nd == 0.3
