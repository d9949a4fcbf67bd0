import numpy as np
import pytest

from abreu_bvp import (
    LinSolveOptions,
    MatrixField,
    ScalarField,
    assemble_operator,
    cofactor,
    hessian,
    linearized_residual,
    solve_linearized,
)
from abreu_bvp.exceptions import EllipticityError


def identity_coeffs(grid):
    data = np.tile(np.eye(grid.dim), (grid.n_interior, 1, 1))
    return MatrixField(grid, data)


def test_laplace_quadratic_exact(disk32):
    # U = I turns the operator into the Laplacian; w = x^2 - y^2 is harmonic
    g = disk32
    pts = g.points
    w_exact = pts[:, 0]**2 - pts[:, 1]**2
    w = solve_linearized(g, identity_coeffs(g), ScalarField.constant(g, 0.0),
                         w_exact[g.n_interior:])
    assert np.max(np.abs(w.values - w_exact)) < 1e-9


def test_poisson_quadratic_exact(disk32):
    # Lap w = 4 with w = r^2 boundary data -> w = x^2 + y^2
    g = disk32
    pts = g.points
    w_exact = pts[:, 0]**2 + pts[:, 1]**2
    w = solve_linearized(g, identity_coeffs(g), ScalarField.constant(g, 4.0),
                         w_exact[g.n_interior:])
    assert np.max(np.abs(w.values - w_exact)) < 1e-9


def test_variable_coefficients_quadratic(disk32):
    # U from the cofactor of a true convex potential; trace identity
    # U^{ij} w_{ij} for quadratic w is exact on the fitted stencils.
    g = disk32
    pts = g.points
    pot = ScalarField(g, np.exp(0.5 * (pts[:, 0]**2 + pts[:, 1]**2)))
    U = cofactor(hessian(pot, g), g)
    w_vals = 1.0 + 0.3 * pts[:, 0]**2 + 0.1 * pts[:, 0] * pts[:, 1] + 0.2 * pts[:, 1]**2
    w_field = ScalarField(g, w_vals)
    # manufactured rhs: U^{ij} w_{ij} with exact constant Hessian of w
    Hw = np.array([[0.6, 0.1], [0.1, 0.4]])
    rhs_vals = np.einsum("nij,ij->n", U.data, Hw)
    rhs = ScalarField(g, np.concatenate([rhs_vals, np.zeros(g.n_boundary)]))
    res = linearized_residual(g, U, w_field, rhs)
    assert np.max(np.abs(res.values)) < 1e-8
    solved = solve_linearized(g, U, rhs, w_vals[g.n_interior:])
    assert np.max(np.abs(solved.values - w_vals)) < 1e-7


def test_linearity_in_data(disk32, rng):
    g = disk32
    U = identity_coeffs(g)
    f1 = ScalarField(g, rng.normal(size=g.n_nodes))
    f2 = ScalarField(g, rng.normal(size=g.n_nodes))
    b1 = rng.normal(size=g.n_boundary)
    b2 = rng.normal(size=g.n_boundary)
    wa = solve_linearized(g, U, f1, b1)
    wb = solve_linearized(g, U, f2, b2)
    combo = solve_linearized(
        g, U, ScalarField(g, 2.0 * f1.values - 3.0 * f2.values),
        2.0 * b1 - 3.0 * b2)
    assert np.max(np.abs(combo.values - (2 * wa.values - 3 * wb.values))) < 1e-8


def test_discrete_maximum_principle(disk64):
    # zero rhs: solution bounded by its boundary data
    g = disk64
    bvals = g.boundary_values(lambda x, y: np.sin(3 * x) + np.cos(2 * y))
    w = solve_linearized(g, identity_coeffs(g), ScalarField.constant(g, 0.0), bvals)
    assert np.max(w.interior) <= np.max(bvals) + 1e-12
    assert np.min(w.interior) >= np.min(bvals) - 1e-12


def test_interval_operator(interval64):
    # 1-d cofactor is the constant 1: operator reduces to w''
    g = interval64
    U = identity_coeffs(g)
    x = g.points[:, 0]
    w = solve_linearized(g, U, ScalarField.constant(g, 2.0), [0.0, 0.0])
    assert np.max(np.abs(w.values - x * (x - 1.0))) < 1e-12


def test_rejects_indefinite_coefficients(disk32):
    g = disk32
    data = np.tile(np.diag([1.0, -1.0]), (g.n_interior, 1, 1))
    with pytest.raises(EllipticityError):
        solve_linearized(g, MatrixField(g, data),
                         ScalarField.constant(g, 0.0), 0.0)


def test_assemble_operator_row_action(disk32, rng):
    # matrix action agrees with the pointwise residual evaluation
    g = disk32
    pts = g.points
    pot = ScalarField(g, pts[:, 0]**2 + pts[:, 1]**2)
    U = cofactor(hessian(pot, g), g)
    A, B = assemble_operator(g, U)
    assert A.shape == (g.n_interior, g.n_interior)
    assert B.shape == (g.n_interior, g.n_boundary)
    w = rng.normal(size=g.n_nodes)
    field = ScalarField(g, w)
    r = linearized_residual(g, U, field, ScalarField.constant(g, 0.0))
    direct = A @ w[: g.n_interior] + B @ w[g.n_interior:]
    assert np.max(np.abs(r.interior - direct)) < 1e-12


def test_options_validation():
    with pytest.raises(ValueError):
        LinSolveOptions(linear_tol=-1.0)
    with pytest.raises(ValueError):
        LinSolveOptions(solver_kind="magic")
