import numpy as np
import pytest
from scipy.special import ellipj, ellipk

from fourend.discretization import (
    EmptyNodalSet, check_monotone, cone_confinement, jacobian_matrix, laplacian,
    laplacian_matrix, linearized_apply, nodal_curve, residual,
)
from fourend.geometry import make_ansatz
from fourend.grid import Field, QuadrantGrid
from fourend.potential import heteroclinic_for


def cnoidal_field(grid, m=0.5):
    """Doubly even exact solution ``u = A sn(beta y + K, m)`` of ``u'' = u^3 - u``."""
    beta = 1.0 / np.sqrt(1.0 + m)
    amp = np.sqrt(2.0 * m) * beta
    _, y = grid.mesh()
    sn, *_ = ellipj(beta * y + ellipk(m), m)
    return Field(grid, amp * sn)


def test_constant_field_has_zero_residual(potential):
    g = QuadrantGrid(8.0, 0.25)
    res = residual(g, Field(g, np.ones((g.n, g.n))), potential)
    assert np.all(res.values == 0.0)


def test_edges_follow_ansatz(potential):
    g = QuadrantGrid(8.0, 0.25)
    a = make_ansatz(np.pi / 4, 0.0, heteroclinic_for(potential), 10.0)
    res = residual(g, Field(g, np.ones((g.n, g.n))), potential, ansatz=a)
    # only the nodes next to the outer edges see the ansatz data
    assert np.all(res.values[:-2, :-2] == 0.0)
    assert np.any(res.values[-2, :-1] != 0.0)


def test_heteroclinic_in_y_truncation_error(potential):
    errs = []
    for h in (0.2, 0.1):
        g = QuadrantGrid(8.0, h)
        _, y = g.mesh()
        f = Field(g, np.tanh(y / np.sqrt(2)))
        res = residual(g, f, potential).values
        errs.append(np.max(np.abs(res[1:-1, 1:-1])))
    assert errs[0] < 0.01
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_cnoidal_oracle_is_second_order(potential):
    errs = []
    for h in (0.2, 0.1, 0.05):
        g = QuadrantGrid(6.0, h)
        errs.append(np.max(np.abs(residual(g, cnoidal_field(g), potential).values)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 3.5) & (ratios <= 4.5))


def test_laplacian_matrix_matches_stencil():
    g = QuadrantGrid(3.0, 0.25)
    rng = np.random.default_rng(1)
    v = rng.standard_normal((g.n, g.n))
    v[-1, :] = 0.0
    v[:, -1] = 0.0
    dense = laplacian(g, v)[:-1, :-1].ravel()
    sparse_ = laplacian_matrix(g) @ v[:-1, :-1].ravel()
    assert np.allclose(dense, sparse_, atol=1e-10)


def test_laplacian_symmetric_in_weighted_inner_product():
    g = QuadrantGrid(3.0, 0.25)
    w = g.quadrature_weights()[:-1, :-1].ravel()
    A = laplacian_matrix(g).toarray()
    W = np.diag(w)
    assert np.allclose(W @ A, (W @ A).T, atol=1e-9)


def test_linearized_apply_constant_state(potential):
    g = QuadrantGrid(4.0, 0.25)
    one = Field(g, np.ones((g.n, g.n)))
    v = Field(g, np.full((g.n, g.n), 3.0))
    out = linearized_apply(g, one, potential, v)
    assert np.allclose(out.values[:-2, :-2], 2.0 * 3.0)


def test_linearized_apply_is_linear(potential, small_tilted):
    g = small_tilted.grid
    rng = np.random.default_rng(2)
    v, w = (Field(g, rng.standard_normal((g.n, g.n))) for _ in range(2))
    a, b = 0.7, -1.3
    lhs = linearized_apply(g, small_tilted.field, potential, Field(g, a * v.values + b * w.values)).values
    rhs = (a * linearized_apply(g, small_tilted.field, potential, v).values
           + b * linearized_apply(g, small_tilted.field, potential, w).values)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))


def test_jacobian_matches_finite_differences(potential, small_tilted):
    g = small_tilted.grid
    u = small_tilted.field
    rng = np.random.default_rng(3)
    eps = 1e-5
    for _ in range(5):
        v = rng.standard_normal((g.n, g.n))
        v[-1, :] = 0.0
        v[:, -1] = 0.0
        plus = residual(g, Field(g, u.values + eps * v), potential).values
        minus = residual(g, Field(g, u.values - eps * v), potential).values
        fd = (plus - minus) / (2 * eps)
        lin = linearized_apply(g, u, potential, Field(g, v)).values
        assert np.linalg.norm(fd + lin) / np.linalg.norm(lin) < 1e-6
        J = jacobian_matrix(g, u, potential)
        assert np.allclose(J @ v[:-1, :-1].ravel(), lin[:-1, :-1].ravel(), atol=1e-9)


def test_monotone_check(small_saddle):
    assert check_monotone(small_saddle.field).ok
    g = small_saddle.grid
    bad = small_saddle.field.values.copy()
    bad[5, 5] = 0.99
    assert not check_monotone(Field(g, bad)).ok


def test_nodal_curve_of_linear_field():
    g = QuadrantGrid(5.0, 0.25)
    x, y = g.mesh()
    curve = nodal_curve(g, Field(g, y - x))
    assert not curve.branched
    assert np.max(np.abs(curve.points[:, 0] - curve.points[:, 1])) <= g.h
    assert np.hypot(*curve.points[0]) < np.hypot(*curve.points[-1])


def test_nodal_curve_offset_line():
    g = QuadrantGrid(5.0, 0.25)
    x, y = g.mesh()
    curve = nodal_curve(g, Field(g, y - 0.5 * x - 1.13))
    p = curve.points
    assert np.max(np.abs(p[:, 1] - 0.5 * p[:, 0] - 1.13)) < 1e-12


def test_nodal_curve_saddle_diagonal(small_saddle):
    curve = nodal_curve(small_saddle.grid, small_saddle.field)
    assert np.max(np.abs(curve.points[:, 0] - curve.points[:, 1])) <= small_saddle.grid.h


def test_nodal_curve_branched():
    g = QuadrantGrid(5.0, 0.25)
    x, y = g.mesh()
    curve = nodal_curve(g, Field(g, np.cos(2 * x) * np.cos(2 * y) + 0.1))
    assert curve.branched


def test_nodal_curve_empty():
    g = QuadrantGrid(5.0, 0.25)
    with pytest.raises(EmptyNodalSet):
        nodal_curve(g, Field(g, np.ones((g.n, g.n))))


def test_cone_confinement(small_tilted):
    curve = nodal_curve(small_tilted.grid, small_tilted.field)
    fit = cone_confinement(curve.points, 5.0)
    assert fit.alpha > 1 and fit.C > 0
    x, y = curve.points[np.hypot(*curve.points.T) >= 5.0].T
    assert np.all(x / fit.alpha - fit.C <= y + 1e-12)
    assert np.all(y <= fit.alpha * x + fit.C + 1e-12)
