"""Finite differences on the quadrant with even reflection across the axes.

Unknowns live on the nodes ``0 <= i, j < n - 1``; the outer edges
``x = L`` and ``y = L`` carry Dirichlet data.  Ghost values across the
axes are mirror images (``u[-1, j] = u[1, j]``), which imposes evenness of
the full-plane field.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .grid import Field, QuadrantGrid
from .potential import Potential, eval_ddpotential, eval_dpotential


def _with_boundary(grid: QuadrantGrid, values: np.ndarray, ansatz) -> np.ndarray:
    if ansatz is None:
        return values
    u = values.copy()
    pts = grid.points()
    u[-1, :] = ansatz(pts[-1, :])
    u[:, -1] = ansatz(pts[:, -1])
    return u


def laplacian(grid: QuadrantGrid, values: np.ndarray) -> np.ndarray:
    """5-point Laplacian with mirror ghosts; zero on the outer edges."""
    p = np.pad(values, ((1, 0), (1, 0)), mode="reflect")
    c = p[1:, 1:]
    lap = np.zeros_like(values)
    lap[:-1, :-1] = (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2]
                     - 4.0 * c[:-1, :-1]) / grid.h**2
    return lap


def residual(grid: QuadrantGrid, field_: Field, potential: Potential, ansatz=None) -> Field:
    """``Delta u - F'(u)`` at the unknown nodes, zero on the outer edges.

    If ``ansatz`` is given the outer-edge values are replaced by the ansatz;
    otherwise the field's own edge values serve as Dirichlet data.
    """
    u = _with_boundary(grid, field_.values, ansatz)
    res = laplacian(grid, u)
    res[:-1, :-1] -= eval_dpotential(potential, u[:-1, :-1])
    return Field(grid, res)


def _mirror_second_difference(m: int, h: float) -> sparse.csr_matrix:
    main = np.full(m, -2.0)
    upper = np.ones(m - 1)
    upper[0] = 2.0  # ghost u[-1] = u[1]
    lower = np.ones(m - 1)
    return sparse.diags([lower, main, upper], [-1, 0, 1], format="csr") / h**2


def laplacian_matrix(grid: QuadrantGrid) -> sparse.csr_matrix:
    """Sparse Laplacian on the unknowns (row-major in (i, j)), zero Dirichlet outside."""
    m = grid.n - 1
    d = _mirror_second_difference(m, grid.h)
    eye = sparse.identity(m, format="csr")
    return (sparse.kron(d, eye) + sparse.kron(eye, d)).tocsr()


def jacobian_matrix(grid: QuadrantGrid, field_: Field, potential: Potential) -> sparse.csc_matrix:
    """Matrix of ``-Delta + F''(u)`` on the unknowns."""
    q = eval_ddpotential(potential, field_.values[:-1, :-1]).ravel()
    return (-laplacian_matrix(grid) + sparse.diags(q)).tocsc()


def linearized_apply(grid: QuadrantGrid, field_: Field, potential: Potential, v: Field) -> Field:
    """``(-Delta + F''(u)) v`` with zero outer data for v and mirror axes."""
    w = v.values.copy()
    w[-1, :] = 0.0
    w[:, -1] = 0.0
    out = -laplacian(grid, w)
    out[:-1, :-1] += eval_ddpotential(potential, field_.values[:-1, :-1]) * w[:-1, :-1]
    return Field(grid, out)


def centered_gradient(grid: QuadrantGrid, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centered differences; zero normal derivative on the axes, one-sided on the outer edges."""
    gx = np.gradient(values, grid.h, axis=0, edge_order=2)
    gy = np.gradient(values, grid.h, axis=1, edge_order=2)
    gx[0, :] = 0.0
    gy[:, 0] = 0.0
    return gx, gy


@dataclass
class MonotonicityReport:
    ok: bool
    worst_dx: float
    worst_dy: float
    max_abs: float
    unresolved: int


def check_monotone(field_: Field, saturation: float = 1e-10, noise: float = 1e-12) -> MonotonicityReport:
    """Check ``u_x < 0``, ``u_y > 0`` and ``|u| < 1`` at interior nodes.

    Where ``1 - |u| <= saturation`` the field is indistinguishable from +-1
    in double precision; there the strict inequalities are relaxed to
    violations no larger than ``noise``.
    """
    g = field_.grid
    gx, gy = centered_gradient(g, field_.values)
    inner = g.interior_mask()
    u = field_.values
    resolved = inner & (1.0 - np.abs(u) > saturation)
    saturated = inner & ~resolved
    dx_ok = np.all(gx[resolved] < 0) and np.all(gx[saturated] <= noise)
    dy_ok = np.all(gy[resolved] > 0) and np.all(gy[saturated] >= -noise)
    bound_ok = np.all(np.abs(u[resolved]) < 1.0) and np.all(np.abs(u[saturated]) <= 1.0 + noise)
    return MonotonicityReport(
        ok=bool(dx_ok and dy_ok and bound_ok),
        worst_dx=float(np.max(gx[inner])),
        worst_dy=float(np.min(gy[inner])),
        max_abs=float(np.max(np.abs(u[inner]))),
        unresolved=int(np.count_nonzero(saturated)),
    )


class EmptyNodalSet(ValueError):
    """The field does not change sign."""


@dataclass
class NodalCurve:
    points: np.ndarray
    components: list = field(default_factory=list, repr=False)

    @property
    def branched(self) -> bool:
        return len(self.components) > 1


def _crossing(p0, p1, u0, u1):
    t = u0 / (u0 - u1)
    return p0 + t * (p1 - p0)


def nodal_curve(grid: QuadrantGrid, field_: Field) -> NodalCurve:
    """Zero set by marching squares, chained into polylines.

    Crossings are linearly interpolated along grid edges.  Ambiguous cells
    (four sign changes) are resolved with the sign of the cell-centre mean.
    The longest component is returned in ``points``, ordered from the end
    nearest the origin; all components are kept in ``components``.
    """
    u = field_.values
    pos = u > 0
    if pos.all() or (~pos).all():
        raise EmptyNodalSet("field does not change sign")
    h = grid.h
    # edge keys: ("h", i, j) joins (i,j)-(i+1,j); ("v", i, j) joins (i,j)-(i,j+1)
    points: dict = {}

    def edge_point(key):
        if key not in points:
            kind, i, j = key
            a = np.array([i * h, j * h])
            if kind == "h":
                points[key] = _crossing(a, a + [h, 0.0], u[i, j], u[i + 1, j])
            else:
                points[key] = _crossing(a, a + [0.0, h], u[i, j], u[i, j + 1])
        return points[key]

    adjacency: dict = {}

    def link(a, b):
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)

    cell_mixed = ~((pos[:-1, :-1] == pos[1:, :-1]) & (pos[:-1, :-1] == pos[:-1, 1:])
                   & (pos[:-1, :-1] == pos[1:, 1:]))
    for i, j in zip(*np.nonzero(cell_mixed)):
        # corners counter-clockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1)
        s = (pos[i, j], pos[i + 1, j], pos[i + 1, j + 1], pos[i, j + 1])
        edges = [("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j)]
        cut = [edges[k] for k in range(4) if s[k] != s[(k + 1) % 4]]
        if len(cut) == 2:
            link(cut[0], cut[1])
        elif len(cut) == 4:
            centre = 0.25 * (u[i, j] + u[i + 1, j] + u[i + 1, j + 1] + u[i, j + 1]) > 0
            # connect edges around the corners whose sign differs from the centre
            if s[0] == centre:
                link(edges[0], edges[1])
                link(edges[2], edges[3])
            else:
                link(edges[3], edges[0])
                link(edges[1], edges[2])

    seen = set()
    components = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        # walk to an endpoint of this component first
        comp_nodes = _component(adjacency, start)
        seen.update(comp_nodes)
        ends = [k for k in comp_nodes if len(adjacency[k]) == 1]
        first = min(ends or comp_nodes, key=lambda k: np.hypot(*edge_point(k)))
        order = _walk(adjacency, first)
        pts = np.array([edge_point(k) for k in order])
        if np.hypot(*pts[-1]) < np.hypot(*pts[0]):
            pts = pts[::-1]
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(np.abs(np.diff(pts, axis=0)) > 1e-14, axis=1)
        components.append(pts[keep])
    components.sort(key=len, reverse=True)
    return NodalCurve(points=components[0], components=components)


def _component(adjacency, start):
    stack, out = [start], {start}
    while stack:
        for nb in adjacency[stack.pop()]:
            if nb not in out:
                out.add(nb)
                stack.append(nb)
    return out


def _walk(adjacency, first):
    order, prev, cur = [first], None, first
    visited = {first}
    while True:
        nxt = [k for k in adjacency[cur] if k != prev and k not in visited]
        if not nxt:
            return order
        prev, cur = cur, nxt[0]
        visited.add(cur)
        order.append(cur)


@dataclass
class ConeFit:
    alpha: float
    C: float
    n_points: int


def cone_confinement(points: np.ndarray, r_min: float, C: float = 1.0) -> ConeFit:
    """Smallest ``alpha > 1`` with ``x/alpha - C <= y <= alpha x + C`` beyond radius ``r_min``."""
    pts = np.asarray(points)
    far = pts[np.hypot(pts[:, 0], pts[:, 1]) >= r_min]
    if len(far) == 0:
        raise ValueError("no nodal points beyond r_min")
    x, y = far[:, 0], far[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where(x > 0, (y - C) / x, np.where(y > C, np.inf, 0.0))
        lower = np.where(y + C > 0, x / (y + C), np.inf)
    alpha = float(max(1.0 + 1e-12, np.max(upper), np.max(lower)))
    return ConeFit(alpha=alpha, C=C, n_points=len(far))
