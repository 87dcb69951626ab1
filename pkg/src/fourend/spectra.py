"""Spectrum of the linearized operator ``L = -Delta + F''(u)`` on balls.

The ball ``B_R`` is reduced to its quadrant part by splitting functions into
the four parity sectors across the two axes.  An even axis carries mirror
ghosts, an odd axis carries zero values.  Each sector operator is made
symmetric by the square root of the full-plane node multiplicity, so that
the sector spectra together make up the spectrum of the unreduced operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla
from scipy.spatial import cKDTree

from .discretization import EmptyNodalSet, nodal_curve
from .grid import Field
from .potential import eval_ddpotential

SECTORS = (("even", "even"), ("odd", "even"), ("even", "odd"), ("odd", "odd"))
SHIFT = -10.0  # below -max|F''| on [-1, 1] for the admissible potentials
RESIDUAL_TOL = 1e-8


class SpectrumError(RuntimeError):
    """Eigen-iteration failed; ``partial`` carries whatever was computed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InconclusiveError(RuntimeError):
    pass


def _unpack(obj):
    if isinstance(obj, Field):
        raise TypeError("a Solution (field + potential) is required")
    return obj.field, obj.potential


def _check_sector(sector) -> tuple[str, str]:
    sector = tuple(sector)
    if sector not in SECTORS:
        raise ValueError(f"sector must be one of {SECTORS}, got {sector}")
    return sector


def _second_difference(parity: str, m: int, h: float) -> tuple[sparse.csr_matrix, np.ndarray]:
    """1-D second difference on nodes 0..m-1 (even) or 1..m-1 (odd), zero beyond m-1."""
    if parity == "even":
        upper = np.ones(m - 1)
        upper[0] = 2.0
        d = sparse.diags([np.ones(m - 1), np.full(m, -2.0), upper], [-1, 0, 1])
        idx = np.arange(m)
    else:
        k = m - 1
        d = sparse.diags([np.ones(k - 1), np.full(k, -2.0), np.ones(k - 1)], [-1, 0, 1])
        idx = np.arange(1, m)
    return (d / h**2).tocsr(), idx


@dataclass
class SectorOperator:
    """Symmetrized sector operator and the node bookkeeping to map back."""

    matrix: sparse.csr_matrix
    i: np.ndarray
    j: np.ndarray
    multiplicity: np.ndarray
    radius: np.ndarray


def sector_operator(field_: Field, potential, sector, R: float) -> SectorOperator:
    grid = field_.grid
    px, py = _check_sector(sector)
    if R > grid.L + 1e-12:
        raise ValueError(f"R={R} exceeds the grid half-width {grid.L}")
    h = grid.h
    m = min(int(np.ceil(R / h - 1e-9)), grid.n - 1)
    dx, ix = _second_difference(px, m, h)
    dy, iy = _second_difference(py, m, h)
    lap = sparse.kron(dx, sparse.identity(len(iy))) + sparse.kron(sparse.identity(len(ix)), dy)
    I, J = np.meshgrid(ix, iy, indexing="ij")
    I, J = I.ravel(), J.ravel()
    rad = h * np.hypot(I, J)
    keep = rad < R - 1e-12
    q = eval_ddpotential(potential, field_.values[I, J])
    A = (-lap + sparse.diags(q)).tocsr()[keep][:, keep]
    I, J, rad = I[keep], J[keep], rad[keep]
    mult = np.where(I > 0, 2.0, 1.0) * np.where(J > 0, 2.0, 1.0)
    s = np.sqrt(mult)
    S = sparse.diags(s) @ A @ sparse.diags(1.0 / s)
    # exact symmetry: the two triangles agree up to rounding
    S = 0.5 * (S + S.T)
    return SectorOperator(S.tocsr(), I, J, mult, rad)


@dataclass
class SpectrumReport:
    sector: tuple
    R: float
    eigenvalues: np.ndarray
    negative_count: int
    smallest_abs: float
    boundary_mass: np.ndarray = field(repr=False, default=None)
    eigenvectors: np.ndarray = field(repr=False, default=None)
    residuals: np.ndarray = field(repr=False, default=None)

    def csv_row(self) -> list:
        return ["-".join(self.sector), f"{self.R:.17g}"] + [f"{v:.17g}" for v in self.eigenvalues]


def _boundary_mass(op: SectorOperator, vecs: np.ndarray, R: float) -> np.ndarray:
    # the symmetrized vectors already carry the multiplicity weight
    w = vecs**2
    outer = op.radius >= 0.9 * R
    return w[outer].sum(axis=0) / w.sum(axis=0)


def sector_eigenvalues(solution, sector, R: float, k: int = 6, vectors: bool = False) -> SpectrumReport:
    """The k algebraically smallest eigenvalues of L on the sector part of B_R."""
    if k < 1:
        raise ValueError("k must be positive")
    field_, potential = _unpack(solution)
    sector = _check_sector(sector)
    op = sector_operator(field_, potential, sector, R)
    size = op.matrix.shape[0]
    k = min(k, size)
    if size <= 400 or k >= size - 1:
        vals, vecs = np.linalg.eigh(op.matrix.toarray())
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        try:
            vals, vecs = spla.eigsh(op.matrix.tocsc(), k=k, sigma=SHIFT, which="LM",
                                    v0=np.ones(size), tol=1e-14)
        except spla.ArpackNoConvergence as exc:
            raise SpectrumError("eigen-iteration stagnated", exc.eigenvalues) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(op.matrix @ vecs - vecs * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    report = SpectrumReport(
        sector=sector, R=float(R), eigenvalues=vals,
        negative_count=int(np.count_nonzero(vals < 0)),
        smallest_abs=float(np.min(np.abs(vals))),
        boundary_mass=_boundary_mass(op, vecs, R),
        eigenvectors=vecs if vectors else None,
        residuals=res,
    )
    if np.any(res > RESIDUAL_TOL):
        raise SpectrumError(f"eigenpair residual {res.max():.2e} above {RESIDUAL_TOL}", report)
    return report


def negative_count(solution, sector, R: float, k0: int = 8) -> int:
    """Number of negative eigenvalues of L in one sector on B_R."""
    k = k0
    while True:
        rep = sector_eigenvalues(solution, sector, R, k)
        if rep.eigenvalues[-1] >= 0 or len(rep.eigenvalues) < k:
            return rep.negative_count
        k *= 2


def nondegeneracy_margin(solution, R: float, k: int = 6, boundary_fraction: float = 0.5) -> float:
    """Smallest |eigenvalue| in the doubly even sector, ignoring boundary-trapped modes.

    Modes with more than ``boundary_fraction`` of their mass in the annulus
    ``0.9 R <= |x| < R`` are treated as truncation artefacts.
    """
    rep = sector_eigenvalues(solution, ("even", "even"), R, k)
    keep = rep.boundary_mass <= boundary_fraction
    if not np.any(keep):
        raise InconclusiveError("every computed mode is concentrated at the artificial boundary")
    return float(np.min(np.abs(rep.eigenvalues[keep])))


def morse_index(solution, R: float) -> int:
    return sum(negative_count(solution, s, R) for s in SECTORS)


@dataclass
class IndexTable:
    radii: list
    index: list
    per_sector: list

    @property
    def nondecreasing(self) -> bool:
        return all(b >= a for a, b in zip(self.index, self.index[1:]))

    @property
    def stabilized(self) -> bool:
        return len(self.index) >= 3 and len(set(self.index[-3:])) == 1

    @property
    def value(self) -> int | None:
        return self.index[-1] if self.stabilized else None


def index_stabilization(solution, radii) -> IndexTable:
    radii = list(radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing")
    per_sector = [{"-".join(s): negative_count(solution, s, R) for s in SECTORS} for R in radii]
    return IndexTable(radii, [sum(d.values()) for d in per_sector], per_sector)


def full_plane_operator(field_: Field, potential, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``-Delta + F''(u)`` on all grid nodes of the plane inside B_R (reflected field).

    Intended as an oracle on coarse grids only.
    """
    grid = field_.grid
    h = grid.h
    m = min(int(np.ceil(R / h - 1e-9)), grid.n - 1)
    k = np.arange(-(m - 1), m)
    I, J = np.meshgrid(k, k, indexing="ij")
    I, J = I.ravel(), J.ravel()
    keep = h * np.hypot(I, J) < R - 1e-12
    I, J = I[keep], J[keep]
    index = {(a, b): n for n, (a, b) in enumerate(zip(I, J))}
    A = np.zeros((len(I), len(I)))
    q = eval_ddpotential(potential, field_.values[np.abs(I), np.abs(J)])
    for n, (a, b) in enumerate(zip(I, J)):
        A[n, n] = 4.0 / h**2 + q[n]
        for nb in ((a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)):
            col = index.get(nb)
            if col is not None:
                A[n, col] = -1.0 / h**2
    return A, np.stack([I, J], axis=-1)


@dataclass
class DecayFit:
    alpha: float
    C: float
    r_squared: float
    distance: np.ndarray = field(repr=False)
    deviation: np.ndarray = field(repr=False)

    def worst_ratio(self) -> float:
        """max of ``|1 - u^2| / (C exp(-alpha d))`` over the fitted points."""
        return float(np.max(self.deviation / (self.C * np.exp(-self.alpha * self.distance))))


def distance_to_nodal_set(field_: Field, spacing: float | None = None) -> np.ndarray:
    """Distance from every grid node to the reflected (full-plane) nodal set."""
    grid = field_.grid
    curve = nodal_curve(grid, field_)
    spacing = spacing or grid.h / 4
    dense = []
    for comp in curve.components:
        seg = np.diff(comp, axis=0)
        for p, d in zip(comp[:-1], seg):
            k = max(int(np.ceil(np.hypot(*d) / spacing)), 1)
            dense.append(p + np.outer(np.arange(k) / k, d))
        dense.append(comp[-1:])
    pts = np.concatenate(dense)
    mirrored = np.concatenate([pts * s for s in ([1, 1], [-1, 1], [1, -1], [-1, -1])])
    dist, _ = cKDTree(mirrored).query(grid.points().reshape(-1, 2))
    return dist.reshape(grid.n, grid.n)


def decay_rate(solution, d_min: float = 3.0, d_max: float | None = None) -> DecayFit:
    """Fit ``log|1 - u^2| = log C - alpha d`` over nodes at distance d in [d_min, d_max].

    ``d_max`` defaults to L/2.  Accepts a Solution or a bare Field.
    """
    field_ = solution if isinstance(solution, Field) else solution.field
    grid = field_.grid
    d_max = grid.L / 2 if d_max is None else d_max
    try:
        dist = distance_to_nodal_set(field_)
    except EmptyNodalSet as exc:
        raise ValueError("no nodal set: decay rate undefined") from exc
    dev = np.abs(1.0 - field_.values**2)
    mask = (dist >= d_min) & (dist <= d_max) & (dev > 0)
    if np.count_nonzero(mask) < 10:
        raise ValueError("too few sample points for the decay fit")
    d, y = dist[mask], np.log(dev[mask])
    slope, intercept = np.polyfit(d, y, 1)
    fit = slope * d + intercept
    r2 = 1.0 - np.sum((y - fit) ** 2) / np.sum((y - y.mean()) ** 2)
    return DecayFit(alpha=float(-slope), C=float(np.exp(intercept)), r_squared=float(r2),
                    distance=d, deviation=dev[mask])
