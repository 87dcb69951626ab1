"""Uniform grids on the closed quadrant [0, L]^2 and fields sampled on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuadrantGrid:
    """Points ``(i*h, j*h)`` for ``0 <= i, j < n`` with ``n = L/h + 1``.

    Arrays on the grid use ``ij`` indexing: ``values[i, j] = u(x_i, y_j)``.
    """

    L: float
    h: float

    def __post_init__(self):
        if self.L <= 0 or self.h <= 0:
            raise ValueError("L and h must be positive")
        m = round(self.L / self.h)
        if abs(m * self.h - self.L) > 1e-9 * self.L:
            raise ValueError(f"L/h must be an integer, got L={self.L}, h={self.h}")

    @property
    def n(self) -> int:
        return int(round(self.L / self.h)) + 1

    @property
    def coords(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.coords
        return np.meshgrid(x, x, indexing="ij")

    def points(self) -> np.ndarray:
        X, Y = self.mesh()
        return np.stack([X, Y], axis=-1)

    def boundary_mask(self) -> np.ndarray:
        """True on the outer edges ``x = L`` or ``y = L`` (Dirichlet nodes)."""
        m = np.zeros((self.n, self.n), dtype=bool)
        m[-1, :] = True
        m[:, -1] = True
        return m

    def interior_mask(self) -> np.ndarray:
        """Nodes strictly inside the open quadrant and off the outer edges."""
        m = np.zeros((self.n, self.n), dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def quadrature_weights(self) -> np.ndarray:
        """Full-plane multiplicity times h^2: axis nodes stand for 2 points, the origin for 1."""
        w = np.full((self.n, self.n), 4.0)
        w[0, :] = 2.0
        w[:, 0] = 2.0
        w[0, 0] = 1.0
        return w * self.h**2


@dataclass
class Field:
    """Scalar samples on a :class:`QuadrantGrid`, including the outer edges."""

    grid: QuadrantGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        n = self.grid.n
        if self.values.shape != (n, n):
            raise ValueError(f"field shape {self.values.shape} does not match grid ({n}, {n})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __call__(self, x, y):
        """Bilinear interpolation, using the even reflection for negative coordinates."""
        x = np.abs(np.asarray(x, dtype=float)) / self.grid.h
        y = np.abs(np.asarray(y, dtype=float)) / self.grid.h
        n = self.grid.n
        if np.any(x > n - 1 + 1e-9) or np.any(y > n - 1 + 1e-9):
            raise ValueError("point outside the grid")
        i = np.clip(np.floor(x).astype(int), 0, n - 2)
        j = np.clip(np.floor(y).astype(int), 0, n - 2)
        fx, fy = x - i, y - j
        v = self.values
        return ((1 - fx) * (1 - fy) * v[i, j] + fx * (1 - fy) * v[i + 1, j]
                + (1 - fx) * fy * v[i, j + 1] + fx * fy * v[i + 1, j + 1])
