"""Oriented ends, symmetric four-end configurations and the glued ansatz.

Conventions
-----------
An end with parameters ``(r, theta)`` is the oriented line
``r * e_perp + R * e`` with ``e = (cos theta, sin theta)`` and
``e_perp = (-sin theta, cos theta)``.  For :func:`symmetric_ends` the four
ends are the first-quadrant end and its images under the reflections
``x -> -x``, ``(x, y) -> (-x, -y)`` and ``y -> -y``; this gives angles
``theta, pi - theta, pi + theta, 2 pi - theta`` and offsets
``r, -r, r, -r``.  With the sign pattern ``(+, -, +, -)`` the glued
function is even in both axes, tends to +1 along the y-axis and to -1
along the x-axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import Field
from .potential import HeteroclinicProfile

TWO_PI = 2.0 * np.pi
MIN_SEPARATION = 4.0


class GeometryError(ValueError):
    """Raised for invalid end data."""


@dataclass(frozen=True)
class End:
    r: float
    theta: float

    def __post_init__(self):
        if not (0.0 <= self.theta < TWO_PI):
            raise GeometryError(f"end angle must lie in [0, 2pi), got {self.theta}")

    @property
    def e(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta)])

    @property
    def e_perp(self) -> np.ndarray:
        return np.array([-np.sin(self.theta), np.cos(self.theta)])

    @property
    def foot(self) -> np.ndarray:
        """Point of the line closest to the origin."""
        return self.r * self.e_perp


def signed_distance(x, end: End):
    """``x . e_perp - r``; positive on the left of the oriented line."""
    x = np.asarray(x, dtype=float)
    ep = end.e_perp
    return x[..., 0] * ep[0] + x[..., 1] * ep[1] - end.r


def _ray_distance(x, start, direction):
    d = x - start
    t = np.maximum(d[..., 0] * direction[0] + d[..., 1] * direction[1], 0.0)
    dx = d[..., 0] - t * direction[0]
    dy = d[..., 1] - t * direction[1]
    return np.hypot(dx, dy)


def _ray_gap(p1, e1, p2, e2) -> float:
    """Minimum distance between the rays ``p1 + t e1`` and ``p2 + t e2`` (t >= 0)."""
    mat = np.array([[e1[0], -e2[0]], [e1[1], -e2[1]]])
    if abs(np.linalg.det(mat)) > 1e-14:
        t1, t2 = np.linalg.solve(mat, p2 - p1)
        if t1 >= 0 and t2 >= 0:
            return 0.0
    return float(min(_ray_distance(p1, p2, e2), _ray_distance(p2, p1, e1)))


def smoothstep(t):
    """C^2 quintic ramp from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


@dataclass(frozen=True)
class EndConfiguration:
    """Four ordered ends together with the gluing radius R.

    ``overlap`` is the half-width of the transition bands of the partition
    of unity (the sets Omega_j and Omega'_j differ by ``overlap`` in the
    distance comparison, and the core ball blends out over
    ``[R - overlap/2, R + overlap/2]``).
    """

    ends: tuple
    R: float
    overlap: float = 2.0

    def __post_init__(self):
        if len(self.ends) != 4:
            raise GeometryError("exactly four ends are required")
        th = [e.theta for e in self.ends]
        if not (th[0] < th[1] < th[2] < th[3] < TWO_PI + th[0]):
            raise GeometryError(f"ends are not ordered: {th}")
        if self.R <= 0:
            raise GeometryError("gluing radius must be positive")

    def half_line_starts(self) -> np.ndarray:
        """Start points ``r_j e_perp_j + s_j e_j`` of the half-lines, on or outside the circle |x| = R."""
        out = []
        for end in self.ends:
            s = np.sqrt(max(self.R**2 - end.r**2, 0.0))
            out.append(end.foot + s * end.e)
        return np.array(out)

    def separation(self) -> float:
        starts = self.half_line_starts()
        gaps = [
            _ray_gap(starts[i], self.ends[i].e, starts[j], self.ends[j].e)
            for i in range(4) for j in range(i + 1, 4)
        ]
        return min(gaps)

    def is_separated(self) -> bool:
        return self.separation() >= MIN_SEPARATION


def default_radius(theta: float, r: float) -> float:
    return max(10.0, 3.0 / np.tan(theta), 3.0 * np.tan(theta), 4.0 * abs(r))


def symmetric_ends(theta: float, r: float, R: float | None = None) -> EndConfiguration:
    """Doubly even configuration whose first-quadrant end is ``(r, theta)``.

    R defaults to :func:`default_radius` and is increased in unit steps
    until the half-lines are at least 4 apart.
    """
    if not (0.0 < theta < 0.5 * np.pi):
        raise GeometryError(f"theta must lie in (0, pi/2), got {theta}")
    R = default_radius(theta, r) if R is None else float(R)
    ends = (End(r, theta), End(-r, np.pi - theta), End(r, np.pi + theta), End(-r, TWO_PI - theta))
    conf = EndConfiguration(ends, R)
    for _ in range(1000):
        if conf.is_separated():
            return conf
        conf = EndConfiguration(ends, conf.R + 1.0)
    raise GeometryError("could not separate the half-lines")


def _blend_weights(dist: np.ndarray, width: float) -> np.ndarray:
    """Normalized weights from distances (..., 4): 1 where a ray is closer than all others by ``width``."""
    k = dist.shape[-1]
    psi = np.empty_like(dist)
    for j in range(k):
        others = np.min(np.delete(dist, j, axis=-1), axis=-1)
        psi[..., j] = smoothstep((others - dist[..., j] + width) / (2.0 * width))
    return psi / psi.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class Ansatz:
    """The glued approximate solution for an end configuration.

    Far from the origin the ansatz is ``sum_j sign_j I_j H(dist_j)``.  On
    the core ball (weight ``I_0``) it is the first-quadrant heteroclinic
    evaluated at ``(rho(x), rho(y))`` with ``rho(t) = sqrt(t^2 + core_width^2)``,
    a smooth even stand-in for ``(|x|, |y|)``; this keeps the ansatz usable as
    an approximate solution everywhere and monotone in each quadrant.
    Only symmetric configurations (see :func:`symmetric_ends`) are meant to
    be glued this way.
    """

    config: EndConfiguration
    profile: HeteroclinicProfile = field(repr=False)
    sign: float = -1.0  # global flip of the (-1)^j pattern, see module docstring
    core_width: float = 1.0

    @cached_property
    def signs(self) -> np.ndarray:
        return self.sign * np.array([(-1.0) ** j for j in range(1, 5)])

    def _far_distances(self, x):
        starts = self.config.half_line_starts()
        return np.stack([_ray_distance(x, starts[j], end.e)
                         for j, end in enumerate(self.config.ends)], axis=-1)

    def core(self, x):
        x = np.asarray(x, dtype=float)
        c2 = self.core_width**2
        folded = np.stack([np.sqrt(x[..., 0]**2 + c2), np.sqrt(x[..., 1]**2 + c2)], axis=-1)
        end = self.config.ends[0]
        return self.signs[0] * self.profile(signed_distance(folded, end))

    def weights(self, x) -> np.ndarray:
        """Partition of unity ``(I_0, ..., I_4)`` stacked on the last axis."""
        x = np.asarray(x, dtype=float)
        R, w = self.config.R, self.config.overlap
        rad = np.hypot(x[..., 0], x[..., 1])
        i0 = 1.0 - smoothstep((rad - (R - 0.5 * w)) / w)
        far = _blend_weights(self._far_distances(x), w)
        return np.concatenate([i0[..., None], (1.0 - i0)[..., None] * far], axis=-1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        heights = np.stack([s * self.profile(signed_distance(x, end))
                            for s, end in zip(self.signs, self.config.ends)], axis=-1)
        wts = self.weights(x)
        return wts[..., 0] * self.core(x) + np.sum(wts[..., 1:] * heights, axis=-1)


def make_ansatz(theta: float, r: float, profile: HeteroclinicProfile, R: float | None = None) -> Ansatz:
    return Ansatz(symmetric_ends(theta, r, R), profile)


def ansatz_eval(a: Ansatz, x):
    return a(x)


def partition_weight(a: Ansatz, j: int, x):
    if not 0 <= j <= 4:
        raise IndexError("partition index must be in 0..4")
    return a.weights(x)[..., j]


def sample_ansatz(a: Ansatz, grid) -> Field:
    return Field(grid, a(grid.points()))


@dataclass
class Decomposition:
    """``v = u - u_lambda`` on the grid with its size diagnostics."""

    v: Field
    l2: float
    sup: float
    weighted_sup: float


def decompose(field_: Field, a: Ansatz, weight_rate: float = 0.1) -> Decomposition:
    """Split ``field_`` into the ansatz plus a remainder and measure the remainder.

    ``weighted_sup`` is ``max |v| exp(weight_rate |x|)``; a remainder that
    decays exponentially keeps it bounded as the domain grows.
    """
    grid = field_.grid
    pts = grid.points()
    v = field_.values - a(pts)
    l2 = float(np.sqrt(np.sum(grid.quadrature_weights() * v * v)))
    rad = np.hypot(pts[..., 0], pts[..., 1])
    return Decomposition(
        v=Field(grid, v),
        l2=l2,
        sup=float(np.max(np.abs(v))),
        weighted_sup=float(np.max(np.abs(v) * np.exp(weight_rate * rad))),
    )
