"""Noether flux of rigid motions and extraction of the end parameters.

For a solution of ``Delta u = F'(u)`` and a Killing field X the vector
field ``Xi(X, u) = (|grad u|^2 / 2 + F(u)) X - X(u) grad u`` is divergence
free.  Applied to the quadrant and letting the outer boundary recede, the
three Killing fields give

    c0 cos(theta) = int_{x=0, y>0} (u_y^2 / 2 + F(u)) dy
    c0 sin(theta) = int_{y=0, x>0} (u_x^2 / 2 + F(u)) dx
    c0 r          = int_{x=0, y>0} (...) y dy - int_{y=0, x>0} (...) x dx

which is how the end angle and offset are read off a computed solution.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .discretization import centered_gradient
from .grid import Field
from .potential import Potential, c0_for, eval_ddpotential, eval_potential

QUARTER_PI = 0.25 * np.pi


class ExtractionWarning(UserWarning):
    """The axis integrals are inconsistent with a single straight end."""


class ContourError(ValueError):
    """The contour leaves the computational grid or is malformed."""


@dataclass(frozen=True)
class KillingField:
    kind: str

    def __post_init__(self):
        if self.kind not in ("translation-x", "translation-y", "rotation"):
            raise ValueError(f"unknown Killing field {self.kind!r}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.kind == "translation-x":
            out[..., 0] = 1.0
        elif self.kind == "translation-y":
            out[..., 1] = 1.0
        else:
            out[..., 0] = -x[..., 1]
            out[..., 1] = x[..., 0]
        return out


TRANSLATION_X = KillingField("translation-x")
TRANSLATION_Y = KillingField("translation-y")
ROTATION = KillingField("rotation")
KILLING_FIELDS = (TRANSLATION_X, TRANSLATION_Y, ROTATION)


def flux_density(u, grad, potential: Potential, X: KillingField, x) -> np.ndarray:
    """``Xi(X, u)`` at points ``x`` given values ``u`` and gradients ``grad`` (..., 2)."""
    u = np.asarray(u, dtype=float)
    grad = np.asarray(grad, dtype=float)
    xv = X(x)
    dens = 0.5 * np.sum(grad * grad, axis=-1) + eval_potential(potential, u)
    xu = np.sum(xv * grad, axis=-1)
    return dens[..., None] * xv - xu[..., None] * grad


@dataclass(frozen=True)
class Contour:
    """Polyline through grid nodes with axis-parallel segments.

    The flux is taken against the right-hand normal of the direction of
    travel, which is the outward normal for counter-clockwise closed
    contours.  ``closed`` joins the last vertex back to the first.
    """

    vertices: tuple
    closed: bool = True

    def segments(self):
        v = [np.asarray(p, dtype=float) for p in self.vertices]
        if self.closed:
            v = v + [v[0]]
        return list(zip(v[:-1], v[1:]))

    def reversed(self) -> "Contour":
        return Contour(tuple(self.vertices[::-1]), self.closed)


def square_contour(x0, y0, x1, y1) -> Contour:
    """Counter-clockwise rectangle with corners ``(x0, y0)`` and ``(x1, y1)``."""
    return Contour(((x0, y0), (x1, y0), (x1, y1), (x0, y1)), closed=True)


def _sample(field_: Field, gx, gy, i, j, sx, sy):
    """Values and gradients at nodes (i, j) of the reflected plane (sx, sy = signs of x, y)."""
    u = field_.values[i, j]
    grad = np.stack([sx * gx[i, j], sy * gy[i, j]], axis=-1)
    return u, grad


def contour_flux(field_: Field, potential: Potential, contour: Contour, X: KillingField) -> float:
    """Trapezoid-rule line integral of ``Xi(X, u) . nu`` along ``contour``."""
    g = field_.grid
    h = g.h
    gx, gy = centered_gradient(g, field_.values)
    total = 0.0
    for a, b in contour.segments():
        ka, kb = np.rint(a / h).astype(int), np.rint(b / h).astype(int)
        if np.any(np.abs(a / h - ka) > 1e-8) or np.any(np.abs(b / h - kb) > 1e-8):
            raise ContourError("contour vertices must be grid nodes")
        if np.any(np.abs(np.concatenate([ka, kb])) > g.n - 1):
            raise ContourError("contour exits the grid")
        step = kb - ka
        if step[0] != 0 and step[1] != 0:
            raise ContourError("contour segments must be axis-parallel")
        m = int(np.max(np.abs(step)))
        if m == 0:
            continue
        d = step // m
        k = np.arange(m + 1)
        ii = ka[0] + d[0] * k
        jj = ka[1] + d[1] * k
        pts = np.stack([ii * h, jj * h], axis=-1)
        u, grad = _sample(field_, gx, gy, np.abs(ii), np.abs(jj),
                          np.where(ii < 0, -1.0, 1.0), np.where(jj < 0, -1.0, 1.0))
        xi = flux_density(u, grad, potential, X, pts)
        normal = np.array([d[1], -d[0]], dtype=float)
        integrand = xi @ normal
        total += h * (np.sum(integrand) - 0.5 * (integrand[0] + integrand[-1]))
    return float(total)


@dataclass
class AxisIntegrals:
    """Energy-density integrals along the two half-axes.

    ``A`` and ``B`` are the plain integrals on the y- and x-axis, ``MA`` and
    ``MB`` their first moments; ``*_tail`` bound the neglected parts beyond
    the grid.
    """

    A: float
    B: float
    MA: float
    MB: float
    c0: float
    theta: float
    r: float
    defect: float
    tail_bound: float

    @property
    def reliable(self) -> bool:
        return self.defect <= 0.05


def _trapezoid(f, h):
    return float(h * (np.sum(f) - 0.5 * (f[0] + f[-1])))


def axis_integrals(field_: Field, potential: Potential, c0: float | None = None) -> AxisIntegrals:
    g = field_.grid
    c0 = c0_for(potential) if c0 is None else c0
    u = field_.values
    gx, gy = centered_gradient(g, u)
    t = g.coords
    dens_y = 0.5 * gy[0, :] ** 2 + eval_potential(potential, u[0, :])
    dens_x = 0.5 * gx[:, 0] ** 2 + eval_potential(potential, u[:, 0])
    A, B = _trapezoid(dens_y, g.h), _trapezoid(dens_x, g.h)
    MA, MB = _trapezoid(dens_y * t, g.h), _trapezoid(dens_x * t, g.h)
    # beyond L the density decays like exp(-2 sqrt(F''(1)) t)
    rate = 2.0 * np.sqrt(eval_ddpotential(potential, 1.0))
    L = g.L
    tail = max(dens_y[-1], dens_x[-1]) * (1.0 / rate + L / rate + 1.0 / rate**2)
    norm = np.hypot(A, B)
    return AxisIntegrals(
        A=A, B=B, MA=MA, MB=MB, c0=c0,
        theta=float(np.arctan2(B, A)),
        r=float((MA - MB) / c0),
        defect=float(abs(norm / c0 - 1.0)),
        tail_bound=float(tail),
    )


def _as_field(obj) -> tuple[Field, Potential]:
    if isinstance(obj, Field):
        raise TypeError("pass a Solution, or call axis_integrals(field, potential)")
    return obj.field, obj.potential


def _warn(ax: AxisIntegrals):
    if not ax.reliable:
        warnings.warn(f"unreliable extraction: |(A, B)|/c0 - 1 = {ax.defect:.3g}", ExtractionWarning,
                      stacklevel=3)


def extract_theta(solution) -> float:
    """End angle ``atan2(B, A)`` of the first-quadrant end."""
    ax = axis_integrals(*_as_field(solution))
    _warn(ax)
    return ax.theta


def extract_r(solution) -> float:
    """End offset from the rotational balancing formula."""
    ax = axis_integrals(*_as_field(solution))
    _warn(ax)
    return ax.r


def classify(solution) -> tuple[float, float]:
    """``(theta - pi/4, r)``; also stored on the solution as ``classification``."""
    ax = axis_integrals(*_as_field(solution))
    _warn(ax)
    out = (ax.theta - QUARTER_PI, ax.r)
    solution.classification = out
    solution.extraction = ax
    return out
