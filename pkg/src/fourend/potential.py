"""Double-well potentials and the one-dimensional heteroclinic front.

The default potential is the quartic ``F(u) = (1 - u**2)**2 / 4`` whose
heteroclinic is ``tanh(s / sqrt(2))``.  Tabulated potentials can be loaded
from a CSV file with columns ``u,F,dF,ddF``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline

# Gauss-Legendre nodes used for the short-interval quadratures in the
# inversion of s(H).
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)

# Below this gap to the well the profile follows its linearized tail.
TAIL_SWITCH = 1e-6

# Tabulated potentials are extended quadratically up to this |u|.
EXTENSION_LIMIT = 2.0


class PotentialError(ValueError):
    """Raised for invalid potentials or out-of-domain queries."""


class HeteroclinicError(RuntimeError):
    """Raised when the heteroclinic quadrature cannot be carried out."""


class AccuracyError(RuntimeError):
    """Raised when two independent quadrature routes disagree."""


@dataclass(frozen=True)
class Potential:
    """An even double-well potential vanishing at +1 and -1.

    Use :func:`quartic` or :func:`load_tabulated` rather than building
    instances by hand; both validate the double-well axioms.
    """

    kind: str = "quartic"
    table: tuple | None = field(default=None, repr=False)
    source: str | None = None

    def __post_init__(self):
        if self.kind not in ("quartic", "tabulated"):
            raise PotentialError(f"unknown potential kind {self.kind!r}")
        if self.kind == "tabulated":
            u, f, df, ddf = (np.asarray(a, dtype=float) for a in self.table)
            object.__setattr__(self, "_f", CubicHermiteSpline(u, f, df))
            object.__setattr__(self, "_df", CubicHermiteSpline(u, df, ddf))
            object.__setattr__(self, "_ddf", CubicHermiteSpline(u, ddf, np.gradient(ddf, u)))
            object.__setattr__(self, "_umin", u[0])
            object.__setattr__(self, "_umax", u[-1])
        _validate(self)

    @property
    def id(self) -> str:
        if self.kind == "quartic":
            return "quartic"
        return f"tabulated:{self.source}"

    def F(self, u):
        return eval_potential(self, u)

    def dF(self, u):
        return eval_dpotential(self, u)

    def ddF(self, u):
        return eval_ddpotential(self, u)


def quartic() -> Potential:
    return Potential("quartic")


def load_tabulated(path) -> Potential:
    """Read a potential from a CSV with columns ``u,F,dF,ddF``.

    The table must cover ``[-1, 1]`` with strictly increasing ``u``.
    """
    path = Path(path)
    cols = {"u": [], "F": [], "dF": [], "ddF": []}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(cols) - set(reader.fieldnames or [])
        if missing:
            raise PotentialError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            for key in cols:
                cols[key].append(float(row[key]))
    u = np.asarray(cols["u"])
    if u.size < 4 or np.any(np.diff(u) <= 0):
        raise PotentialError(f"{path}: u must be strictly increasing with at least 4 rows")
    if u[0] > -1.0 + 1e-12 or u[-1] < 1.0 - 1e-12:
        if not (np.isclose(u[0], -1.0) and np.isclose(u[-1], 1.0)):
            raise PotentialError(f"{path}: table must cover [-1, 1]")
    table = tuple(tuple(cols[k]) for k in ("u", "F", "dF", "ddF"))
    return Potential("tabulated", table=table, source=str(path))


def _tab_eval(p: Potential, u, which: int):
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > EXTENSION_LIMIT) or not np.all(np.isfinite(u)):
        raise PotentialError(f"potential queried outside |u| <= {EXTENSION_LIMIT}")
    inside = (u >= p._umin) & (u <= p._umax)
    spl = (p._f, p._df, p._ddf)[which]
    out = np.empty_like(u)
    out[inside] = spl(u[inside])
    # quadratic extension matching value, slope and curvature at the table ends
    for edge, mask in ((p._umax, u > p._umax), (p._umin, u < p._umin)):
        if np.any(mask):
            d = u[mask] - edge
            f0, f1, f2 = float(p._f(edge)), float(p._df(edge)), float(p._ddf(edge))
            out[mask] = (f0 + f1 * d + 0.5 * f2 * d * d, f1 + f2 * d, np.full_like(d, f2))[which]
    return out if out.ndim else float(out)


def eval_potential(p: Potential, u):
    if p.kind == "quartic":
        u = np.asarray(u, dtype=float)
        w = 1.0 - u * u
        return 0.25 * w * w if w.ndim else float(0.25 * w * w)
    return _tab_eval(p, u, 0)


def eval_dpotential(p: Potential, u):
    if p.kind == "quartic":
        u = np.asarray(u, dtype=float)
        out = u * u * u - u
        return out if out.ndim else float(out)
    return _tab_eval(p, u, 1)


def eval_ddpotential(p: Potential, u):
    if p.kind == "quartic":
        u = np.asarray(u, dtype=float)
        out = 3.0 * u * u - 1.0
        return out if out.ndim else float(out)
    return _tab_eval(p, u, 2)


def _validate(p: Potential):
    lattice = np.linspace(-1.0, 1.0, 401)
    f = eval_potential(p, lattice)
    if np.max(np.abs(f - eval_potential(p, -lattice))) > 1e-8:
        raise PotentialError("potential is not even")
    if abs(f[0]) > 1e-10 or abs(f[-1]) > 1e-10:
        raise PotentialError("F(+-1) must vanish")
    if np.any(f[1:-1] <= 0):
        raise PotentialError("F must be positive on (-1, 1)")
    if eval_ddpotential(p, 1.0) <= 0 or eval_ddpotential(p, -1.0) <= 0:
        raise PotentialError("F''(+-1) must be positive")
    df = eval_dpotential(p, lattice[201:-1])
    if np.any(df == 0) or (np.any(df > 0) and np.any(df < 0)):
        raise PotentialError("F' must not vanish on (0, 1)")


@dataclass(frozen=True)
class HeteroclinicProfile:
    """Samples of the odd heteroclinic H on ``[-S, S]`` with spacing ``ds``.

    ``H`` and ``dH`` hold values at ``s = -S, -S + ds, ..., S``.  Outside
    the sampled range the tail is continued exponentially with the rate
    ``decay``.
    """

    ds: float
    S: float
    s: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    dH: np.ndarray = field(repr=False)
    decay: float
    potential: Potential = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.s, self.H, self.dH))

    def __call__(self, s):
        """Evaluate H at arbitrary (array) arguments."""
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        out = np.empty_like(a)
        inner = a <= self.S
        out[inner] = self._spline(a[inner])
        gap = 1.0 - self.H[-1]
        out[~inner] = 1.0 - gap * np.exp(-self.decay * (a[~inner] - self.S))
        out = np.sign(s) * out
        return out if out.ndim else float(out)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        out = np.empty_like(a)
        inner = a <= self.S
        out[inner] = self._spline(a[inner], 1)
        gap = 1.0 - self.H[-1]
        out[~inner] = self.decay * gap * np.exp(-self.decay * (a[~inner] - self.S))
        return out if out.ndim else float(out)

    def equipartition_residual(self) -> float:
        """Max over samples of ``|H'**2 / 2 - F(H)|``."""
        return float(np.max(np.abs(0.5 * self.dH**2 - eval_potential(self.potential, self.H))))


def _bracketed_step(p: Potential, a: float, ds: float, inv_speed):
    """Fallback for the Newton inversion: bracket and solve with Brent's method."""

    def g(b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return half * np.dot(_GL_W, inv_speed(mid + half * _GL_X)) - ds

    hi = a
    for k in range(1, 60):
        hi = 1.0 - (1.0 - a) * 0.5**k
        if g(hi) > 0:
            break
    else:
        return None
    try:
        return optimize.brentq(g, a, hi, xtol=1e-16, rtol=1e-15)
    except (ValueError, RuntimeError):
        return None


def build_heteroclinic(p: Potential, S: float = 20.0, ds: float = 0.01) -> HeteroclinicProfile:
    """Construct H by inverting ``s(H) = int_0^H dv / sqrt(2 F(v))``.

    Each sample ``H_{k+1}`` solves ``int_{H_k}^{H_{k+1}} dv / sqrt(2F) = ds``
    by Newton's method, the integral being evaluated with Gauss-Legendre
    quadrature on the short interval.  No ODE shooting is involved.
    """
    if S < 10:
        raise ValueError("S must be at least 10")
    if ds > 0.01 or ds <= 0:
        raise ValueError("ds must lie in (0, 0.01]")
    m = int(round(S / ds))
    if abs(m * ds - S) > 1e-9 * S:
        raise ValueError("S must be an integer multiple of ds")

    def inv_speed(v):
        return 1.0 / np.sqrt(2.0 * eval_potential(p, v))

    kappa = float(np.sqrt(eval_ddpotential(p, 1.0)))
    h = np.zeros(m + 1)
    dh = np.zeros(m + 1)
    tail_from = m + 1
    for k in range(m):
        a = h[k]
        if 1.0 - a < TAIL_SWITCH:
            tail_from = k
            break
        fa = eval_potential(p, a)
        speed = np.sqrt(2.0 * fa)
        # second-order Taylor guess: H'' = F'(H)
        b = a + ds * speed + 0.5 * ds * ds * eval_dpotential(p, a)
        b = min(b, 0.5 * (a + 1.0)) if b >= 1.0 else b
        for _ in range(50):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            g = half * np.dot(_GL_W, inv_speed(mid + half * _GL_X)) - ds
            step = g * np.sqrt(2.0 * eval_potential(p, b))
            b_new = b - step
            if b_new >= 1.0:
                b_new = 0.5 * (b + 1.0)
            if b_new <= a:
                b_new = 0.5 * (a + b)
            if abs(b_new - b) <= 4e-16 * max(1.0, abs(b)) or abs(g) <= 1e-15 * ds:
                b = b_new
                break
            b = b_new
        else:
            b = _bracketed_step(p, a, ds, inv_speed)
            if b is None:
                raise HeteroclinicError(f"inversion did not converge at s={(k + 1) * ds:.4f}")
        if not np.isfinite(b) or b <= a:
            raise HeteroclinicError(f"non-monotone profile at s={(k + 1) * ds:.4f}")
        h[k + 1] = b

    head = slice(0, min(tail_from, m + 1))
    dh[head] = np.sqrt(2.0 * eval_potential(p, h[head]))
    if tail_from <= m:
        # linearized tail: 1 - H decays like exp(-kappa s) once F is quadratic
        gap = (1.0 - h[tail_from]) * np.exp(-kappa * ds * np.arange(m + 1 - tail_from))
        h[tail_from:] = 1.0 - gap
        dh[tail_from:] = kappa * gap
    s_pos = np.arange(m + 1) * ds
    s = np.concatenate([-s_pos[:0:-1], s_pos])
    H = np.concatenate([-h[:0:-1], h])
    dH = np.concatenate([dh[:0:-1], dh])
    return HeteroclinicProfile(ds=ds, S=float(S), s=s, H=H, dH=dH, decay=kappa, potential=p)


def energy_density(profile: HeteroclinicProfile) -> np.ndarray:
    """``H'**2 / 2 + F(H)`` at the profile samples."""
    return 0.5 * profile.dH**2 + eval_potential(profile.potential, profile.H)


def energy_constant(p: Potential, profile: HeteroclinicProfile | None = None, tol: float = 1e-8) -> float:
    """The front energy c0 = int (H'**2 / 2 + F(H)) ds.

    Cross-checked against ``int_{-1}^{1} sqrt(2 F(v)) dv``, which equals
    ``int H'**2 ds`` after the substitution v = H(s).
    """
    c_profile, c_sub = energy_constant_routes(p, profile)
    if abs(c_profile - c_sub) > tol:
        raise AccuracyError(f"c0 routes disagree: {c_profile!r} vs {c_sub!r}")
    return c_profile


def energy_constant_routes(p: Potential, profile: HeteroclinicProfile | None = None) -> tuple[float, float]:
    """Both c0 estimates: (Simpson on the profile plus tail, substitution integral)."""
    if profile is None:
        profile = build_heteroclinic(p)
    dens = energy_density(profile)
    # density ~ H'^2 decays at twice the tail rate; two tails
    c_profile = integrate.simpson(dens, x=profile.s) + dens[-1] / profile.decay
    c_sub, _ = integrate.quad(lambda v: np.sqrt(2.0 * eval_potential(p, v)), -1.0, 1.0,
                              epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(c_profile), float(c_sub)


@lru_cache(maxsize=16)
def heteroclinic_for(p: Potential) -> HeteroclinicProfile:
    """Cached default-resolution profile (S=20, ds=0.01) for ``p``."""
    return build_heteroclinic(p)


@lru_cache(maxsize=16)
def c0_for(p: Potential) -> float:
    return energy_constant(p, heteroclinic_for(p))
