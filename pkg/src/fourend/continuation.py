"""Natural continuation of the symmetric four-ended branch in the end angle."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import balance
from .discretization import nodal_curve, residual
from .grid import Field, QuadrantGrid
from .solver import NonConvergenceError, Solution, SolveOptions, accept, newton_solve

log = logging.getLogger(__name__)

QUARTER_PI = 0.25 * np.pi
MAX_HALVINGS = 6


class DomainError(ValueError):
    """Invalid seed, angle window or grid for a continuation operation."""


@dataclass
class CurveSample:
    theta_imposed: float
    theta_extracted: float
    r: float
    residual: float
    margin: float | None = None
    index: int | None = None
    file: str | None = None
    newton_steps: list = field(default_factory=list)
    solution: Solution | None = field(default=None, repr=False)


@dataclass
class Termination:
    """Why a direction of the march stopped before its last target."""

    direction: int
    theta_reached: float
    theta_target: float
    reason: str


@dataclass
class ModuliCurve:
    samples: list = field(default_factory=list)
    terminations: list = field(default_factory=list)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s.theta_imposed for s in self.samples])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([s.r for s in self.samples])

    @property
    def complete(self) -> bool:
        return not self.terminations

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.thetas) > 0))

    def has_repeat(self, tol: float = 1e-9) -> bool:
        """True if two samples share the same (theta, r) pair up to ``tol``."""
        pts = np.column_stack([[s.theta_extracted for s in self.samples], self.offsets])
        for k in range(len(pts)):
            if np.any(np.max(np.abs(pts[k + 1:] - pts[k]), axis=1) <= tol):
                return True
        return False


def seed_saddle(grid: QuadrantGrid, potential, opts: SolveOptions | None = None) -> Solution:
    """Saddle solution at theta = pi/4, checked against its diagonal nodal set."""
    sol = newton_solve(grid, potential, QUARTER_PI, 0.0, None, opts)
    curve = nodal_curve(grid, sol.field)
    off = np.max(np.abs(curve.points[:, 0] - curve.points[:, 1])) / np.sqrt(2.0)
    if off > 2 * grid.h:
        raise NonConvergenceError(f"saddle nodal curve strays {off:.3g} from the diagonal", sol.field)
    a, b = sol.classification
    if abs(a) > 1e-3 or abs(b) > 1e-2:
        raise NonConvergenceError(f"saddle classification ({a:.3g}, {b:.3g}) is not (0, 0)", sol.field)
    return sol


def _sample(sol: Solution, path: Path | None) -> CurveSample:
    file = None
    if path is not None:
        from .io import save_solution

        name = f"theta_{sol.theta:.6f}.acf"
        save_solution(sol, path / name)
        file = name
    return CurveSample(
        theta_imposed=sol.theta,
        theta_extracted=sol.extraction.theta,
        r=sol.r,
        residual=sol.residual,
        file=file,
        newton_steps=list(sol.newton_steps),
        solution=sol,
    )


def _march(seed: Solution, targets, opts: SolveOptions, out_dir: Path | None, keep: bool):
    """March from ``seed`` through ``targets`` (ordered away from the seed)."""
    samples, prev, cur = [], None, seed
    direction = int(np.sign(targets[0] - seed.theta)) if targets else 0
    for target in targets:
        while abs(target - cur.theta) > 1e-12:
            step = target - cur.theta
            for _ in range(MAX_HALVINGS + 1):
                theta = cur.theta + step
                if prev is not None:
                    slope = (cur.r - prev.r) / (cur.theta - prev.theta)
                    r0 = cur.r + slope * step
                else:
                    r0 = cur.r
                try:
                    sol = newton_solve(cur.grid, cur.potential, theta, r0, cur, opts)
                    if accept(sol, opts):
                        break
                    log.info("theta=%.6f converged but failed acceptance", theta)
                except NonConvergenceError as exc:
                    log.info("theta=%.6f failed: %s", theta, exc)
                step *= 0.5
            else:
                reason = f"step halving exhausted below step {2 * step:.3g} (fold or solver failure)"
                log.warning("direction %+d stopped at theta=%.6f: %s", direction, cur.theta, reason)
                return samples, Termination(direction, cur.theta, target, reason)
            samples.append(_sample(sol, out_dir))
            if not keep:
                samples[-1].solution = None
            prev, cur = cur, sol
    return samples, None


def continue_curve(seed: Solution, theta_min: float, theta_max: float, steps: int,
                   opts: SolveOptions | None = None, out_dir=None, jobs: int = 1,
                   keep_solutions: bool = True) -> ModuliCurve:
    """Trace the branch through ``seed`` on the uniform angle grid over [theta_min, theta_max].

    ``steps`` is the number of grid angles including both endpoints.  Both
    directions start from the seed and run concurrently when ``jobs > 1``.
    Accepted solutions are written to ``out_dir`` when given.
    """
    opts = opts or SolveOptions()
    if seed.classification is None:
        balance.classify(seed)
    theta_seed = seed.extraction.theta if seed.extraction is not None else seed.theta
    if not (0.0 < theta_min < theta_seed < theta_max < 0.5 * np.pi):
        raise DomainError(f"need 0 < theta_min < theta(seed)={theta_seed:.6f} < theta_max < pi/2")
    if steps < 2:
        raise DomainError("steps must be at least 2")
    if not accept(seed, opts):
        raise DomainError("seed fails the acceptance checks")
    path = None
    if out_dir is not None:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
    grid_thetas = np.linspace(theta_min, theta_max, steps)
    tol = 1e-9
    up = [t for t in grid_thetas if t > seed.theta + tol]
    down = [t for t in grid_thetas[::-1] if t < seed.theta - tol]
    seed_sample = _sample(seed, path)
    if not keep_solutions:
        seed_sample.solution = None
    runs = [(seed, up, opts, path, keep_solutions), (seed, down, opts, path, keep_solutions)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            results = list(pool.map(lambda a: _march(*a), runs))
    else:
        results = [_march(*a) for a in runs]
    (above, stop_up), (below, stop_down) = results
    curve = ModuliCurve(samples=below[::-1] + [seed_sample] + above)
    curve.terminations = [t for t in (stop_down, stop_up) if t is not None]
    return curve


def conjugate_solution(sol: Solution, opts: SolveOptions | None = None) -> Solution:
    """The reflected solution ``-u(y, x)``, with end angle pi/2 - theta and offset -r."""
    opts = opts or SolveOptions()
    values = sol.field.values
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DomainError("conjugation needs a square grid")
    grid = sol.grid
    field_ = Field(grid, -values.T)
    res = float(np.max(np.abs(residual(grid, field_, sol.potential).values)))
    if res > max(opts.newton_tol, 10 * sol.residual):
        raise NonConvergenceError(f"conjugate residual {res:.3e} above tolerance", field_)
    out = Solution(grid, field_, sol.potential, 0.5 * np.pi - sol.theta, -sol.r, res,
                   list(sol.newton_steps), [-x for x in sol.r_history])
    balance.classify(out)
    return out


def annotate_spectra(curve: ModuliCurve, margin_R: float | None = None,
                     index_R: float | None = None) -> ModuliCurve:
    """Fill the margin and Morse-index columns for samples that keep their solution."""
    from .spectra import InconclusiveError, morse_index, nondegeneracy_margin

    for s in curve.samples:
        if s.solution is None:
            continue
        if margin_R is not None:
            try:
                s.margin = nondegeneracy_margin(s.solution, margin_R)
            except InconclusiveError as exc:
                log.warning("theta=%.6f: %s", s.theta_imposed, exc)
        if index_R is not None:
            s.index = morse_index(s.solution, index_R)
    return curve
