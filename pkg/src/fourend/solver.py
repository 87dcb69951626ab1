"""Newton solver for doubly even four-ended solutions at a prescribed end angle."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from . import balance
from .discretization import check_monotone, jacobian_matrix, residual
from .geometry import Ansatz, make_ansatz
from .grid import Field, QuadrantGrid
from .potential import Potential, heteroclinic_for

log = logging.getLogger(__name__)


class NonConvergenceError(RuntimeError):
    """Newton or the offset loop failed; ``last`` holds the final iterate if any."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class BlowUpError(NonConvergenceError):
    """An iterate left the band |u| <= 1.1."""


class LinearSolverError(RuntimeError):
    """The linear solve missed its tolerance; ``approximation`` is the best iterate, if any."""

    def __init__(self, message, approximation=None):
        super().__init__(message)
        self.approximation = approximation


@dataclass
class SolveOptions:
    newton_tol: float = 1e-9
    max_newton: int = 30
    r_tol: float = 1e-6
    max_r_iter: int = 20
    max_halvings: int = 8
    linear_tol: float = 1e-10
    blowup: float = 1.1

    def __post_init__(self):
        for name in ("newton_tol", "r_tol", "linear_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_newton < 1 or self.max_r_iter < 1:
            raise ValueError("iteration limits must be at least 1")


@dataclass
class Solution:
    """A converged field together with its imposed and extracted end data."""

    grid: QuadrantGrid
    field: Field
    potential: Potential
    theta: float
    r: float
    residual: float
    newton_steps: list = field(default_factory=list)
    r_history: list = field(default_factory=list)
    classification: tuple | None = None
    extraction: object = field(default=None, repr=False)

    @property
    def r_iterations(self) -> int:
        return len(self.newton_steps)

    @property
    def potential_id(self) -> str:
        return self.potential.id

    def ansatz(self) -> Ansatz:
        return make_ansatz(self.theta, self.r, heteroclinic_for(self.potential))


def linear_solve(operator, rhs, tol: float = 1e-10):
    """Solve ``A x = b`` with ``||A x - b||_2 <= tol ||b||_2``.

    Sparse matrices are factorized directly (SuperLU); anything else is
    treated as a symmetric operator action and handed to MINRES.
    """
    b = rhs.values.ravel() if isinstance(rhs, Field) else np.asarray(rhs, dtype=float).ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros_like(b)
    elif sparse.issparse(operator):
        A = operator.tocsc()
        lu = spla.splu(A)
        x = lu.solve(b)
        # iterative refinement for mildly ill-conditioned A
        for _ in range(3):
            r = b - A @ x
            if np.linalg.norm(r) <= tol * bnorm:
                break
            x = x + lu.solve(r)
        else:
            raise LinearSolverError("direct solve missed the residual tolerance", x)
    else:
        A = operator if isinstance(operator, spla.LinearOperator) else spla.aslinearoperator(operator)
        x, info = spla.minres(A, b, rtol=tol, maxiter=20 * len(b))
        if info != 0 or np.linalg.norm(A @ x - b) > tol * bnorm * 10:
            raise LinearSolverError(f"MINRES stopped with info={info}", x)
    if isinstance(rhs, Field):
        return Field(rhs.grid, x.reshape(rhs.values.shape))
    return x


def _sup(res: Field) -> float:
    return float(np.max(np.abs(res.values)))


def newton_dirichlet(grid: QuadrantGrid, potential: Potential, ansatz: Ansatz,
                     initial: Field | None, opts: SolveOptions,
                     initial_ansatz: Ansatz | None = None,
                     history: list | None = None) -> tuple[Field, float, int]:
    """Damped Newton for the Dirichlet problem with outer data from ``ansatz``.

    If ``initial_ansatz`` (the ansatz ``initial`` was computed with) is
    given, the start is shifted by the change of ansatz so that it matches
    the new boundary data.  Returns the field, the final sup-norm residual
    and the number of steps; residual norms are appended to ``history``.
    An inaccurate linear solve is still tried as a search direction, the
    damped line search deciding whether it is usable.
    """
    pts = grid.points()
    if initial is None:
        u = ansatz(pts)
    elif initial_ansatz is not None:
        u = initial.values + ansatz(pts) - initial_ansatz(pts)
    else:
        u = initial.values.copy()
    u[-1, :] = ansatz(pts[-1, :])
    u[:, -1] = ansatz(pts[:, -1])
    current = Field(grid, u)
    res = residual(grid, current, potential)
    norm = _sup(res)
    if history is not None:
        history.append(norm)
    steps = 0
    while norm > opts.newton_tol:
        if steps >= opts.max_newton:
            raise NonConvergenceError(f"Newton did not converge in {steps} steps (residual {norm:.3e})",
                                      current)
        J = jacobian_matrix(grid, current, potential)
        try:
            delta = linear_solve(J, res.values[:-1, :-1], opts.linear_tol)
        except LinearSolverError as exc:
            if exc.approximation is None or not np.all(np.isfinite(exc.approximation)):
                raise NonConvergenceError(f"linear solve failed: {exc}", current) from exc
            log.info("inexact linear solve (%s); relying on damping", exc)
            delta = exc.approximation
        except RuntimeError as exc:
            raise NonConvergenceError(f"linear solve failed: {exc}", current) from exc
        delta = delta.reshape(grid.n - 1, grid.n - 1)
        lam = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = current.values.copy()
            trial[:-1, :-1] += lam * delta
            trial_field = Field(grid, trial)
            trial_res = residual(grid, trial_field, potential)
            trial_norm = _sup(trial_res)
            in_band = np.max(np.abs(trial)) <= opts.blowup
            if trial_norm < norm and in_band:
                break
            lam *= 0.5
        else:
            if not in_band:
                raise BlowUpError(f"|u| exceeded {opts.blowup}", current)
            raise NonConvergenceError(f"damping exhausted at residual {norm:.3e}", current)
        steps += 1
        current, res, norm = trial_field, trial_res, trial_norm
        if history is not None:
            history.append(norm)
        log.debug("newton step %d: lambda=%.3g residual=%.3e", steps, lam, norm)
    return current, norm, steps


def newton_solve(grid: QuadrantGrid, potential: Potential, theta: float, r0: float = 0.0,
                 initial: Field | Solution | None = None, opts: SolveOptions | None = None) -> Solution:
    """Solve at end angle ``theta``, resolving the offset r self-consistently.

    Each outer pass glues the ansatz for ``(theta, r)``, solves the
    Dirichlet problem by Newton's method and replaces r by the offset read
    off the solution with the rotational balancing formula.  ``initial``
    may be a neighbouring :class:`Solution`, in which case the start is
    corrected by the change of ansatz; if Newton fails from the corrected
    start, the pass is retried from the uncorrected one.
    """
    if not (0.0 < theta < 0.5 * np.pi):
        raise ValueError(f"theta must lie in (0, pi/2), got {theta}")
    opts = opts or SolveOptions()
    theta = float(theta)
    profile = heteroclinic_for(potential)
    r = float(r0)
    previous = None
    if isinstance(initial, Solution):
        current, previous = initial.field, initial.ansatz()
    else:
        current = initial
    steps, history = [], [r]
    for _ in range(opts.max_r_iter):
        ansatz = make_ansatz(theta, r, profile)
        try:
            result = newton_dirichlet(grid, potential, ansatz, current, opts, previous)
        except NonConvergenceError:
            if previous is None or current is None:
                raise
            # the ansatz shift can overshoot after large jumps; retry from the bare field
            log.info("shifted warm start failed at theta=%.6f r=%.6f, retrying unshifted", theta, r)
            result = newton_dirichlet(grid, potential, ansatz, current, opts, None)
        current, norm, n_steps = result
        previous = ansatz
        steps.append(n_steps)
        ax = balance.axis_integrals(current, potential)
        r_new = ax.r
        history.append(r_new)
        log.info("theta=%.6f r=%.8f -> %.8f (newton %d, residual %.2e)", theta, r, r_new, n_steps, norm)
        if abs(r_new - r) < opts.r_tol:
            sol = Solution(grid, current, potential, theta, r, norm, steps, history)
            balance.classify(sol)
            return sol
        r = r_new
    raise NonConvergenceError(f"offset loop did not settle in {opts.max_r_iter} passes: {history[-3:]}",
                              current)


def accept(solution: Solution, opts: SolveOptions | None = None) -> bool:
    """Residual, bound and monotonicity checks for a computed solution."""
    opts = opts or SolveOptions()
    res = _sup(residual(solution.grid, solution.field, solution.potential))
    return res <= opts.newton_tol and check_monotone(solution.field).ok
