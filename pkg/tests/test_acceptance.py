"""Acceptance criteria 1-10 on the standard configuration (L = 30, h = 0.1).

Each test records a one-line PASS/FAIL summary that is printed at the end of
the pytest run.
"""
import time

import numpy as np
import pytest

from conftest import record
from fourend.balance import KILLING_FIELDS, Contour, classify, contour_flux, square_contour
from fourend.continuation import conjugate_solution, continue_curve, seed_saddle
from fourend.discretization import check_monotone, linearized_apply, nodal_curve, residual
from fourend.grid import Field, QuadrantGrid
from fourend.potential import build_heteroclinic, energy_constant, energy_constant_routes, quartic
from fourend.solver import accept
from fourend.spectra import (
    SECTORS, decay_rate, full_plane_operator, index_stabilization, nondegeneracy_margin,
    sector_operator,
)

Q = np.pi / 4
L, H = 30.0, 0.1
THETA_TOL, R_TOL = 1e-3, 1e-2


@pytest.fixture(scope="module")
def p():
    return quartic()


@pytest.fixture(scope="module")
def grid():
    return QuadrantGrid(L, H)


@pytest.fixture(scope="module")
def saddle_run(grid, p):
    t = time.perf_counter()
    sol = seed_saddle(grid, p)
    return sol, time.perf_counter() - t


@pytest.fixture(scope="module")
def curve_run(saddle_run):
    t = time.perf_counter()
    curve = continue_curve(saddle_run[0], Q - 0.5, Q + 0.5, 21)
    return curve, time.perf_counter() - t


@pytest.fixture(scope="module")
def branch(curve_run):
    return [s.solution for s in curve_run[0].samples]


def test_criterion_01_heteroclinic(p):
    t = time.perf_counter()
    prof = build_heteroclinic(p)
    elapsed = time.perf_counter() - t
    s = np.linspace(-10, 10, 20001)
    err = float(np.max(np.abs(prof(s) - np.tanh(s / np.sqrt(2)))))
    eq = prof.equipartition_residual()
    ok = err <= 1e-8 and eq <= 1e-10 and elapsed < 1.0
    assert record(1, ok, f"max|H - tanh| {err:.2e}, equipartition {eq:.2e}, {elapsed:.2f} s")


def test_criterion_02_energy_constant(p):
    t = time.perf_counter()
    c0 = energy_constant(p)
    a, b = energy_constant_routes(p)
    elapsed = time.perf_counter() - t
    err = abs(c0 - 2 * np.sqrt(2) / 3)
    ok = err <= 1e-6 and abs(a - b) <= 1e-8 and elapsed < 1.0
    assert record(2, ok, f"c0 error {err:.2e}, routes differ by {abs(a - b):.2e}, {elapsed:.2f} s")


def test_criterion_03_saddle(saddle_run, grid):
    sol, elapsed = saddle_run
    a, b = sol.classification
    pts = nodal_curve(grid, sol.field).points
    off = float(np.max(np.abs(pts[:, 0] - pts[:, 1])) / np.sqrt(2))
    ok = (sol.residual <= 1e-9 and abs(a) <= THETA_TOL and abs(b) <= R_TOL and off <= 2 * H
          and elapsed < 60)
    assert record(3, ok, f"residual {sol.residual:.1e}, classify ({a:.1e}, {b:.1e}), "
                         f"nodal offset {off:.1e}, {elapsed:.1f} s")


def test_criterion_04_branch(curve_run):
    curve, elapsed = curve_run
    samples = curve.samples
    accepted = curve.complete and len(samples) == 21 and all(accept(s.solution) for s in samples)
    dtheta = max(abs(s.theta_extracted - s.theta_imposed) for s in samples)
    conj_err = 0.0
    mirror_err = 0.0
    for k, s in enumerate(samples):
        c = conjugate_solution(s.solution)
        conj_err = max(conj_err, *np.abs(np.add(c.classification, s.solution.classification)))
        # the conjugate of the sample at theta is the sample at pi/2 - theta
        mirror = samples[len(samples) - 1 - k].solution.classification
        mirror_err = max(mirror_err, *np.abs(np.subtract(c.classification, mirror)))
    repeat = curve.has_repeat()
    ok = (accepted and dtheta <= 5e-3 and conj_err <= 2 * 5e-3 and not repeat and elapsed < 1800)
    assert record(4, ok, f"{len(samples)} samples accepted={accepted}, max|dtheta| {dtheta:.1e}, "
                         f"conjugation {conj_err:.1e} (vs mirror sample {mirror_err:.1e}), "
                         f"repeat={repeat}, {elapsed:.0f} s")


def test_criterion_05_balancing(branch, p):
    bound = 10 * H**2
    worst_closed = worst_homol = worst_time = 0.0
    closed = [square_contour(-15, -15, 15, 15), square_contour(0, 0, 12, 12),
              square_contour(4, 2, 14, 12), square_contour(-10, 3, 6, 25)]
    inner = Contour(((12, 0), (12, 12), (0, 12)), closed=False)
    outer = Contour(((12, 0), (20, 0), (20, 20), (0, 20), (0, 12)), closed=False)
    for sol in branch:
        t = time.perf_counter()
        for X in KILLING_FIELDS:
            for c in closed:
                worst_closed = max(worst_closed, abs(contour_flux(sol.field, p, c, X)))
            diff = contour_flux(sol.field, p, inner, X) - contour_flux(sol.field, p, outer, X)
            worst_homol = max(worst_homol, abs(diff))
        worst_time = max(worst_time, time.perf_counter() - t)
    ok = worst_closed <= bound and worst_homol <= bound and worst_time < 10
    assert record(5, ok, f"closed flux {worst_closed:.1e}, homologous difference {worst_homol:.1e} "
                         f"(bound {bound:.0e}), {worst_time:.2f} s per solution")


def test_criterion_06_monotone(branch):
    reports = [check_monotone(s.field) for s in branch]
    ok = all(r.ok for r in reports)
    assert record(6, ok, f"{sum(r.ok for r in reports)}/{len(reports)} monotone, "
                         f"max u_x {max(r.worst_dx for r in reports):.1e}, "
                         f"min u_y {min(r.worst_dy for r in reports):.1e}, "
                         f"max|u| {max(r.max_abs for r in reports):.15f}")


def test_criterion_07_jacobian(branch, p):
    rng = np.random.default_rng(2024)
    picks = rng.choice(len(branch), 3, replace=False)
    eps = 1e-5
    worst = 0.0
    for k in picks:
        sol = branch[k]
        g = sol.grid
        for _ in range(10):
            v = rng.standard_normal((g.n, g.n))
            v[-1, :] = 0.0
            v[:, -1] = 0.0
            fd = (residual(g, Field(g, sol.field.values + eps * v), p).values
                  - residual(g, Field(g, sol.field.values - eps * v), p).values) / (2 * eps)
            lin = linearized_apply(g, sol.field, p, Field(g, v)).values
            worst = max(worst, np.linalg.norm(fd + lin) / np.linalg.norm(lin))
    assert record(7, worst < 1e-6, f"max relative error {worst:.1e} over 30 directions")


def test_criterion_08_nondegeneracy(branch):
    mid = len(branch) // 2
    picks = {"saddle": branch[mid], "theta-0.25": branch[mid - 5], "theta+0.25": branch[mid + 5]}
    margins = {name: [nondegeneracy_margin(s, R) for R in (15, 20, 25)] for name, s in picks.items()}
    values = np.array([m for ms in margins.values() for m in ms])
    spread = float(values.max() / values.min() - 1)
    ok = bool(np.all(values > 0.01)) and spread <= 0.2
    detail = "; ".join(f"{k} " + ", ".join(f"{m:.4f}" for m in v) for k, v in margins.items())
    assert record(8, ok, f"margins at R=15,20,25: {detail}; spread {spread:.0%}")


def test_criterion_09_morse_index(saddle_run, p):
    sol, _ = saddle_run
    t = time.perf_counter()
    table = index_stabilization(sol, [10, 14, 18, 22])
    coarse = seed_saddle(QuadrantGrid(8.0, 0.25), p)
    A, _ = full_plane_operator(coarse.field, p, 7.9)
    dense_neg = int(np.sum(np.linalg.eigvalsh(A) < 0))
    sector_neg = [int(np.sum(np.linalg.eigvalsh(sector_operator(coarse.field, p, s, 7.9).matrix.toarray()) < 0))
                  for s in SECTORS]
    elapsed = time.perf_counter() - t
    ok = (table.nondecreasing and table.stabilized and sum(sector_neg) == dense_neg
          and coarse.grid.n <= 40 and elapsed < 900)
    assert record(9, ok, f"index {table.index} (stabilized value {table.value}), coarse dense {dense_neg} "
                         f"vs sectors {sector_neg}, {elapsed:.0f} s")


def _cnoidal_residual(h, p, m=0.5):
    from scipy.special import ellipj, ellipk

    g = QuadrantGrid(6.0, h)
    beta = 1 / np.sqrt(1 + m)
    _, y = g.mesh()
    u = np.sqrt(2 * m) * beta * ellipj(beta * y + ellipk(m), m)[0]
    return float(np.max(np.abs(residual(g, Field(g, u), p).values)))


def test_criterion_10_decay(saddle_run, p):
    sol, _ = saddle_run
    fit = decay_rate(sol)
    ratio = fit.worst_ratio()
    order = _cnoidal_residual(0.1, p) / _cnoidal_residual(0.05, p)
    ok = fit.alpha > 0.5 and fit.r_squared > 0.9 and ratio <= 2.0 and 3.5 <= order <= 4.5
    assert record(10, ok, f"alpha {fit.alpha:.4f}, C {fit.C:.3f}, R^2 {fit.r_squared:.4f}, "
                          f"max |u^2-1|/(C e^(-alpha d)) {ratio:.3f} (bound 2), h-halving ratio {order:.3f}")
