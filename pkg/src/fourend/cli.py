"""Command-line driver: ``fourend <command> ...``.

Exit codes: 0 success, 1 usage/domain/format errors, 2 solver failures.
Errors are reported as one line ``error: <kind>: <detail>`` on stderr.
Configuration values come from flags, then ``AC_*`` environment variables,
then the built-in defaults.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import balance, continuation, io, spectra
from .discretization import check_monotone, residual
from .geometry import GeometryError, make_ansatz, sample_ansatz
from .grid import QuadrantGrid
from .potential import PotentialError, heteroclinic_for, load_tabulated, quartic
from .solver import NonConvergenceError, Solution, SolveOptions, accept, newton_solve

log = logging.getLogger("fourend")

THETA_GUARD = 0.15


class CliError(Exception):
    def __init__(self, kind: str, detail: str, code: int = 1):
        super().__init__(detail)
        self.kind, self.detail, self.code = kind, detail, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError("usage", message)


@dataclass
class RunConfig:
    L: float = 30.0
    h: float = 0.1
    potential: str = "quartic"
    theta_guard: float = THETA_GUARD
    jobs: int = 1
    newton_tol: float = SolveOptions.newton_tol
    max_newton: int = SolveOptions.max_newton
    r_tol: float = SolveOptions.r_tol
    max_r_iter: int = SolveOptions.max_r_iter
    max_halvings: int = SolveOptions.max_halvings
    linear_tol: float = SolveOptions.linear_tol
    blowup: float = SolveOptions.blowup

    @classmethod
    def resolve(cls, args: argparse.Namespace, environ=None) -> "RunConfig":
        """Flags win over ``AC_<NAME>`` environment variables, which win over defaults."""
        environ = os.environ if environ is None else environ
        values = {}
        for f in fields(cls):
            flag = getattr(args, f.name, None)
            env = environ.get("AC_" + f.name.upper())
            conv = type(f.default)
            if flag is not None:
                values[f.name] = flag
            elif env is not None:
                try:
                    values[f.name] = conv(env)
                except ValueError as exc:
                    raise CliError("usage", f"AC_{f.name.upper()}={env!r}: {exc}") from exc
        return cls(**values)

    def solve_options(self) -> SolveOptions:
        names = [f.name for f in fields(SolveOptions)]
        try:
            return SolveOptions(**{k: getattr(self, k) for k in names})
        except ValueError as exc:
            raise CliError("usage", str(exc)) from exc

    def grid(self) -> QuadrantGrid:
        try:
            return QuadrantGrid(self.L, self.h)
        except ValueError as exc:
            raise CliError("usage", str(exc)) from exc

    def load_potential(self):
        if self.potential == "quartic":
            return quartic()
        try:
            return load_tabulated(self.potential)
        except (OSError, PotentialError) as exc:
            raise CliError("potential", str(exc)) from exc

    def check_theta(self, theta: float):
        lo, hi = self.theta_guard, 0.5 * math.pi - self.theta_guard
        if not (lo <= theta <= hi):
            raise CliError("domain", f"theta={theta} outside [{lo:.6f}, {hi:.6f}]")


def _fmt3(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def _load(path) -> Solution:
    try:
        return io.load_solution(path)
    except io.AcfFormatError as exc:
        raise CliError("format", str(exc)) from exc
    except OSError as exc:
        raise CliError("io", str(exc)) from exc


def _write(sol: Solution, path):
    try:
        io.save_solution(sol, path)
    except OSError as exc:
        raise CliError("io", str(exc)) from exc


def cmd_solve(args, cfg: RunConfig) -> int:
    cfg.check_theta(args.theta)
    grid, potential, opts = cfg.grid(), cfg.load_potential(), cfg.solve_options()
    try:
        sol = newton_solve(grid, potential, args.theta, args.r0, None, opts)
    except NonConvergenceError as exc:
        raise CliError("nonconvergence", str(exc), 2) from exc
    _write(sol, args.out)
    a, b = sol.classification
    print(f"theta-pi/4 {_fmt3(a)} r {_fmt3(b)}")
    print(f"residual {sol.residual:.3e}")
    if not accept(sol, opts):
        rep = check_monotone(sol.field)
        raise CliError("rejected", f"monotonicity/bounds check failed: {rep}", 2)
    return 0


def cmd_continue(args, cfg: RunConfig) -> int:
    for t in (args.theta_min, args.theta_max):
        cfg.check_theta(t)
    if args.theta_min >= args.theta_max:
        raise CliError("domain", "theta-min must be below theta-max")
    potential, opts = cfg.load_potential(), cfg.solve_options()
    try:
        if args.seed:
            seed = _load(args.seed)
        else:
            seed = continuation.seed_saddle(cfg.grid(), potential, opts)
        keep = args.margin_R is not None or args.index_R is not None
        curve = continuation.continue_curve(seed, args.theta_min, args.theta_max, args.steps, opts,
                                            out_dir=args.out_dir, jobs=cfg.jobs, keep_solutions=keep)
        if keep:
            continuation.annotate_spectra(curve, args.margin_R, args.index_R)
    except continuation.DomainError as exc:
        raise CliError("domain", str(exc)) from exc
    except NonConvergenceError as exc:
        raise CliError("nonconvergence", str(exc), 2) from exc
    if args.curve:
        io.write_curve_csv(curve, args.curve)
    for t in curve.terminations:
        print(f"stopped direction {t.direction:+d} at theta {t.theta_reached:.6f}: {t.reason}",
              file=sys.stderr)
    print(f"samples {len(curve.samples)} theta [{curve.thetas[0]:.6f}, {curve.thetas[-1]:.6f}]")
    return 0 if curve.complete else 2


def cmd_balance(args, cfg: RunConfig) -> int:
    sol = _load(args.file)
    g = sol.grid
    ax = balance.axis_integrals(sol.field, sol.potential)
    print(f"A {ax.A:.12g} B {ax.B:.12g} MA {ax.MA:.12g} MB {ax.MB:.12g}")
    print(f"theta {ax.theta:.12g} r {ax.r:.12g} defect {ax.defect:.3e}")
    if args.contour:
        try:
            x0, y0, x1, y1 = (float(v) for v in args.contour.split(","))
        except ValueError as exc:
            raise CliError("usage", f"--contour expects x0,y0,x1,y1: {exc}") from exc
    else:
        a = g.h * round(0.5 * g.L / g.h)
        x0, y0, x1, y1 = -a, -a, a, a
    contour = balance.square_contour(x0, y0, x1, y1)
    bound = 10 * g.h**2
    worst = 0.0
    for X in balance.KILLING_FIELDS:
        try:
            flux = balance.contour_flux(sol.field, sol.potential, contour, X)
        except balance.ContourError as exc:
            raise CliError("domain", str(exc)) from exc
        worst = max(worst, abs(flux))
        print(f"flux {X.kind} {abs(flux):.3e}")
    print(f"bound {bound:.3e} {'ok' if worst <= bound else 'exceeded'}")
    return 0


def _sector(name: str):
    parts = tuple(name.split("-"))
    if parts not in spectra.SECTORS:
        raise CliError("usage", f"unknown sector {name!r}")
    return parts


def cmd_spectrum(args, cfg: RunConfig) -> int:
    sol = _load(args.file)
    sectors = spectra.SECTORS if args.sector == "all" else (_sector(args.sector),)

    def run(s):
        return spectra.sector_eigenvalues(sol, s, args.R, args.k)

    try:
        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                reports = list(pool.map(run, sectors))
        else:
            reports = [run(s) for s in sectors]
    except ValueError as exc:
        raise CliError("domain", str(exc)) from exc
    except spectra.SpectrumError as exc:
        raise CliError("spectrum", str(exc), 2) from exc
    if args.out:
        with open(args.out, "w", newline="") as fh:
            io.write_spectrum_csv(reports, fh)
    else:
        io.write_spectrum_csv(reports, sys.stdout)
    return 0


def cmd_classify(args, cfg: RunConfig) -> int:
    sol = _load(args.file)
    a, b = balance.classify(sol)
    print(f"theta-pi/4 {_fmt3(a)} r {_fmt3(b)}")
    return 0


def cmd_ansatz(args, cfg: RunConfig) -> int:
    cfg.check_theta(args.theta)
    grid, potential = cfg.grid(), cfg.load_potential()
    try:
        a = make_ansatz(args.theta, args.r, heteroclinic_for(potential))
    except GeometryError as exc:
        raise CliError("domain", str(exc)) from exc
    field_ = sample_ansatz(a, grid)
    res = float(np.max(np.abs(residual(grid, field_, potential).values)))
    sol = Solution(grid, field_, potential, args.theta, args.r, res)
    balance.classify(sol)
    _write(sol, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fourend", description="Symmetric four-ended Allen-Cahn solutions.")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--L", type=float, help="quadrant half-width (AC_L, default 30)")
        sp.add_argument("--h", type=float, help="mesh width (AC_H, default 0.1)")
        sp.add_argument("--potential", help="'quartic' or a CSV table u,F,dF,ddF (AC_POTENTIAL)")
        sp.add_argument("--theta-guard", dest="theta_guard", type=float,
                        help="admissible angles are [g, pi/2 - g] (AC_THETA_GUARD, default 0.15)")
        sp.add_argument("--jobs", type=int, help="worker threads (AC_JOBS, default 1)")

    def solver_flags(sp):
        sp.add_argument("--newton-tol", dest="newton_tol", type=float)
        sp.add_argument("--max-newton", dest="max_newton", type=int)
        sp.add_argument("--r-tol", dest="r_tol", type=float)
        sp.add_argument("--max-r-iter", dest="max_r_iter", type=int)
        sp.add_argument("--max-halvings", dest="max_halvings", type=int)
        sp.add_argument("--linear-tol", dest="linear_tol", type=float)
        sp.add_argument("--blowup", type=float)

    s = sub.add_parser("solve", help="solve at one end angle")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--r0", type=float, default=0.0)
    s.add_argument("--out", required=True)
    common(s)
    solver_flags(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("continue", help="trace the branch through the saddle")
    s.add_argument("--theta-min", dest="theta_min", type=float, default=math.pi / 4 - 0.5)
    s.add_argument("--theta-max", dest="theta_max", type=float, default=math.pi / 4 + 0.5)
    s.add_argument("--steps", type=int, default=21)
    s.add_argument("--out-dir", dest="out_dir")
    s.add_argument("--curve", help="curve CSV output path")
    s.add_argument("--seed", help="ACF file to start from instead of the saddle")
    s.add_argument("--margin-R", dest="margin_R", type=float)
    s.add_argument("--index-R", dest="index_R", type=float)
    common(s)
    solver_flags(s)
    s.set_defaults(func=cmd_continue)

    s = sub.add_parser("balance", help="axis integrals and closed-contour fluxes")
    s.add_argument("file")
    s.add_argument("--contour", help="rectangle x0,y0,x1,y1 on grid nodes (default: centred square)")
    s.set_defaults(func=cmd_balance)

    s = sub.add_parser("spectrum", help="smallest eigenvalues of the linearized operator")
    s.add_argument("file")
    s.add_argument("--R", type=float, required=True)
    s.add_argument("--k", type=int, default=6)
    s.add_argument("--sector", default="even-even",
                   help="even-even, odd-even, even-odd, odd-odd or all")
    s.add_argument("--out")
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("classify", help="print (theta - pi/4, r)")
    s.add_argument("file")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("ansatz", help="write the glued approximate solution")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--out", required=True)
    common(s)
    s.set_defaults(func=cmd_ansatz)
    return p


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    with warnings.catch_warnings():
        warnings.showwarning = _show_warning
        try:
            args = parser.parse_args(argv)
            level = getattr(logging, args.log_level.upper(), None)
            if not isinstance(level, int):
                raise CliError("usage", f"unknown log level {args.log_level!r}")
            logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
            cfg = RunConfig.resolve(args)
            return args.func(args, cfg)
        except CliError as exc:
            print(f"error: {exc.kind}: {exc.detail}", file=sys.stderr)
            return exc.code


if __name__ == "__main__":
    sys.exit(main())
