"""ACF v1 solution files and the CSV outputs.

An ACF v1 file is ASCII::

    acf 1
    potential <id>
    grid <L> <h> <n>
    theta <val>
    r <val>
    residual <val>
    classify <val> <val>
    <n lines of n values>

Row ``i`` of the data block holds ``u(i*h, j*h)`` for ``j = 0..n-1``.
Numbers are written with 17 significant digits, so a save/load round trip
reproduces every value exactly.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .grid import Field, QuadrantGrid
from .potential import Potential, load_tabulated, quartic
from .solver import Solution

HEADER_KEYS = ("acf", "potential", "grid", "theta", "r", "residual", "classify")
CURVE_COLUMNS = ("theta_imposed", "theta_extracted", "r", "residual", "margin", "index", "file")


class AcfFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def _num(x) -> str:
    return f"{float(x):.17g}"


def potential_from_id(pid: str) -> Potential:
    if pid == "quartic":
        return quartic()
    if pid.startswith("tabulated:"):
        return load_tabulated(pid.split(":", 1)[1])
    raise ValueError(f"unknown potential id {pid!r}")


def save_solution(solution: Solution, path) -> None:
    g = solution.grid
    cls = solution.classification or (float("nan"), float("nan"))
    lines = [
        "acf 1",
        f"potential {solution.potential.id}",
        f"grid {_num(g.L)} {_num(g.h)} {g.n}",
        f"theta {_num(solution.theta)}",
        f"r {_num(solution.r)}",
        f"residual {_num(solution.residual)}",
        f"classify {_num(cls[0])} {_num(cls[1])}",
    ]
    body = [" ".join(_num(v) for v in row) for row in solution.field.values]
    Path(path).write_text("\n".join(lines + body) + "\n", encoding="ascii")


def load_solution(path) -> Solution:
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise AcfFormatError(path, 1, "file is not ASCII") from exc
    lines = text.splitlines()
    if len(lines) < len(HEADER_KEYS):
        raise AcfFormatError(path, len(lines) + 1, "truncated header")
    header = {}
    for lineno, (key, line) in enumerate(zip(HEADER_KEYS, lines), start=1):
        parts = line.split()
        if not parts or parts[0] != key:
            raise AcfFormatError(path, lineno, f"expected '{key}' header line")
        header[key] = parts[1:]
    if header["acf"] != ["1"]:
        raise AcfFormatError(path, 1, f"unsupported version {' '.join(header['acf'])}")
    try:
        L, h, n = float(header["grid"][0]), float(header["grid"][1]), int(header["grid"][2])
        theta = float(header["theta"][0])
        r = float(header["r"][0])
        res = float(header["residual"][0])
        cls = (float(header["classify"][0]), float(header["classify"][1]))
    except (IndexError, ValueError) as exc:
        raise AcfFormatError(path, 3, f"malformed header value: {exc}") from exc
    try:
        grid = QuadrantGrid(L, h)
    except ValueError as exc:
        raise AcfFormatError(path, 3, str(exc)) from exc
    if grid.n != n:
        raise AcfFormatError(path, 3, f"n={n} inconsistent with L/h+1={grid.n}")
    body = lines[len(HEADER_KEYS):]
    values = np.empty((n, n))
    for k, line in enumerate(body):
        lineno = len(HEADER_KEYS) + k + 1
        if k >= n:
            raise AcfFormatError(path, lineno, f"more than {n} data rows")
        parts = line.split()
        if len(parts) != n:
            raise AcfFormatError(path, lineno, f"expected {n} values, found {len(parts)}")
        try:
            values[k] = [float(p) for p in parts]
        except ValueError as exc:
            raise AcfFormatError(path, lineno, str(exc)) from exc
    if len(body) < n:
        raise AcfFormatError(path, len(HEADER_KEYS) + len(body) + 1,
                             f"expected {n} data rows, found {len(body)}")
    if not np.all(np.isfinite(values)):
        raise AcfFormatError(path, len(HEADER_KEYS) + 1, "non-finite field value")
    try:
        potential = potential_from_id(header["potential"][0] if header["potential"] else "")
    except (ValueError, OSError) as exc:
        raise AcfFormatError(path, 2, str(exc)) from exc
    sol = Solution(grid, Field(grid, values), potential, theta, r, res)
    sol.classification = None if np.isnan(cls[0]) else cls
    return sol


def write_curve_csv(curve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for s in curve.samples:
            writer.writerow([
                _num(s.theta_imposed), _num(s.theta_extracted), _num(s.r), _num(s.residual),
                "" if s.margin is None else _num(s.margin),
                "" if s.index is None else str(s.index),
                s.file or "",
            ])


def read_curve_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != CURVE_COLUMNS:
        raise ValueError(f"{path}: unexpected curve columns {tuple(rows[0].keys())}")
    return rows


def write_spectrum_csv(reports, fh) -> None:
    """One row per report: sector, R, lambda_1..lambda_k."""
    writer = csv.writer(fh, lineterminator="\n")
    for rep in reports:
        writer.writerow(rep.csv_row())
