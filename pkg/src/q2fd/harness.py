"""Single solves, convergence studies and stencil dumps."""

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import numpy as np

from .assembly import (assemble_operator, neumann_full_system, reduce_dirichlet,
                       stencil_rows_exact)
from .grid import build_grid, norm_2_Z0, norm_inf_Z0, sample
from .problems import TABLE_MESHES, conormal_flux
from .quadrature import gauss_lobatto_rule
from .solvers import (EigenFallback, FastLaplacian, SolverFailure, direct_solve,
                      fast_solve_system, pcg)

__all__ = [
    "SolverConfig",
    "SolveResult",
    "ConvergenceRow",
    "ConvergenceTable",
    "build_system",
    "run_solve",
    "run_convergence",
    "observed_order",
    "dump_stencil",
    "exact_H_rows",
]

SOLVERS = ("auto", "direct", "fast", "pcg")


@dataclass(frozen=True)
class SolverConfig:
    solver: str = "auto"
    tol: float = 1e-12
    maxit: int = None
    precond: str = "eigen"

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.precond not in ("eigen", "none"):
            raise ValueError(f"precond must be eigen or none, got {self.precond!r}")


@dataclass
class SolveResult:
    problem: str
    grid: object
    report: object
    l2_error: float = None
    linf_error: float = None


def build_system(problem, grid):
    """Assemble the operator and the Dirichlet-reduced or Neumann system."""
    a, b, c = problem.coefficient_fields()
    op = assemble_operator(grid, a, b, c)
    F = sample(problem.rhs, grid)
    if problem.bc == "dirichlet":
        G = None
        if problem.u is not None:
            G = sample(problem.u, grid, "boundary").values
        return reduce_dirichlet(op, F, G)
    if problem.u is None:
        raise ValueError("Neumann data is derived from the exact solution u")
    flux = {}
    for (s, side), expr in conormal_flux(problem).items():
        coords = list(grid.mesh("full"))
        idx = [slice(None)] * grid.dims
        idx[grid.dims - 1 - s] = 0 if side == 0 else -1
        face = [np.asarray(X)[tuple(idx)] for X in coords]
        flux[s, side] = np.broadcast_to(np.asarray(expr(*face), dtype=float), face[0].shape)
    return neumann_full_system(op, F, flux)


def _pick_solver(problem, system, config):
    if config.solver != "auto":
        return config.solver
    if problem.is_laplacian and system.region == "interior":
        return "fast"
    if system.size <= 40000 or not system.is_symmetric or system.region != "interior":
        return "direct"
    return "pcg"


def _solve(problem, system, config):
    choice = _pick_solver(problem, system, config)
    if choice == "fast":
        if not (problem.is_laplacian and system.region == "interior"):
            raise SolverFailure("the fast solver handles only the Dirichlet Laplacian")
        try:
            solver = FastLaplacian(system.grid)
        except EigenFallback:
            return direct_solve(system)
        return fast_solve_system(system, solver)
    if choice == "pcg":
        precond = config.precond if system.region == "interior" else "none"
        return pcg(system, precond, tol=config.tol, maxit=config.maxit)
    return direct_solve(system)


def run_solve(problem, cells, config=None, solution_csv=None, matrix_path=None):
    """One solve on a mesh of ``cells`` Q2 cells per axis.

    Errors against the exact solution are filled in when the problem has one.
    """
    from .grid import write_csv

    config = config or SolverConfig()
    grid = build_grid(problem.domain, cells)
    system = build_system(problem, grid)
    if matrix_path is not None:
        import scipy.io

        scipy.io.mmwrite(matrix_path, system.to_sparse(),
                         comment=f"q2fd {problem.name} {system.region} operator")
    report = _solve(problem, system, config)
    result = SolveResult(problem.name, grid, report)
    if problem.u is not None:
        err = report.solution - sample(problem.u, grid)
        result.l2_error = norm_2_Z0(err)
        result.linf_error = norm_inf_Z0(err)
    if solution_csv is not None:
        write_csv(report.solution, solution_csv)
    return result


def observed_order(coarse, fine, ratio=2.0):
    """``log_ratio(coarse / fine)``; nan if either error is not positive."""
    if coarse is None or fine is None or coarse <= 0 or fine <= 0:
        return float("nan")
    return math.log(coarse / fine) / math.log(ratio)


@dataclass
class ConvergenceRow:
    fem_mesh: tuple
    fd_grid: tuple
    l2_error: float
    l2_order: float
    linf_error: float
    linf_order: float
    iterations: int = 0
    wall_time: float = 0.0


@dataclass
class ConvergenceTable:
    problem: str
    rows: list = field(default_factory=list)

    COLUMNS = ("FEM mesh", "FD grid", "l2 error", "order", "linf error", "order")

    def _cells(self):
        out = []
        for r in self.rows:
            out.append((
                "x".join(map(str, r.fem_mesh)),
                "x".join(map(str, r.fd_grid)),
                f"{r.l2_error:.2E}",
                "-" if math.isnan(r.l2_order) else f"{r.l2_order:.2f}",
                f"{r.linf_error:.2E}",
                "-" if math.isnan(r.linf_order) else f"{r.linf_order:.2f}",
            ))
        return out

    def format(self, fmt="txt"):
        cells = self._cells()
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["fem_mesh", "fd_grid", "l2_error", "l2_order", "linf_error", "linf_order"])
            for r in self.rows:
                writer.writerow(["x".join(map(str, r.fem_mesh)), "x".join(map(str, r.fd_grid)),
                                 repr(r.l2_error), "" if math.isnan(r.l2_order) else repr(r.l2_order),
                                 repr(r.linf_error), "" if math.isnan(r.linf_order) else repr(r.linf_order)])
            return buf.getvalue()
        if fmt == "md":
            lines = ["| " + " | ".join(self.COLUMNS) + " |",
                     "|" + "---|" * len(self.COLUMNS)]
            lines += ["| " + " | ".join(c) + " |" for c in cells]
            return "\n".join(lines) + "\n"
        if fmt != "txt":
            raise ValueError(f"unknown table format {fmt!r}")
        widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(self.COLUMNS)]
        lines = [f"# {self.problem}",
                 "  ".join(h.rjust(w) for h, w in zip(self.COLUMNS, widths))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(c, widths)) for c in cells]
        return "\n".join(lines) + "\n"


def _threads():
    try:
        return max(1, int(os.environ.get("Q2FD_THREADS", "1")))
    except ValueError:
        return 1


def run_convergence(problem, meshes=None, config=None):
    """Solve on each mesh and tabulate both Z0 errors with observed orders."""
    if problem.u is None:
        raise ValueError("a convergence study needs the exact solution u")
    meshes = [tuple(m) for m in (meshes or TABLE_MESHES[problem.name])]
    for coarse, fine in zip(meshes, meshes[1:]):
        if any(f != 2 * c for c, f in zip(coarse, fine)):
            raise ValueError(f"meshes must double on every axis: {coarse} -> {fine}")
    config = config or SolverConfig()
    workers = min(_threads(), len(meshes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda m: run_solve(problem, m, config), meshes))
    else:
        results = [run_solve(problem, m, config) for m in meshes]
    table = ConvergenceTable(problem.name)
    prev = None
    for res in results:
        grid = res.grid
        fd = grid.n if problem.bc == "dirichlet" else grid.npts
        row = ConvergenceRow(
            grid.cells, fd, res.l2_error,
            observed_order(prev.l2_error, res.l2_error) if prev else float("nan"),
            res.linf_error,
            observed_order(prev.linf_error, res.linf_error) if prev else float("nan"),
            res.report.iterations, res.report.wall_time,
        )
        table.rows.append(row)
        prev = res
    return table


def exact_H_rows(n):
    """Interior rows of ``h^2 H = W^{-1} (D^T W D + E^T W E)`` as Fractions."""
    D, E, W = stencil_rows_exact(n + 2)
    size = n + 2

    def dense(rows):
        M = [[Fraction(0)] * size for _ in range(size)]
        for i, entries in rows.items():
            for j, v in entries:
                M[i][j] = v
        return M

    Dm, Em = dense(D), dense(E)
    S = [[Fraction(0)] * size for _ in range(size)]
    for M in (Dm, Em):
        for r in range(size):
            if W[r] == 0:
                continue
            nz = [(j, M[r][j]) for j in range(size) if M[r][j] != 0]
            for i, vi in nz:
                for j, vj in nz:
                    S[i][j] += vi * W[r] * vj
    return [[S[i][j] / W[i] for j in range(1, n + 1)] for i in range(1, n + 1)]


def _fmt_row(entries, scale):
    """``(c1, c2, ...)/scale`` with integer entries over a common denominator."""
    den = lcm(*(v.denominator for v in entries)) if entries else 1
    ints = [int(v * den) for v in entries]
    g = math.gcd(*ints) if any(ints) else 1
    ints = [i // g for i in ints]
    frac = Fraction(den, g)
    num = "(" + ", ".join(map(str, ints)) + ")"
    if frac.numerator == 1 and frac.denominator == 1:
        return num + (f"/{scale}" if scale else "")
    pre = f"{frac.denominator}*" if frac.denominator != 1 else ""
    if frac.numerator == 1:
        return f"{pre}{num}" + (f"/{scale}" if scale else "")
    if scale:
        return f"{pre}{num}/({frac.numerator} {scale})"
    return f"{pre}{num}/{frac.numerator}"


def dump_stencil(n=7, npts=3):
    """Exact D, E, W_bar and interior H rows for an axis with ``n`` interior points."""
    D, E, W = stencil_rows_exact(n + 2)
    out = [f"# stencils for n = {n} interior points (grid points 0..{n + 1})"]
    rule = gauss_lobatto_rule(npts)
    out.append(f"gauss-lobatto npts={npts}")
    out.append("  nodes   " + " ".join(f"{v:+.16f}" for v in rule.nodes))
    out.append("  weights " + " ".join(f"{v:.16f}" for v in rule.weights))
    out.append("W_bar = (" + ", ".join(str(w) for w in W) + ")")
    for name, rows in (("D", D), ("E", E)):
        for i in range(n + 2):
            entries = rows[i]
            if not entries:
                out.append(f"{name}[{i}] = 0")
                continue
            cols = f"{entries[0][0]}..{entries[-1][0]}"
            out.append(f"{name}[{i}] cols {cols} = {_fmt_row([v for _, v in entries], '')}")
    H = exact_H_rows(n)
    for i, row in enumerate(H, start=1):
        nz = [j for j, v in enumerate(row) if v != 0]
        lo, hi = nz[0], nz[-1]
        kind = "center" if i % 2 else "knot"
        if i in (1, n):
            kind = "near-boundary " + kind
        out.append(f"H[{i}] {kind} cols {lo + 1}..{hi + 1} = {_fmt_row(row[lo:hi + 1], 'h^2')}")
    return "\n".join(out) + "\n"
