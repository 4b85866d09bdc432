"""Command line driver: ``q2fd solve|convergence|stencil``.

Exit codes: 0 on success, 2 on solver failure, 3 on configuration errors.
"""

import argparse
import logging
import sys

from .expr import ExprSyntaxError
from .harness import SolverConfig, dump_stencil, run_convergence, run_solve
from .problems import TABLE_MESHES, load_problem
from .solvers import SolverFailure

log = logging.getLogger("q2fd")

EXIT_SOLVER = 2
EXIT_CONFIG = 3


class ConfigError(Exception):
    pass


def _mesh(text):
    try:
        cells = tuple(int(v) for v in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad mesh {text!r}; expected NX[,NY[,NZ]]") from None
    if not cells or any(c < 1 for c in cells):
        raise argparse.ArgumentTypeError(f"mesh cell counts must be positive, got {text!r}")
    return cells


def _add_solver_options(p):
    p.add_argument("--solver", choices=("auto", "direct", "fast", "pcg"), default="auto")
    p.add_argument("--tol", type=float, default=1e-12, help="PCG relative residual tolerance")
    p.add_argument("--maxit", type=int, default=None, help="PCG iteration cap (default 10*sqrt(n))")
    p.add_argument("--precond", choices=("eigen", "none"), default="eigen")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="q2fd",
        description="Fourth-order finite differences from C0-Q2 elements with Gauss-Lobatto quadrature.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one problem on one mesh")
    p.add_argument("--problem", required=True, help="builtin name or problem file")
    p.add_argument("--mesh", type=_mesh, required=True, help="cells per axis, e.g. 32,64")
    _add_solver_options(p)
    p.add_argument("--out", help="write the full-grid solution as CSV")
    p.add_argument("--matrix", help="write the system matrix in Matrix Market format")

    p = sub.add_parser("convergence", help="convergence study over doubling meshes")
    p.add_argument("--problem", required=True)
    p.add_argument("--mesh", type=_mesh, help="coarsest mesh (default: the published table)")
    p.add_argument("--levels", type=int, default=None, help="number of meshes from --mesh")
    _add_solver_options(p)
    p.add_argument("--format", choices=("txt", "csv", "md"), default="txt")
    p.add_argument("--out", help="write the table to a file instead of stdout")

    p = sub.add_parser("stencil", help="print D, E, W_bar and H rows as exact rationals")
    p.add_argument("--n", type=int, default=7, help="interior points per axis (odd)")
    p.add_argument("--npts", type=int, default=3, help="Gauss-Lobatto rule to print")
    p.add_argument("--out")
    return parser


def _config(args):
    try:
        return SolverConfig(args.solver, args.tol, args.maxit, args.precond)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _problem(name):
    try:
        return load_problem(name)
    except (KeyError, ValueError, ExprSyntaxError) as exc:
        raise ConfigError(str(exc).strip("'\"")) from exc


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args):
    problem = _problem(args.problem)
    if len(args.mesh) != problem.dims:
        raise ConfigError(f"{problem.name} is {problem.dims}D but --mesh has {len(args.mesh)} entries")
    res = run_solve(problem, args.mesh, _config(args), solution_csv=args.out, matrix_path=args.matrix)
    rep = res.report
    lines = [
        f"problem    {problem.name}",
        f"mesh       {'x'.join(map(str, res.grid.cells))} cells, grid {'x'.join(map(str, res.grid.npts))} points",
        f"solver     {rep.method}",
        f"iterations {rep.iterations}",
        f"residual   {rep.residual:.3e}",
        f"wall time  {rep.wall_time:.3f} s",
    ]
    if res.l2_error is not None:
        lines += [f"l2 error   {res.l2_error:.6e}", f"linf error {res.linf_error:.6e}"]
    sys.stdout.write("\n".join(lines) + "\n")


def _cmd_convergence(args):
    problem = _problem(args.problem)
    meshes = None
    if args.mesh is not None:
        if len(args.mesh) != problem.dims:
            raise ConfigError(f"{problem.name} is {problem.dims}D but --mesh has {len(args.mesh)} entries")
        levels = args.levels or 4
        meshes = [tuple(c * 2**k for c in args.mesh) for k in range(levels)]
    elif problem.name in TABLE_MESHES:
        meshes = TABLE_MESHES[problem.name]
        if args.levels:
            meshes = meshes[: args.levels]
    else:
        raise ConfigError("--mesh is required for problems without a published table")
    try:
        table = run_convergence(problem, meshes, _config(args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(table.format(args.format), args.out)


def _cmd_stencil(args):
    try:
        text = dump_stencil(args.n, args.npts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(text, args.out)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    handlers = {"solve": _cmd_solve, "convergence": _cmd_convergence, "stencil": _cmd_stencil}
    try:
        handlers[args.command](args)
    except ConfigError as exc:
        print(f"q2fd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        detail = ", ".join(f"{k}={v}" for k, v in exc.diagnostics.items())
        print(f"q2fd: solver failure: {exc}" + (f" ({detail})" if detail else ""), file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
