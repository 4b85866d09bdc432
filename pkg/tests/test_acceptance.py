"""Acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary
(and by ``python3 tests/test_acceptance.py``).  The 127^3 row of the 3D
table runs only with ``Q2FD_LONG=1``.
"""

import math
import os
import sys
import time
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE, random_coefficients, record  # noqa: E402
from q2fd.assembly import assemble_operator, laplacian_operator, reduce_dirichlet  # noqa: E402
from q2fd.grid import build_grid, sample  # noqa: E402
from q2fd.harness import build_system, exact_H_rows, run_convergence, run_solve  # noqa: E402
from q2fd.oracle import global_assemble  # noqa: E402
from q2fd.problems import TABLE_MESHES, builtin  # noqa: E402
from q2fd.quadrature import gauss_lobatto_rule, mtype_project_2d  # noqa: E402
from q2fd.solvers import direct_solve, fast_solve_system, pcg  # noqa: E402

LONG = os.environ.get("Q2FD_LONG") == "1"
REL = 0.02

# published (l2, linf) errors per mesh
PUBLISHED = {
    "dirichlet2d": [(3.94e-2, 7.15e-2), (1.23e-2, 3.28e-2), (1.46e-3, 5.42e-3), (1.14e-4, 3.96e-4),
                    (7.75e-6, 2.62e-5), (5.02e-7, 1.73e-6), (3.23e-8, 1.13e-7)],
    "neumann2d": [(1.38e0, 2.27e0), (1.46e-1, 2.52e-1), (7.49e-3, 1.64e-2), (4.31e-4, 1.02e-3),
                  (2.61e-5, 7.47e-5)],
    "laplace3d": [(1.51e-2, 4.87e-2), (9.23e-4, 3.12e-3), (5.68e-5, 1.95e-4), (3.54e-6, 1.22e-5),
                  (2.21e-7, 7.59e-7)],
    "convection2d": [(1.26e-1, 2.71e-1), (2.85e-2, 9.70e-2), (1.89e-3, 7.25e-3), (1.17e-4, 4.01e-4),
                     (7.41e-6, 2.54e-5)],
}


@lru_cache(maxsize=None)
def table(name, rows):
    t0 = time.perf_counter()
    t = run_convergence(builtin(name), TABLE_MESHES[name][:rows])
    return t, time.perf_counter() - t0


def compare_table(criterion, name, rows, budget):
    t, elapsed = table(name, rows)
    bad = []
    worst = 0.0
    for row, (l2, linf) in zip(t.rows, PUBLISHED[name]):
        for got, want, label in ((row.l2_error, l2, "l2"), (row.linf_error, linf, "linf")):
            rel = abs(got - want) / want
            worst = max(worst, rel)
            if rel > REL:
                mesh = "x".join(map(str, row.fd_grid))
                bad.append(f"{mesh} {label} {got:.3g} vs {want:.3g}")
    ok = not bad and elapsed < budget
    detail = f"{len(t.rows)} rows, worst rel diff {worst:.1%}, {elapsed:.1f}s"
    if bad:
        detail += f"; {len(bad)} entries outside {REL:.0%}: " + "; ".join(bad[:4])
        detail += " ..." if len(bad) > 4 else ""
    record(criterion, ok, detail)
    assert elapsed < budget, f"took {elapsed:.1f}s"
    assert not bad, detail


def test_c1_table_dirichlet():
    compare_table("1 dirichlet2d published table", "dirichlet2d", 7, 60)


def test_c2_table_neumann():
    compare_table("2 neumann2d published table", "neumann2d", 5, 60)


def test_c3_table_3d():
    compare_table("3 laplace3d published table (7^3..63^3)", "laplace3d", 4, 60)


@pytest.mark.slow
@pytest.mark.skipif(not LONG, reason="set Q2FD_LONG=1 for the 127^3 row")
def test_c3_table_3d_long():
    compare_table("3 laplace3d published table (7^3..127^3)", "laplace3d", 5, 300)


def test_c4_table_convection():
    compare_table("4 convection2d published table", "convection2d", 5, 60)


def test_c5_oracle_equivalence():
    rng = np.random.default_rng(5)
    worst = 0.0
    meshes = [(1, 1), (1, 2), (2, 1), (2, 2), (2, 3), (3, 2), (3, 3)]
    for cells in meshes:
        g = build_grid([(0, 1), (0, 2)], cells)
        for _ in range(20):
            a, b, c = random_coefficients(rng)
            K = global_assemble(g, a, b, c)
            S = assemble_operator(g, a, b, c).to_sparse()
            worst = max(worst, abs(K - S).max() / abs(K).max())
    ok = worst <= 1e-12
    record("5 oracle equivalence", ok, f"max rel entry diff {worst:.1e} over {len(meshes)} meshes x 20 draws")
    assert ok


def test_c6_stencil_identity():
    n = 11
    H = exact_H_rows(n)
    ok = True
    for i, row in enumerate(H, start=1):
        if i % 2:  # cell center
            if 1 < i < n:
                ok &= row[i - 2:i + 1] == [-1, 2, -1] and not any(row[:i - 2]) and not any(row[i + 1:])
        elif 2 < i < n - 1:  # knot away from the boundary
            want = [Fraction(v, 4) for v in (1, -8, 14, -8, 1)]
            ok &= row[i - 3:i + 2] == want and not any(row[:i - 3]) and not any(row[i + 2:])
    record("6 stencil identity", ok, "exact rationals: centers (-1,2,-1)/h^2, knots (1,-8,14,-8,1)/(4h^2)")
    assert ok


def test_c7_supraconvergence():
    trunc, sol = [], []
    for cells in (8, 16, 32, 64):
        g = build_grid([(0, 1)], (cells,))
        op = laplacian_operator(g)
        x = g.axis(0)
        Hu = (op.to_sparse() @ np.sin(x)) / op.mass_diagonal()
        knots = np.arange(x.size) % 2 == 0
        knots[[0, -1]] = False
        trunc.append(np.max(np.abs(Hu - np.sin(x))[knots]))
        u = direct_solve(reduce_dirichlet(op, np.sin(x), np.sin(x))).solution.values
        sol.append(np.max(np.abs(u - np.sin(x))))
    t_ord = [math.log2(a / b) for a, b in zip(trunc, trunc[1:])]
    s_ord = [math.log2(a / b) for a, b in zip(sol, sol[1:])]
    ok = all(1.7 <= o <= 2.3 for o in t_ord) and min(s_ord) >= 3.7
    record("7 truncation vs solution order", ok,
           "truncation " + ",".join(f"{o:.2f}" for o in t_ord)
           + "; solution " + ",".join(f"{o:.2f}" for o in s_ord))
    assert ok


def test_c8_quadrature():
    rule = gauss_lobatto_rule(3)
    errs = [abs(rule.integrate(lambda t: t**m) - (0.0 if m % 2 else 2 / (m + 1))) for m in range(4)]
    quartic = rule.integrate(lambda t: t**4)
    ok = max(errs) <= 1e-13 and abs(quartic - 2 / 3) < 1e-14 and abs(quartic - 2 / 5) > 0.1
    record("8 quadrature properties", ok, f"max err deg<=3 {max(errs):.1e}; s^4 -> {quartic:.6f} (exact 0.4)")
    assert ok


def _projection_error(cells):
    u = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    ux = lambda x, y: np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
    uy = lambda x, y: np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    uxy = lambda x, y: np.pi**2 * np.cos(np.pi * x) * np.cos(np.pi * y)
    H = 1.0 / cells
    total = 0.0
    for i in range(cells):
        for j in range(cells):
            cell = ((i * H, (i + 1) * H), (j * H, (j + 1) * H))
            e = mtype_project_2d(u, 2, uxy, f_s=ux, f_t=uy, cell=cell)
            X, Y = np.meshgrid(np.linspace(*cell[0], 3), np.linspace(*cell[1], 3), indexing="ij")
            total += np.sum((e(X, Y) - u(X, Y)) ** 2)
    return math.sqrt(total * (H / 2) ** 2)


def test_c9_superapproximation():
    errs = [_projection_error(c) for c in (4, 8, 16, 32)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = min(orders) >= 3.7
    record("9 M-type superapproximation", ok, "orders " + ",".join(f"{o:.2f}" for o in orders))
    assert ok


def test_c10_solver_cross_check():
    diffs = []
    for cells in ((16, 16), (32, 32)):
        g = build_grid([(0, 1), (0, 1)], cells)
        sys_ = reduce_dirichlet(laplacian_operator(g),
                                sample(lambda x, y: np.exp(x) * np.sin(4 * y) + x * y, g))
        a = fast_solve_system(sys_).solution.values
        b = direct_solve(sys_).solution.values
        diffs.append(np.linalg.norm(a - b) / np.linalg.norm(b))
    p = builtin("dirichlet2d")
    sys_ = build_system(p, build_grid(p.domain, (16, 32)))
    pre = pcg(sys_, "eigen", tol=1e-12)
    plain = pcg(sys_, "none", tol=1e-12, maxit=100000)
    ok = max(diffs) <= 1e-9 and pre.converged and pre.residual <= 1e-12 and pre.iterations <= plain.iterations
    record("10 solver cross-check", ok,
           f"fast vs direct {max(diffs):.1e}; PCG {pre.iterations} it (res {pre.residual:.1e}) "
           f"vs CG {plain.iterations} it")
    assert ok


def test_c11_exactness():
    worst = 0.0
    for name in ("poisson1d", "bilinear2d"):
        p = builtin(name)
        meshes = [(c,) * p.dims for c in (1, 2, 3, 4, 7, 8, 16)]
        for cells in meshes:
            worst = max(worst, run_solve(p, cells).linf_error)
    ok = worst <= 1e-11
    record("11 exactness cases", ok, f"max error {worst:.1e}")
    assert ok


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
