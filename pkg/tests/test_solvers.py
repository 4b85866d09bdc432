import numpy as np
import pytest
import scipy.sparse as sp

from q2fd.assembly import LinearSystem, laplacian_H, laplacian_operator, reduce_dirichlet
from q2fd.grid import build_grid, inflate, norm_2_Z0, sample, vec
from q2fd.harness import build_system, run_solve
from q2fd.problems import builtin
from q2fd.solvers import (EigenFallback, FastLaplacian, SolverFailure, direct_solve,
                          eigen_factor_1d, fast_poisson_solve, fast_solve_system, pcg)


def laplace_system(cells, f=lambda x, y: np.sin(3 * x) * np.exp(y) + x * y):
    g = build_grid([(0, 1), (0, 1)], cells)
    return reduce_dirichlet(laplacian_operator(g), sample(f, g))


def test_direct_identity():
    b = np.arange(5.0)
    rep = direct_solve(sp.identity(5, format="csr"), b)
    assert np.array_equal(rep.solution, b)
    assert rep.residual == 0.0


def test_direct_singular():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SolverFailure) as err:
        direct_solve(A, np.ones(2))
    assert "min_pivot" in err.value.diagnostics


def test_direct_sparse_path():
    sys = laplace_system((32, 32))
    assert sys.size > 2000
    rep = direct_solve(sys)
    assert rep.residual < 1e-12


def test_direct_table1_first_row():
    res = run_solve(builtin("dirichlet2d"), (2, 4))
    # frozen value of this implementation; the published value is 3.94e-2
    assert res.l2_error == pytest.approx(3.79e-2, rel=0.01)


def test_eigen_scalar():
    fac = eigen_factor_1d(laplacian_H(1, 0.5))
    assert fac.lam == pytest.approx([2 / 0.25])
    assert np.allclose(np.abs(fac.T), 1.0)


def test_eigen_n3_positive():
    fac = eigen_factor_1d(laplacian_H(3, 0.25))
    assert np.all(fac.lam > 0)


@pytest.mark.parametrize("n", [3, 31, 63])
def test_eigen_invariants(n):
    H = laplacian_H(n, 1.0 / (n + 1))
    fac = eigen_factor_1d(H)
    assert np.max(np.abs(H @ fac.T - fac.T * fac.lam)) <= 1e-10 * np.abs(H).max()
    assert np.max(np.abs(fac.T @ np.diag(fac.lam) @ fac.T_inv - H)) <= 1e-10 * np.abs(H).max()
    assert np.all(np.diff(fac.lam) > 0) and fac.lam[0] > 0


def test_eigen_fallbacks():
    with pytest.raises(EigenFallback):
        eigen_factor_1d(np.eye(3))  # repeated
    with pytest.raises(EigenFallback):
        eigen_factor_1d(np.array([[0.0, -1.0], [1.0, 0.0]]))  # complex
    with pytest.raises(EigenFallback):
        eigen_factor_1d(np.diag([1.0, -2.0]))  # negative
    with pytest.raises(EigenFallback):
        eigen_factor_1d(np.array([[1.0, 1.0], [0.0, 1.0 + 1e-12]]))  # near-defective


def test_fast_zero_rhs():
    g = build_grid([(0, 1), (0, 1)], (4, 4))
    rep = fast_poisson_solve(g, np.zeros(g.shape("interior")))
    assert np.array_equal(rep.solution.values, np.zeros(g.shape()))


@pytest.mark.parametrize("cells", [(16, 16), (32, 32), (8, 16)])
def test_fast_matches_direct(cells):
    sys = laplace_system(cells)
    a = fast_solve_system(sys).solution.values
    b = direct_solve(sys).solution.values
    assert np.linalg.norm(a - b) <= 1e-9 * np.linalg.norm(b)


def test_fast_poisson_solve_matches_system():
    g = build_grid([(0, 1), (0, 2)], (4, 8))
    F = sample(lambda x, y: np.cos(x + y), g, "interior")
    u1 = fast_poisson_solve(g, F).solution.values
    sys = reduce_dirichlet(laplacian_operator(g), F)
    u2 = direct_solve(sys).solution.values
    assert np.allclose(u1, u2, atol=1e-12)


def test_fast_3d_row():
    res = run_solve(builtin("laplace3d"), (16, 16, 16))
    assert res.report.method == "fast"
    assert res.l2_error == pytest.approx(5.68e-5, rel=0.02)


def test_pcg_identity():
    A = sp.identity(6, format="csr")
    rep = pcg((A, np.arange(1.0, 7.0)), "none")
    assert rep.iterations == 1
    assert np.allclose(rep.solution, np.arange(1.0, 7.0))


def test_pcg_table1_matches_direct():
    p = builtin("dirichlet2d")
    g = build_grid(p.domain, (16, 32))
    sys = build_system(p, g)
    it = pcg(sys, "eigen", tol=1e-12)
    assert it.converged and it.residual <= 1e-11
    ref = direct_solve(sys).solution.values
    x = it.solution.values
    assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)
    plain = pcg(sys, "none", tol=1e-12, maxit=20000)
    assert plain.converged
    assert it.iterations <= plain.iterations


def test_pcg_monotone_energy_error():
    """CG minimizes the A-norm of the error over growing Krylov spaces."""
    p = builtin("dirichlet2d")
    g = build_grid(p.domain, (8, 16))
    sys = build_system(p, g)
    A = sys.to_sparse()
    xstar = direct_solve(sys).solution
    xstar = vec(xstar.values[1:-1, 1:-1])
    energies = []

    def cb(x):
        e = x - xstar
        energies.append(float(e @ (A @ e)))

    for pre in ("eigen", "none"):
        energies.clear()
        pcg(sys, pre, tol=1e-12, maxit=5000, callback=cb)
        assert all(b <= a * (1 + 1e-8) + 1e-25 for a, b in zip(energies, energies[1:]))


def test_pcg_reports_recomputed_residual():
    sys = laplace_system((8, 8))
    rep = pcg(sys, "eigen", tol=1e-6)
    r = sys.rhs - sys.matvec(vec(rep.solution.values[1:-1, 1:-1]))
    assert rep.residual == pytest.approx(np.linalg.norm(r) / np.linalg.norm(sys.rhs))
    assert rep.history[0] == 1.0


def test_pcg_refuses_convection():
    p = builtin("convection2d")
    sys = build_system(p, build_grid(p.domain, (4, 8)))
    assert not sys.is_symmetric
    with pytest.raises(SolverFailure):
        pcg(sys)
    res = run_solve(p, (4, 8))
    assert res.report.method == "direct"


def test_pcg_negative_curvature():
    A = sp.diags([1.0, -1.0, 2.0]).tocsr()
    with pytest.raises(SolverFailure):
        pcg((A, np.ones(3)), "none")


def test_pcg_maxit_not_converged():
    sys = laplace_system((16, 16))
    rep = pcg(sys, "none", tol=1e-14, maxit=3)
    assert rep.iterations == 3 and not rep.converged
