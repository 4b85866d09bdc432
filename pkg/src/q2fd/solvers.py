"""Direct, fast-diagonalization and preconditioned CG solvers.

The fast solver inverts the Kronecker sum ``H_x (+) H_y [(+) H_z]`` of the 1D
operators ``H = M^{-1} S`` through per-axis eigen-decompositions
``H = T diag(lam) T^{-1}`` and one entrywise division by the eigenvalue-sum
array.  ``H`` is not symmetric, but it is similar to the symmetric
``W^{-1/2} S W^{-1/2}``, so its spectrum is real in exact arithmetic.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .assembly import LinearSystem, laplacian_H
from .grid import GridFunction, inflate, unvec, vec

__all__ = [
    "SolverFailure",
    "EigenFallback",
    "EigenFactor",
    "SolveReport",
    "direct_solve",
    "eigen_factor_1d",
    "FastLaplacian",
    "fast_poisson_solve",
    "pcg",
]

DENSE_LIMIT = 2000


class SolverFailure(RuntimeError):
    """A solve could not be completed; ``diagnostics`` says why."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class EigenFallback(SolverFailure):
    """The eigen route is unreliable for this matrix; use PCG or a direct solve."""


@dataclass
class SolveReport:
    solution: object
    iterations: int
    residual: float
    wall_time: float
    method: str
    history: list = field(default_factory=list)
    converged: bool = True


def _relative_residual(matvec, x, b):
    r = b - matvec(x)
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))


def _unpack(system, rhs):
    if isinstance(system, LinearSystem):
        return system.to_sparse(), system.rhs, system.matvec
    A = system
    if rhs is None:
        raise ValueError("rhs is required when solving a bare matrix")
    return A, np.asarray(rhs, dtype=float), (lambda v: A @ v)


def _wrap(system, x):
    if isinstance(system, LinearSystem):
        return GridFunction(system.grid, system.complete(x), "full")
    return x


def direct_solve(system, rhs=None, check=1e-10):
    """Solve by LU: dense below ``DENSE_LIMIT`` unknowns, sparse above.

    ``system`` is a :class:`LinearSystem` or a matrix (then pass ``rhs``).
    Raises :class:`SolverFailure` for a singular matrix or when the recomputed
    relative residual exceeds ``check``.
    """
    t0 = time.perf_counter()
    A, b, matvec = _unpack(system, rhs)
    n = A.shape[0]
    if n < DENSE_LIMIT:
        dense = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
        with warnings.catch_warnings():
            # singularity is reported below with diagnostics
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(dense, check_finite=True)
        pivots = np.abs(np.diag(lu))
        scale = max(np.abs(dense).max(), 1e-300)
        if pivots.min() <= 1e-14 * scale:
            raise SolverFailure("matrix is numerically singular",
                                min_pivot=float(pivots.min()), pivot_index=int(pivots.argmin()),
                                scale=float(scale))
        x = la.lu_solve((lu, piv), b)
    else:
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise SolverFailure(f"sparse LU failed: {exc}") from exc
        pivots = np.abs(lu.U.diagonal())
        if pivots.min() <= 1e-14 * abs(A).max():
            raise SolverFailure("matrix is numerically singular",
                                min_pivot=float(pivots.min()), pivot_index=int(pivots.argmin()))
        x = lu.solve(b)
    res = _relative_residual(matvec, x, b)
    if not res <= check:
        raise SolverFailure("direct solve residual too large", residual=res)
    return SolveReport(_wrap(system, x), 0, res, time.perf_counter() - t0, "direct")


@dataclass(frozen=True)
class EigenFactor:
    """``H = T diag(lam) T^{-1}`` with real, ascending eigenvalues."""

    T: np.ndarray
    T_inv: np.ndarray
    lam: np.ndarray


def eigen_factor_1d(H, repeat_tol=1e-10, max_cond=1e8):
    """Eigen-decompose a small dense ``H``.

    Raises :class:`EigenFallback` for complex or repeated eigenvalues, an
    ill-conditioned eigenvector matrix or a reconstruction failure.
    """
    H = np.asarray(H, dtype=float)
    lam, T = np.linalg.eig(H)
    scale = max(np.max(np.abs(lam)), 1e-300)
    if np.max(np.abs(lam.imag)) > 1e-10 * scale or np.iscomplexobj(T) and np.max(np.abs(T.imag)) > 1e-10:
        raise EigenFallback("complex eigenpairs", max_imag=float(np.max(np.abs(lam.imag))))
    lam = lam.real
    T = np.real(T)
    order = np.argsort(lam)
    lam, T = lam[order], T[:, order]
    if lam.size > 1 and np.min(np.diff(lam)) <= repeat_tol * scale:
        raise EigenFallback("repeated eigenvalues", min_gap=float(np.min(np.diff(lam))))
    cond = np.linalg.cond(T)
    if not cond <= max_cond:
        raise EigenFallback("ill-conditioned eigenvectors", cond=float(cond))
    if np.min(lam) <= 0:
        raise EigenFallback("eigenvalue with nonpositive real part", min_eig=float(np.min(lam)))
    T_inv = np.linalg.inv(T)
    err = np.max(np.abs(H @ T - T * lam))
    if err > 1e-10 * max(np.max(np.abs(H)), 1e-300):
        raise EigenFallback("eigen residual too large", residual=float(err))
    return EigenFactor(T, T_inv, lam)


def _along(M, U, s, dims):
    ax = dims - 1 - s
    return np.moveaxis(np.tensordot(M, U, axes=([1], [ax])), 0, ax)


class FastLaplacian:
    """Inverse of the Kronecker sum of 1D Laplacian ``H`` matrices on a grid.

    Works on interior arrays in the reversed-axis layout of :mod:`q2fd.grid`.
    """

    def __init__(self, grid):
        self.grid = grid
        self.H = tuple(laplacian_H(grid.n[s], grid.h[s]) for s in range(grid.dims))
        self.factors = tuple(eigen_factor_1d(H) for H in self.H)
        lam = np.zeros(grid.shape("interior"))
        d = grid.dims
        for s, fac in enumerate(self.factors):
            bshape = [1] * d
            bshape[d - 1 - s] = fac.lam.size
            lam = lam + fac.lam.reshape(bshape)
        if np.min(np.abs(lam)) < 1e-14:
            raise SolverFailure("singular Kronecker-sum operator", min_eig=float(np.min(np.abs(lam))))
        self.lam = lam

    def apply_H(self, U):
        """``(H_x (+) H_y ...) U`` for an interior array."""
        d = self.grid.dims
        return sum(_along(self.H[s], U, s, d) for s in range(d))

    def solve(self, F):
        """``U = (H_x (+) H_y ...)^{-1} F`` by per-axis transforms."""
        d = self.grid.dims
        shape = self.grid.shape("interior")
        flat = np.ndim(F) == 1 and d > 1
        G = unvec(F, shape) if flat else np.asarray(F, dtype=float)
        for s, fac in enumerate(self.factors):
            G = _along(fac.T_inv, G, s, d)
        G = G / self.lam
        for s, fac in enumerate(self.factors):
            G = _along(fac.T, G, s, d)
        return vec(G) if flat else G


def fast_poisson_solve(grid, F, solver=None):
    """Solve ``(H_x (+) H_y [(+) H_z]) vec(U) = vec(F)`` for interior ``F``.

    ``F`` holds the samples of ``f`` (the lumped mass is already divided out
    by ``H = M^{-1} S``).  Returns a report whose solution is the full-grid
    function with zero boundary values.
    """
    t0 = time.perf_counter()
    F = np.asarray(getattr(F, "values", F), dtype=float)
    F = unvec(F, grid.shape("interior")) if F.ndim == 1 and grid.dims > 1 else F
    solver = solver or FastLaplacian(grid)
    U = solver.solve(F)
    r = F - solver.apply_H(U)
    nf = np.linalg.norm(F)
    res = float(np.linalg.norm(r) / nf) if nf > 0 else float(np.linalg.norm(r))
    return SolveReport(GridFunction(grid, inflate(U), "full"), 0, res,
                       time.perf_counter() - t0, "fast")


def fast_solve_system(system, solver=None):
    """Fast solve of a Dirichlet-reduced Laplacian :class:`LinearSystem`."""
    t0 = time.perf_counter()
    grid = system.grid
    solver = solver or FastLaplacian(grid)
    mass = system.operator.mass_diagonal("interior")
    F = unvec(system.rhs, grid.shape("interior")) / mass
    U = solver.solve(F)
    x = vec(U)
    res = _relative_residual(system.matvec, x, system.rhs)
    return SolveReport(_wrap(system, x), 0, res, time.perf_counter() - t0, "fast")


def eigen_preconditioner(system):
    """``S_lap^{-1} = (H (+) H)^{-1} M^{-1}`` for a Dirichlet-reduced system."""
    grid = system.grid
    solver = FastLaplacian(grid)
    mass = vec(system.operator.mass_diagonal("interior"))

    def apply(r):
        return solver.solve(r / mass)

    return apply


def pcg(system, preconditioner="eigen", tol=1e-12, maxit=None, x0=None, callback=None):
    """Preconditioned conjugate gradients on a symmetric :class:`LinearSystem`.

    ``preconditioner`` is ``"eigen"``, ``"none"`` or a callable ``r -> z``.
    Stops when the relative residual drops below ``tol`` or after ``maxit``
    iterations (default ``10 * sqrt(n)``).  The reported residual is
    recomputed from the operator.
    """
    if isinstance(system, LinearSystem) and not system.is_symmetric:
        raise SolverFailure("operator is not symmetric; use the direct solver", symmetric=False)
    t0 = time.perf_counter()
    if isinstance(system, LinearSystem):
        matvec, b = system.matvec, system.rhs
    else:
        A, b = system
        b = np.asarray(b, dtype=float)
        matvec = (lambda v: A @ v) if not callable(A) else A
    n = b.size
    maxit = int(10 * np.sqrt(n)) + 1 if maxit is None else int(maxit)
    if preconditioner in (None, "none"):
        M = None
    elif preconditioner == "eigen":
        if not isinstance(system, LinearSystem) or system.region != "interior":
            raise ValueError("the eigen preconditioner needs a Dirichlet-reduced system")
        M = eigen_preconditioner(system)
    elif callable(preconditioner):
        M = preconditioner
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x)
    nb = np.linalg.norm(b)
    if nb == 0:
        nb = 1.0
    z = r if M is None else M(r)
    p = z.copy()
    rz = float(r @ z)
    history = [float(np.linalg.norm(r) / nb)]
    it = 0
    while history[-1] > tol and it < maxit:
        Ap = matvec(p)
        curv = float(p @ Ap)
        if curv <= 0:
            raise SolverFailure("nonpositive curvature; operator is not SPD, use the direct solver",
                                iteration=it, curvature=curv)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        it += 1
        if callback is not None:
            callback(x)
        history.append(float(np.linalg.norm(r) / nb))
        z = r if M is None else M(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = _relative_residual(matvec, x, b)
    method = "pcg" if M is not None else "cg"
    return SolveReport(_wrap(system, x) if isinstance(system, LinearSystem) else x,
                       it, res, time.perf_counter() - t0, method, history,
                       converged=history[-1] <= tol)
