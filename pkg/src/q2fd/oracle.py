"""Brute-force C0-Q2 (and C0-P2) assembly with Gauss-Lobatto quadrature.

Loops over cells, builds each local matrix from the nodal Lagrange basis and
scatters it.  Deliberately slow and obvious: it exists to check the
Kronecker-structured operator in :mod:`q2fd.assembly`.
"""

import itertools

import numpy as np
import scipy.sparse as sp

from .grid import vec

# 3-point Gauss-Lobatto rule on [-1, 1]; nodes double as the Lagrange nodes
NODES = np.array([-1.0, 0.0, 1.0])
WEIGHTS = np.array([1.0, 4.0, 1.0]) / 3.0


def lagrange_1d(a, t):
    """Value of the quadratic Lagrange polynomial for node ``a`` at ``t``."""
    others = [NODES[m] for m in range(3) if m != a]
    return (t - others[0]) * (t - others[1]) / ((NODES[a] - others[0]) * (NODES[a] - others[1]))


def lagrange_1d_deriv(a, t):
    others = [NODES[m] for m in range(3) if m != a]
    return (2 * t - others[0] - others[1]) / ((NODES[a] - others[0]) * (NODES[a] - others[1]))


class LocalBasis:
    """The nine Q2 shape functions on [-1, 1]^2 with nodes at the Lobatto points.

    Local index ``p = 3 * a + b`` is the node ``(NODES[a], NODES[b])``
    (``a`` along x, ``b`` along y).
    """

    size = 9

    @staticmethod
    def index(a, b):
        return 3 * a + b

    def value(self, p, s, t):
        a, b = divmod(p, 3)
        return lagrange_1d(a, s) * lagrange_1d(b, t)

    def grad(self, p, s, t):
        """Gradient with respect to the reference coordinates ``(s, t)``."""
        a, b = divmod(p, 3)
        return np.array([lagrange_1d_deriv(a, s) * lagrange_1d(b, t),
                         lagrange_1d(a, s) * lagrange_1d_deriv(b, t)])


def local_matrix(hx, hy, a, b, c):
    """9x9 element matrix for a cell of size ``2hx x 2hy``.

    ``a`` has shape (3, 3, 2, 2), ``b`` (3, 3, 2) and ``c`` (3, 3), indexed by
    the local node (x index, y index) that doubles as quadrature point.  Row
    index is the test function, column the trial function.
    """
    basis = LocalBasis()
    scale = np.array([1.0 / hx, 1.0 / hy])
    K = np.zeros((9, 9))
    for qa, qb in itertools.product(range(3), range(3)):
        s, t = NODES[qa], NODES[qb]
        wq = WEIGHTS[qa] * WEIGHTS[qb] * hx * hy
        grads = [basis.grad(p, s, t) * scale for p in range(9)]
        vals = [basis.value(p, s, t) for p in range(9)]
        for i in range(9):
            for j in range(9):
                K[i, j] += wq * (
                    grads[i] @ a[qa, qb] @ grads[j]
                    + (b[qa, qb] @ grads[j]) * vals[i]
                    + c[qa, qb] * vals[j] * vals[i]
                )
    return K


def local_matrix_1d(h, a, b, c):
    """3x3 element matrix of ``a u' v' + b u' v + c u v`` on a cell of size 2h."""
    K = np.zeros((3, 3))
    for q in range(3):
        wq = WEIGHTS[q] * h
        d = [lagrange_1d_deriv(p, NODES[q]) / h for p in range(3)]
        v = [lagrange_1d(p, NODES[q]) for p in range(3)]
        for i in range(3):
            for j in range(3):
                K[i, j] += wq * (a[q] * d[j] * d[i] + b[q] * d[j] * v[i] + c[q] * v[j] * v[i])
    return K


def _coef(field, X, Y):
    if field is None:
        return np.zeros_like(X)
    if callable(field):
        return np.broadcast_to(np.asarray(field(X, Y), dtype=float), X.shape)
    return np.broadcast_to(np.asarray(field, dtype=float), X.shape)


def global_assemble(grid, a=None, b=None, c=None):
    """Full-grid stiffness matrix by scattering local matrices (1D or 2D).

    Coefficient fields are callables of the coordinates or constants and are
    evaluated only at the Lobatto points of each cell.  Rows and columns use
    the column-major ``vec`` ordering of the grid.
    """
    if grid.dims == 1:
        return _global_assemble_1d(grid, a, b, c)
    if grid.dims != 2:
        raise ValueError("oracle assembly covers 1D and 2D grids")
    nx, ny = grid.npts
    hx, hy = grid.h
    xs, ys = grid.axis(0), grid.axis(1)
    a = a if a is not None else [[None, None], [None, None]]
    b = b if b is not None else [None, None]
    number = vec(np.arange(nx * ny).reshape((ny, nx), order="F"))
    number = number.reshape((ny, nx), order="F")
    A = sp.lil_matrix((nx * ny, nx * ny))
    for k, l in itertools.product(range(grid.cells[0]), range(grid.cells[1])):
        ix = 2 * k + np.arange(3)
        iy = 2 * l + np.arange(3)
        X, Y = np.meshgrid(xs[ix], ys[iy], indexing="ij")
        acell = np.zeros((3, 3, 2, 2))
        for r in range(2):
            for s in range(2):
                acell[:, :, r, s] = _coef(a[r][s], X, Y)
        bcell = np.stack([_coef(b[0], X, Y), _coef(b[1], X, Y)], axis=-1)
        ccell = _coef(c, X, Y)
        K = local_matrix(hx, hy, acell, bcell, ccell)
        dofs = [number[iy[q % 3], ix[q // 3]] for q in range(9)]
        for i in range(9):
            for j in range(9):
                A[dofs[i], dofs[j]] += K[i, j]
    return A.tocsr()


def _global_assemble_1d(grid, a, b, c):
    n = grid.npts[0]
    h = grid.h[0]
    xs = grid.axis(0)
    A = np.zeros((n, n))
    for k in range(grid.cells[0]):
        idx = 2 * k + np.arange(3)
        x = xs[idx]
        K = local_matrix_1d(h, _coef1(a, x), _coef1(b, x), _coef1(c, x))
        A[np.ix_(idx, idx)] += K
    return sp.csr_matrix(A)


def _coef1(field, x):
    if field is None:
        return np.zeros_like(x)
    if callable(field):
        return np.broadcast_to(np.asarray(field(x), dtype=float), x.shape)
    return np.broadcast_to(np.asarray(field, dtype=float), x.shape)
