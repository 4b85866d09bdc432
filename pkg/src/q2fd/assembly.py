"""Finite-difference form of the C0-Q2 scheme with 3-point Gauss-Lobatto quadrature.

Per axis the scheme needs three banded matrices on the ``n + 2`` grid points:

* ``D``: ``h`` times the derivative of the piecewise quadratic interpolant,
  averaged over the two cells meeting at a knot;
* ``E``: half the derivative jump at interior knots (zero elsewhere);
* ``W_bar``: the Lobatto weights ``(1/3, 4/3, 2/3, 4/3, ..., 4/3, 1/3)``.

In 1D the stiffness matrix is ``(1/h) (D^T W A D + E^T W A E)``.  In d
dimensions each term of the bilinear form is a Kronecker product of these
matrices with a diagonal of weighted coefficient samples; the operator is
applied axis by axis with entrywise products and never forms a Kronecker
product unless a sparse export is asked for.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .grid import TensorGrid, inflate, restrict, unvec, vec

__all__ = [
    "Stencil1DSet",
    "EllipticOperator",
    "LinearSystem",
    "build_stencils",
    "stencil_rows_exact",
    "assemble_stiffness_1d",
    "assemble_operator",
    "laplacian_operator",
    "reduce_dirichlet",
    "neumann_full_system",
    "boundary_flux_load",
    "laplacian_H",
]

_D_FIRST = (Fraction(-3, 2), Fraction(2), Fraction(-1, 2))
_D_LAST = (Fraction(1, 2), Fraction(-2), Fraction(3, 2))
_D_CENTER = (Fraction(-1, 2), Fraction(0), Fraction(1, 2))
_D_KNOT = (Fraction(1, 4), Fraction(-1), Fraction(0), Fraction(1), Fraction(-1, 4))
_E_KNOT = (Fraction(-1, 4), Fraction(1), Fraction(-3, 2), Fraction(1), Fraction(-1, 4))


def _check_npts(n_pts):
    if n_pts < 3 or n_pts % 2 == 0:
        raise ValueError(f"need n_pts = n + 2 with n odd and positive, got n_pts={n_pts}")


def stencil_rows_exact(n_pts):
    """Nonzero pattern of D, E and W_bar as exact rationals.

    Returns ``(D, E, W)`` where ``D`` and ``E`` map a row index to a list of
    ``(column, Fraction)`` pairs and ``W`` is a list of Fractions.
    """
    _check_npts(n_pts)
    last = n_pts - 1
    D, E = {}, {}
    for i in range(n_pts):
        if i == 0:
            D[i] = list(zip(range(0, 3), _D_FIRST))
            E[i] = []
        elif i == last:
            D[i] = list(zip(range(last - 2, last + 1), _D_LAST))
            E[i] = []
        elif i % 2 == 1:
            D[i] = list(zip(range(i - 1, i + 2), _D_CENTER))
            E[i] = []
        else:
            D[i] = list(zip(range(i - 2, i + 3), _D_KNOT))
            E[i] = list(zip(range(i - 2, i + 3), _E_KNOT))
    W = [Fraction(1, 3) if i in (0, last) else Fraction(4, 3) if i % 2 else Fraction(2, 3)
         for i in range(n_pts)]
    return D, E, W


def _to_csr(rows, n_pts):
    r, c, v = [], [], []
    for i, entries in rows.items():
        for j, val in entries:
            if val != 0:
                r.append(i)
                c.append(j)
                v.append(float(val))
    return sp.csr_matrix((v, (r, c)), shape=(n_pts, n_pts))


@dataclass(frozen=True)
class Stencil1DSet:
    """D, E and Lobatto weight matrices for one axis with ``n_pts`` points."""

    n_pts: int
    h: float
    D: sp.csr_matrix
    E: sp.csr_matrix
    W_bar: np.ndarray
    W_int: np.ndarray


def build_stencils(n_pts, h=1.0):
    """Build the :class:`Stencil1DSet` for an axis of ``n_pts`` grid points."""
    D, E, W = stencil_rows_exact(n_pts)
    w_bar = np.array([float(w) for w in W])
    return Stencil1DSet(n_pts, float(h), _to_csr(D, n_pts), _to_csr(E, n_pts),
                        w_bar, w_bar[1:-1].copy())


def assemble_stiffness_1d(stencils, a_samples):
    """``(1/h) (D^T W A D + E^T W A E)`` with ``A = diag(a_samples)``."""
    a = np.asarray(a_samples, dtype=float)
    if a.shape != (stencils.n_pts,):
        raise ValueError(f"expected {stencils.n_pts} coefficient samples, got {a.shape}")
    WA = sp.diags(stencils.W_bar * a)
    D, E = stencils.D, stencils.E
    return ((D.T @ WA @ D + E.T @ WA @ E) / stencils.h).tocsr()


def laplacian_H(n, h=1.0):
    """Interior ``M^{-1} S`` for ``-u''`` with homogeneous Dirichlet data, dense."""
    st = build_stencils(n + 2, h)
    S = assemble_stiffness_1d(st, np.ones(n + 2)).toarray()[1:-1, 1:-1]
    return S / (h * st.W_int)[:, None]


def _apply_along(M, U, s, dims):
    """Apply sparse ``M`` along grid axis ``s`` of the reversed-axis array ``U``."""
    ax = dims - 1 - s
    moved = np.moveaxis(U, ax, 0)
    out = M @ moved.reshape(moved.shape[0], -1)
    return np.moveaxis(out.reshape((M.shape[0],) + moved.shape[1:]), 0, ax)


def _kron_axis(M, s, npts):
    """``I kron ... kron M kron ... kron I`` with ``M`` in slot ``s`` (x first)."""
    out = None
    for r, m in enumerate(npts):
        factor = M if r == s else sp.identity(m, format="csr")
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


def _samples(fieldlike, grid):
    """Full-grid coefficient samples from a callable, array, scalar or None."""
    shape = grid.shape("full")
    if fieldlike is None:
        return None
    if callable(fieldlike):
        vals = np.asarray(fieldlike(*grid.mesh("full")), dtype=float)
        return np.broadcast_to(vals, shape).copy()
    arr = np.asarray(fieldlike, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape != shape:
        if arr.size == int(np.prod(shape)):
            return unvec(arr, shape)
        raise ValueError(f"coefficient samples must have shape {shape}, got {arr.shape}")
    return arr.copy()


class EllipticOperator:
    """Discrete form of ``-div(a grad u) + b . grad u + c u`` on a tensor grid.

    ``apply`` evaluates ``S_bar @ vec(U)`` on the full grid matrix-free;
    ``apply_interior`` is the Dirichlet-reduced ``Res S_bar Infl``.  With
    ``cross_jump=True`` the mixed terms ``a^{kl}, k != l`` also get the
    ``E_k^T (.) E_l`` jump product, as in the printed block formulas; the
    default omits it, which is what the quadrature-based bilinear form gives
    at cell corners.
    """

    def __init__(self, grid, a=None, b=None, c=None, cross_jump=False):
        if not isinstance(grid, TensorGrid):
            raise TypeError("grid must be a TensorGrid")
        d = grid.dims
        self.grid = grid
        self.cross_jump = bool(cross_jump)
        self.stencils = tuple(build_stencils(grid.npts[s], grid.h[s]) for s in range(d))
        # weight array W_bar_y A W_bar_x in reversed-axis layout
        wt = np.ones(grid.shape("full"))
        for s in range(d):
            bshape = [1] * d
            bshape[d - 1 - s] = grid.npts[s]
            wt = wt * self.stencils[s].W_bar.reshape(bshape)
        self._weights = wt
        vol = grid.cell_volume_factor
        h = grid.h

        a = a if a is not None else [[None] * d for _ in range(d)]
        b = b if b is not None else [None] * d
        if len(a) != d or any(len(row) != d for row in a) or len(b) != d:
            raise ValueError(f"coefficient a must be {d}x{d} and b of length {d}")
        self.a = [[_samples(a[k][l], grid) for l in range(d)] for k in range(d)]
        self.b = [_samples(b[m], grid) for m in range(d)]
        self.c = _samples(c, grid)

        # weighted, prefactor-scaled coefficient arrays
        self._aw = {}
        for k in range(d):
            for l in range(d):
                if self.a[k][l] is not None and np.any(self.a[k][l]):
                    self._aw[k, l] = vol / (h[k] * h[l]) * wt * self.a[k][l]
        self._bw = {m: vol / h[m] * wt * self.b[m]
                    for m in range(d) if self.b[m] is not None and np.any(self.b[m])}
        self._cw = vol * wt * self.c if self.c is not None and np.any(self.c) else None

    @property
    def dims(self):
        return self.grid.dims

    @property
    def shape(self):
        n = self.grid.size("full")
        return (n, n)

    @property
    def is_symmetric(self):
        """True when b vanishes and a is symmetric at every grid point."""
        if self._bw:
            return False
        d = self.dims
        for k in range(d):
            for l in range(k + 1, d):
                akl, alk = self.a[k][l], self.a[l][k]
                akl = 0.0 if akl is None else akl
                alk = 0.0 if alk is None else alk
                if not np.array_equal(np.broadcast_to(akl, self.grid.shape()),
                                      np.broadcast_to(alk, self.grid.shape())):
                    return False
        return True

    def mass_diagonal(self, region="full"):
        """Lumped mass ``prod(h) * W_bar_x kron W_bar_y ...`` as a grid array."""
        m = self.grid.cell_volume_factor * self._weights
        return restrict(m) if region == "interior" else m

    def apply(self, U):
        """``S_bar vec(U)`` for a full-grid array (matrix layout or vec)."""
        shape = self.grid.shape("full")
        flat = np.ndim(U) == 1 and self.dims > 1
        U = unvec(U, shape) if flat else np.asarray(U, dtype=float)
        d = self.dims
        st = self.stencils
        out = np.zeros(shape)
        Du = [None] * d
        Eu = [None] * d
        for s in range(d):
            Du[s] = _apply_along(st[s].D, U, s, d)
        for (k, l), aw in self._aw.items():
            out += _apply_along(st[k].D.T, aw * Du[l], k, d)
            if k == l or self.cross_jump:
                if Eu[l] is None:
                    Eu[l] = _apply_along(st[l].E, U, l, d)
                out += _apply_along(st[k].E.T, aw * Eu[l], k, d)
        for m, bw in self._bw.items():
            out += bw * Du[m]
        if self._cw is not None:
            out += self._cw * U
        return vec(out) if flat else out

    def apply_interior(self, U):
        """``Res S_bar Infl`` applied to an interior array (matrix layout or vec)."""
        shape = self.grid.shape("interior")
        flat = np.ndim(U) == 1 and self.dims > 1
        U = unvec(U, shape) if flat else np.asarray(U, dtype=float)
        out = restrict(self.apply(inflate(U)))
        return vec(out) if flat else out

    def to_sparse(self, region="full"):
        """Assemble ``S_bar`` (or its interior block) as a CSR matrix."""
        npts = self.grid.npts
        d = self.dims
        st = self.stencils
        Dk = [_kron_axis(st[s].D, s, npts) for s in range(d)]
        Ek = [_kron_axis(st[s].E, s, npts) for s in range(d)]
        S = sp.csr_matrix(self.shape)
        for (k, l), aw in self._aw.items():
            diag = sp.diags(vec(aw))
            S = S + Dk[k].T @ diag @ Dk[l]
            if k == l or self.cross_jump:
                S = S + Ek[k].T @ diag @ Ek[l]
        for m, bw in self._bw.items():
            S = S + sp.diags(vec(bw)) @ Dk[m]
        if self._cw is not None:
            S = S + sp.diags(vec(self._cw))
        S = S.tocsr()
        if region == "interior":
            keep = ~vec(self.grid.boundary_mask())
            S = S[keep][:, keep]
        S.sum_duplicates()
        S.eliminate_zeros()
        return S.tocsr()


def assemble_operator(grid, a=None, b=None, c=None, cross_jump=False):
    """Build the :class:`EllipticOperator` for coefficient fields on ``grid``.

    ``a`` is a d x d nested sequence, ``b`` a length-d sequence and ``c`` a
    single field; every field may be a callable of the coordinates, a
    full-grid array, a scalar or None.
    """
    return EllipticOperator(grid, a, b, c, cross_jump=cross_jump)


def laplacian_operator(grid):
    """Operator for ``-Laplace(u)`` on ``grid``."""
    d = grid.dims
    a = [[1.0 if k == l else None for l in range(d)] for k in range(d)]
    return EllipticOperator(grid, a)


@dataclass
class LinearSystem:
    """A linear system built from an :class:`EllipticOperator`.

    ``region="interior"`` is the Dirichlet-reduced system whose unknowns are
    interior values and whose solution is completed by adding ``lifting``;
    ``region="full"`` is the Neumann system over every grid point.
    """

    operator: EllipticOperator
    rhs: np.ndarray
    region: str
    lifting: np.ndarray = None

    @property
    def grid(self):
        return self.operator.grid

    @property
    def size(self):
        return self.rhs.size

    @property
    def is_symmetric(self):
        return self.operator.is_symmetric

    def matvec(self, v):
        if self.region == "interior":
            return self.operator.apply_interior(np.asarray(v, dtype=float).reshape(-1))
        return vec(self.operator.apply(unvec(v, self.grid.shape("full"))))

    def to_sparse(self):
        return self.operator.to_sparse(self.region)

    def complete(self, x):
        """Full-grid solution array from the unknown vector ``x``."""
        if self.region == "interior":
            U = inflate(unvec(x, self.grid.shape("interior")))
            if self.lifting is not None:
                U = U + self.lifting
            return U
        return unvec(x, self.grid.shape("full"))


def _full_array(data, grid, region):
    if data is None:
        return np.zeros(grid.shape(region))
    if hasattr(data, "values"):
        data = data.values
    arr = np.asarray(data, dtype=float)
    if arr.shape != grid.shape(region):
        arr = unvec(arr, grid.shape(region))
    return arr


def reduce_dirichlet(op, f_samples, g_boundary=None):
    """Dirichlet-reduced system ``S u = M f - Res S_bar G_bar``.

    ``f_samples`` may be given on the full grid or the interior; ``g_boundary``
    is a full-grid array whose interior entries are ignored (forced to 0).
    """
    grid = op.grid
    f = np.asarray(getattr(f_samples, "values", f_samples), dtype=float)
    if f.size == grid.size("full"):
        f = restrict(_full_array(f, grid, "full"))
    else:
        f = _full_array(f, grid, "interior")
    rhs = op.mass_diagonal("interior") * f
    G = None
    if g_boundary is not None:
        G = _full_array(g_boundary, grid, "full").copy()
        G[~grid.boundary_mask()] = 0.0
        rhs = rhs - restrict(op.apply(G))
    return LinearSystem(op, vec(rhs), "interior", G)


def boundary_flux_load(grid, flux):
    """Lobatto quadrature of ``int_{boundary} g v_i`` for every grid point.

    ``flux`` maps ``(axis, side)`` (side 0 at the low end, 1 at the high end)
    to the outward conormal flux ``g = (a grad u) . n`` sampled on that face,
    as an array in the reversed-axis layout of the face.  Corner points
    collect one term from each face they lie on.
    """
    d = grid.dims
    w_bar = [build_stencils(grid.npts[s], grid.h[s]).W_bar * grid.h[s] for s in range(d)]
    load = np.zeros(grid.shape("full"))
    for s in range(d):
        others = [r for r in reversed(range(d)) if r != s]
        w = np.ones([grid.npts[r] for r in others])
        for pos, r in enumerate(others):
            bshape = [1] * len(others)
            bshape[pos] = grid.npts[r]
            w = w * w_bar[r].reshape(bshape)
        for side in (0, 1):
            if (s, side) not in flux:
                continue
            g = np.broadcast_to(np.asarray(flux[s, side], dtype=float), w.shape)
            idx = [slice(None)] * d
            idx[d - 1 - s] = 0 if side == 0 else -1
            load[tuple(idx)] += w * g
    return load


def neumann_full_system(op, f_samples, flux=None):
    """Full-grid system ``S_bar u = M_bar f (+ boundary flux load)``.

    Requires ``c > 0`` at every grid point: with ``c`` vanishing the pure
    Neumann operator has the constants in its kernel.  ``flux`` is either a
    dict of per-face samples of ``(a grad u) . n`` as taken by
    :func:`boundary_flux_load`; omit it for homogeneous Neumann data.
    """
    if op.c is None or np.min(op.c) <= 0:
        raise ValueError("Neumann solve needs c > 0 at every grid point")
    grid = op.grid
    f = _full_array(getattr(f_samples, "values", f_samples), grid, "full")
    rhs = op.mass_diagonal("full") * f
    if flux is not None:
        rhs = rhs + boundary_flux_load(grid, flux)
    return LinearSystem(op, vec(rhs), "full")
