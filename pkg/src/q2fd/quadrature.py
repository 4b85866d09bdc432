"""Gauss-Lobatto rules, Legendre and M-type polynomials, M-type projection.

The M-type polynomials are the antiderivatives of the Legendre polynomials,

    M_0 = 1,  M_1 = t,  M_j(t) = (l_j(t) - l_{j-2}(t)) / (2j - 1)  for j >= 2,

so that M_j(+-1) = 0 for j >= 2.  The per-cell M-type Q^k projection built from
them is used by the test-suite as an independent superapproximation oracle.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureRule",
    "MTypeExpansion",
    "gauss_lobatto_rule",
    "legendre_eval",
    "legendre_deriv",
    "mtype_eval",
    "quad_cell",
    "mtype_project_1d",
    "mtype_project_2d",
]

_NEWTON_MAXIT = 100
_NEWTON_TOL = 1e-14
_DENSE_NPTS = 32


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Lobatto rule on the reference interval [-1, 1]."""

    npts: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, f):
        """Apply the rule to a vectorized callable on [-1, 1]."""
        return float(np.dot(self.weights, f(self.nodes)))

    def mapped(self, lo, hi):
        """Nodes and weights of the rule mapped affinely onto [lo, hi]."""
        half = 0.5 * (hi - lo)
        return lo + half * (self.nodes + 1.0), half * self.weights


def legendre_eval(j, t):
    """Evaluate the Legendre polynomial l_j at t by the three-term recurrence."""
    if j < 0:
        raise ValueError(f"Legendre degree must be nonnegative, got {j}")
    t = np.asarray(t, dtype=float)
    p_prev = np.ones_like(t)
    if j == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = t.copy()
    for m in range(1, j):
        p_prev, p = p, ((2 * m + 1) * t * p - m * p_prev) / (m + 1)
    return p if p.ndim else float(p)


def legendre_deriv(j, t):
    """Derivative l_j'(t) via l_j' = sum over m = j-1, j-3, ... of (2m+1) l_m."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for m in range(j - 1, -1, -2):
        out = out + (2 * m + 1) * legendre_eval(m, t)
    out = np.asarray(out)
    return out if out.ndim else float(out)


def mtype_eval(j, t):
    """Evaluate the M-type polynomial M_j at t."""
    if j < 0:
        raise ValueError(f"M-type degree must be nonnegative, got {j}")
    t = np.asarray(t, dtype=float)
    if j == 0:
        out = np.ones_like(t)
    elif j == 1:
        out = t.copy()
    else:
        out = np.asarray((legendre_eval(j, t) - legendre_eval(j - 2, t)) / (2 * j - 1))
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def gauss_lobatto_rule(npts):
    """Return the ``npts``-point Gauss-Lobatto rule on [-1, 1].

    Interior nodes are the roots of l_{npts-1}', found by Newton iteration
    started from the Chebyshev-Gauss-Lobatto points.  Weights are
    ``2 / (N (N + 1) l_N(x)^2)`` with ``N = npts - 1``.

    Raises
    ------
    ValueError
        If ``npts < 2``.
    """
    if int(npts) != npts or npts < 2:
        raise ValueError(f"Gauss-Lobatto rule needs npts >= 2, got {npts}")
    npts = int(npts)
    n = npts - 1
    nodes = -np.cos(np.pi * np.arange(npts) / n)
    interior = nodes[1:-1].copy()
    for _ in range(_NEWTON_MAXIT):
        if interior.size == 0:
            break
        # roots of l_n' ; (1 - t^2) l_n'' = 2 t l_n' - n (n + 1) l_n
        d1 = legendre_deriv(n, interior)
        d2 = (2 * interior * d1 - n * (n + 1) * legendre_eval(n, interior)) / (
            1 - interior**2
        )
        step = d1 / d2
        interior = interior - step
        if np.max(np.abs(step)) < _NEWTON_TOL:
            break
    nodes[1:-1] = interior
    # enforce exact symmetry
    nodes = 0.5 * (nodes - nodes[::-1])
    if npts % 2:
        nodes[n // 2] = 0.0
    weights = 2.0 / (n * (n + 1) * np.asarray(legendre_eval(n, nodes)) ** 2)
    return QuadratureRule(npts, nodes, weights)


def quad_cell(f, rule, box=((-1.0, 1.0), (-1.0, 1.0))):
    """Tensor-product Gauss-Lobatto quadrature of ``f`` over a 1D or 2D box.

    ``box`` is a sequence of ``(lo, hi)`` pairs, one per dimension, or a bare
    ``(lo, hi)`` pair in 1D; ``f`` takes that many coordinate arrays and must
    broadcast.
    """
    box = tuple(box)
    if len(box) == 2 and np.isscalar(box[0]):
        box = (box,)
    if len(box) == 1:
        x, w = rule.mapped(*box[0])
        return float(np.dot(w, f(x)))
    if len(box) == 2:
        x, wx = rule.mapped(*box[0])
        y, wy = rule.mapped(*box[1])
        vals = f(x[:, None], y[None, :]) * np.ones((x.size, y.size))
        return float(wx @ vals @ wy)
    raise ValueError("quad_cell supports 1D and 2D boxes")


def _dense_rule():
    return gauss_lobatto_rule(_DENSE_NPTS)


def mtype_project_1d(f, k, df=None):
    """Coefficients b_0..b_k of the 1D M-type projection of ``f`` on [-1, 1].

    ``b_{j+1} = (j + 1/2) * int f' l_j``.  Without ``df`` the integral is
    taken by parts, ``[f l_j] - int f l_j'``, so only ``f`` is sampled.
    """
    rule = _dense_rule()
    t = rule.nodes
    w = rule.weights
    fp, fm = float(f(1.0)), float(f(-1.0))
    b = np.zeros(k + 1)
    b[0] = 0.5 * (fp + fm)
    if k >= 1:
        b[1] = 0.5 * (fp - fm)
    ft = None if df is not None else np.asarray(f(t), dtype=float)
    dft = np.asarray(df(t), dtype=float) if df is not None else None
    for j in range(1, k):
        if df is not None:
            integral = np.dot(w, dft * legendre_eval(j, t))
        else:
            # l_j(+-1) = (+-1)^j
            boundary = fp - (-1) ** j * fm
            integral = boundary - np.dot(w, ft * legendre_deriv(j, t))
        b[j + 1] = (j + 0.5) * integral
    return b


@dataclass(frozen=True)
class MTypeExpansion:
    """Truncated M-type expansion sum_{i,j<=k} b[i, j] M_i(s) M_j(t) on a cell.

    ``cell`` is the physical box ``((x_lo, x_hi), (y_lo, y_hi))`` the reference
    cell [-1, 1]^2 maps onto.
    """

    k: int
    coeffs: np.ndarray
    cell: tuple = ((-1.0, 1.0), (-1.0, 1.0))

    def to_reference(self, x, y):
        (x0, x1), (y0, y1) = self.cell
        s = (2.0 * np.asarray(x, dtype=float) - x0 - x1) / (x1 - x0)
        t = (2.0 * np.asarray(y, dtype=float) - y0 - y1) / (y1 - y0)
        return s, t

    def eval_reference(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        ms = [mtype_eval(i, s) for i in range(self.k + 1)]
        mt = [mtype_eval(j, t) for j in range(self.k + 1)]
        out = np.zeros(np.broadcast(s, t).shape)
        for i in range(self.k + 1):
            for j in range(self.k + 1):
                if self.coeffs[i, j] != 0.0:
                    out = out + self.coeffs[i, j] * ms[i] * mt[j]
        return out if out.ndim else float(out)

    def __call__(self, x, y):
        return self.eval_reference(*self.to_reference(x, y))


def mtype_project_2d(f, k, f_st, f_s=None, f_t=None, cell=None):
    """M-type Q^k projection of ``f`` on a rectangular cell.

    ``f`` and its derivatives take physical coordinates ``(x, y)``.  The mixed
    derivative ``f_st`` must be supplied; edge terms use ``f_s``/``f_t`` when
    given and integration by parts on ``f`` otherwise.  Derivatives are with
    respect to the physical variables and are rescaled to the reference cell.
    """
    if cell is None:
        cell = ((-1.0, 1.0), (-1.0, 1.0))
    (x0, x1), (y0, y1) = cell
    hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
    xc, yc = 0.5 * (x0 + x1), 0.5 * (y0 + y1)

    def fr(s, t):
        return f(xc + hx * s, yc + hy * t)

    rule = _dense_rule()
    q, w = rule.nodes, rule.weights
    b = np.zeros((k + 1, k + 1))
    corners = {(a, c): float(fr(a, c)) for a in (-1.0, 1.0) for c in (-1.0, 1.0)}
    b[0, 0] = 0.25 * sum(corners.values())

    def edge_integral(fixed_axis, side, m):
        # int_{-1}^{1} d/dvar fr(...) l_m(var) d var along the edge
        if fixed_axis == 0:
            line = np.asarray(fr(side, q), dtype=float) * np.ones_like(q)
            deriv = None if f_t is None else hy * np.asarray(f_t(xc + hx * side, yc + hy * q))
        else:
            line = np.asarray(fr(q, side), dtype=float) * np.ones_like(q)
            deriv = None if f_s is None else hx * np.asarray(f_s(xc + hx * q, yc + hy * side))
        if deriv is not None:
            return float(np.dot(w, deriv * legendre_eval(m, q)))
        end_p = corners[(side, 1.0)] if fixed_axis == 0 else corners[(1.0, side)]
        end_m = corners[(side, -1.0)] if fixed_axis == 0 else corners[(-1.0, side)]
        return end_p - (-1) ** m * end_m - float(np.dot(w, line * legendre_deriv(m, q)))

    for j in range(1, k + 1):
        plus = edge_integral(0, 1.0, j - 1)
        minus = edge_integral(0, -1.0, j - 1)
        b[0, j] = (2 * j - 1) / 4.0 * (plus + minus)
        plus = edge_integral(1, 1.0, j - 1)
        minus = edge_integral(1, -1.0, j - 1)
        b[j, 0] = (2 * j - 1) / 4.0 * (plus + minus)
    S, T = np.meshgrid(q, q, indexing="ij")
    fst = hx * hy * np.asarray(f_st(xc + hx * S, yc + hy * T), dtype=float) * np.ones_like(S)
    for i in range(1, k + 1):
        li = legendre_eval(i - 1, q)
        for j in range(1, k + 1):
            lj = legendre_eval(j - 1, q)
            b[i, j] = (2 * i - 1) * (2 * j - 1) / 4.0 * float((w * li) @ fst @ (w * lj))
    return MTypeExpansion(k, b, (tuple(cell[0]), tuple(cell[1])))
