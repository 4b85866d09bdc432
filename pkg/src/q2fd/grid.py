"""Uniform tensor grids, grid functions and the discrete Z0 norms.

Grid values are stored as arrays with the axis order reversed, ``(ny, nx)`` in
2D and ``(nz, ny, nx)`` in 3D, so that ``U[j, i] = u(x_i, y_j)`` and the
column-major flattening ``U.ravel(order="F")`` is the ``vec`` layout the
Kronecker identities ``(B^T kron A) vec(X) = vec(A X B)`` assume.
"""

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TensorGrid",
    "GridFunction",
    "build_grid",
    "sample",
    "vec",
    "unvec",
    "norm_2_Z0",
    "norm_inf_Z0",
    "restrict",
    "inflate",
    "write_csv",
    "read_csv",
]

REGIONS = ("full", "interior", "boundary")


@dataclass(frozen=True)
class TensorGrid:
    """Uniform grid whose points are the 3-point Gauss-Lobatto nodes of a Q2 mesh.

    ``n`` holds the interior point count per axis (x first); each is odd so
    that ``(n + 1) / 2`` Q2 cells tile the axis.
    """

    n: tuple
    extents: tuple

    def __post_init__(self):
        if len(self.n) != len(self.extents) or not 1 <= len(self.n) <= 3:
            raise ValueError("grid needs 1 to 3 axes with one extent per axis")
        for ns in self.n:
            if ns < 1 or ns % 2 == 0:
                raise ValueError(f"interior counts must be odd and positive, got {self.n}")
        for lo, hi in self.extents:
            if not hi > lo:
                raise ValueError(f"empty axis extent ({lo}, {hi})")

    @property
    def dims(self):
        return len(self.n)

    @property
    def cells(self):
        return tuple((ns + 1) // 2 for ns in self.n)

    @property
    def h(self):
        return tuple((hi - lo) / (ns + 1) for ns, (lo, hi) in zip(self.n, self.extents))

    @property
    def npts(self):
        """Point count per axis including the two boundary points."""
        return tuple(ns + 2 for ns in self.n)

    @property
    def cell_volume_factor(self):
        return float(np.prod(self.h))

    def axis(self, s):
        lo, hi = self.extents[s]
        return lo + (hi - lo) * np.arange(self.n[s] + 2) / (self.n[s] + 1)

    def shape(self, region="full"):
        """Array shape of a grid function, axes reversed (``(ny, nx)`` in 2D)."""
        counts = self.npts if region != "interior" else self.n
        return tuple(reversed(counts))

    def size(self, region="full"):
        return int(np.prod(self.shape(region)))

    def mesh(self, region="full"):
        """Coordinate arrays ``(x, y[, z])`` broadcast to :meth:`shape`."""
        axes = [self.axis(s) for s in range(self.dims)]
        if region == "interior":
            axes = [a[1:-1] for a in axes]
        grids = np.meshgrid(*reversed(axes), indexing="ij")
        return tuple(reversed(grids))

    def boundary_mask(self):
        mask = np.zeros(self.shape("full"), dtype=bool)
        for ax in range(self.dims):
            idx = [slice(None)] * self.dims
            for end in (0, -1):
                idx[ax] = end
                mask[tuple(idx)] = True
        return mask

    def cell_to_grid(self, cell, local):
        """Grid index tuple (x first) of local Lobatto node ``local`` of ``cell``."""
        out = []
        for s, (c, a) in enumerate(zip(cell, local)):
            if not 0 <= c < self.cells[s] or not 0 <= a <= 2:
                raise IndexError(f"cell {cell} / local {local} out of range")
            out.append(2 * c + a)
        return tuple(out)

    def grid_to_cells(self, index):
        """All ``(cell, local)`` pairs owning grid point ``index`` (x first).

        Knots between cells belong to two cells per axis.
        """
        per_axis = []
        for s, i in enumerate(index):
            if not 0 <= i < self.npts[s]:
                raise IndexError(f"grid index {index} out of range")
            options = []
            if i % 2 == 1:
                options.append((i // 2, 1))
            else:
                if i // 2 - 1 >= 0:
                    options.append((i // 2 - 1, 2))
                if i // 2 < self.cells[s]:
                    options.append((i // 2, 0))
            per_axis.append(options)
        pairs = [((), ())]
        for options in per_axis:
            pairs = [(c + (oc,), l + (ol,)) for c, l in pairs for oc, ol in options]
        return pairs


def build_grid(extents, cells_per_axis):
    """Grid for a Q2 mesh with ``cells_per_axis`` cells on the box ``extents``.

    >>> build_grid([(0, 1), (0, 2)], (2, 4)).n
    (3, 7)
    """
    cells = tuple(int(c) for c in np.atleast_1d(cells_per_axis))
    if any(c < 1 for c in cells):
        raise ValueError(f"cell counts must be >= 1, got {cells}")
    extents = tuple((float(lo), float(hi)) for lo, hi in extents)
    if len(extents) != len(cells):
        raise ValueError("need one extent per axis")
    return TensorGrid(tuple(2 * c - 1 for c in cells), extents)


@dataclass
class GridFunction:
    """Values on a grid in matrix layout; ``region`` is full or interior."""

    grid: TensorGrid
    values: np.ndarray
    region: str = "full"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.region not in ("full", "interior"):
            raise ValueError(f"unknown region {self.region!r}")
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape(self.region)
        if self.values.shape != expected:
            if self.values.size == int(np.prod(expected)):
                self.values = unvec(self.values, expected)
            else:
                raise ValueError(
                    f"{self.region} grid function needs shape {expected}, got {self.values.shape}"
                )

    @property
    def vec(self):
        return vec(self.values)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            other = other.values
        return GridFunction(self.grid, self.values - other, self.region)


def vec(X):
    """Column-major vectorization."""
    return np.asarray(X).ravel(order="F")


def unvec(v, shape):
    return np.asarray(v).reshape(shape, order="F")


def sample(fn, grid, region="full"):
    """Sample ``fn(x, y[, z])`` on the grid.

    ``region="boundary"`` returns a full-grid function equal to ``fn`` on the
    boundary points and zero inside (the Dirichlet lifting data).
    """
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}, got {region!r}")
    coords = grid.mesh("interior" if region == "interior" else "full")
    vals = np.asarray(fn(*coords), dtype=float)
    vals = np.broadcast_to(vals, coords[0].shape).copy()
    if region == "boundary":
        vals[~grid.boundary_mask()] = 0.0
        region = "full"
    return GridFunction(grid, vals, region)


def _values_and_grid(err, grid):
    if isinstance(err, GridFunction):
        return err.values, err.grid
    if grid is None:
        raise ValueError("a grid is needed to normalize raw arrays")
    return np.asarray(err, dtype=float), grid


def norm_2_Z0(err, grid=None, h=None):
    """Discrete 2-norm ``sqrt(prod(h) * sum(err^2))`` over the given points.

    ``h`` overrides the spacing product taken from ``grid``.
    """
    if h is None:
        values, grid = _values_and_grid(err, grid)
        weight = grid.cell_volume_factor
    else:
        values = err.values if isinstance(err, GridFunction) else np.asarray(err, dtype=float)
        weight = float(np.prod(np.atleast_1d(h)))
    return float(np.sqrt(weight * np.sum(values**2)))


def norm_inf_Z0(err):
    values = err.values if isinstance(err, GridFunction) else np.asarray(err, dtype=float)
    return float(np.max(np.abs(values))) if values.size else 0.0


def restrict(gf):
    """Crop a full-grid function (or array) to its interior points."""
    if isinstance(gf, GridFunction):
        if gf.region != "full":
            raise ValueError("restrict expects a full-grid function")
        return GridFunction(gf.grid, restrict(gf.values), "interior")
    return np.asarray(gf)[(slice(1, -1),) * np.ndim(gf)]


def inflate(gf):
    """Pad an interior grid function (or array) with a zero boundary layer."""
    if isinstance(gf, GridFunction):
        if gf.region != "interior":
            raise ValueError("inflate expects an interior grid function")
        return GridFunction(gf.grid, inflate(gf.values), "full")
    return np.pad(np.asarray(gf, dtype=float), 1)


def write_csv(gf, path=None):
    """Write one CSV row per grid line (fixed y, and z in 3D); returns the text."""
    g = gf.grid
    buf = io.StringIO()
    header = "q2fd region={} n={} extents={}".format(
        gf.region,
        ",".join(map(str, g.n)),
        ";".join(f"{lo!r},{hi!r}" for lo, hi in g.extents),
    )
    rows = gf.values.reshape(-1, gf.values.shape[-1]) if gf.values.ndim > 1 else gf.values[None, :]
    np.savetxt(buf, rows, delimiter=",", header=header, fmt="%.17g")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_csv(source):
    """Inverse of :func:`write_csv`; ``source`` is a path or the CSV text."""
    if "\n" in str(source):
        text = str(source)
    else:
        with open(source) as fh:
            text = fh.read()
    first = text.splitlines()[0].lstrip("# ").split()
    if not first or first[0] != "q2fd":
        raise ValueError("missing q2fd CSV header")
    meta = dict(item.split("=", 1) for item in first[1:])
    n = tuple(int(v) for v in meta["n"].split(","))
    extents = tuple(tuple(float(v) for v in pair.split(",")) for pair in meta["extents"].split(";"))
    grid = TensorGrid(n, extents)
    data = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    return GridFunction(grid, data.reshape(grid.shape(meta["region"])), meta["region"])
