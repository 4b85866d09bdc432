"""Problem definitions for ``-div(a grad u) + b . grad u + c u = f``.

A problem file is plain text with one ``key=value`` pair per line; ``#``
starts a comment.  Keys are ``name``, ``domain`` (``x0,x1,y0,y1[,z0,z1]``),
``bc`` (``dirichlet`` or ``neumann``), ``u``, ``f``, ``c``, ``a11`` ... ``a33``
and ``b1`` ... ``b3``.  Without any ``aij`` key ``a`` is the identity; other
missing coefficients are zero.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .expr import Expr, ZERO, add, as_expr, differentiate, mul, neg, parse, sub, to_string

__all__ = [
    "ProblemSpec",
    "BUILTINS",
    "builtin",
    "load_problem",
    "parse_problem",
    "manufacture_rhs",
    "conormal_flux",
    "TABLE_MESHES",
]

VARS = ("x", "y", "z")

_A12_TABLE = "2+0.5*(sin(pi*x)+x^3)*(sin(pi*y)+y^3)+cos(x^4+y^3)"
_U_TABLE = "0.1*(sin(pi*x)+x^3)*(sin(pi*y)+y^3)+cos(x^4+y^3)"
_PSI = "x*exp(x^2+y)"


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients, data and boundary condition of one elliptic problem."""

    name: str
    domain: tuple
    a: tuple
    b: tuple
    c: Expr
    u: Expr = None
    f: Expr = None
    bc: str = "dirichlet"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        d = len(self.domain)
        if not 1 <= d <= 3:
            raise ValueError("domain must have 1 to 3 axes")
        if len(self.a) != d or any(len(row) != d for row in self.a) or len(self.b) != d:
            raise ValueError(f"a must be {d}x{d} and b of length {d}")
        if self.u is None and self.f is None:
            raise ValueError(f"problem {self.name!r} needs an exact solution u or a right-hand side f")
        if self.bc not in ("dirichlet", "neumann"):
            raise ValueError(f"bc must be dirichlet or neumann, got {self.bc!r}")
        for k in range(d):
            for l in range(k + 1, d):
                if to_string(self.a[k][l]) != to_string(self.a[l][k]):
                    raise ValueError(f"a{k + 1}{l + 1} and a{l + 1}{k + 1} must be equal")

    @property
    def dims(self):
        return len(self.domain)

    @property
    def is_laplacian(self):
        d = self.dims
        for k in range(d):
            for l in range(d):
                want = 1.0 if k == l else 0.0
                e = self.a[k][l]
                if not (e.variables() == frozenset() and float(e()) == want):
                    return False
        return all(_is_zero(e) for e in self.b) and _is_zero(self.c)

    @property
    def rhs(self):
        """``f`` as given, or manufactured from ``u``."""
        return self.f if self.f is not None else manufacture_rhs(self)

    def coefficient_fields(self):
        """``(a, b, c)`` as nested sequences of callables, ``None`` for zeros."""
        d = self.dims

        def fn(e):
            return None if _is_zero(e) else _vectorize(e)

        a = [[fn(self.a[k][l]) for l in range(d)] for k in range(d)]
        b = [fn(self.b[m]) for m in range(d)]
        return a, b, fn(self.c)

    def to_text(self):
        lines = [f"name={self.name}",
                 "domain=" + ",".join(f"{lo!r}" if lo != int(lo) else str(int(lo))
                                      for pair in self.domain for lo in pair),
                 f"bc={self.bc}"]
        d = self.dims
        for k in range(d):
            for l in range(d):
                if not _is_zero(self.a[k][l]):
                    lines.append(f"a{k + 1}{l + 1}={self.a[k][l]}")
        for m in range(d):
            if not _is_zero(self.b[m]):
                lines.append(f"b{m + 1}={self.b[m]}")
        if not _is_zero(self.c):
            lines.append(f"c={self.c}")
        if self.u is not None:
            lines.append(f"u={self.u}")
        if self.f is not None:
            lines.append(f"f={self.f}")
        return "\n".join(lines) + "\n"


def _is_zero(e):
    return e is None or (e.variables() == frozenset() and float(e()) == 0.0)


def _vectorize(e):
    def fn(*coords):
        return np.asarray(e(*coords), dtype=float)

    fn.expr = e
    return fn


def manufacture_rhs(p):
    """``f = -div(a grad u) + b . grad u + c u`` as an :class:`Expr`."""
    if p.u is None:
        raise ValueError(f"problem {p.name!r} has no exact solution to manufacture f from")
    d = p.dims
    grad = [differentiate(p.u, VARS[s]) for s in range(d)]
    f = mul(p.c, p.u)
    for k in range(d):
        flux = ZERO
        for l in range(d):
            flux = add(flux, mul(p.a[k][l], grad[l]))
        f = sub(f, differentiate(flux, VARS[k]))
    for m in range(d):
        f = add(f, mul(p.b[m], grad[m]))
    return f


def conormal_flux(p):
    """Outward conormal flux ``(a grad u) . n`` per face as ``{(axis, side): Expr}``."""
    if p.u is None:
        raise ValueError("Neumann data is derived from u, which is missing")
    d = p.dims
    grad = [differentiate(p.u, VARS[s]) for s in range(d)]
    out = {}
    for k in range(d):
        flux = ZERO
        for l in range(d):
            flux = add(flux, mul(p.a[k][l], grad[l]))
        out[k, 0] = neg(flux)
        out[k, 1] = flux
    return out


def _make(name, domain, bc, u=None, f=None, c="0", a=None, b=None, **meta):
    d = len(domain)
    a = a or {}
    b = b or {}
    A = tuple(tuple(as_expr(a.get((k, l), "1" if k == l and not a else "0"))
                    for l in range(d)) for k in range(d))
    B = tuple(as_expr(b.get(m, "0")) for m in range(d))
    return ProblemSpec(
        name=name,
        domain=tuple(tuple(float(v) for v in pair) for pair in domain),
        a=A,
        b=B,
        c=as_expr(c),
        u=None if u is None else as_expr(u),
        f=None if f is None else as_expr(f),
        bc=bc,
        meta=meta,
    )


def _table_problem(name, bc, diag, convection=False):
    a = {(0, 0): f"{diag}+30*y^5+x*cos(y)+y", (0, 1): _A12_TABLE,
         (1, 0): _A12_TABLE, (1, 1): f"{diag}+x^5"}
    b = {}
    if convection:
        psi = parse(_PSI)
        b = {0: differentiate(psi, "y"), 1: neg(differentiate(psi, "x"))}
    return _make(name, [(0, 1), (0, 2)], bc, u=_U_TABLE, c="1+x^4*y^3", a=a, b=b)


def _builtins():
    return {
        "dirichlet2d": _table_problem("dirichlet2d", "dirichlet", 10),
        "neumann2d": _table_problem("neumann2d", "neumann", 10),
        "convection2d": _table_problem("convection2d", "dirichlet", 100, convection=True),
        "laplace3d": _make(
            "laplace3d", [(0, 1)] * 3, "dirichlet",
            u="sin(pi*x)*sin(2*pi*y)*sin(3*pi*z)+(x-x^3)*(y^2-y^4)*(z-z^2)",
        ),
        "poisson1d": _make("poisson1d", [(0, 1)], "dirichlet", u="x*(1-x)"),
        "bilinear2d": _make("bilinear2d", [(0, 1), (0, 1)], "dirichlet", u="x*y"),
    }


BUILTINS = _builtins()

# FEM meshes (cells per axis) of the published convergence tables
TABLE_MESHES = {
    "dirichlet2d": [(2, 4), (4, 8), (8, 16), (16, 32), (32, 64), (64, 128), (128, 256)],
    "neumann2d": [(2, 4), (4, 8), (8, 16), (16, 32), (32, 64)],
    "laplace3d": [(4, 4, 4), (8, 8, 8), (16, 16, 16), (32, 32, 32), (64, 64, 64)],
    "convection2d": [(2, 4), (4, 8), (8, 16), (16, 32), (32, 64)],
    "poisson1d": [(1,), (2,), (4,), (8,)],
    "bilinear2d": [(1, 1), (2, 2), (4, 4)],
}


def builtin(name):
    """Return a registered problem; unknown names list what is available."""
    try:
        return BUILTINS[name]
    except KeyError:
        raise KeyError(
            f"unknown problem {name!r}; available: {', '.join(sorted(BUILTINS))}"
        ) from None


def parse_problem(text, name="problem"):
    """Parse the ``key=expression`` problem format."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key] = value
    if "domain" not in entries:
        raise ValueError("problem file needs a domain line")
    bounds = [float(v) for v in entries.pop("domain").split(",")]
    if len(bounds) % 2 or not 2 <= len(bounds) <= 6:
        raise ValueError("domain needs 2, 4 or 6 numbers")
    domain = [tuple(bounds[i:i + 2]) for i in range(0, len(bounds), 2)]
    d = len(domain)
    a, b = {}, {}
    for k in range(d):
        for l in range(d):
            key = f"a{k + 1}{l + 1}"
            if key in entries:
                a[k, l] = entries.pop(key)
        if f"b{k + 1}" in entries:
            b[k] = entries.pop(f"b{k + 1}")
    if a:
        a = {(k, l): a.get((k, l), "0") for k in range(d) for l in range(d)}
    name = entries.pop("name", name)
    bc = entries.pop("bc", "dirichlet").lower()
    kwargs = {key: entries.pop(key) for key in ("u", "f", "c") if key in entries}
    if entries:
        raise ValueError(f"unknown keys in problem file: {', '.join(sorted(entries))}")
    return _make(name, domain, bc, a=a, b=b, **kwargs)


def load_problem(name_or_path):
    """A builtin by name, or a problem file by path."""
    if name_or_path in BUILTINS:
        return BUILTINS[name_or_path]
    path = Path(name_or_path)
    if path.exists():
        return parse_problem(path.read_text(), name=path.stem)
    return builtin(name_or_path)


def with_bc(p, bc):
    return replace(p, bc=bc)
