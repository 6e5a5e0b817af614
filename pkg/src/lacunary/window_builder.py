"""Finite weighted windows psi(s, t) = phi(p(s, t)) over rows E and columns F."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InputError
from .group_core import FiniteSet, FreeGroup, group_from_dict, group_with_inverses
from .serialization import SCHEMA_VERSION, content_hash


class Product(enum.Enum):
    """Group-law maps p(s, t)."""

    PRODUCT = "product"  # st
    PRODUCT_INV_RIGHT = "product_inv_right"  # s t^-1
    INV_LEFT_PRODUCT = "inv_left_product"  # s^-1 t


@dataclass(frozen=True)
class CustomProduct:
    """Explicit table (s, t) -> x with a declared uniform fiber bound.

    ``table`` must cover every pair of the window it is used on; fibers
    {t : p(s,t)=x} and {s : p(s,t)=x} may not exceed ``fiber_bound``.
    """

    table: Mapping
    fiber_bound: int = 1
    name: str = "custom"


def evaluate(p, group, s, t):
    if isinstance(p, CustomProduct):
        try:
            return p.table[(s, t)]
        except KeyError:
            raise InputError(
                f"custom table has no value for ({group.format(s)}, {group.format(t)})",
                row=group.format(s),
                col=group.format(t),
            ) from None
    g = group if p is Product.PRODUCT else group_with_inverses(group)
    if p is Product.PRODUCT:
        return g.mul(s, t)
    if p is Product.PRODUCT_INV_RIGHT:
        return g.mul(s, g.inv(t))
    return g.mul(g.inv(s), t)


def _product_name(p) -> str:
    return p.name if isinstance(p, CustomProduct) else p.value


@dataclass(frozen=True, eq=False)
class Window:
    """Sparse weighted array over rows x cols; only nonzero weights stored.

    ``entries`` maps (row index, col index) to a complex weight and is kept
    sorted by index pair.
    """

    rows: FiniteSet
    cols: FiniteSet
    entries: dict
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        nr, nc = len(self.rows), len(self.cols)
        for (i, j), w in sorted(self.entries.items()):
            if not (0 <= i < nr and 0 <= j < nc):
                raise InputError(f"entry ({i}, {j}) outside a {nr}x{nc} window")
            w = complex(w)
            if w != 0:
                clean[(int(i), int(j))] = w
        object.__setattr__(self, "entries", clean)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def is_01(self) -> bool:
        return all(w == 1 for w in self.entries.values())

    def arrays(self):
        """(row indices, col indices, complex values) in entry order."""
        n = self.nnz
        I = np.fromiter((k[0] for k in self.entries), dtype=np.int64, count=n)
        J = np.fromiter((k[1] for k in self.entries), dtype=np.int64, count=n)
        V = np.fromiter(self.entries.values(), dtype=np.complex128, count=n)
        return I, J, V

    def matrix(self) -> np.ndarray:
        M = np.zeros(self.shape, dtype=np.complex128)
        I, J, V = self.arrays()
        M[I, J] = V
        return M

    def real_matrix(self) -> np.ndarray:
        M = self.matrix()
        if np.any(M.imag != 0):
            raise InputError("window has complex weights")
        return M.real

    def weights2(self) -> np.ndarray:
        return np.abs(self.arrays()[2]) ** 2

    def scaled(self, factor: complex) -> "Window":
        prov = dict(self.provenance, scaled_by=[complex(factor).real, complex(factor).imag])
        return Window(self.rows, self.cols, {k: v * factor for k, v in self.entries.items()}, prov)

    def restrict(self, row_idx, col_idx) -> "Window":
        """Sub-window on the given row/col index lists (order preserved)."""
        rmap = {int(i): n for n, i in enumerate(row_idx)}
        cmap = {int(j): n for n, j in enumerate(col_idx)}
        rows = FiniteSet(self.rows.group, tuple(self.rows[i] for i in rmap))
        cols = FiniteSet(self.cols.group, tuple(self.cols[j] for j in cmap))
        ent = {(rmap[i], cmap[j]): w for (i, j), w in self.entries.items() if i in rmap and j in cmap}
        return Window(rows, cols, ent, dict(self.provenance, restricted=True))

    def to_dict(self) -> dict:
        return {
            "schema": "lacunary/window",
            "version": SCHEMA_VERSION,
            "group": self.rows.group.to_dict(),
            "col_group": self.cols.group.to_dict(),
            "rows": self.rows.formatted(),
            "cols": self.cols.formatted(),
            "entries": [[i, j, w.real, w.imag] for (i, j), w in self.entries.items()],
            "provenance": self.provenance,
        }

    @property
    def id(self) -> str:
        return content_hash(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Window":
        if d.get("schema") != "lacunary/window":
            raise InputError("not a window document")
        g = group_from_dict(d["group"])
        cg = group_from_dict(d.get("col_group", d["group"]))
        rows = FiniteSet(g, tuple(g.parse(s) for s in d["rows"]))
        cols = FiniteSet(cg, tuple(cg.parse(s) for s in d["cols"]))
        ent = {(int(e[0]), int(e[1])): complex(e[2], e[3]) for e in d["entries"]}
        return cls(rows, cols, ent, d.get("provenance", {}))

    @classmethod
    def from_matrix(cls, M, description="dense matrix") -> "Window":
        """Window over index sets 0..m-1, 0..n-1 of Z holding a dense array."""
        from .group_core import IntegerGroup

        M = np.asarray(M, dtype=np.complex128)
        if M.ndim != 2:
            raise InputError("matrix must be two-dimensional")
        g = IntegerGroup()
        rows = FiniteSet(g, tuple(range(M.shape[0])))
        cols = FiniteSet(g, tuple(range(M.shape[1])))
        ent = {(i, j): M[i, j] for i, j in zip(*np.nonzero(M))}
        return cls(rows, cols, ent, {"product": "explicit", "phi": description})


def _check_groups(E: FiniteSet, F: FiniteSet):
    ge, gf = group_with_inverses(E.group), group_with_inverses(F.group)
    if ge != gf:
        raise InputError(f"row group {E.group} and column group {F.group} differ")
    return ge


def _phi_items(phi: Mapping):
    return [(x, complex(w)) for x, w in phi.items() if complex(w) != 0]


def _describe_phi(group, phi_items) -> list:
    return [[group.format(x), w.real, w.imag] for x, w in sorted(phi_items, key=lambda xw: group.key(xw[0]))]


def build_window(phi: Mapping, p, E: FiniteSet, F: FiniteSet, description: str | None = None) -> Window:
    """psi(s, t) = phi(p(s, t)) on E x F, keeping nonzero values only."""
    items = _phi_items(phi)
    entries: dict = {}
    if isinstance(p, CustomProduct):
        g = E.group
        rb, cb = fiber_bound_check(p, E, F)
        if max(rb, cb) > p.fiber_bound:
            raise InputError(
                f"custom map violates the declared fiber bound {p.fiber_bound}",
                fibers=[rb, cb],
                offending=_offending_fiber(p, E, F),
            )
        lookup = dict(items)
        for i, s in enumerate(E):
            for j, t in enumerate(F):
                w = lookup.get(evaluate(p, g, s, t))
                if w:
                    entries[(i, j)] = w
        label_group = g
    else:
        g = _check_groups(E, F)
        label_group = g
        for i, s in enumerate(E):
            s_inv = g.inv(s)
            for x, w in items:
                # solve p(s, t) = x for t (unique by cancellation)
                if p is Product.PRODUCT:
                    t = g.mul(s_inv, x)
                elif p is Product.PRODUCT_INV_RIGHT:
                    t = g.mul(g.inv(x), s)
                else:
                    t = g.mul(s, x)
                j = F.get_index(t)
                if j is not None:
                    entries[(i, j)] = w
    prov = {"product": _product_name(p), "phi": description or _describe_phi(label_group, items)}
    return Window(E, F, entries, prov)


def relation_window(lam: FiniteSet, E: FiniteSet, F: FiniteSet) -> Window:
    """0/1 window of R = {(s, t) : st in lam} restricted to E x F."""
    phi = {x: 1.0 for x in lam}
    desc = {"indicator": lam.formatted(), "group": lam.group.to_dict()}
    return build_window(phi, Product.PRODUCT, E, F, description=desc)


def _fibers(p, E, F):
    g = E.group
    row_fib: Counter = Counter()
    col_fib: Counter = Counter()
    for s in E:
        for t in F:
            x = evaluate(p, g, s, t)
            row_fib[(s, x)] += 1
            col_fib[(t, x)] += 1
    return row_fib, col_fib


def fiber_bound_check(p, E: FiniteSet, F: FiniteSet) -> tuple[int, int]:
    """Largest fibers (row direction, column direction) of p over E x F."""
    if not len(E) or not len(F):
        return (0, 0)
    row_fib, col_fib = _fibers(p, E, F)
    return max(row_fib.values()), max(col_fib.values())


def _offending_fiber(p, E, F):
    g = E.group
    row_fib, col_fib = _fibers(p, E, F)
    (s, x), n = row_fib.most_common(1)[0]
    (t, y), m = col_fib.most_common(1)[0]
    if n >= m:
        return {"direction": "row", "fixed": g.format(s), "value": str(x), "size": n}
    return {"direction": "col", "fixed": g.format(t), "value": str(y), "size": m}


def additive_map(E: FiniteSet, F: FiniteSet) -> CustomProduct:
    """p(s, t) = s + t as an explicit table over integer windows."""
    if isinstance(E.group, FreeGroup):
        raise InputError("additive map needs integer windows")
    return CustomProduct({(s, t): s + t for s in E for t in F}, fiber_bound=1, name="sum")
