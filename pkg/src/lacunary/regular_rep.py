"""Truncated left regular representation and operator-norm estimates.

``build_operator`` compresses sum_x lambda(x) (x) a(x) to l2(ball(R)) (x) C^d,
where lambda(x) delta_t = delta_{xt}. Compressions only lose norm, so every
value reported here is a lower bound labelled with its radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GuardError, InputError, NonConvergenceError, VerificationError
from .group_core import FiniteSet, FreeGroup, IntegerGroup, ball, ball_size, group_with_inverses

MAX_DIM = 2 * 10**6
MAX_NNZ = 5 * 10**7


@dataclass
class TruncatedOperator:
    radius: int
    d: int
    matrix: sp.csr_matrix
    route: str  # "sparse" on the ball itself, "quotient" on symmetry classes
    ball_size: int
    basis: FiniteSet | None = None
    description: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class NormReport:
    value: float
    iterations: int
    last_change: float
    residual: float
    converged: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def truncation_ball(group, radius: int, cap: int = MAX_DIM) -> FiniteSet:
    """ball(R) in a free group, or {-R..R} in Z (N is embedded in Z)."""
    group = group_with_inverses(group)
    if isinstance(group, IntegerGroup):
        if 2 * radius + 1 > cap:
            raise GuardError(f"interval of radius {radius} exceeds cap {cap}", cap=cap)
        return FiniteSet.interval(group, -radius, radius)
    return ball(group, radius, cap=cap)


def _coefficient_blocks(f: dict, group):
    items = []
    d = None
    for x, a in f.items():
        x = group.validate(tuple(x) if isinstance(x, list) else x)
        A = np.atleast_2d(np.asarray(a, dtype=np.complex128))
        if A.shape[0] != A.shape[1]:
            raise InputError(f"coefficient of {group.format(x)} is not a square block")
        if d is None:
            d = A.shape[0]
        elif A.shape[0] != d:
            raise InputError("coefficient blocks differ in size")
        if np.any(A):
            items.append((x, A))
    return items, (d or 1)


def build_operator(f: dict, group, radius: int, max_dim: int = MAX_DIM, max_nnz: int = MAX_NNZ) -> TruncatedOperator:
    """Compression of sum_x lambda(x) (x) f(x) to l2(ball(R)) (x) C^d.

    ``f`` maps group elements to scalars or d x d blocks. Row s, column t
    carries the block f(x) for the unique x with s = x t.
    """
    group = group_with_inverses(group)
    items, d = _coefficient_blocks(f, group)
    if isinstance(group, FreeGroup):
        size = ball_size(group, radius)
    else:
        size = 2 * radius + 1
    if size * d > max_dim:
        raise GuardError(f"operator dimension {size}*{d} exceeds cap {max_dim}", size=size, d=d, cap=max_dim)
    if size * len(items) * d * d > max_nnz:
        raise GuardError(f"operator would hold up to {size * len(items) * d * d} entries (cap {max_nnz})", cap=max_nnz)
    basis = truncation_ball(group, radius, cap=max_dim)
    rows, cols, blocks = [], [], []
    for j, t in enumerate(basis):
        for x, A in items:
            i = basis.get_index(group.mul(x, t))
            if i is not None:
                rows.append(i)
                cols.append(j)
                blocks.append(A)
    M = _assemble(rows, cols, blocks, size, d)
    desc = {"support": [group.format(x) for x, _ in items], "d": d}
    return TruncatedOperator(radius, d, M, "sparse", size, basis, desc)


def _assemble(rows, cols, blocks, size, d):
    if not blocks:
        return sp.csr_matrix((size * d, size * d), dtype=np.complex128)
    B = np.stack(blocks)  # (k, d, d)
    r = np.asarray(rows)[:, None, None] * d + np.arange(d)[None, :, None]
    c = np.asarray(cols)[:, None, None] * d + np.arange(d)[None, None, :]
    r, c = np.broadcast_arrays(r, c)
    M = sp.coo_matrix((B.ravel(), (r.ravel(), c.ravel())), shape=(size * d, size * d))
    return M.tocsr()


def generator_quotient(rank: int, coefficient: complex, radius: int) -> TruncatedOperator:
    """c * sum_i lambda(g_i) on ball(R) of F_rank, reduced to path-sign classes.

    A reduced word w = a_1 ... a_k hangs below a_2 ... a_k in the Cayley tree
    of left multiplication; the edge is traversed by lambda(g_i) downwards
    when a_1 = g_i and upwards when a_1 = g_i^-1. Grouping words by the
    sign pattern of their first letters along the path to e gives an
    equitable partition for the operator and its adjoint, so the normalised
    class matrix has the same singular values on class-constant vectors,
    and the top singular vectors (Perron vectors of the nonnegative T*T
    and T T*) are class-constant. The quotient has 2^(R+1) - 1 classes.
    """
    if rank < 1:
        raise InputError("rank must be positive")
    if radius > 22:
        raise GuardError("quotient radius above 22 needs more than 8M classes", radius=radius)
    n = rank
    # class ids in BFS order: signs stored as tuples of +1/-1, last = first letter
    counts = [1]
    signs = [0]
    parent = [-1]
    layer = [0]
    for _ in range(radius):
        nxt = []
        for k in layer:
            b = signs[k]
            for bit in (1, -1):
                # children: n positive and n negative letters, minus the one cancelling
                per = n - (1 if (b != 0 and bit != b) else 0)
                counts.append(counts[k] * per)
                signs.append(bit)
                parent.append(k)
                nxt.append(len(counts) - 1)
        layer = nxt
    cnt = np.asarray(counts, dtype=float)
    child = np.arange(1, len(counts))
    par = np.asarray(parent[1:])
    bit = np.asarray(signs[1:])
    w = cnt[child] / np.sqrt(cnt[child] * cnt[par]) * coefficient
    # +1: parent -> child (row child, col parent); -1: child -> parent
    r = np.where(bit > 0, child, par)
    c = np.where(bit > 0, par, child)
    size = len(counts)
    M = sp.csr_matrix((w.astype(np.complex128), (r, c)), shape=(size, size))
    desc = {"support": [f"a{i}" for i in range(1, n + 1)], "d": 1, "classes": size}
    return TruncatedOperator(radius, 1, M, "quotient", ball_size(FreeGroup(n), radius), None, desc)


def op_norm(T, tol: float = 1e-8, max_iter: int = 100_000, seed: int = 0) -> NormReport:
    """Largest singular value by power iteration on T*T.

    Stops when the relative change of the estimate drops below ``tol``.
    Estimates increase towards the norm from below.
    """
    if not tol > 0:
        raise InputError("tol must be positive")
    M = T.matrix if isinstance(T, TruncatedOperator) else sp.csr_matrix(T)
    n = M.shape[1]
    if n == 0 or M.nnz == 0:
        return NormReport(0.0, 0, 0.0, 0.0, True)
    MH = M.conj().T.tocsr()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    value = prev = 0.0
    for it in range(1, max_iter + 1):
        w = M @ v
        value = float(np.linalg.norm(w))
        u = MH @ w
        nu = np.linalg.norm(u)
        if nu == 0:
            return NormReport(0.0, it, 0.0, 0.0, True)
        change = abs(value - prev) / value
        if change < tol:
            residual = float(np.linalg.norm(u - value**2 * v)) / max(value**2, 1e-300)
            return NormReport(value, it, change, residual, True)
        prev = value
        v = u / nu
    raise NonConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        last=value,
        previous=prev,
        gap=abs(value - prev),
    )


@dataclass
class LSetRatio:
    ratio: float
    norm: float
    rhs: float
    radius: int
    route: str
    supported_in_ball: bool
    norm_report: NormReport

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "norm_report"}
        d["norm_report"] = self.norm_report.to_dict()
        d["label"] = f"truncated at R={self.radius}"
        return d


def coefficient_rhs(blocks) -> float:
    """max(||(sum a*a)^1/2||, ||(sum a a*)^1/2||)."""
    S1 = sum(A.conj().T @ A for A in blocks)
    S2 = sum(A @ A.conj().T for A in blocks)
    return math.sqrt(max(np.linalg.norm(S1, 2), np.linalg.norm(S2, 2)))


def _is_generator_family(lam: FiniteSet, items) -> tuple[bool, complex]:
    g = lam.group
    if not isinstance(g, FreeGroup):
        return False, 0
    if sorted(x for x, _ in items) != sorted(g.generators()) or len(items) != g.rank:
        return False, 0
    vals = [A for _, A in items]
    if any(A.shape != (1, 1) for A in vals):
        return False, 0
    c = vals[0][0, 0]
    return all(A[0, 0] == c for A in vals), c


def lset_ratio(
    lam: FiniteSet,
    coefficients,
    radius: int,
    tol: float = 1e-6,
    norm_tol: float = 1e-8,
    seed: int = 0,
    route: str = "auto",
    max_dim: int = MAX_DIM,
) -> LSetRatio:
    """Truncated ||sum_x lambda(x) (x) a(x)|| divided by the square-function bound.

    ``coefficients`` is a dict on Lambda, a list aligned with Lambda, or a
    single scalar/block used for every element. When the support lies in
    ball(R) the truncated norm is at least the bound (test vectors
    delta_e (x) xi for the operator and its adjoint), so a ratio below
    1 - tol raises VerificationError. ``route="auto"`` uses the exact
    class quotient for equal scalar weights on all generators of a free
    group and the sparse ball operator otherwise.
    """
    group = group_with_inverses(lam.group)
    if isinstance(coefficients, dict):
        f = dict(coefficients)
    elif isinstance(coefficients, (list, tuple)) and len(coefficients) == len(lam):
        f = dict(zip(lam, coefficients))
    else:
        f = {x: coefficients for x in lam}
    items, d = _coefficient_blocks(f, group)
    if d > 8:
        raise GuardError("coefficient blocks above 8x8 are not supported", d=d)
    if not items:
        raise InputError("all coefficients are zero; the ratio is undefined")
    rhs = coefficient_rhs([A for _, A in items])
    quotient_ok, c = _is_generator_family(lam, items)
    if route == "auto":
        route = "quotient" if quotient_ok else "sparse"
    if route == "quotient":
        if not quotient_ok:
            raise InputError("the quotient route needs equal scalar weights on all generators of F_n")
        T = generator_quotient(group.rank, c, radius)
    elif route == "sparse":
        T = build_operator(f, group, radius, max_dim=max_dim)
    else:
        raise InputError(f"unknown route {route!r}")
    rep = op_norm(T, tol=norm_tol, seed=seed)
    inside = all(group.length(x) <= radius for x, _ in items)
    ratio = rep.value / rhs
    if inside and ratio < 1 - tol:
        raise VerificationError(
            f"truncated ratio {ratio:.9f} below 1 although the support lies in the ball",
            ratio=ratio,
            radius=radius,
        )
    return LSetRatio(ratio, rep.value, rhs, radius, route, inside, rep)


def ratio_schedule(lam: FiniteSet, coefficients, radii, **kw) -> tuple[list, bool]:
    """lset_ratio along increasing radii plus whether the values are nondecreasing."""
    radii = list(radii)
    if radii != sorted(radii):
        raise InputError("radii must be increasing")
    out = [lset_ratio(lam, coefficients, R, **kw) for R in radii]
    tol = kw.get("norm_tol", 1e-8)
    monotone = all(b.ratio >= a.ratio * (1 - 10 * tol) for a, b in zip(out, out[1:]))
    return out, monotone
