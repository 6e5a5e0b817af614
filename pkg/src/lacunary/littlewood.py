"""Littlewood partitions and splits of a window.

A partition sends every entry either to Gamma_1 (charged to its row) or to
Gamma_2 (charged to its column). The constants are

    C1 = max_s (sum_{t: (s,t) in Gamma_1} |psi(s,t)|^2)^(1/2)
    C2 = max_t (sum_{s: (s,t) in Gamma_2} |psi(s,t)|^2)^(1/2)

and the solvers minimise max(C1, C2). Splits relax the assignment to
psi = psi_1 + psi_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import InputError, NonConvergenceError, VerificationError, WrongVariantError
from .serialization import SCHEMA_VERSION
from .window_builder import Window

EXACT_ENTRY_LIMIT = 20
CONSTANT_TOL = 1e-9


def _loads(window: Window, in_gamma1: np.ndarray):
    I, J, _ = window.arrays()
    w2 = window.weights2()
    m, n = window.shape
    rows = np.bincount(I[in_gamma1], w2[in_gamma1], minlength=m) if m else np.zeros(0)
    cols = np.bincount(J[~in_gamma1], w2[~in_gamma1], minlength=n) if n else np.zeros(0)
    return rows, cols


def partition_constants(window: Window, assignment) -> tuple[float, float]:
    """(C1, C2) for an assignment array with values 1 (row part) or 2 (column part)."""
    a = np.asarray(assignment)
    if a.shape != (window.nnz,) or not np.all((a == 1) | (a == 2)):
        raise InputError("assignment must hold 1 or 2 for every window entry")
    rows, cols = _loads(window, a == 1)
    c1 = math.sqrt(rows.max()) if rows.size else 0.0
    c2 = math.sqrt(cols.max()) if cols.size else 0.0
    return c1, c2


@dataclass
class PartitionCertificate:
    window_id: str
    assignment: np.ndarray
    C1: float
    C2: float
    optimality: str
    method: str
    degree_bound: int | None = None
    params: dict = field(default_factory=dict)

    @property
    def C(self) -> float:
        return max(self.C1, self.C2)

    def to_dict(self) -> dict:
        return {
            "schema": "lacunary/partition-certificate",
            "version": SCHEMA_VERSION,
            "window_id": self.window_id,
            "assignment": [int(x) for x in self.assignment],
            "C1": self.C1,
            "C2": self.C2,
            "C": self.C,
            "degree_bound": self.degree_bound,
            "optimality": self.optimality,
            "method": self.method,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PartitionCertificate":
        return cls(
            window_id=d["window_id"],
            assignment=np.asarray(d["assignment"], dtype=np.int8),
            C1=float(d["C1"]),
            C2=float(d["C2"]),
            optimality=d["optimality"],
            method=d["method"],
            degree_bound=d.get("degree_bound"),
            params=d.get("params", {}),
        )


@dataclass
class SplitCertificate:
    window_id: str
    psi1: np.ndarray  # values on the window entries, entry order
    psi2: np.ndarray
    R1: float
    R2: float
    residual: float
    lower_bound: float
    iterations: int
    params: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return max(self.R1, self.R2)

    def to_dict(self) -> dict:
        return {
            "schema": "lacunary/split-certificate",
            "version": SCHEMA_VERSION,
            "window_id": self.window_id,
            "psi1": [[z.real, z.imag] for z in self.psi1],
            "psi2": [[z.real, z.imag] for z in self.psi2],
            "R1": self.R1,
            "R2": self.R2,
            "value": self.value,
            "residual": self.residual,
            "lower_bound": self.lower_bound,
            "iterations": self.iterations,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitCertificate":
        return cls(
            window_id=d["window_id"],
            psi1=np.array([complex(a, b) for a, b in d["psi1"]], dtype=np.complex128),
            psi2=np.array([complex(a, b) for a, b in d["psi2"]], dtype=np.complex128),
            R1=float(d["R1"]),
            R2=float(d["R2"]),
            residual=float(d["residual"]),
            lower_bound=float(d["lower_bound"]),
            iterations=int(d["iterations"]),
            params=d.get("params", {}),
        )


# ---------------------------------------------------------------- 0/1 windows


def _flow_assignment(window: Window, C: int):
    """Gamma_1 mask achieving row counts <= C and column counts <= C, or None."""
    I, J, _ = window.arrays()
    m, n = window.shape
    deg = np.bincount(J, minlength=n)
    demand = np.maximum(deg - C, 0)
    need = int(demand.sum())
    if need == 0:
        return np.zeros(window.nnz, dtype=bool)
    G = nx.DiGraph()
    for j in np.nonzero(demand)[0]:
        G.add_edge("src", ("c", int(j)), capacity=int(demand[j]))
    for e, (i, j) in enumerate(zip(I, J)):
        if demand[j]:
            G.add_edge(("c", int(j)), ("r", int(i)), capacity=1)
    for i in np.unique(I[demand[J] > 0]):
        G.add_edge(("r", int(i)), "sink", capacity=C)
    value, flow = nx.maximum_flow(G, "src", "sink")
    if value < need:
        return None
    mask = np.zeros(window.nnz, dtype=bool)
    for e, (i, j) in enumerate(zip(I, J)):
        if demand[j] and flow[("c", int(j))].get(("r", int(i)), 0) > 0:
            mask[e] = True
    return mask


def min_partition_01(window: Window) -> PartitionCertificate:
    """Smallest integer C with a partition of row/column counts <= C.

    Binary search on C; each feasibility question is a max-flow problem in
    which column t must push max(0, deg(t) - C) of its entries into Gamma_1
    and each row absorbs at most C of them.
    """
    if not window.is_01():
        raise WrongVariantError("min_partition_01 needs a 0/1 window; use min_partition_weighted")
    if window.nnz == 0:
        return PartitionCertificate(window.id, np.zeros(0, np.int8), 0.0, 0.0, "exact", "flow", 0)
    I, J, _ = window.arrays()
    hi = int(max(np.bincount(I).max(), np.bincount(J).max()))
    lo = 1
    best = _flow_assignment(window, hi)
    while lo < hi:
        mid = (lo + hi) // 2
        mask = _flow_assignment(window, mid)
        if mask is None:
            lo = mid + 1
        else:
            hi, best = mid, mask
    assignment = np.where(best, 1, 2).astype(np.int8)
    c1, c2 = partition_constants(window, assignment)
    return PartitionCertificate(window.id, assignment, c1, c2, "exact", "flow", hi)


# ------------------------------------------------------------ weighted windows


def _greedy(I, J, w2, m, n):
    order = sorted(range(len(w2)), key=lambda e: (-w2[e], I[e], J[e]))
    rows = np.zeros(m)
    cols = np.zeros(n)
    in1 = np.zeros(len(w2), dtype=bool)
    cur = 0.0
    for e in order:
        r = rows[I[e]] + w2[e]
        c = cols[J[e]] + w2[e]
        if (max(cur, r), r) <= (max(cur, c), c):
            rows[I[e]] = r
            in1[e] = True
            cur = max(cur, r)
        else:
            cols[J[e]] = c
            cur = max(cur, c)
    return in1


def _objective(rows, cols):
    top = max(rows.max(initial=0.0), cols.max(initial=0.0))
    tol = 1e-12 * max(top, 1e-300)
    at_top = int(np.sum(rows >= top - tol) + np.sum(cols >= top - tol))
    return (top, at_top, float(rows @ rows + cols @ cols))


def _better(a, b):
    # strict lexicographic improvement with a relative tolerance on floats
    if a[0] < b[0] * (1 - 1e-12):
        return True
    if a[0] > b[0] * (1 + 1e-12):
        return False
    if a[1] != b[1]:
        return a[1] < b[1]
    return a[2] < b[2] * (1 - 1e-12)


def _local_search(I, J, w2, m, n, in1, max_passes=1000):
    rows = np.bincount(I[in1], w2[in1], minlength=m).astype(float)
    cols = np.bincount(J[~in1], w2[~in1], minlength=n).astype(float)
    obj = _objective(rows, cols)
    for _ in range(max_passes):
        improved = False
        for e in range(len(w2)):
            i, j, w = I[e], J[e], w2[e]
            sign = -1.0 if in1[e] else 1.0
            rows[i] += sign * w
            cols[j] -= sign * w
            cand = _objective(rows, cols)
            if _better(cand, obj):
                obj = cand
                in1[e] = not in1[e]
                improved = True
            else:
                rows[i] -= sign * w
                cols[j] += sign * w
        if not improved:
            break
    return in1


def _branch_and_bound(I, J, w2, m, n, incumbent_mask):
    order = sorted(range(len(w2)), key=lambda e: (-w2[e], I[e], J[e]))
    rows0 = np.bincount(I[incumbent_mask], w2[incumbent_mask], minlength=m)
    cols0 = np.bincount(J[~incumbent_mask], w2[~incumbent_mask], minlength=n)
    best = [max(rows0.max(initial=0.0), cols0.max(initial=0.0)), incumbent_mask.copy()]
    rows = [0.0] * m
    cols = [0.0] * n
    choice = np.zeros(len(w2), dtype=bool)
    Il, Jl, wl = [int(I[e]) for e in order], [int(J[e]) for e in order], [float(w2[e]) for e in order]
    nodes = 0

    def lower(k, cur):
        lb = cur
        for q in range(k, len(order)):
            lb = max(lb, min(rows[Il[q]] + wl[q], cols[Jl[q]] + wl[q]))
        return lb

    def dfs(k, cur):
        nonlocal nodes
        nodes += 1
        if k == len(order):
            if cur < best[0] * (1 - 1e-12):
                best[0] = cur
                mask = np.zeros(len(w2), dtype=bool)
                for q, e in enumerate(order):
                    mask[e] = choice[q]
                best[1] = mask
            return
        if lower(k, cur) >= best[0] * (1 - 1e-12):
            return
        i, j, w = Il[k], Jl[k], wl[k]
        rows[i] += w
        choice[k] = True
        dfs(k + 1, max(cur, rows[i]))
        rows[i] -= w
        cols[j] += w
        choice[k] = False
        dfs(k + 1, max(cur, cols[j]))
        cols[j] -= w

    dfs(0, 0.0)
    return best[1], nodes


def min_partition_weighted(window: Window, exact_limit: int = EXACT_ENTRY_LIMIT) -> PartitionCertificate:
    """Minimise max(C1, C2) over partitions of a weighted window.

    Exact by branch-and-bound up to ``exact_limit`` entries; otherwise a
    greedy seed refined by single-entry moves, whose value is an upper bound.
    """
    I, J, _ = window.arrays()
    w2 = window.weights2()
    m, n = window.shape
    if window.nnz == 0:
        return PartitionCertificate(window.id, np.zeros(0, np.int8), 0.0, 0.0, "exact", "trivial")
    in1 = _local_search(I, J, w2, m, n, _greedy(I, J, w2, m, n))
    params = {"exact_limit": exact_limit}
    if window.nnz <= exact_limit:
        in1, nodes = _branch_and_bound(I, J, w2, m, n, in1)
        optimality, method = "exact", "branch_and_bound"
        params["nodes"] = nodes
    else:
        optimality, method = "heuristic", "greedy_local_search"
    assignment = np.where(in1, 1, 2).astype(np.int8)
    c1, c2 = partition_constants(window, assignment)
    return PartitionCertificate(window.id, assignment, c1, c2, optimality, method, params=params)


# ---------------------------------------------------------------------- splits


def _split_from_theta(I, J, w2, m, n, theta):
    rows = np.bincount(I, theta**2 * w2, minlength=m)
    cols = np.bincount(J, (1 - theta) ** 2 * w2, minlength=n)
    return rows, cols


def min_split(
    window: Window,
    tol: float = 1e-7,
    patience: int = 50,
    max_iter: int = 20000,
    step: float = 0.5,
    seed_partition: PartitionCertificate | None = None,
) -> SplitCertificate:
    """Minimise max(R1, R2) over psi = psi_1 + psi_2 on the window support.

    The optimum may take psi_1 = theta * psi with theta in [0, 1]. The
    solver runs multiplicative-weights ascent on the concave dual

        D(lam, mu) = sum_e |psi_e|^2 lam_s mu_t / (lam_s + mu_t)

    over the simplex of row/column weights. Its gradient is the vector of
    row and column loads at theta_e = mu_t / (lam_s + mu_t), which is also
    the primal iterate; D is a certified lower bound on the squared optimum.
    Stops when the duality gap falls below ``tol`` (relative) or shrinks by
    less than ``tol`` over ``patience`` iterations.
    """
    I, J, V = window.arrays()
    w2 = np.abs(V) ** 2
    m, n = window.shape
    params = {"tol": tol, "patience": patience, "max_iter": max_iter, "step": step}
    if window.nnz == 0 or w2.max() == 0:
        z = np.zeros(window.nnz, dtype=np.complex128)
        return SplitCertificate(window.id, z, V.copy(), 0.0, 0.0, 0.0, 0.0, 0, params)

    if seed_partition is None:
        seed_partition = min_partition_weighted(window)
    best_theta = (seed_partition.assignment == 1).astype(float)
    rows, cols = _split_from_theta(I, J, w2, m, n, best_theta)
    best = max(rows.max(), cols.max())

    lam = np.zeros(m)
    mu = np.zeros(n)
    lam[np.unique(I)] = 1.0
    mu[np.unique(J)] = 1.0
    total = lam.sum() + mu.sum()
    lam /= total
    mu /= total
    dual = 0.0
    gaps: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        a, b = lam[I], mu[J]
        den = a + b
        safe = np.where(den > 0, den, 1.0)
        theta = np.where(den > 0, b / safe, 0.5)
        dual = max(dual, float(np.sum(w2 * np.where(den > 0, a * b / safe, 0.0))))
        rows, cols = _split_from_theta(I, J, w2, m, n, theta)
        F = max(rows.max(), cols.max())
        if F < best:
            best, best_theta = F, theta
        gap = (best - dual) / best
        gaps.append(gap)
        if gap <= tol:
            break
        if len(gaps) > patience and gaps[-patience - 1] - gap < tol:
            break
        lam = lam * np.exp(step * rows / F)
        mu = mu * np.exp(step * cols / F)
        total = lam.sum() + mu.sum()
        lam /= total
        mu /= total

    psi1 = best_theta * V
    psi2 = V - psi1
    residual = float(np.max(np.abs(V - psi1 - psi2)))
    if residual > CONSTANT_TOL:
        raise NonConvergenceError("split residual above tolerance", residual=residual, iterations=it)
    r1, r2 = split_constants(window, psi1, psi2)
    params["final_gap"] = float((best - dual) / best)
    return SplitCertificate(window.id, psi1, psi2, r1, r2, residual, math.sqrt(max(dual, 0.0)), it, params)


def split_constants(window: Window, psi1, psi2) -> tuple[float, float]:
    I, J, _ = window.arrays()
    m, n = window.shape
    rows = np.bincount(I, np.abs(psi1) ** 2, minlength=m)
    cols = np.bincount(J, np.abs(psi2) ** 2, minlength=n)
    return math.sqrt(rows.max(initial=0.0)), math.sqrt(cols.max(initial=0.0))


# ---------------------------------------------------------------- verification


@dataclass
class VerificationReport:
    passed: bool
    recomputed: dict
    stored: dict
    messages: list

    def to_dict(self) -> dict:
        return {"passed": self.passed, "recomputed": self.recomputed, "stored": self.stored, "messages": self.messages}


def _close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def verify_certificate(cert, window: Window | None, tol: float = CONSTANT_TOL) -> VerificationReport:
    """Recompute the constants of a partition or split certificate from the window."""
    if window is None:
        raise VerificationError("certificate refers to a window that is not available", window_id=cert.window_id)
    msgs = []
    if window.id != cert.window_id:
        msgs.append(f"window id mismatch: certificate {cert.window_id[:12]}, window {window.id[:12]}")
    if isinstance(cert, PartitionCertificate):
        stored = {"C1": cert.C1, "C2": cert.C2}
        try:
            c1, c2 = partition_constants(window, cert.assignment)
        except InputError as exc:
            return VerificationReport(False, {}, stored, msgs + [str(exc)])
        rec = {"C1": c1, "C2": c2}
        if cert.degree_bound is not None:
            # counts must respect the integer bound for 0/1 certificates
            I, J, _ = window.arrays()
            a = cert.assignment
            rc = np.bincount(I[a == 1], minlength=window.shape[0]).max(initial=0)
            cc = np.bincount(J[a == 2], minlength=window.shape[1]).max(initial=0)
            rec["max_counts"] = [int(rc), int(cc)]
            if max(rc, cc) > cert.degree_bound:
                msgs.append(f"counts {rc}, {cc} exceed degree bound {cert.degree_bound}")
    elif isinstance(cert, SplitCertificate):
        stored = {"R1": cert.R1, "R2": cert.R2, "residual": cert.residual}
        _, _, V = window.arrays()
        if cert.psi1.shape != V.shape or cert.psi2.shape != V.shape:
            return VerificationReport(False, {}, stored, msgs + ["split arrays do not match the window support"])
        r1, r2 = split_constants(window, cert.psi1, cert.psi2)
        res = float(np.max(np.abs(V - cert.psi1 - cert.psi2), initial=0.0))
        rec = {"R1": r1, "R2": r2, "residual": res}
        if res > tol:
            msgs.append(f"residual {res:.3e} exceeds {tol:.1e}")
    else:
        raise InputError(f"cannot verify object of type {type(cert).__name__}")
    for k in stored:
        if k in rec and k != "residual" and not _close(rec[k], stored[k], tol):
            msgs.append(f"{k}: stored {stored[k]!r}, recomputed {rec[k]!r}")
    return VerificationReport(not msgs, rec, stored, msgs)
