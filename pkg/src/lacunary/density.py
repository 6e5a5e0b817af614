"""Submatrix density: max over |E'| = |F'| = N of sum_{E' x F'} |psi|^2 / N."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GuardError, InputError
from .serialization import SCHEMA_VERSION
from .window_builder import Window

EXACT_SIDE_LIMIT = 14
DEFAULT_RESTARTS = 32
_CHUNK = 1 << 14


@dataclass
class DensityCertificate:
    window_id: str
    D: float
    N: int
    rows: list
    cols: list
    mode: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "lacunary/density-certificate",
            "version": SCHEMA_VERSION,
            "window_id": self.window_id,
            "D": self.D,
            "N": self.N,
            "rows": list(self.rows),
            "cols": list(self.cols),
            "mode": self.mode,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DensityCertificate":
        return cls(d["window_id"], float(d["D"]), int(d["N"]), list(d["rows"]), list(d["cols"]), d["mode"], d.get("params", {}))


def witness_mass(window: Window, rows, cols) -> float:
    rs, cs = set(int(i) for i in rows), set(int(j) for j in cols)
    return float(sum(abs(w) ** 2 for (i, j), w in window.entries.items() if i in rs and j in cs))


def verify_density(cert: DensityCertificate, window: Window, tol: float = 1e-12) -> tuple[bool, float]:
    """Recompute the ratio over the witness; returns (ok, recomputed D)."""
    if len(cert.rows) != cert.N or len(cert.cols) != cert.N or len(set(cert.rows)) != cert.N or len(set(cert.cols)) != cert.N:
        return False, float("nan")
    if cert.N == 0:
        return cert.D == 0, 0.0
    d = witness_mass(window, cert.rows, cert.cols) / cert.N
    return abs(d - cert.D) <= tol * max(1.0, abs(d)), d


def _reduced(window: Window):
    """Dense |psi|^2 on nonzero rows/cols plus the original indices."""
    I, J, _ = window.arrays()
    w2 = window.weights2()
    ri = np.unique(I)
    ci = np.unique(J)
    W = np.zeros((len(ri), len(ci)))
    W[np.searchsorted(ri, I), np.searchsorted(ci, J)] = w2
    return W, ri, ci


def _finish(window, rows, cols, mode, params) -> DensityCertificate:
    rows = sorted(int(i) for i in rows)
    cols = sorted(int(j) for j in cols)
    N = len(rows)
    D = witness_mass(window, rows, cols) / N if N else 0.0
    return DensityCertificate(window.id, D, N, rows, cols, mode, params)


def exact_density(window: Window, max_side: int = EXACT_SIDE_LIMIT) -> DensityCertificate:
    """Exhaustive maximum of the density ratio.

    Enumerates every subset E' of the smaller side (after dropping empty
    rows and columns, which never help); for fixed E' the best F' is the N
    heaviest columns of E'.
    """
    if window.nnz == 0:
        return DensityCertificate(window.id, 0.0, 0, [], [], "exact", {"max_side": max_side})
    W, ri, ci = _reduced(window)
    transposed = W.shape[0] > W.shape[1]
    if transposed:
        W = W.T
        ri, ci = ci, ri
    k, ncols = W.shape
    if k > max_side:
        raise GuardError(
            f"exact density needs 2^{k} subsets (limit side {max_side}); use heuristic_density",
            side=k,
            max_side=max_side,
        )
    best = (-1.0, 0, 0)  # ratio, N, mask
    bit_values = 1 << np.arange(k, dtype=np.int64)
    total = 1 << k
    for start in range(1, total, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = ((masks[:, None] & bit_values[None, :]) > 0).astype(float)
        N = bits.sum(axis=1).astype(np.int64)
        colmass = bits @ W
        colmass = -np.sort(-colmass, axis=1)
        csum = np.cumsum(colmass, axis=1)
        ratio = csum[np.arange(len(masks)), N - 1] / N
        # deterministic tie-break: larger ratio, then smaller N, then smaller mask
        idx = np.lexsort((masks, N, -ratio))[0]
        cand = (float(ratio[idx]), int(N[idx]), int(masks[idx]))
        if cand[0] > best[0] * (1 + 1e-13) or (
            cand[0] >= best[0] * (1 - 1e-13) and (cand[1], cand[2]) < (best[1], best[2])
        ):
            best = cand
    _, N, mask = best
    sel = [q for q in range(k) if mask >> q & 1]
    colmass = W[sel].sum(axis=0)
    top = np.argsort(-colmass, kind="stable")[:N]
    rows, cols = ri[sel], ci[top]
    if transposed:
        rows, cols = cols, rows
    return _finish(window, rows, cols, "exact", {"max_side": max_side})


def _climb(W, WT, rows, N):
    """Alternate best responses; each step is optimal for one side given the other."""
    value = -1.0
    while True:
        colmass = np.asarray(W[rows].sum(axis=0)).ravel()
        cols = np.argsort(-colmass, kind="stable")[:N]
        rowmass = np.asarray(WT[cols].sum(axis=0)).ravel()
        new_rows = np.argsort(-rowmass, kind="stable")[:N]
        new_value = rowmass[new_rows].sum() / N
        if new_value <= value * (1 + 1e-14):
            return value, rows, cols
        value, rows = new_value, new_rows


def _peel(Wd):
    """Balanced greedy peeling: drop the lightest row and column together.

    Returns the row sets visited, largest first.
    """
    m, n = Wd.shape
    rows_alive = np.ones(m, dtype=bool)
    cols_alive = np.ones(n, dtype=bool)
    # start balanced: keep the heaviest min(m, n) on the longer side
    k = min(m, n)
    if m > k:
        rows_alive[np.argsort(Wd.sum(axis=1), kind="stable")[: m - k]] = False
    if n > k:
        cols_alive[np.argsort(Wd.sum(axis=0), kind="stable")[: n - k]] = False
    rdeg = Wd[:, cols_alive].sum(axis=1)
    cdeg = Wd[rows_alive].sum(axis=0)
    states = []
    for _ in range(k):
        states.append(np.nonzero(rows_alive)[0])
        r = np.where(rows_alive, rdeg, np.inf).argmin()
        c = np.where(cols_alive, cdeg, np.inf).argmin()
        rows_alive[r] = False
        cols_alive[c] = False
        cdeg -= Wd[r]
        rdeg -= Wd[:, c]
    return states


def heuristic_density(
    window: Window,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    warm_start: DensityCertificate | None = None,
) -> DensityCertificate:
    """Lower bound on the density from an explicit witness.

    For every N the search starts from the N heaviest rows and alternates
    optimal column/row choices until the ratio stops increasing; every state
    of a balanced greedy peeling is climbed the same way. Each of the
    ``restarts`` extra climbs either perturbs the incumbent (swapping a
    random quarter of its rows) or starts from a random row set. A
    ``warm_start`` witness from a sub-window, given in this window's
    indices, seeds one more climb so nested scans stay monotone.
    """
    params = {"restarts": restarts, "seed": seed}
    if window.nnz == 0:
        return DensityCertificate(window.id, 0.0, 0, [], [], "heuristic", params)
    I, J, _ = window.arrays()
    w2 = window.weights2()
    ri = np.unique(I)
    ci = np.unique(J)
    W = sp.csr_matrix((w2, (np.searchsorted(ri, I), np.searchsorted(ci, J))), shape=(len(ri), len(ci)))
    WT = W.T.tocsr()
    m, n = W.shape
    kmax = min(m, n)
    rowmass = np.asarray(W.sum(axis=1)).ravel()
    order = np.argsort(-rowmass, kind="stable")
    best = (-1.0, None, None)

    def consider(N, rows):
        nonlocal best
        value, r, c = _climb(W, WT, rows, N)
        if value > best[0] * (1 + 1e-13):
            best = (value, r, c)

    if warm_start is not None and warm_start.N:
        rows = np.searchsorted(ri, [i for i in warm_start.rows if i in set(ri.tolist())])
        if len(rows) == warm_start.N:
            consider(warm_start.N, rows)
    for N in range(1, kmax + 1):
        consider(N, order[:N])
    if m * n <= 4 * 10**6:
        for rows in _peel(W.toarray()):
            consider(len(rows), rows)
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        if rng.random() < 0.5:
            rows = np.array(best[1])
            N = len(rows)
            k = max(1, N // 4)
            outside = np.setdiff1d(np.arange(m), rows)
            if len(outside):
                k = min(k, len(outside))
                rows[rng.choice(N, size=k, replace=False)] = rng.choice(outside, size=k, replace=False)
        else:
            N = int(rng.integers(1, kmax + 1))
            rows = rng.choice(m, size=N, replace=False)
        consider(N, np.sort(rows))
    _, r, c = best
    return _finish(window, ri[r], ci[c], "heuristic", params)


def density(
    window: Window,
    max_side: int = EXACT_SIDE_LIMIT,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    warm_start: DensityCertificate | None = None,
) -> DensityCertificate:
    """Exact density when the window is small enough, heuristic otherwise."""
    try:
        return exact_density(window, max_side=max_side)
    except GuardError:
        return heuristic_density(window, restarts=restarts, seed=seed, warm_start=warm_start)


@dataclass
class ScanPoint:
    label: str
    size: int
    certificate: DensityCertificate


def density_growth_scan(lam, schedule, max_side: int = EXACT_SIDE_LIMIT, restarts: int = DEFAULT_RESTARTS, seed: int = 0):
    """Density certificates for relation windows of ``lam`` along a schedule.

    ``schedule`` is a sequence of (label, E, F) triples of increasing windows.
    """
    from .window_builder import relation_window

    if not schedule:
        raise InputError("window schedule is empty")
    out = []
    prev = None
    for label, E, F in schedule:
        w = relation_window(lam, E, F)
        out.append(ScanPoint(label, len(E), density(w, max_side, restarts, seed, warm_start=_carry(prev, w))))
        prev = (w, out[-1].certificate)
    return out


def _carry(prev, window: Window):
    """Re-index the previous window's witness into ``window`` when it is contained."""
    if prev is None:
        return None
    old_w, cert = prev
    try:
        rows = [window.rows.index(old_w.rows[i]) for i in cert.rows]
        cols = [window.cols.index(old_w.cols[j]) for j in cert.cols]
    except KeyError:
        return None
    return DensityCertificate(window.id, cert.D, cert.N, rows, cols, cert.mode)
