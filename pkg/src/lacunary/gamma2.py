"""Schur multiplier norms via the factorization norm gamma_2.

For a finite array Phi the Schur multiplier norm equals

    gamma_2(Phi) = min { max_s ||x(s)|| * max_t ||y(t)|| : Phi(s,t) = <x(s), y(t)> }

which is the SDP

    min c  s.t.  [[P, Phi], [Phi*, Q]] PSD,  diag(P) <= c,  diag(Q) <= c.

Complex arrays are handled over Hermitian matrices directly. Lower bounds
come from explicit contractions: for unit vectors u, v and a matrix A of
operator norm <= 1, the Schur product Phi o A has norm <= gamma_2(Phi).

The projective tensor norm is not computed; it sits between gamma_2 and
K_G * gamma_2, with the Grothendieck constant K_G left symbolic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .errors import GuardError, InputError, LacunaryError, NonConvergenceError
from .serialization import SCHEMA_VERSION, content_hash

MAX_SIDE = 40
EIGEN_FLOOR = 1e-10


@dataclass
class SdpSettings:
    tolerance: float = 1e-7
    max_iter: int = 100
    max_side: int = MAX_SIDE
    lower_restarts: int = 4
    seed: int = 0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InputError("SDP tolerance must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be at least 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def matrix_id(Phi: np.ndarray) -> str:
    return content_hash(matrix_to_json(Phi))


def matrix_to_json(Phi) -> dict:
    Phi = np.asarray(Phi, dtype=np.complex128)
    return {
        "schema": "lacunary/matrix",
        "version": SCHEMA_VERSION,
        "shape": list(Phi.shape),
        "re": Phi.real.tolist(),
        "im": Phi.imag.tolist(),
    }


def matrix_from_json(d) -> np.ndarray:
    """Dense matrix from a matrix document or a plain nested list of numbers."""
    if isinstance(d, list):
        try:
            M = np.array(d, dtype=np.complex128)
        except (TypeError, ValueError) as exc:
            raise InputError(f"not a numeric array: {exc}") from None
    elif isinstance(d, dict) and d.get("schema") == "lacunary/matrix":
        M = np.array(d["re"], dtype=float) + 1j * np.array(d.get("im", np.zeros_like(d["re"])), dtype=float)
    else:
        raise InputError("expected a matrix document or a nested list")
    if M.ndim != 2:
        raise InputError("matrix must be two-dimensional")
    return M


def _cx_rows(a):
    return [[[z.real, z.imag] for z in row] for row in np.asarray(a, dtype=np.complex128)]


def _cx_from_rows(rows, width_hint=0) -> np.ndarray:
    if not rows:
        return np.zeros((0, width_hint), dtype=np.complex128)
    return np.array([[complex(a, b) for a, b in row] for row in rows], dtype=np.complex128).reshape(len(rows), -1)


@dataclass
class Gamma2Certificate:
    matrix_id: str
    value: float
    x: np.ndarray  # row vectors, shape (m, r)
    y: np.ndarray  # column vectors, shape (n, r)
    max_row_norm: float
    max_col_norm: float
    factor_residual: float
    psd_min_eig: float
    diag_slack: float
    primal_infeasibility: float
    dual_infeasibility: float
    relative_gap: float
    lower_bound: float
    iterations: int
    settings: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.value - self.lower_bound

    def to_dict(self) -> dict:
        return {
            "schema": "lacunary/gamma2-certificate",
            "version": SCHEMA_VERSION,
            "matrix_id": self.matrix_id,
            "value": self.value,
            "lower_bound": self.lower_bound,
            "gap": self.gap,
            "x": _cx_rows(self.x),
            "y": _cx_rows(self.y),
            "max_row_norm": self.max_row_norm,
            "max_col_norm": self.max_col_norm,
            "factor_residual": self.factor_residual,
            "psd_min_eig": self.psd_min_eig,
            "diag_slack": self.diag_slack,
            "primal_infeasibility": self.primal_infeasibility,
            "dual_infeasibility": self.dual_infeasibility,
            "relative_gap": self.relative_gap,
            "iterations": self.iterations,
            "settings": self.settings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Gamma2Certificate":
        x = _cx_from_rows(d["x"])
        y = _cx_from_rows(d["y"], x.shape[1])
        keys = (
            "max_row_norm max_col_norm factor_residual psd_min_eig diag_slack "
            "primal_infeasibility dual_infeasibility relative_gap lower_bound"
        ).split()
        return cls(
            d["matrix_id"],
            float(d["value"]),
            x,
            y,
            *(float(d[k]) if d[k] is not None else math.nan for k in keys),
            int(d["iterations"]),
            d.get("settings", {}),
        )


def _as_matrix(phi) -> np.ndarray:
    if hasattr(phi, "matrix"):
        phi = phi.matrix()
    M = np.asarray(phi, dtype=np.complex128)
    if M.ndim != 2:
        raise InputError("gamma2 needs a two-dimensional array")
    if not np.all(np.isfinite(M)):
        raise InputError("array has non-finite entries")
    return M


def _constraints(Phi: np.ndarray, complex_mode: bool) -> sdp.EntryConstraints:
    m, n = Phi.shape
    N = m + n
    con, P, Q, coef, lp, b = [], [], [], [], [], []

    def add(p, q, c, lp_coef, rhs):
        con.append(len(b))
        P.append(p)
        Q.append(q)
        coef.append(c)
        lp.append(lp_coef)
        b.append(rhs)

    # diag(X) = c: any point with diag(X) <= c can be padded on the diagonal
    for i in range(N):
        add(i, i, 1.0, -1.0, 0.0)
    for s in range(m):
        for t in range(n):
            z = Phi[s, t]
            add(s, m + t, 1.0, 0.0, z.real)
            if complex_mode:
                # Re(conj(i) X) = Im X
                add(s, m + t, 1j, 0.0, z.imag)
    return sdp.EntryConstraints(
        N,
        np.array(con),
        np.array(P),
        np.array(Q),
        np.array(coef, dtype=np.complex128 if complex_mode else float),
        np.array(lp, dtype=float),
        np.array(b, dtype=float),
    )


def factor_from_gram(G: np.ndarray, m: int):
    """Split a PSD Gram matrix of size m+n into row vectors x and column vectors y.

    Eigenvalues below EIGEN_FLOOR (relative to the largest) are dropped.
    """
    G = 0.5 * (G + G.conj().T)
    w, V = np.linalg.eigh(G)
    keep = w > EIGEN_FLOOR * max(w.max(initial=0.0), 1.0)
    F = V[:, keep] * np.sqrt(w[keep])
    return F[:m], F[m:].conj(), float(w.min(initial=0.0))


def factorization_report(Phi: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Row/column norm maxima and the residual of Phi = x y^T (entrywise <x(s), y(t)>)."""
    rows = np.linalg.norm(x, axis=1) if x.size else np.zeros(len(x))
    cols = np.linalg.norm(y, axis=1) if y.size else np.zeros(len(y))
    recon = x @ y.T if x.size else np.zeros(Phi.shape, dtype=np.complex128)
    res = float(np.max(np.abs(recon - Phi), initial=0.0))
    return float(rows.max(initial=0.0)), float(cols.max(initial=0.0)), res


def gamma2(phi, settings: SdpSettings | None = None, with_lower: bool = True) -> Gamma2Certificate:
    """gamma_2 of a matrix or window with a factorization witness and a lower bound.

    Entries of the witness satisfy Phi(s,t) = sum_k x(s)_k y(t)_k. Empty
    rows and columns get zero vectors and are left out of the SDP. The lower
    bound is an explicit Schur-product contraction seeded from the dual
    weights (skipped when ``with_lower`` is false, in which case it is 0).
    """
    settings = settings or SdpSettings()
    Phi = _as_matrix(phi)
    mid = phi.id if hasattr(phi, "id") else matrix_id(Phi)
    m0, n0 = Phi.shape
    if max(m0, n0) > settings.max_side:
        raise GuardError(f"array {m0}x{n0} exceeds the SDP size cap {settings.max_side}", shape=[m0, n0])
    ri = np.nonzero(np.abs(Phi).sum(axis=1))[0]
    ci = np.nonzero(np.abs(Phi).sum(axis=0))[0]
    if len(ri) == 0:
        z = np.zeros((m0, 0), dtype=np.complex128), np.zeros((n0, 0), dtype=np.complex128)
        return Gamma2Certificate(mid, 0.0, *z, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, settings.to_dict())
    P = Phi[np.ix_(ri, ci)]
    m, n = P.shape
    scale = float(np.abs(P).max())
    complex_mode = bool(np.any(P.imag != 0))
    A = _constraints(P / scale, complex_mode)
    res = sdp.solve(A, np.zeros((A.dim, A.dim)), 1.0, tol=settings.tolerance, max_iter=settings.max_iter)
    H = res.X.astype(np.complex128) * scale
    xr, yr, min_eig = factor_from_gram(H, m)
    x = np.zeros((m0, xr.shape[1]), dtype=np.complex128)
    y = np.zeros((n0, xr.shape[1]), dtype=np.complex128)
    x[ri] = xr
    y[ci] = yr
    rmax, cmax, resid = factorization_report(Phi, x, y)
    value = res.primal_objective * scale
    diag = np.real(np.diag(H))

    lower = 0.0
    if with_lower:
        # dual weights on the diagonal constraints, split into rows and columns
        d = np.maximum(-res.y[: m + n], 0.0)
        row_w, col_w = np.sqrt(d[:m]), np.sqrt(d[m:])
        lower = schur_action_lower(
            P,
            restarts=settings.lower_restarts,
            seed=settings.seed,
            init=(row_w, col_w) if row_w.any() and col_w.any() else None,
        ).value
    return Gamma2Certificate(
        matrix_id=mid,
        value=value,
        x=x,
        y=y,
        max_row_norm=rmax,
        max_col_norm=cmax,
        factor_residual=resid,
        psd_min_eig=min_eig,
        diag_slack=float(np.max(np.abs(diag - value))),
        primal_infeasibility=res.primal_infeasibility,
        dual_infeasibility=res.dual_infeasibility,
        relative_gap=res.relative_gap,
        lower_bound=lower,
        iterations=res.iterations,
        settings=dict(settings.to_dict(), complex=complex_mode),
    )


def verify_gamma2(cert: Gamma2Certificate, phi, tol: float = 1e-6) -> list:
    """Problems found when rechecking a certificate against its matrix (empty if none)."""
    Phi = _as_matrix(phi)
    msgs = []
    mid = phi.id if hasattr(phi, "id") else matrix_id(Phi)
    if mid != cert.matrix_id:
        msgs.append("matrix id mismatch")
    if cert.x.shape[0] != Phi.shape[0] or cert.y.shape[0] != Phi.shape[1]:
        return msgs + ["witness shape does not match the matrix"]
    rmax, cmax, res = factorization_report(Phi, cert.x, cert.y)
    if res > tol * (1 + cert.value):
        msgs.append(f"reconstruction residual {res:.3e} above {tol:.0e}(1+value)")
    if rmax * cmax > cert.value * (1 + tol) + tol:
        msgs.append(f"witness norms {rmax * cmax!r} exceed the stated value {cert.value!r}")
    if cert.lower_bound > cert.value + tol:
        msgs.append("lower bound exceeds the value")
    for k, v in (("max_row_norm", rmax), ("max_col_norm", cmax)):
        if abs(getattr(cert, k) - v) > 1e-9 * max(1.0, v):
            msgs.append(f"{k}: stored {getattr(cert, k)!r}, recomputed {v!r}")
    return msgs


# ---------------------------------------------------------------- lower bounds


@dataclass
class SchurLowerBound:
    value: float
    A: np.ndarray
    row_vector: np.ndarray
    col_vector: np.ndarray

    def verify(self, Phi, tol: float = 1e-9) -> float:
        """Recompute ||Phi o A|| after checking ||A|| <= 1; returns the value."""
        Phi = _as_matrix(Phi)
        if np.linalg.norm(self.A, 2) > 1 + tol:
            raise InputError("contraction has operator norm above 1")
        return float(np.linalg.norm(Phi * self.A, 2))


def _polar(G: np.ndarray) -> np.ndarray:
    U, _, Vh = np.linalg.svd(G, full_matrices=False)
    return U @ Vh


def schur_action_lower(
    phi,
    restarts: int = 8,
    seed: int = 0,
    init=None,
    max_iter: int = 500,
    tol: float = 1e-12,
) -> SchurLowerBound:
    """Certified lower bound max ||Phi o A|| over contractions A found by ascent.

    Alternates two exact maximisations of |<v, (Phi o A) u>|: for fixed
    unit vectors the best contraction is the conjugate polar factor of
    G(s,t) = conj(v_s) Phi(s,t) u_t, and for fixed A the best vectors are
    the top singular pair of Phi o A. ``init`` optionally gives (v, u).
    """
    Phi = _as_matrix(phi)
    m, n = Phi.shape
    if Phi.size == 0 or not np.any(Phi):
        return SchurLowerBound(0.0, np.zeros((m, n)), np.zeros(m), np.zeros(n))
    rng = np.random.default_rng(seed)
    starts = []
    if init is not None:
        starts.append((np.asarray(init[0], dtype=np.complex128), np.asarray(init[1], dtype=np.complex128)))
    # uniform weights reproduce the normalised trace norm
    starts.append((np.ones(m, dtype=np.complex128), np.ones(n, dtype=np.complex128)))
    for _ in range(restarts):
        v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        starts.append((v, u))
    best = None
    for v, u in starts:
        v = v / np.linalg.norm(v)
        u = u / np.linalg.norm(u)
        value = -1.0
        for _ in range(max_iter):
            A = np.conj(_polar(np.conj(v)[:, None] * Phi * u[None, :]))
            U, S, Vh = np.linalg.svd(Phi * A)
            new = float(S[0])
            v, u = U[:, 0], Vh[0].conj()
            if new <= value * (1 + tol):
                value = max(value, new)
                break
            value = new
            cand = (new, A, v, u)
            if best is None or new > best[0]:
                best = cand
    return SchurLowerBound(*best)


def trace_norm_lower(phi) -> float:
    """||Phi||_tr / sqrt(mn), the uniform-weight special case."""
    Phi = _as_matrix(phi)
    m, n = Phi.shape
    if Phi.size == 0:
        return 0.0
    return float(np.linalg.svd(Phi, compute_uv=False).sum() / np.sqrt(m * n))


# ------------------------------------------------------------- low-rank oracle


@dataclass
class LowRankResult:
    upper: float
    lower: float
    x: np.ndarray
    y: np.ndarray
    rank: int
    iterations: int
    fitted: bool
    factor_residual: float


def _sqrtm_psd(M):
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.conj().T


def _factor_from_weights(P, lam, nu, floor=1e-12):
    """Factorization x y^T = P with x x* = H, H the geometric-mean minimiser for the weights."""
    sl = np.sqrt(lam)
    Q = (P * nu) @ P.conj().T
    H = _sqrtm_psd(sl[:, None] * Q * sl[None, :]) / sl[:, None] / sl[None, :]
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    keep = w > floor * w.max()
    x = V[:, keep] * np.sqrt(w[keep])
    yt = (V[:, keep] / np.sqrt(w[keep])).conj().T @ P
    return x, yt


def _lawson(P, lam, nu, max_iter, tol, smoothing):
    m, n = P.shape
    best = (np.inf, None, None)
    lower = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        weighted = np.sqrt(lam)[:, None] * P * np.sqrt(nu)[None, :]
        lower = max(lower, float(np.linalg.svd(weighted, compute_uv=False).sum()))
        loads = None
        for eps in smoothing:
            x, yt = _factor_from_weights(P, (1 - eps) * lam + eps / m, (1 - eps) * nu + eps / n)
            rx = np.sum(np.abs(x) ** 2, axis=1)
            ry = np.sum(np.abs(yt) ** 2, axis=0)
            if loads is None:
                loads = (rx, ry)
            if np.abs(x @ yt - P).max() > 1e-9:
                continue
            val = float(np.sqrt(rx.max() * ry.max()))
            if val < best[0]:
                best = (val, x, yt)
        if best[0] - lower <= tol * best[0]:
            break
        rx, ry = loads
        lam = np.maximum(lam * rx / (lam @ rx), 1e-300)
        nu = np.maximum(nu * ry / (nu @ ry), 1e-300)
    return best, lower, it


def lowrank_oracle(
    phi,
    rank: int | None = None,
    restarts: int = 1,
    seed: int = 0,
    max_iter: int = 5000,
    tol: float = 1e-10,
    smoothing=(0.0, 1e-6, 1e-3),
) -> LowRankResult:
    """Independent factorization search returning an exact factorization.

    For weights lam on rows and nu on columns the factorization with
    x x* = H, H the matrix geometric mean of diag(lam)^-1 and
    Phi diag(nu) Phi*, minimises the weighted surrogate; the weights are
    then multiplied by the row and column loads (a Lawson-type update,
    which rebalances rows against columns between alternations).
    Candidates are also built from weights mixed with a little of the
    uniform distribution, which balances rows whose weight collapsed. Only
    candidates reproducing Phi are kept, so the upper value is attained;
    ||diag(lam)^1/2 Phi diag(nu)^1/2||_tr is a matching lower bound. The
    first start uses uniform weights, further ``restarts`` random ones.
    The factors have rank equal to rank(Phi); a ``rank`` below that is
    reported as not fitted.
    """
    Phi = _as_matrix(phi)
    m0, n0 = Phi.shape
    full = int(np.linalg.matrix_rank(Phi)) if Phi.size else 0
    k = min(m0, n0) if rank is None else int(rank)
    if full == 0:
        return LowRankResult(0.0, 0.0, np.zeros((m0, 0)), np.zeros((n0, 0)), 0, 0, True, 0.0)
    if k < full:
        return LowRankResult(np.inf, 0.0, np.zeros((m0, 0)), np.zeros((n0, 0)), k, 0, False, np.inf)
    # empty rows and columns get zero vectors
    ri = np.nonzero(np.abs(Phi).sum(axis=1))[0]
    ci = np.nonzero(np.abs(Phi).sum(axis=0))[0]
    P = Phi[np.ix_(ri, ci)]
    transposed = P.shape[0] > P.shape[1]
    if transposed:
        P = P.T
    scale = float(np.abs(P).max())
    P = P / scale
    m, n = P.shape
    rng = np.random.default_rng(seed)
    best, lower, iterations = (np.inf, None, None), 0.0, 0
    for r in range(max(1, restarts)):
        if r == 0:
            lam, nu = np.full(m, 1.0 / m), np.full(n, 1.0 / n)
        else:
            lam, nu = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n))
        cand, lo, it = _lawson(P, lam, nu, max_iter, tol, smoothing)
        iterations += it
        lower = max(lower, lo)
        if cand[0] < best[0]:
            best = cand
    val, x, yt = best
    # balance the two sides
    c = np.sqrt(np.sqrt(np.sum(np.abs(yt) ** 2, axis=0).max() / np.sum(np.abs(x) ** 2, axis=1).max()))
    xs = x * c * np.sqrt(scale)
    ys = (yt / c * np.sqrt(scale)).T
    if transposed:
        xs, ys = ys, xs
    x_full = np.zeros((m0, xs.shape[1]), dtype=np.complex128)
    y_full = np.zeros((n0, xs.shape[1]), dtype=np.complex128)
    x_full[ri] = xs
    y_full[ci] = ys
    _, _, res = factorization_report(Phi, x_full, y_full)
    return LowRankResult(val * scale, lower * scale, x_full, y_full, xs.shape[1], iterations, True, res)


# ------------------------------------------------------------- sign averages


@dataclass
class SignAverage:
    mean: float
    stderr: float
    trials: int
    failures: int
    values: list
    kind: str
    grouping: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "schema": "lacunary/sign-average",
            "version": SCHEMA_VERSION,
            "mean": self.mean,
            "stderr": self.stderr,
            "trials": self.trials,
            "failures": self.failures,
            "values": self.values,
            "kind": self.kind,
            "grouping": self.grouping,
            "seed": self.seed,
        }


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, derived from the master seed by counter."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def entry_family(phi) -> list:
    """One single-entry matrix per nonzero entry: signs act entrywise."""
    Phi = _as_matrix(phi)
    out = []
    for i, j in zip(*np.nonzero(Phi)):
        M = np.zeros_like(Phi)
        M[i, j] = Phi[i, j]
        out.append(M)
    return out


def random_units(rng: np.random.Generator, k: int, kind: str) -> np.ndarray:
    if kind == "sign":
        return rng.choice(np.array([-1.0, 1.0]), size=k)
    if kind == "phase":
        return np.exp(2j * np.pi * rng.random(k))
    raise InputError(f"unknown random unit kind {kind!r}; use 'sign' or 'phase'")


def sign_average_gamma2(
    family,
    trials: int,
    seed: int = 0,
    kind: str = "sign",
    settings: SdpSettings | None = None,
    threads: int = 1,
    grouping: str = "custom",
) -> SignAverage:
    """Monte Carlo mean and standard error of gamma_2(sum_k z_k psi_k).

    ``family`` is a list of equally shaped matrices psi_k (a single matrix
    or window is split into its entries). z_k are independent uniform signs
    or phases drawn from a per-trial stream, so results do not depend on
    ``threads``. Trials whose SDP fails are counted and left out of the mean.
    """
    if trials < 1:
        raise InputError("trials must be at least 1")
    if hasattr(family, "matrix") or (isinstance(family, np.ndarray) and family.ndim == 2):
        family, grouping = entry_family(family), "entry"
    mats = [_as_matrix(f) for f in family]
    if not mats:
        raise InputError("empty family")
    if any(M.shape != mats[0].shape for M in mats):
        raise InputError("family members differ in shape")
    stack = np.stack(mats)
    settings = settings or SdpSettings()
    random_units(trial_rng(seed, 0), 1, kind)  # validate kind early

    def one(trial):
        z = random_units(trial_rng(seed, trial), len(mats), kind)
        try:
            return gamma2(np.tensordot(z, stack, axes=1), settings, with_lower=False).value
        except LacunaryError:
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(t) for t in range(trials)]
    values = [v for v in results if v is not None]
    failures = trials - len(values)
    if not values:
        raise NonConvergenceError("every sign trial failed", trials=trials)
    arr = np.array(values)
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return SignAverage(float(arr.mean()), stderr, trials, failures, values, kind, grouping, seed)
