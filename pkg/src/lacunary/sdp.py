"""Small dense SDP solver for entry-constrained problems.

Solves, over Hermitian (or real symmetric) X,

    min  <C, X> + c_lp * x_lp
    s.t. sum_terms Re(conj(coef) * X[p, q]) + lp[i] * x_lp = b[i]    (i = 1..k)
         X PSD, x_lp >= 0

by an infeasible primal-dual path-following method with the HKM search
direction and Mehrotra predictor-corrector steps. Each term is the
Hermitian matrix (coef E_pq + conj(coef) E_qp) / 2, so a constraint touches
a handful of entries and the Schur complement is assembled from term pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import NonConvergenceError


@dataclass
class EntryConstraints:
    dim: int
    con: np.ndarray  # term -> constraint index
    p: np.ndarray
    q: np.ndarray
    coef: np.ndarray  # real or complex
    lp: np.ndarray
    b: np.ndarray

    @property
    def count(self) -> int:
        return len(self.b)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.coef)

    def incidence(self):
        return sp.csr_matrix(
            (np.ones(len(self.con)), (self.con, np.arange(len(self.con)))), shape=(self.count, len(self.con))
        )

    def apply(self, Y: np.ndarray, x_lp: float) -> np.ndarray:
        """Re tr(A_i Y) for every constraint; Y need not be Hermitian."""
        c = self.coef
        vals = 0.5 * (c * Y[self.q, self.p] + np.conj(c) * Y[self.p, self.q])
        return np.bincount(self.con, np.real(vals), minlength=self.count) + self.lp * x_lp

    def adjoint(self, y: np.ndarray):
        S = np.zeros((self.dim, self.dim), dtype=self.coef.dtype)
        w = 0.5 * y[self.con]
        np.add.at(S, (self.p, self.q), self.coef * w)
        np.add.at(S, (self.q, self.p), np.conj(self.coef) * w)
        return S, float(self.lp @ y)


@dataclass
class SdpResult:
    X: np.ndarray
    x_lp: float
    y: np.ndarray
    Z: np.ndarray
    z_lp: float
    primal_objective: float
    dual_objective: float
    primal_infeasibility: float
    dual_infeasibility: float
    relative_gap: float
    iterations: int


def _schur(A: EntryConstraints, X, W, inc, chunk=512):
    """M_ij = Re tr(A_i X A_j W) assembled from term pairs."""
    P, Q, c = A.p, A.q, A.coef
    cc = np.conj(c)
    # one term per constraint, in constraint order: no folding needed
    direct = len(A.con) == A.count and np.array_equal(A.con, np.arange(A.count))
    M = np.zeros((A.count, A.count))
    for s in range(0, len(P), chunk):
        a = slice(s, s + chunk)
        Pa, Qa = P[a, None], Q[a, None]
        ca, cca = c[a, None], cc[a, None]
        T = 0.25 * (
            ca * c[None, :] * X[Qa, P[None, :]] * W[Q[None, :], Pa]
            + ca * cc[None, :] * X[Qa, Q[None, :]] * W[P[None, :], Pa]
            + cca * c[None, :] * X[Pa, P[None, :]] * W[Q[None, :], Qa]
            + cca * cc[None, :] * X[Pa, Q[None, :]] * W[P[None, :], Qa]
        )
        T = np.real(T)
        if direct:
            M[a] = T
        else:
            # rows of T are the terms in this chunk, columns all terms; fold
            # both sides into constraints
            M += inc[:, a] @ (inc @ T.T).T
    return 0.5 * (M + M.T)


def _max_step(L_inv, D):
    """Largest alpha with S + alpha D PSD, given S = L L* and L_inv = L^-1."""
    ev = np.linalg.eigvalsh(L_inv @ D @ L_inv.conj().T)
    lo = ev[0]
    return np.inf if lo >= 0 else -1.0 / lo


def _inner(X, Z) -> float:
    return float(np.real(np.sum(X * np.conj(Z))))


def _herm(X):
    return 0.5 * (X + X.conj().T)


def solve(
    A: EntryConstraints,
    C: np.ndarray,
    c_lp: float,
    tol: float = 1e-9,
    max_iter: int = 100,
) -> SdpResult:
    n = A.dim
    b = A.b
    dtype = np.complex128 if A.is_complex else float
    inc = A.incidence()
    C = np.asarray(C, dtype=dtype)
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.linalg.norm(C) + abs(c_lp)
    scale = max(10.0, np.sqrt(n), np.abs(b).max(initial=0.0) * np.sqrt(n))
    eye = np.eye(n, dtype=dtype)
    X = scale * eye
    Z = scale * eye
    x_lp = z_lp = scale
    y = np.zeros(A.count)
    hist = None
    for it in range(1, max_iter + 1):
        rp = b - A.apply(X, x_lp)
        ATy, ATy_lp = A.adjoint(y)
        Rd = C - Z - ATy
        rd_lp = c_lp - z_lp - ATy_lp
        pobj = _inner(C, X) + c_lp * x_lp
        dobj = float(b @ y)
        gap = _inner(X, Z) + x_lp * z_lp
        pinf = np.linalg.norm(rp) / bnorm
        dinf = np.sqrt(np.sum(np.abs(Rd) ** 2) + rd_lp**2) / cnorm
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        hist = (pobj, dobj, pinf, dinf, relgap)
        if max(pinf, dinf, relgap) <= tol:
            return SdpResult(X, x_lp, y, Z, z_lp, pobj, dobj, pinf, dinf, relgap, it)
        mu = gap / (n + 1)

        try:
            Lz = np.linalg.cholesky(Z)
            Lx = np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            break
        Lz_inv = sla.solve_triangular(Lz, eye, lower=True)
        W = Lz_inv.conj().T @ Lz_inv
        Lx_inv = sla.solve_triangular(Lx, eye, lower=True)
        M = _schur(A, X, W, inc) + np.outer(A.lp, A.lp) * (x_lp / z_lp)
        try:
            factor = sla.cho_factor(M)
            solve_M = lambda r: sla.cho_solve(factor, r)  # noqa: E731
        except np.linalg.LinAlgError:
            solve_M = lambda r: np.linalg.lstsq(M, r, rcond=None)[0]  # noqa: E731
        XRdW = A.apply(X @ Rd @ W, 0.0)

        def direction(Rc, rc_lp):
            rhs = rp - A.apply(Rc @ W, 0.0) + XRdW - A.lp * (rc_lp - x_lp * rd_lp) / z_lp
            dy = solve_M(rhs)
            dS, dS_lp = A.adjoint(dy)
            dZ = Rd - dS
            dz_lp = rd_lp - dS_lp
            dX = _herm((Rc - X @ dZ) @ W)
            dx_lp = (rc_lp - x_lp * dz_lp) / z_lp
            return dX, dx_lp, dy, dZ, dz_lp

        def steps(dX, dx_lp, dZ, dz_lp):
            ap = min(_max_step(Lx_inv, dX), -x_lp / dx_lp if dx_lp < 0 else np.inf)
            ad = min(_max_step(Lz_inv, dZ), -z_lp / dz_lp if dz_lp < 0 else np.inf)
            return ap, ad

        # predictor
        dX, dx_lp, dy, dZ, dz_lp = direction(-X @ Z, -x_lp * z_lp)
        ap, ad = steps(dX, dx_lp, dZ, dz_lp)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (_inner(X + ap * dX, Z + ad * dZ) + (x_lp + ap * dx_lp) * (z_lp + ad * dz_lp)) / (n + 1)
        sigma = min(1.0, (mu_aff / mu) ** 3)
        # corrector
        Rc = sigma * mu * eye - X @ Z - dX @ dZ
        rc_lp = sigma * mu - x_lp * z_lp - dx_lp * dz_lp
        dX, dx_lp, dy, dZ, dz_lp = direction(Rc, rc_lp)
        ap, ad = steps(dX, dx_lp, dZ, dz_lp)
        ap, ad = min(1.0, 0.98 * ap), min(1.0, 0.98 * ad)
        X = _herm(X + ap * dX)
        x_lp += ap * dx_lp
        y = y + ad * dy
        Z = _herm(Z + ad * dZ)
        z_lp += ad * dz_lp
    pobj, dobj, pinf, dinf, relgap = hist
    raise NonConvergenceError(
        f"SDP did not converge in {max_iter} iterations",
        primal_objective=pobj,
        dual_objective=dobj,
        primal_infeasibility=pinf,
        dual_infeasibility=dinf,
        relative_gap=relgap,
    )
