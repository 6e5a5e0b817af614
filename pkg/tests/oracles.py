"""Brute-force reference computations, independent of the library code paths."""

import itertools
import math

import numpy as np
from scipy.optimize import minimize_scalar

# Sanov: a -> [[1,2],[0,1]], b -> [[1,0],[2,1]] generate a free group of rank 2.
_SANOV = {
    1: np.array([[1, 2], [0, 1]], dtype=object),
    -1: np.array([[1, -2], [0, 1]], dtype=object),
    2: np.array([[1, 0], [2, 1]], dtype=object),
    -2: np.array([[1, 0], [-2, 1]], dtype=object),
}


def _f2_word(letter):
    """Letter of F_n as a word in F_2: g_i -> a^i b a^-i (a free basis of its span)."""
    i = abs(letter)
    w = [1] * i + [2] + [-1] * i
    if letter < 0:
        w = [-x for x in reversed(w)]
    return w


def sanov_matrix(word):
    """Faithful integer 2x2 matrix of a word of any F_n (letters +-i)."""
    M = np.array([[1, 0], [0, 1]], dtype=object)
    for letter in word:
        for x in _f2_word(letter):
            M = M.dot(_SANOV[x])
    return tuple(M.ravel())


def distinct_elements(rank, radius):
    """Number of distinct group elements among all letter strings of length <= radius."""
    letters = [s * i for i in range(1, rank + 1) for s in (1, -1)]
    seen = set()
    for k in range(radius + 1):
        for w in itertools.product(letters, repeat=k):
            seen.add(sanov_matrix(w))
    return len(seen)


def brute_partition(I, J, w2, m, n):
    """min over all 2^k assignments of max(C1, C2), squared constants returned as C."""
    k = len(I)
    if k == 0:
        return 0.0
    # bit e of the mask sends entry e to the row part
    bits = (np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1
    w2 = np.asarray(w2, dtype=float)
    row_in = np.zeros((k, m))
    row_in[np.arange(k), I] = w2
    col_in = np.zeros((k, n))
    col_in[np.arange(k), J] = w2
    rows = bits @ row_in
    cols = (1 - bits) @ col_in
    loads = np.maximum(rows.max(axis=1), cols.max(axis=1))
    return math.sqrt(float(loads.min()))


def brute_density(W):
    """max over |E'| = |F'| = N of sum W[E', F'] / N by full enumeration."""
    m, n = W.shape
    best = 0.0
    for N in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), N):
            for cols in itertools.combinations(range(n), N):
                best = max(best, W[np.ix_(rows, cols)].sum() / N)
    return best


def gamma2_2x2(M, grid=2001):
    """gamma_2 of a 2x2 matrix as max over weights p, q of ||D_p^1/2 M D_q^1/2||_tr.

    Grid search over (p, q) in [0,1]^2 followed by a 1-d polish in each
    variable. The trace-norm formula is the dual description of the norm
    and shares no code with the SDP.
    """
    M = np.asarray(M, dtype=complex)

    def f(p, q):
        D1 = np.sqrt([p, 1 - p])
        D2 = np.sqrt([q, 1 - q])
        return np.linalg.svd(D1[:, None] * M * D2[None, :], compute_uv=False).sum()

    ps = np.linspace(0, 1, grid)
    # coarse grid in both variables
    coarse = np.linspace(0, 1, 201)
    vals = np.array([[f(p, q) for q in coarse] for p in coarse])
    i, j = np.unravel_index(vals.argmax(), vals.shape)
    p, q = coarse[i], coarse[j]
    best = vals[i, j]
    for _ in range(20):
        rp = minimize_scalar(lambda t: -f(t, q), bounds=(0, 1), method="bounded", options={"xatol": 1e-12})
        p = rp.x
        rq = minimize_scalar(lambda t: -f(p, t), bounds=(0, 1), method="bounded", options={"xatol": 1e-12})
        q = rq.x
        best = max(best, -rq.fun)
    best = max(best, max(f(p, t) for t in ps))
    return float(best)


def radial_adjacency_norm(rank, radius):
    """Norm of sum_i lambda(g_i) + lambda(g_i^-1) on ball(R) via the radial path quotient.

    The root has 2n children and every other vertex 2n - 1, so the top
    eigenvector is constant on spheres and the quotient is the path with
    edge weights sqrt(2n) then sqrt(2n - 1).
    """
    T = np.zeros((radius + 1, radius + 1))
    for k in range(radius):
        w = math.sqrt(2 * rank) if k == 0 else math.sqrt(2 * rank - 1)
        T[k, k + 1] = T[k + 1, k] = w
    return float(np.linalg.eigvalsh(T).max())


def random_window_arrays(rng, m, n, k, weighted=False):
    cells = rng.choice(m * n, size=k, replace=False)
    I, J = np.divmod(np.sort(cells), n)
    w = rng.uniform(0.2, 2.0, size=k) if weighted else np.ones(k)
    return I, J, w
