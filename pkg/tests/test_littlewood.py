import math

import numpy as np
import pytest

from lacunary.errors import WrongVariantError
from lacunary.group_core import FiniteSet, FreeGroup, IntegerGroup, ball
from lacunary.littlewood import (
    PartitionCertificate,
    SplitCertificate,
    min_partition_01,
    min_partition_weighted,
    min_split,
    partition_constants,
    verify_certificate,
)
from lacunary.window_builder import Window, relation_window

from oracles import brute_partition, random_window_arrays

F2 = FreeGroup(2)


def window_from(I, J, w, m, n):
    M = np.zeros((m, n), dtype=complex)
    M[I, J] = w
    return Window.from_matrix(M)


def arrays(w):
    I, J, V = w.arrays()
    return I, J, np.abs(V) ** 2


def test_identity_pattern():
    cert = min_partition_01(Window.from_matrix(np.eye(6)))
    assert cert.C == 1
    assert cert.optimality == "exact"


def test_full_ones_four():
    w = Window.from_matrix(np.ones((4, 4)))
    cert = min_partition_01(w)
    assert cert.degree_bound == 2
    # squared constants are counts for 0/1 windows
    assert cert.C == pytest.approx(math.sqrt(2))
    assert cert.C == pytest.approx(brute_partition(*arrays(w), 4, 4))


def test_generators_window_matches_exhaustive():
    w = relation_window(FiniteSet(F2, tuple(F2.generators())), ball(F2, 2), ball(F2, 2))
    assert w.nnz <= 20
    cert = min_partition_01(w)
    assert cert.C == pytest.approx(brute_partition(*arrays(w), *w.shape))


def test_wrong_variant():
    with pytest.raises(WrongVariantError):
        min_partition_01(Window.from_matrix(np.diag([1.0, 2.0])))


def test_weighted_diagonal_and_ones():
    d = np.array([0.5, 3.0, 1.5])
    cert = min_partition_weighted(Window.from_matrix(np.diag(d)))
    assert cert.C == pytest.approx(3.0)
    cert = min_partition_weighted(Window.from_matrix(np.ones((2, 2))))
    assert cert.C == pytest.approx(1.0)
    assert cert.optimality == "exact"


@pytest.mark.parametrize("seed", range(25))
def test_weighted_branch_and_bound_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(2, 6, size=2)
    k = int(rng.integers(1, min(m * n, 12) + 1))
    I, J, w = random_window_arrays(rng, m, n, k, weighted=True)
    phases = np.exp(2j * np.pi * rng.random(k))
    win = window_from(I, J, w * phases, m, n)
    cert = min_partition_weighted(win)
    assert cert.C == pytest.approx(brute_partition(I, J, w**2, m, n), rel=1e-12)


def test_heuristic_never_below_exact():
    rng = np.random.default_rng(3)
    I, J, w = random_window_arrays(rng, 5, 5, 18, weighted=True)
    win = window_from(I, J, w, 5, 5)
    exact = min_partition_weighted(win)
    heur = min_partition_weighted(win, exact_limit=0)
    assert heur.optimality == "heuristic"
    assert heur.C >= exact.C - 1e-12


@pytest.mark.parametrize("c", [1.0, 2.5, 3 - 4j])
def test_split_single_entry_is_half(c):
    # psi = theta c + (1 - theta) c; best theta = 1/2
    cert = min_split(Window.from_matrix(np.array([[c]])))
    assert cert.value == pytest.approx(abs(c) / 2, rel=1e-6)


def test_split_diagonal_grid_oracle():
    d = np.array([1.0, 2.0])
    cert = min_split(Window.from_matrix(np.diag(d)))
    thetas = np.linspace(0, 1, 2001)
    grid = min(max(max(t1 * 1, t2 * 2), max((1 - t1) * 1, (1 - t2) * 2)) for t1 in thetas[::10] for t2 in thetas)
    assert cert.value == pytest.approx(grid, abs=1e-3)
    assert d.max() / 2 - 1e-9 <= cert.value <= d.max()


def test_split_zero_window():
    cert = min_split(Window.from_matrix(np.zeros((3, 3))))
    assert cert.value == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_split_below_partition_and_above_dual(seed):
    rng = np.random.default_rng(100 + seed)
    I, J, w = random_window_arrays(rng, 6, 6, 15, weighted=True)
    win = window_from(I, J, w, 6, 6)
    part = min_partition_weighted(win)
    split = min_split(win)
    assert split.lower_bound <= split.value + 1e-12
    assert split.value <= part.C + 1e-12
    assert split.value - split.lower_bound <= 1e-5 * split.value
    assert verify_certificate(split, win).passed


def test_scaling_equivariance():
    rng = np.random.default_rng(7)
    I, J, _ = random_window_arrays(rng, 6, 6, 14)
    w01 = window_from(I, J, np.ones(len(I)), 6, 6)
    scaled = window_from(I, J, 2.5 * np.ones(len(I)), 6, 6)
    a = min_partition_01(w01)
    b = min_partition_weighted(scaled)
    assert b.C == pytest.approx(2.5 * a.C)
    # the 0/1 optimum stays optimal for the scaled weights
    c1, c2 = partition_constants(scaled, a.assignment)
    assert max(c1, c2) == pytest.approx(b.C)


def test_monotone_under_adding_entries():
    rng = np.random.default_rng(11)
    I, J, _ = random_window_arrays(rng, 6, 6, 20)
    small = window_from(I[:12], J[:12], np.ones(12), 6, 6)
    big = window_from(I, J, np.ones(20), 6, 6)
    assert min_partition_01(small).C <= min_partition_01(big).C


def test_verify_detects_tampering():
    w = Window.from_matrix(np.ones((3, 3)))
    cert = min_partition_01(w)
    assert verify_certificate(cert, w).passed
    flipped = cert.assignment.copy()
    flipped[0] = 3 - flipped[0]
    bad = PartitionCertificate(cert.window_id, flipped, cert.C1, cert.C2, cert.optimality, cert.method, cert.degree_bound)
    rep = verify_certificate(bad, w)
    assert not rep.passed
    tampered = PartitionCertificate.from_dict(dict(cert.to_dict(), C1=cert.C1 + 1))
    rep = verify_certificate(tampered, w)
    assert not rep.passed
    assert any("stored" in m and "recomputed" in m for m in rep.messages)


def test_certificates_roundtrip():
    w = Window.from_matrix(np.array([[1.0, 2j], [0.5, 0]]))
    p = min_partition_weighted(w)
    s = min_split(w)
    assert verify_certificate(PartitionCertificate.from_dict(p.to_dict()), w).passed
    assert verify_certificate(SplitCertificate.from_dict(s.to_dict()), w).passed


def test_integer_window_flow_partition():
    Z = IntegerGroup()
    lam = FiniteSet(Z, tuple(2**k for k in range(5)))
    E = FiniteSet.interval(Z, 0, 15)
    w = relation_window(lam, E, E)
    cert = min_partition_01(w)
    assert verify_certificate(cert, w).passed
    assert cert.degree_bound <= len(lam)
