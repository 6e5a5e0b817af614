import math

import numpy as np
import pytest

from lacunary.errors import GuardError, InputError
from lacunary.gamma2 import (
    Gamma2Certificate,
    SdpSettings,
    entry_family,
    gamma2,
    lowrank_oracle,
    matrix_from_json,
    matrix_to_json,
    schur_action_lower,
    sign_average_gamma2,
    trace_norm_lower,
    trial_rng,
    verify_gamma2,
)

from oracles import gamma2_2x2

TIGHT = SdpSettings(tolerance=1e-10)


def hadamard(k):
    H = np.array([[1.0]])
    for _ in range(k):
        H = np.block([[H, H], [H, -H]])
    return H


def dft(n):
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n)


@pytest.mark.parametrize(
    "M",
    [
        [[1, 1], [1, -1]],
        [[1, 1], [0, 1]],
        [[1, 0], [0, 1]],
        [[2, 1j], [0.5, -1]],
        [[1, 2], [3, 4]],
    ],
)
def test_two_by_two_against_trace_norm_oracle(M):
    cert = gamma2(M, TIGHT)
    assert cert.value == pytest.approx(gamma2_2x2(M), abs=1e-6)


def test_known_values():
    assert gamma2(np.eye(5), TIGHT).value == pytest.approx(1.0, abs=1e-8)
    assert gamma2(hadamard(2), TIGHT).value == pytest.approx(2.0, abs=1e-7)
    assert gamma2(dft(5), TIGHT).value == pytest.approx(math.sqrt(5), abs=1e-7)
    assert gamma2([[1, 1], [0, 1]], TIGHT).value == pytest.approx(2 / math.sqrt(3), abs=1e-8)


def test_rank_one():
    x = np.array([1.0, -3.0, 0.5])
    y = np.array([2.0, 1j, 0.0, 1.0])
    cert = gamma2(np.outer(x, y), TIGHT)
    assert cert.value == pytest.approx(np.abs(x).max() * np.abs(y).max(), rel=1e-7)


def test_witness_certifies_value():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(5, 4)) + 1j * rng.normal(size=(5, 4))
    cert = gamma2(M)
    assert verify_gamma2(cert, M) == []
    assert cert.factor_residual < 1e-6
    assert cert.lower_bound <= cert.value + 1e-7
    assert cert.gap < 1e-4 * cert.value
    # witness norms bound the value from above
    assert cert.max_row_norm * cert.max_col_norm <= cert.value * (1 + 1e-6)


def test_zero_rows_and_empty_matrix():
    M = np.zeros((3, 3))
    M[1, 2] = 2.0
    cert = gamma2(M, TIGHT)
    assert cert.value == pytest.approx(2.0, rel=1e-8)
    assert gamma2(np.zeros((2, 2))).value == 0.0


def test_invariances():
    rng = np.random.default_rng(5)
    M = rng.normal(size=(4, 4))
    base = gamma2(M, TIGHT).value
    P, Q = np.eye(4)[rng.permutation(4)], np.eye(4)[rng.permutation(4)]
    D = np.diag(np.exp(2j * np.pi * rng.random(4)))
    assert gamma2(P @ M @ Q, TIGHT).value == pytest.approx(base, rel=1e-8)
    assert gamma2(D @ M, TIGHT).value == pytest.approx(base, rel=1e-8)
    assert gamma2(M.T, TIGHT).value == pytest.approx(base, rel=1e-8)
    assert gamma2(-2.5 * M, TIGHT).value == pytest.approx(2.5 * base, rel=1e-8)


def test_sandwich_bounds():
    rng = np.random.default_rng(9)
    M = rng.normal(size=(6, 5))
    val = gamma2(M).value
    assert np.abs(M).max() - 1e-9 <= val <= np.linalg.norm(M, 2) + 1e-6
    assert trace_norm_lower(M) <= val + 1e-7


def test_schur_lower_bound_is_checkable():
    M = hadamard(2)
    lb = schur_action_lower(M, restarts=4, seed=0)
    assert lb.verify(M) == pytest.approx(lb.value)
    assert lb.value == pytest.approx(2.0, abs=1e-6)


def test_lowrank_agrees_with_sdp():
    rng = np.random.default_rng(12)
    for _ in range(3):
        M = rng.normal(size=(4, 5))
        lr = lowrank_oracle(M)
        sd = gamma2(M, TIGHT).value
        assert lr.fitted and lr.factor_residual < 1e-8
        assert lr.lower - 1e-7 <= sd <= lr.upper + 1e-7
        assert lr.upper == pytest.approx(sd, rel=1e-4)


def test_lowrank_rank_too_small():
    res = lowrank_oracle(np.eye(3), rank=2)
    assert not res.fitted


def test_guard_and_settings():
    with pytest.raises(GuardError):
        gamma2(np.ones((41, 2)))
    with pytest.raises(InputError):
        SdpSettings(tolerance=0)


def test_certificate_roundtrip_and_tamper():
    M = np.array([[1.0, 2.0], [0.0, 1j]])
    cert = gamma2(M)
    back = Gamma2Certificate.from_dict(cert.to_dict())
    assert verify_gamma2(back, M) == []
    bad = Gamma2Certificate.from_dict(dict(cert.to_dict(), value=cert.value * 0.9))
    assert verify_gamma2(bad, M)
    assert np.array_equal(matrix_from_json(matrix_to_json(M)), M)


def test_entry_family():
    M = np.array([[1.0, 0], [2.0, 3.0]])
    fam = entry_family(M)
    assert len(fam) == 3
    assert np.array_equal(sum(fam), M)


def test_trial_streams_are_counter_based():
    a = trial_rng(4, 7).random(3)
    b = trial_rng(4, 7).random(3)
    c = trial_rng(4, 8).random(3)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_sign_average_regression_and_threads():
    ones = np.ones((4, 4))
    sa = sign_average_gamma2(ones, trials=50, seed=1)
    assert sa.grouping == "entry" and sa.failures == 0
    assert sa.mean == pytest.approx(1.70117, abs=5e-5)
    assert sa.stderr == pytest.approx(0.0188, abs=5e-4)
    again = sign_average_gamma2(ones, trials=50, seed=1, threads=3)
    assert again.values == sa.values


def test_sign_average_bad_kind():
    with pytest.raises(InputError):
        sign_average_gamma2(np.eye(2), trials=2, kind="gauss")


def test_against_cvxpy_when_available():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(21)
    M = rng.normal(size=(3, 4))
    m, n = M.shape
    X = cp.Variable((m + n, m + n), PSD=True)
    t = cp.Variable()
    cons = [X[:m, m:] == M, cp.diag(X) <= t]
    cp.Problem(cp.Minimize(t), cons).solve()
    assert gamma2(M, TIGHT).value == pytest.approx(t.value, rel=1e-4)
