import math

import numpy as np
import pytest

from lacunary.errors import GuardError, InputError, NonConvergenceError
from lacunary.group_core import FiniteSet, FreeGroup, IntegerGroup, NaturalSemigroup, ball_size
from lacunary.regular_rep import (
    build_operator,
    coefficient_rhs,
    generator_quotient,
    lset_ratio,
    op_norm,
    ratio_schedule,
)

from oracles import radial_adjacency_norm

F2 = FreeGroup(2)
F5 = FreeGroup(5)


def symmetric_generators(g):
    return FiniteSet(g, tuple(g.generators()) + tuple(g.inv(x) for x in g.generators()))


@pytest.mark.parametrize("R", [1, 2, 3, 4])
def test_adjacency_norm_against_radial_oracle(R):
    lam = symmetric_generators(F2)
    T = build_operator({x: 1.0 for x in lam}, F2, R)
    assert T.route == "sparse" and T.shape == (ball_size(F2, R),) * 2
    assert op_norm(T, tol=1e-12).value == pytest.approx(radial_adjacency_norm(2, R), rel=1e-6)


def test_adjacency_norm_frozen_and_below_limit():
    # frozen radial values; the infinite-tree norm is 2 sqrt(3)
    frozen = {4: 3.0889, 6: 3.2454, 8: 3.3201, 10: 3.3618}
    for R, v in frozen.items():
        assert radial_adjacency_norm(2, R) == pytest.approx(v, abs=5e-5)
        assert v < 2 * math.sqrt(3)
    assert radial_adjacency_norm(2, 10) / 2 == pytest.approx(1.68089, abs=5e-6)


@pytest.mark.parametrize("R", [1, 2, 3, 4])
def test_quotient_matches_sparse(R):
    gens = FiniteSet(F5, tuple(F5.generators()))
    a = lset_ratio(gens, 1 / math.sqrt(5), R, route="sparse", norm_tol=1e-12)
    b = lset_ratio(gens, 1 / math.sqrt(5), R, route="quotient", norm_tol=1e-12)
    assert a.ratio == pytest.approx(b.ratio, rel=1e-6)
    assert generator_quotient(5, 1.0, R).shape == (2 ** (R + 1) - 1,) * 2


def test_frozen_generator_ratios():
    gens = FiniteSet(F5, tuple(F5.generators()))
    frozen = {4: 1.58311, 6: 1.66952, 8: 1.71069, 10: 1.73362}
    out, monotone = ratio_schedule(gens, 1 / math.sqrt(5), sorted(frozen))
    assert monotone
    for r in out:
        assert r.ratio == pytest.approx(frozen[r.radius], abs=5e-5)
        assert r.route == "quotient"
    # untruncated norm of sum of 5 free generators is 2 sqrt(4), so the limit is 4/sqrt(5)
    assert all(r.ratio < 4 / math.sqrt(5) for r in out)


def test_single_element_is_unitary():
    lam = FiniteSet(F2, ((1, 2),))
    r = lset_ratio(lam, 3.0, 2)
    assert r.ratio == pytest.approx(1.0, rel=1e-7)
    assert r.supported_in_ball


def test_integers_grow_like_sqrt_size():
    Z = IntegerGroup()
    lam = FiniteSet(Z, (1, 2, 4, 8))
    r = lset_ratio(lam, 1.0, 200)
    # abelian: norm -> sum |a| = 4, rhs = 2
    assert 1.9 < r.ratio <= 2 + 1e-9


def test_semigroup_set_is_embedded():
    lam = FiniteSet(NaturalSemigroup(), (1, 3))
    r = lset_ratio(lam, [1.0, 1.0], 10)
    assert r.ratio >= 1 - 1e-6


def test_matrix_coefficients_rhs():
    A = np.array([[0, 1], [0, 0]], dtype=complex)
    B = np.array([[0, 0], [1, 0]], dtype=complex)
    assert coefficient_rhs([A]) == pytest.approx(1.0)
    assert coefficient_rhs([A, A]) == pytest.approx(math.sqrt(2))
    lam = FiniteSet(F2, ((1,), (2,)))
    r = lset_ratio(lam, {(1,): A, (2,): B}, 3)
    assert r.ratio >= 1 - 1e-6


def test_ratio_outside_ball_is_not_checked():
    lam = FiniteSet(F2, ((1, 1, 1),))
    r = lset_ratio(lam, 1.0, 1)
    assert not r.supported_in_ball
    assert r.ratio == 0.0


def test_input_errors_and_guards():
    gens = FiniteSet(F2, tuple(F2.generators()))
    with pytest.raises(InputError):
        lset_ratio(gens, 0.0, 2)
    with pytest.raises(InputError):
        lset_ratio(FiniteSet(F2, ((1,),)), 1.0, 2, route="quotient")
    with pytest.raises(InputError):
        lset_ratio(gens, 1.0, 2, route="dense")
    with pytest.raises(GuardError):
        lset_ratio(gens, 1.0, 6, route="sparse", max_dim=100)
    with pytest.raises(InputError):
        ratio_schedule(gens, 1.0, [3, 2])
    with pytest.raises(InputError):
        op_norm(np.eye(2), tol=0)


def test_power_iteration_nonconvergence():
    # nearly equal singular values make power iteration slow
    T = np.diag([1.0, 0.999999])
    with pytest.raises(NonConvergenceError):
        op_norm(T, tol=1e-16, max_iter=3)
