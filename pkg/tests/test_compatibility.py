import math
import random
from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings, strategies as st

from hetcompat.compatibility import (
    MarkovKernel,
    PointMap,
    almost_compat_sequence,
    check_compat,
    conditional_identity_check,
    construct_map,
    doubling_splits,
    het_equiv_kernel_test,
    kernel_compat,
    point_compat_exhaustive,
    refine,
    transplant_kernel,
    verify_map,
)
from hetcompat.convex_order import het_order
from hetcompat.errors import CodomainMismatch, Incompatible, InvalidRefinement, ModeError, TooLarge
from hetcompat.measure import FiniteSpace, density_profile, make_tuple

from oracles import all_compatible_maps, feasible_with_denominator, random_pair, space


def test_two_atom_fixture(two_atom):
    Q, F = two_atom
    assert point_compat_exhaustive(Q, F) is None
    assert all_compatible_maps(Q, F) == []
    c = construct_map(Q, F)
    assert c.split == 2
    assert verify_map(c.point_map, c.lifted, F)
    rep = check_compat(Q, F)
    assert rep.verdict == "kernel-only" and rep.refinement_m == 2


def test_four_atom_analog(four_atom):
    Q, F = four_atom
    # same law of the density ratio, different shape
    _, cq = density_profile(Q)
    _, cf = density_profile(F)
    assert cq == cf
    assert point_compat_exhaustive(Q, F) is None
    assert all_compatible_maps(Q, F) == []
    c = construct_map(Q, F)
    assert c.split == 2 and verify_map(c.point_map, c.lifted, F)


def test_point_map_found_when_it_exists():
    Q = make_tuple(space(3), [["1/2", "1/4", "1/4"], ["1/4", "1/4", "1/2"]])
    F = make_tuple(space(2, "t"), [["3/4", "1/4"], ["1/2", "1/2"]])
    X = point_compat_exhaustive(Q, F)
    assert X is not None and verify_map(X, Q, F)
    assert check_compat(Q, F).verdict == "map"


def test_incompatible_has_certificate():
    Q = make_tuple(space(2), [["1/2", "1/2"], ["1/2", "1/2"]])
    F = make_tuple(space(2, "t"), [["1", "0"], ["0", "1"]])
    rep = check_compat(Q, F)
    assert rep.verdict == "incompatible" and rep.certificate.gap > 0
    with pytest.raises(Incompatible):
        construct_map(Q, F)
    with pytest.raises(Incompatible):
        almost_compat_sequence(Q, F)
    assert kernel_compat(Q, F) is None


@pytest.mark.parametrize("seed", range(40))
def test_kernel_and_order_agree(seed):
    rng = random.Random(seed)
    how = ("random", "merge", "kernel")[seed % 3]
    Q, F = random_pair(rng, rng.randint(1, 3), rng.randint(2, 5), rng.randint(2, 4), how=how)
    assert het_equiv_kernel_test(Q, F)
    K = kernel_compat(Q, F)
    if K is not None:
        assert all(K.pushforward(q) == f for q, f in zip(Q, F))


@pytest.mark.parametrize("seed", range(30))
def test_point_map_implies_kernel(seed):
    rng = random.Random(1000 + seed)
    Q, F = random_pair(rng, 2, rng.randint(2, 5), rng.randint(2, 3), how="merge")
    X = point_compat_exhaustive(Q, F)
    assert X is not None
    assert kernel_compat(Q, F) is not None
    found = all_compatible_maps(Q, F)
    assert X.assignment in found or any(
        all(X.assignment[w] == a[w] for w in range(len(a)) if any(q.weights[w] for q in Q)) for a in found
    )


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_construct_round_trip(seed):
    rng = random.Random(seed)
    Q, F, _ = feasible_with_denominator(rng, rng.randint(1, 3), rng.randint(2, 4), rng.randint(2, 3), 4)
    c = construct_map(Q, F)
    assert verify_map(c.point_map, c.lifted, F)
    assert max(conditional_identity_check(c.point_map, c.lifted, F)) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_verify_iff_zero_residual(seed):
    rng = random.Random(seed)
    Q, F = random_pair(rng, 2, 4, 3, how=rng.choice(["merge", "random"]))
    for _ in range(5):
        X = PointMap(Q.space, F.space, tuple(rng.randrange(3) for _ in range(4)))
        ok = verify_map(X, Q, F)
        assert ok == (max(conditional_identity_check(X, Q, F)) == 0) or not ok


def test_verify_iff_zero_residual_on_exhaustive_maps():
    rng = random.Random(5)
    for _ in range(20):
        Q, F = random_pair(rng, 2, 4, 2, how="merge")
        import itertools

        for assign in itertools.product(range(2), repeat=4):
            X = PointMap(Q.space, F.space, assign)
            pushed = X.pushforward_tuple(Q)
            same_law = all(p == f for p, f in zip(pushed, F))
            residual_zero = max(conditional_identity_check(X, Q, F)) == 0
            if same_law:
                assert residual_zero
            # the residual only compares conditional shapes; equal masses follow once F = Q o X^-1
            if residual_zero and X.pushforward(Q[0]).weights == F[0].weights:
                assert verify_map(X, Q, F)


def test_refine_preserves_profiles(two_atom):
    Q, _ = two_atom
    rs, lifted = refine(Q, 3)
    assert rs.space.size == 6
    _, a = density_profile(Q)
    _, b = density_profile(lifted)
    assert a == b
    rs2, _ = refine(Q, [1, 2])
    assert rs2.space.atoms == ("a", "b/0", "b/1")
    with pytest.raises(InvalidRefinement):
        refine(Q, 0)
    with pytest.raises(InvalidRefinement):
        refine(Q, [1])


def test_float_inputs(two_atom):
    Q, F = two_atom
    with pytest.raises(ModeError):
        construct_map(Q.as_float(), F.as_float())
    c = construct_map(Q.as_float(), F.as_float(), snap_floats=True)
    assert c.split == 2 and c.snap_distance == 0
    with pytest.raises(ModeError):
        point_compat_exhaustive(Q.as_float(), F.as_float())


def test_codomain_mismatch(two_atom):
    Q, F = two_atom
    X = PointMap(Q.space, F.space, (0, 1))
    with pytest.raises(CodomainMismatch):
        verify_map(X, Q, make_tuple(space(3), [["1/3"] * 3, ["1/3"] * 3]))


def test_search_cap(four_atom):
    Q, F = four_atom
    with pytest.raises(TooLarge):
        point_compat_exhaustive(Q, F, cap=10)


@pytest.mark.parametrize("seed", range(15))
def test_almost_sequence_properties(seed):
    rng = random.Random(seed)
    D = rng.choice([2, 4, 8])
    Q, F, _ = feasible_with_denominator(rng, 2, rng.randint(2, 4), rng.randint(2, 3), D)
    steps = almost_compat_sequence(Q, F, doubling_splits(D))
    for prev, cur in zip(steps, steps[1:]):
        assert all(b <= a + 1e-12 for a, b in zip(prev.kl, cur.kl))
    assert all(k == 0 for k in steps[-1].kl)
    for s in steps:
        for kl, tv, push, f in zip(s.kl, s.tv, s.pushforwards, F):
            assert float(tv) ** 2 <= kl / 2 + 1e-12
            assert all(not (b == 0 and a != 0) for a, b in zip(push.weights, f.weights))
        assert s.pushforwards == s.point_map.pushforward_tuple(s.refined.lift_tuple(Q))


def test_doubling_splits():
    assert doubling_splits(1) == [1]
    assert doubling_splits(6) == [1, 2, 4, 8]


def test_transplant_kernel_pushes_exactly(four_atom):
    Q, F = four_atom
    v = het_order(F, Q)
    K = transplant_kernel(Q, F, v)
    assert all(K.pushforward(q) == f for q, f in zip(Q, F))
    assert K.row_residual() == 0


@pytest.mark.parametrize("seed", range(10))
def test_almost_sequence_general_denominator(seed):
    # with D not a power of two the last doubling split need not be exact, but KL still never grows
    rng = random.Random(70 + seed)
    D = rng.choice([3, 5, 6, 7])
    Q, F, _ = feasible_with_denominator(rng, 2, rng.randint(2, 4), rng.randint(2, 3), D)
    steps = almost_compat_sequence(Q, F, doubling_splits(D) + [D])
    for prev, cur in zip(steps, steps[1:-1]):
        assert all(b <= a + 1e-12 for a, b in zip(prev.kl, cur.kl))
    assert all(k == 0 for k in steps[-1].kl)


def test_one_third_needs_three_children():
    Q = make_tuple(space(1), [["1"]])
    F = make_tuple(space(2, "t"), [["1/3", "2/3"]])
    steps = almost_compat_sequence(Q, F, [1, 2, 4, 3])
    assert [s.kl[0] > 0 for s in steps] == [True, True, True, False]
