import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rackslot.exact import (
    InfeasibleError, SizeLimitError, balanced_occupancy, brute_force_optimum, count_by_occupancy_tuples,
    count_feasible, count_lower_bound_log10, count_solutions, count_solutions_exact, enumerate_feasible,
)
from rackslot.model import Assignment, Instance, check_feasible

from conftest import random_instance
from oracles import brute_force_lambda_star


def test_enumerate_t1(t1):
    found = list(enumerate_feasible(t1))
    assert len(found) == 6 == len(set(found))
    assert all(check_feasible(t1, a).feasible for a in found)


def test_enumerate_trivial():
    empty = Instance.from_arrays([1, 1], [], np.zeros((0, 0)))
    assert list(enumerate_feasible(empty)) == [Assignment(())]
    single = Instance.from_arrays([1, 2, 5], [1], [[0.0]])
    assert len(list(enumerate_feasible(single))) == 3


def test_enumerate_guard():
    big = Instance.from_arrays([20] * 10, [1] * 8, np.zeros((8, 8)))
    with pytest.raises(SizeLimitError):
        next(enumerate_feasible(big))


def test_brute_force_examples(t1, t2):
    a, v = brute_force_optimum(t1)
    assert v == pytest.approx(0.1) and a == Assignment((0, 0, 1))
    a, v = brute_force_optimum(t2)
    assert v == pytest.approx(0.3) and a == Assignment((0,))
    with pytest.raises(InfeasibleError):
        brute_force_optimum(Instance.from_arrays([1, 1, 1], [1] * 4, np.zeros((4, 4))))
    # per-shelf impossibility with enough total capacity
    with pytest.raises(InfeasibleError):
        brute_force_optimum(Instance.from_arrays([1, 1], [2], [[0.0]]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(0, 6), M=st.integers(1, 3))
def test_brute_force_matches_product_oracle(seed, N, M):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, N, M, max_cap=4, max_cost=2)
    expected = brute_force_lambda_star(inst)
    if expected is None:
        with pytest.raises(InfeasibleError):
            brute_force_optimum(inst)
    else:
        a, v = brute_force_optimum(inst)
        assert v == pytest.approx(expected, abs=1e-12)
        assert check_feasible(inst, a).feasible


def test_count_examples():
    assert count_solutions_exact([2, 2], 3) == 6
    assert count_solutions_exact([4, 4, 4], 2) == 9
    assert count_solutions_exact([0, 3], 0) == 1
    assert count_solutions_exact([], 0) == 1
    assert count_solutions_exact([], 2) == 0
    with pytest.raises(ValueError):
        count_solutions_exact([1], -1)


@settings(max_examples=100, deadline=None)
@given(caps=st.lists(st.integers(0, 4), min_size=1, max_size=4), N=st.integers(0, 8))
def test_dp_equals_tuple_sum(caps, N):
    assert count_solutions_exact(caps, N) == count_by_occupancy_tuples(caps, N)


def test_count_is_big_integer():
    S = count_solutions_exact([25] * 25, 375)
    assert isinstance(S, int) and S > 10**501


def test_lower_bound_examples():
    assert count_lower_bound_log10([8] * 10, 10)[1] == 6
    assert count_lower_bound_log10([20] * 25, 125)[1] == 157
    v, _ = count_lower_bound_log10([1] * 7, 7)
    assert v == pytest.approx(math.log10(math.factorial(7)), abs=1e-12)
    with pytest.raises(ValueError):
        count_lower_bound_log10([1, 1], 3)
    assert balanced_occupancy(3, 7) == (3, 2, 2)


@settings(max_examples=80, deadline=None)
@given(M=st.integers(1, 6), cap=st.integers(1, 6), N=st.integers(0, 20))
def test_lower_bound_below_exact(M, cap, N):
    if -(-N // M) > cap:
        return
    result = count_solutions([cap] * M, N)
    assert math.log10(result.exact) >= result.log10_lower_bound - 1e-9


def test_count_feasible_matches_dp_for_unit_costs():
    rng = np.random.default_rng(2)
    for _ in range(20):
        inst = random_instance(rng, int(rng.integers(0, 7)), int(rng.integers(1, 4)), max_cap=4)
        assert count_feasible(inst) == count_solutions_exact(inst.capacities.tolist(), inst.num_pallets)
