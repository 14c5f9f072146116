"""Exhaustive optimum oracle and solution-space counting for small instances."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence


from .model import Assignment, Instance

ENUMERATION_LIMIT = 10**7


class SizeLimitError(ValueError):
    """The instance is too large to enumerate."""


class InfeasibleError(ValueError):
    """No assignment satisfies every capacity constraint."""


@dataclass(frozen=True)
class CountResult:
    exact: int | None
    log10_lower_bound: float
    balanced_occupancy: tuple[int, ...]

    @property
    def floor_exponent(self) -> int:
        return math.floor(self.log10_lower_bound)


def _check_guard(instance: Instance, limit: int):
    M, N = instance.num_shelves, instance.num_pallets
    if M**N > limit:
        raise SizeLimitError(f"{M}^{N} configurations exceed the enumeration limit of {limit}")


def enumerate_feasible(instance: Instance, limit: int = ENUMERATION_LIMIT) -> Iterator[Assignment]:
    """Yield every capacity-feasible assignment once, in lexicographic order of ``shelf_of``."""
    _check_guard(instance, limit)
    N, M = instance.num_pallets, instance.num_shelves
    costs = [int(c) for c in instance.costs]
    free = [int(r) for r in instance.capacities]
    shelf_of = [0] * N

    def rec(a):
        if a == N:
            yield Assignment(tuple(shelf_of))
            return
        for m in range(M):
            if costs[a] <= free[m]:
                free[m] -= costs[a]
                shelf_of[a] = m
                yield from rec(a + 1)
                free[m] += costs[a]

    yield from rec(0)


def count_feasible(instance: Instance, limit: int = ENUMERATION_LIMIT) -> int:
    return sum(1 for _ in enumerate_feasible(instance, limit))


def brute_force_optimum(instance: Instance, limit: int = ENUMERATION_LIMIT) -> tuple[Assignment, float]:
    """Feasible assignment of minimum interpallet cost; the first one found wins ties."""
    _check_guard(instance, limit)
    N, M = instance.num_pallets, instance.num_shelves
    lam = instance.lam.tolist()
    pre = instance.pre_sum.tolist()
    costs = [int(c) for c in instance.costs]
    free = [int(r) for r in instance.capacities]
    if sum(costs) > sum(free):
        raise InfeasibleError(f"total pallet cost {sum(costs)} exceeds total capacity {sum(free)}")

    members: list[list[int]] = [[] for _ in range(M)]
    shelf_of = [0] * N
    best: list = [math.inf, None]

    def rec(a, cost):
        if a == N:
            if cost < best[0]:
                best[0] = cost
                best[1] = tuple(shelf_of)
            return
        row = lam[a]
        for m in range(M):
            if costs[a] <= free[m]:
                delta = pre[m][a]
                for b in members[m]:
                    delta += row[b]
                free[m] -= costs[a]
                members[m].append(a)
                shelf_of[a] = m
                rec(a + 1, cost + delta)
                members[m].pop()
                free[m] += costs[a]

    rec(0, 0.0)
    if best[1] is None:
        raise InfeasibleError("no assignment satisfies all capacity constraints")
    return Assignment(best[1]), float(best[0])


def count_solutions_exact(capacities: Sequence[int], N: int) -> int:
    """Number of ways to place ``N`` distinct unit-cost pallets within ``capacities``.

    Shelf-by-shelf dynamic program: ``f(m, n)`` counts placements of ``n``
    remaining pallets on shelves ``m..M-1``.
    """
    if N < 0:
        raise ValueError(f"N must be non-negative, got {N}")
    caps = [int(r) for r in capacities]
    if any(r < 0 for r in caps):
        raise ValueError("capacities must be non-negative")
    # ways[n] = f(m+1, n) while sweeping m from the last shelf to the first
    ways = [1] + [0] * N
    for R in reversed(caps):
        ways = [sum(math.comb(n, q) * ways[n - q] for q in range(min(R, n) + 1)) for n in range(N + 1)]
    return ways[N]


def count_by_occupancy_tuples(capacities: Sequence[int], N: int) -> int:
    """Literal sum of ``N! / prod(Q_m!)`` over all admissible occupancy tuples."""
    total = 0
    for Q in itertools.product(*(range(min(r, N) + 1) for r in capacities)):
        if sum(Q) == N:
            total += math.factorial(N) // math.prod(math.factorial(q) for q in Q)
    return total


def balanced_occupancy(M: int, N: int) -> tuple[int, ...]:
    q, r = divmod(N, M)
    return tuple([q + 1] * r + [q] * (M - r))


def count_lower_bound_log10(capacities: Sequence[int], N: int) -> tuple[float, int]:
    """``log10`` of the balanced multinomial term and its floor.

    The balanced term puts ``N // M`` pallets on every shelf and one extra on
    the first ``N % M`` shelves.
    """
    M = len(capacities)
    if N < 0 or M == 0:
        raise ValueError("need N >= 0 and at least one shelf")
    Q = balanced_occupancy(M, N)
    if Q[0] > min(capacities):
        raise ValueError(f"balanced occupancy needs {Q[0]} slots per shelf but min capacity is {min(capacities)}")
    value = (math.lgamma(N + 1) - sum(math.lgamma(q + 1) for q in Q)) / math.log(10)
    return value, math.floor(value)


def count_solutions(capacities: Sequence[int], N: int, exact: bool = True) -> CountResult:
    value, _ = count_lower_bound_log10(capacities, N)
    S = count_solutions_exact(capacities, N) if exact else None
    return CountResult(S, value, balanced_occupancy(len(capacities), N))
