"""Warehouse instances, assignments and the interpallet cost objective.

Shelves are indexed ``0..M-1`` and new pallets ``0..N-1``.  An assignment maps
every new pallet to exactly one shelf; whether the shelves can hold the load is
a separate question answered by :func:`check_feasible`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Pallet:
    id: int
    cost: int = 1

    def __post_init__(self):
        if not _is_int(self.cost) or self.cost < 0:
            raise ValueError(f"pallet {self.id}: cost must be a non-negative integer, got {self.cost!r}")


@dataclass(frozen=True)
class Shelf:
    """A shelf with ``remaining_capacity`` free units and ``P_m`` pre-allocated pallets.

    ``pre_affinity[t][a]`` is the matching parameter between the ``t``-th pallet
    already on the shelf and new pallet ``a``.
    """

    id: int
    remaining_capacity: int
    pre_affinity: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        if not _is_int(self.remaining_capacity) or self.remaining_capacity < 0:
            raise ValueError(
                f"shelf {self.id}: remaining_capacity must be a non-negative integer, "
                f"got {self.remaining_capacity!r}"
            )
        rows = tuple(tuple(float(v) for v in row) for row in self.pre_affinity)
        for t, row in enumerate(rows):
            for a, v in enumerate(row):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"shelf {self.id}: pre_affinity[{t}][{a}] = {v} outside [0, 1]")
        object.__setattr__(self, "pre_affinity", rows)

    @property
    def num_preallocated(self) -> int:
        return len(self.pre_affinity)


class MatchingMatrix:
    """Symmetric, zero-diagonal N x N matrix of matching parameters in [0, 1]."""

    def __init__(self, entries):
        arr = np.array(entries, dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 0)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"matching matrix must be square, got shape {arr.shape}")
        bad = np.argwhere(~((arr >= 0.0) & (arr <= 1.0)))
        if len(bad):
            i, j = bad[0]
            raise ValueError(f"matching[{i}][{j}] = {arr[i, j]} outside [0, 1]")
        diag = np.flatnonzero(np.diag(arr) != 0.0)
        if len(diag):
            i = diag[0]
            raise ValueError(f"matching[{i}][{i}] = {arr[i, i]} but the diagonal must be 0")
        asym = np.argwhere(arr != arr.T)
        if len(asym):
            i, j = asym[0]
            raise ValueError(f"matching matrix not symmetric: [{i}][{j}] = {arr[i, j]} != [{j}][{i}] = {arr[j, i]}")
        arr.setflags(write=False)
        self.entries = arr

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, key):
        return self.entries[key]

    def __eq__(self, other):
        if not isinstance(other, MatchingMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"MatchingMatrix(size={self.size})"


@dataclass(frozen=True, eq=False)
class Instance:
    """Warehouse state: shelves, new pallets and their pairwise matching.

    Derived read-only arrays are built once at construction:

    * ``capacities`` -- ``R_m`` as an int array of length M
    * ``costs`` -- ``c_a`` as an int array of length N
    * ``lam`` -- the N x N matching matrix
    * ``pre_sum`` -- M x N array, ``pre_sum[m, a]`` = sum of shelf m's pre-affinities to pallet a
    """

    shelves: tuple[Shelf, ...]
    pallets: tuple[Pallet, ...]
    matching: MatchingMatrix
    capacities: np.ndarray = field(init=False, repr=False)
    costs: np.ndarray = field(init=False, repr=False)
    lam: np.ndarray = field(init=False, repr=False)
    pre_sum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        shelves = tuple(self.shelves)
        pallets = tuple(self.pallets)
        matching = self.matching if isinstance(self.matching, MatchingMatrix) else MatchingMatrix(self.matching)
        n = len(pallets)
        if matching.size != n:
            raise ValueError(f"matching matrix is {matching.size}x{matching.size} but there are {n} pallets")
        pre_sum = np.zeros((len(shelves), n))
        for m, shelf in enumerate(shelves):
            for t, row in enumerate(shelf.pre_affinity):
                if len(row) != n:
                    raise ValueError(f"shelf {m}: pre_affinity row {t} has length {len(row)}, expected {n}")
            if shelf.pre_affinity:
                pre_sum[m] = np.sum(shelf.pre_affinity, axis=0)
        capacities = np.array([s.remaining_capacity for s in shelves], dtype=np.int64)
        costs = np.array([p.cost for p in pallets], dtype=np.int64)
        for arr in (capacities, costs, pre_sum):
            arr.setflags(write=False)
        object.__setattr__(self, "shelves", shelves)
        object.__setattr__(self, "pallets", pallets)
        object.__setattr__(self, "matching", matching)
        object.__setattr__(self, "capacities", capacities)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "lam", matching.entries)
        object.__setattr__(self, "pre_sum", pre_sum)

    @classmethod
    def from_arrays(cls, capacities, costs, matching, pre_affinity=None) -> Instance:
        """Build an instance from plain lists.

        ``pre_affinity`` is an optional per-shelf list of rows (each of length N).
        """
        shelves = []
        for m, cap in enumerate(capacities):
            rows = pre_affinity[m] if pre_affinity is not None else ()
            shelves.append(Shelf(m, int(cap), tuple(tuple(r) for r in rows)))
        pallets = [Pallet(a, int(c)) for a, c in enumerate(costs)]
        return cls(tuple(shelves), tuple(pallets), MatchingMatrix(np.asarray(matching, dtype=float).reshape(len(costs), len(costs))))

    @property
    def num_shelves(self) -> int:
        return len(self.shelves)

    @property
    def num_pallets(self) -> int:
        return len(self.pallets)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.shelves == other.shelves and self.pallets == other.pallets and self.matching == other.matching

    __hash__ = None


@dataclass(frozen=True)
class Assignment:
    """``shelf_of[a]`` is the shelf holding new pallet ``a``."""

    shelf_of: tuple[int, ...]

    def __post_init__(self):
        shelf_of = tuple(int(m) for m in self.shelf_of)
        if any(m < 0 for m in shelf_of):
            raise ValueError(f"negative shelf index in {shelf_of}")
        object.__setattr__(self, "shelf_of", shelf_of)

    def __len__(self):
        return len(self.shelf_of)

    def __getitem__(self, a):
        return self.shelf_of[a]

    def __iter__(self):
        return iter(self.shelf_of)

    def with_shelf(self, pallet: int, shelf: int) -> Assignment:
        s = list(self.shelf_of)
        s[pallet] = shelf
        return Assignment(tuple(s))

    def pallets_on(self, shelf: int) -> list[int]:
        return [a for a, m in enumerate(self.shelf_of) if m == shelf]


@dataclass(frozen=True)
class ShelfReport:
    shelf: int
    load: int
    remaining_capacity: int
    overflow: int


@dataclass(frozen=True)
class FeasibilityReport:
    shelves: tuple[ShelfReport, ...]

    @property
    def feasible(self) -> bool:
        return all(s.overflow == 0 for s in self.shelves)

    @property
    def overflows(self) -> list[int]:
        return [s.overflow for s in self.shelves]

    @property
    def loads(self) -> list[int]:
        return [s.load for s in self.shelves]


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def as_assignment(assignment) -> Assignment:
    return assignment if isinstance(assignment, Assignment) else Assignment(tuple(assignment))


def _validate(instance: Instance, assignment) -> np.ndarray:
    assignment = as_assignment(assignment)
    if len(assignment) != instance.num_pallets:
        raise ValueError(f"assignment has {len(assignment)} entries, instance has {instance.num_pallets} pallets")
    shelf_of = np.fromiter(assignment.shelf_of, dtype=np.int64, count=len(assignment))
    if len(shelf_of) and shelf_of.max() >= instance.num_shelves:
        raise ValueError(f"shelf index {shelf_of.max()} out of range for {instance.num_shelves} shelves")
    return shelf_of


def shelf_loads(instance: Instance, assignment) -> np.ndarray:
    shelf_of = _validate(instance, assignment)
    return np.bincount(shelf_of, weights=instance.costs, minlength=instance.num_shelves).astype(np.int64)


def shelf_load(instance: Instance, assignment, shelf: int) -> int:
    """Total cost of the pallets placed on ``shelf``."""
    if not 0 <= shelf < instance.num_shelves:
        raise ValueError(f"shelf index {shelf} out of range [0, {instance.num_shelves})")
    shelf_of = _validate(instance, assignment)
    return int(instance.costs[shelf_of == shelf].sum())


def objective_lambda(instance: Instance, assignment) -> float:
    """Total interpallet cost of ``assignment``; capacity is ignored.

    Sums the matching parameter of every co-located pair of new pallets plus,
    for each new pallet, its matching parameters to the pallets already on its
    shelf.
    """
    shelf_of = _validate(instance, assignment)
    n = len(shelf_of)
    if n == 0:
        return 0.0
    same = shelf_of[:, None] == shelf_of[None, :]
    pair_cost = np.triu(instance.lam * same, k=1).sum()
    pre_cost = instance.pre_sum[shelf_of, np.arange(n)].sum() if instance.num_shelves else 0.0
    return float(pair_cost + pre_cost)


def check_feasible(instance: Instance, assignment) -> FeasibilityReport:
    loads = shelf_loads(instance, assignment)
    rows = []
    for m, (load, cap) in enumerate(zip(loads, instance.capacities)):
        rows.append(ShelfReport(m, int(load), int(cap), int(max(0, load - cap))))
    return FeasibilityReport(tuple(rows))
