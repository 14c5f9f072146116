"""Synthetic square-warehouse instances and the JSON instance file format.

Random draws use NumPy's PCG64 generator seeded through ``numpy.random.default_rng``,
so a seed reproduces the same instance on any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .model import Instance, MatchingMatrix, Pallet, Shelf

FORMAT_VERSION = 1


class InstanceFormatError(ValueError):
    pass


def round_half_up(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class GeneratorSpec:
    M: int
    capacity: int | None = None
    prefill_fraction: float = 0.20
    insert_fraction: float = 0.10
    lambda_distribution: str = "uniform01"
    seed: int = 0

    def __post_init__(self):
        if self.capacity is None:
            object.__setattr__(self, "capacity", self.M)
        if self.M < 1 or self.capacity < 0:
            raise ValueError("need M >= 1 and capacity >= 0")
        if not 0.0 <= self.prefill_fraction < 1.0:
            raise ValueError(f"prefill_fraction must be in [0, 1), got {self.prefill_fraction}")
        if not 0.0 < self.insert_fraction <= 1.0:
            raise ValueError(f"insert_fraction must be in (0, 1], got {self.insert_fraction}")
        if Decimal(repr(self.prefill_fraction)) + Decimal(repr(self.insert_fraction)) > 1:
            raise ValueError("prefill_fraction + insert_fraction exceeds 1")
        if self.lambda_distribution != "uniform01":
            raise ValueError(f"unknown lambda distribution {self.lambda_distribution!r}")

    @property
    def prefill_per_shelf(self) -> int:
        return round_half_up(float(Decimal(repr(self.prefill_fraction)) * self.capacity))

    @property
    def num_pallets(self) -> int:
        return round_half_up(float(Decimal(repr(self.insert_fraction)) * self.M * self.capacity))


def generate_square(spec: GeneratorSpec) -> Instance:
    """Warehouse of ``M`` shelves with ``capacity`` slots each, prefilled evenly.

    Draw order from the seeded stream: the strict upper triangle of the new-new
    matching matrix row by row, then each shelf's pre-allocated rows in shelf
    order.  All values are uniform on [0, 1).
    """
    M, cap = spec.M, spec.capacity
    P = spec.prefill_per_shelf
    N = spec.num_pallets
    if P * M + N > M * cap:
        raise ValueError(f"{P * M} prefilled plus {N} new pallets exceed {M * cap} slots")
    rng = np.random.default_rng(spec.seed)
    lam = np.zeros((N, N))
    iu = np.triu_indices(N, k=1)
    lam[iu] = rng.random(len(iu[0]))
    lam = lam + lam.T
    shelves = []
    for m in range(M):
        rows = rng.random((P, N))
        shelves.append(Shelf(m, cap - P, tuple(tuple(r) for r in rows.tolist())))
    pallets = [Pallet(a, 1) for a in range(N)]
    return Instance(tuple(shelves), tuple(pallets), MatchingMatrix(lam))


def instance_to_dict(instance: Instance) -> dict:
    return {
        "version": FORMAT_VERSION,
        "num_shelves": instance.num_shelves,
        "shelves": [
            {"remaining_capacity": s.remaining_capacity, "pre_affinity": [list(r) for r in s.pre_affinity]}
            for s in instance.shelves
        ],
        "pallets": [{"cost": p.cost} for p in instance.pallets],
        "lambda": instance.lam.tolist(),
    }


def save_instance(instance: Instance, destination) -> None:
    text = json.dumps(instance_to_dict(instance), indent=1)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text + "\n", encoding="utf-8")


def _int_field(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceFormatError(f"{where}: expected an integer, got {value!r}")
    if value < 0:
        raise InstanceFormatError(f"{where}: must be non-negative, got {value}")
    return value


def _unit_interval(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceFormatError(f"{where}: expected a real number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise InstanceFormatError(f"{where}: range violation, {value} is outside [0, 1]")
    return float(value)


def _require(doc: dict, key: str, kind, where: str = ""):
    if key not in doc:
        raise InstanceFormatError(f"{where}missing field '{key}'")
    if not isinstance(doc[key], kind):
        raise InstanceFormatError(f"{where}{key}: expected {kind.__name__}, got {type(doc[key]).__name__}")
    return doc[key]


def instance_from_dict(doc) -> Instance:
    """Validate a parsed instance document and build the :class:`Instance`."""
    if not isinstance(doc, dict):
        raise InstanceFormatError("top level must be a JSON object")
    version = _require(doc, "version", int)
    if version != FORMAT_VERSION:
        raise InstanceFormatError(f"version: unsupported value {version}, expected {FORMAT_VERSION}")
    shelves_doc = _require(doc, "shelves", list)
    pallets_doc = _require(doc, "pallets", list)
    lam_doc = _require(doc, "lambda", list)
    num_shelves = _int_field(_require(doc, "num_shelves", int), "num_shelves")
    if num_shelves != len(shelves_doc):
        raise InstanceFormatError(f"num_shelves: {num_shelves} but {len(shelves_doc)} shelves listed")

    costs = []
    for a, p in enumerate(pallets_doc):
        if not isinstance(p, dict):
            raise InstanceFormatError(f"pallets[{a}]: expected an object")
        costs.append(_int_field(_require(p, "cost", int, f"pallets[{a}]."), f"pallets[{a}].cost"))
    N = len(costs)

    if len(lam_doc) != N:
        raise InstanceFormatError(f"lambda: {len(lam_doc)} rows but {N} pallets")
    lam = np.zeros((N, N))
    for i, row in enumerate(lam_doc):
        if not isinstance(row, list) or len(row) != N:
            raise InstanceFormatError(f"lambda[{i}]: expected a list of {N} values")
        for j, v in enumerate(row):
            lam[i, j] = _unit_interval(v, f"lambda[{i}][{j}]")
    for i in range(N):
        if lam[i, i] != 0.0:
            raise InstanceFormatError(f"lambda[{i}][{i}]: diagonal violation, must be 0, got {lam[i, i]}")
        for j in range(i):
            if lam[i, j] != lam[j, i]:
                raise InstanceFormatError(
                    f"lambda[{j}][{i}]: symmetry violation, {lam[j, i]} != lambda[{i}][{j}] = {lam[i, j]}"
                )

    shelves = []
    for m, s in enumerate(shelves_doc):
        where = f"shelves[{m}]"
        if not isinstance(s, dict):
            raise InstanceFormatError(f"{where}: expected an object")
        cap = _int_field(_require(s, "remaining_capacity", int, where + "."), where + ".remaining_capacity")
        rows = _require(s, "pre_affinity", list, where + ".")
        parsed = []
        for t, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != N:
                raise InstanceFormatError(f"{where}.pre_affinity[{t}]: expected a list of {N} values")
            parsed.append(tuple(_unit_interval(v, f"{where}.pre_affinity[{t}][{a}]") for a, v in enumerate(row)))
        shelves.append(Shelf(m, cap, tuple(parsed)))

    return Instance(tuple(shelves), tuple(Pallet(a, c) for a, c in enumerate(costs)), MatchingMatrix(lam))


def load_instance(source) -> Instance:
    if hasattr(source, "read"):
        text, name = source.read(), getattr(source, "name", "<stream>")
    else:
        text, name = Path(source).read_text(encoding="utf-8"), str(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{name}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return instance_from_dict(doc)
    except InstanceFormatError as exc:
        raise InstanceFormatError(f"{name}: {exc}") from None
