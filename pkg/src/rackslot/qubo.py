"""Penalty-method QUBO for the slotting problem.

The Hamiltonian is the sum of three terms over allocation bits ``x[a, m]``
and per-shelf slack bits:

* one-shelf penalty   ``A * sum_a (1 - sum_m x[a, m])**2``
* interpallet cost    ``B * Lambda(x)``
* capacity penalty    ``C * sum_m (sum_a c_a x[a, m] + <coeffs_m | slack_m> - R_m)**2``

Variable layout: allocation bit ``(a, m)`` sits at index ``a * M + m``; slack
bits follow, shelf by shelf.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .model import Assignment, Instance, as_assignment, shelf_loads


class SlackMode(str, enum.Enum):
    BOUNDED = "bounded"
    BINARY = "binary"


@dataclass(frozen=True)
class PenaltyWeights:
    A: float
    B: float
    C: float

    def __post_init__(self):
        for name in ("A", "B", "C"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"penalty weight {name} must be a positive finite number, got {v!r}")


def slack_encoding(R: int, mode: SlackMode | str = SlackMode.BOUNDED) -> list[int]:
    """Slack-bit coefficients for a shelf with remaining capacity ``R``.

    Bounded mode yields ``1, 2, ..., 2**(k-1), R + 1 - 2**k`` with
    ``k = floor(log2 R)``, whose subset sums are exactly ``0..R``.  Binary mode
    yields the plain powers ``1, 2, ..., 2**floor(log2 R)``.
    """
    mode = SlackMode(mode)
    if R < 0:
        raise ValueError(f"remaining capacity must be non-negative, got {R}")
    if R == 0:
        return []
    k = int(R).bit_length() - 1
    if mode is SlackMode.BINARY:
        return [1 << l for l in range(k + 1)]
    return [1 << l for l in range(k)] + [R + 1 - (1 << k)]


@dataclass(frozen=True)
class VarLayout:
    """Maps variable indices to allocation bits or slack bits."""

    num_pallets: int
    num_shelves: int
    slack_coeffs: tuple[tuple[int, ...], ...]

    @cached_property
    def slack_starts(self) -> tuple[int, ...]:
        starts = []
        pos = self.num_pallets * self.num_shelves
        for coeffs in self.slack_coeffs:
            starts.append(pos)
            pos += len(coeffs)
        return tuple(starts)

    @property
    def num_alloc(self) -> int:
        return self.num_pallets * self.num_shelves

    @property
    def num_vars(self) -> int:
        return self.num_alloc + sum(len(c) for c in self.slack_coeffs)

    def alloc_index(self, pallet: int, shelf: int) -> int:
        return pallet * self.num_shelves + shelf

    def slack_indices(self, shelf: int) -> range:
        start = self.slack_starts[shelf]
        return range(start, start + len(self.slack_coeffs[shelf]))

    def describe(self, i: int) -> tuple:
        """``("x", pallet, shelf)`` or ``("slack", shelf, bit)`` for variable ``i``."""
        if not 0 <= i < self.num_vars:
            raise IndexError(i)
        if i < self.num_alloc:
            return ("x", *divmod(i, self.num_shelves))
        for m, start in enumerate(self.slack_starts):
            if start <= i < start + len(self.slack_coeffs[m]):
                return ("slack", m, i - start)
        raise AssertionError("unreachable")


@dataclass(frozen=True, eq=False)
class QuboModel:
    """``energy(b) = offset + sum_i linear[i] b_i + sum_{i<j} quadratic[i, j] b_i b_j``."""

    num_vars: int
    linear: dict[int, float]
    quadratic: dict[tuple[int, int], float]
    offset: float = 0.0
    layout: VarLayout | None = field(default=None, repr=False)

    def __post_init__(self):
        for (i, j) in self.quadratic:
            if not (0 <= i < j < self.num_vars):
                raise ValueError(f"quadratic key ({i}, {j}) must satisfy 0 <= i < j < {self.num_vars}")
        for i in self.linear:
            if not 0 <= i < self.num_vars:
                raise ValueError(f"linear index {i} out of range")

    @cached_property
    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """``(h, J)`` with ``J`` symmetric and zero on the diagonal."""
        h = np.zeros(self.num_vars)
        for i, v in self.linear.items():
            h[i] = v
        J = np.zeros((self.num_vars, self.num_vars))
        for (i, j), v in self.quadratic.items():
            J[i, j] = v
            J[j, i] = v
        h.setflags(write=False)
        J.setflags(write=False)
        return h, J

    def same_coefficients(self, other: QuboModel) -> bool:
        return (
            self.num_vars == other.num_vars
            and self.offset == other.offset
            and self.linear == other.linear
            and self.quadratic == other.quadratic
        )


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Spin model over ``s_i in {-1, +1}``."""

    num_vars: int
    biases: dict[int, float]
    couplings: dict[tuple[int, int], float]
    offset: float = 0.0


class _Accumulator:
    def __init__(self):
        self.linear: dict[int, float] = {}
        self.quadratic: dict[tuple[int, int], float] = {}
        self.offset = 0.0

    def add_linear(self, i, v):
        if v:
            self.linear[i] = self.linear.get(i, 0.0) + v

    def add_quadratic(self, i, j, v):
        if not v:
            return
        if i == j:
            # b*b == b for binary variables
            self.add_linear(i, v)
            return
        key = (i, j) if i < j else (j, i)
        self.quadratic[key] = self.quadratic.get(key, 0.0) + v

    def add_squared(self, terms: Sequence[tuple[int, float]], constant: float, weight: float):
        """Add ``weight * (sum_k w_k b_k + constant)**2``."""
        self.offset += weight * constant * constant
        for k, (i, w) in enumerate(terms):
            self.add_linear(i, weight * (w * w + 2.0 * constant * w))
            for j, w2 in terms[k + 1:]:
                self.add_quadratic(i, j, 2.0 * weight * w * w2)

    def build(self, num_vars, layout) -> QuboModel:
        linear = {i: v for i, v in sorted(self.linear.items()) if v != 0.0}
        quadratic = {k: v for k, v in sorted(self.quadratic.items()) if v != 0.0}
        return QuboModel(num_vars, linear, quadratic, self.offset, layout)


def default_weights(instance: Instance) -> PenaltyWeights:
    """``B = 1`` and ``A = C = max_objective + 1``.

    ``max_objective`` bounds the interpallet cost of any assignment, so with
    integer loads a single broken constraint always costs more than the whole
    objective can save.
    """
    lam_max = float(np.triu(instance.lam, k=1).sum() + instance.pre_sum.sum())
    big = lam_max + 1.0
    return PenaltyWeights(A=big, B=1.0, C=big)


def build_layout(instance: Instance, slack_mode: SlackMode | str = SlackMode.BOUNDED) -> VarLayout:
    coeffs = tuple(tuple(slack_encoding(int(R), slack_mode)) for R in instance.capacities)
    return VarLayout(instance.num_pallets, instance.num_shelves, coeffs)


def build_qubo(
    instance: Instance,
    weights: PenaltyWeights | None = None,
    slack_mode: SlackMode | str = SlackMode.BOUNDED,
) -> QuboModel:
    """Expand the three penalty/objective terms into linear, quadratic and constant parts."""
    if weights is None:
        weights = default_weights(instance)
    layout = build_layout(instance, slack_mode)
    N, M = instance.num_pallets, instance.num_shelves
    acc = _Accumulator()
    idx = layout.alloc_index

    for a in range(N):
        acc.add_squared([(idx(a, m), 1.0) for m in range(M)], -1.0, weights.A)

    lam = instance.lam
    for m in range(M):
        for a in range(N):
            acc.add_linear(idx(a, m), weights.B * instance.pre_sum[m, a])
            for b in range(a):
                acc.add_quadratic(idx(b, m), idx(a, m), weights.B * lam[a, b])

    for m in range(M):
        terms = [(idx(a, m), float(instance.costs[a])) for a in range(N) if instance.costs[a]]
        terms += [(i, float(c)) for i, c in zip(layout.slack_indices(m), layout.slack_coeffs[m])]
        acc.add_squared(terms, -float(instance.capacities[m]), weights.C)

    return acc.build(layout.num_vars, layout)


def _as_bits(model_or_n, bits) -> np.ndarray:
    n = model_or_n if isinstance(model_or_n, int) else model_or_n.num_vars
    arr = np.asarray(bits, dtype=np.float64).ravel()
    if arr.shape[0] != n:
        raise ValueError(f"bitstring has length {arr.shape[0]}, model has {n} variables")
    return arr


def qubo_energy(model: QuboModel, bits) -> float:
    b = _as_bits(model, bits)
    if model.num_vars == 0:
        return float(model.offset)
    h, J = model.dense
    return float(model.offset + h @ b + 0.5 * (b @ J @ b))


def _greedy_slack(coeffs: Sequence[int], value: int) -> list[int]:
    bits = [0] * len(coeffs)
    for l in sorted(range(len(coeffs)), key=lambda l: -coeffs[l]):
        if coeffs[l] <= value:
            bits[l] = 1
            value -= coeffs[l]
    return bits


def encode_assignment(instance: Instance, assignment, model: QuboModel) -> np.ndarray:
    """Bitstring for ``assignment`` with each shelf's slack set to ``max(0, R_m - load_m)``."""
    assignment = as_assignment(assignment)
    layout = model.layout
    if layout is None:
        raise ValueError("model has no variable layout (was it imported from text?)")
    if len(assignment) != layout.num_pallets or instance.num_shelves != layout.num_shelves:
        raise ValueError("assignment/instance dimensions do not match the model layout")
    loads = shelf_loads(instance, assignment)
    bits = np.zeros(model.num_vars, dtype=np.uint8)
    for a, m in enumerate(assignment.shelf_of):
        bits[layout.alloc_index(a, m)] = 1
    for m in range(layout.num_shelves):
        slack = max(0, int(instance.capacities[m]) - int(loads[m]))
        for i, b in zip(layout.slack_indices(m), _greedy_slack(layout.slack_coeffs[m], slack)):
            bits[i] = b
    return bits


@dataclass(frozen=True)
class DecodeReport:
    shelf_sets: tuple[frozenset[int], ...]
    violating: tuple[int, ...]
    assignment: Assignment | None

    @property
    def valid(self) -> bool:
        return self.assignment is not None


def decode_bits(model: QuboModel, bits) -> DecodeReport:
    """Read the allocation bits back into per-pallet shelf sets."""
    layout = model.layout
    if layout is None:
        raise ValueError("model has no variable layout")
    b = _as_bits(model, bits)
    N, M = layout.num_pallets, layout.num_shelves
    x = b[: N * M].reshape(N, M) if N else np.zeros((0, M))
    sets = tuple(frozenset(int(m) for m in np.flatnonzero(row)) for row in x)
    violating = tuple(a for a, s in enumerate(sets) if len(s) != 1)
    assignment = None if violating else Assignment(tuple(next(iter(s)) for s in sets))
    return DecodeReport(sets, violating, assignment)


def to_ising(model: QuboModel) -> IsingModel:
    """Substitute ``b_i = (1 + s_i) / 2``."""
    biases: dict[int, float] = {}
    couplings: dict[tuple[int, int], float] = {}
    offset = float(model.offset)
    for i, h in model.linear.items():
        biases[i] = biases.get(i, 0.0) + h / 2.0
        offset += h / 2.0
    for (i, j), J in model.quadratic.items():
        q = J / 4.0
        offset += q
        biases[i] = biases.get(i, 0.0) + q
        biases[j] = biases.get(j, 0.0) + q
        couplings[(i, j)] = couplings.get((i, j), 0.0) + q
    biases = {i: v for i, v in sorted(biases.items()) if v != 0.0}
    return IsingModel(model.num_vars, biases, couplings, offset)


def ising_energy(model: IsingModel, spins) -> float:
    s = np.asarray(spins, dtype=np.float64).ravel()
    if s.shape[0] != model.num_vars:
        raise ValueError(f"spin vector has length {s.shape[0]}, model has {model.num_vars} variables")
    e = model.offset
    for i, v in model.biases.items():
        e += v * s[i]
    for (i, j), v in model.couplings.items():
        e += v * s[i] * s[j]
    return float(e)


# -- text format -------------------------------------------------------------

def _format_lines(kind: str, num_vars: int, offset: float, linear, quadratic) -> str:
    entries = [((i, i), v) for i, v in linear.items()] + list(quadratic.items())
    entries.sort()
    lines = [f"{kind} {num_vars} {float(offset)!r}"]
    lines += [f"{i} {j} {float(v)!r}" for (i, j), v in entries]
    return "\n".join(lines) + "\n"


def _write(text: str, destination):
    if destination is None:
        return
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")


def export_qubo(model: QuboModel, destination=None) -> str:
    """Render ``model`` as ``qubo <n> <offset>`` followed by ``i j value`` lines.

    Linear terms appear as ``i i value``.  Writes to ``destination`` (a path or
    text stream) when given and always returns the text.
    """
    text = _format_lines("qubo", model.num_vars, model.offset, model.linear, model.quadratic)
    _write(text, destination)
    return text


def export_ising(model: IsingModel, destination=None) -> str:
    text = _format_lines("ising", model.num_vars, model.offset, model.biases, model.couplings)
    _write(text, destination)
    return text


def _parse(text: str, kind: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty model file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != kind:
        raise ValueError(f"line 1: expected '{kind} <num_vars> <offset>', got {lines[0]!r}")
    try:
        num_vars, offset = int(head[1]), float(head[2])
    except ValueError as exc:
        raise ValueError(f"line 1: {exc}") from None
    linear: dict[int, float] = {}
    quadratic: dict[tuple[int, int], float] = {}
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            if len(parts) != 3:
                raise ValueError("expected 'i j value'")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: cannot parse {ln!r} ({exc})") from None
        if not (0 <= i <= j < num_vars):
            raise ValueError(f"line {lineno}: indices must satisfy 0 <= i <= j < {num_vars}")
        if i == j:
            linear[i] = linear.get(i, 0.0) + v
        else:
            quadratic[(i, j)] = quadratic.get((i, j), 0.0) + v
    return num_vars, offset, linear, quadratic


def _read(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        return Path(source).read_text(encoding="utf-8")
    return source


def import_qubo(source) -> QuboModel:
    """Parse the text produced by :func:`export_qubo` (path, stream or text)."""
    num_vars, offset, linear, quadratic = _parse(_read(source), "qubo")
    return QuboModel(num_vars, linear, quadratic, offset)


def import_ising(source) -> IsingModel:
    num_vars, offset, biases, couplings = _parse(_read(source), "ising")
    return IsingModel(num_vars, biases, couplings, offset)
