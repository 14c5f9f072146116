"""Simulated annealing over QUBO bitstrings (bit-flip) or assignments (move/swap).

Both engines share the schedule: the starting temperature is calibrated from
neighbor energy differences of the random start, the temperature then decays
geometrically, and each temperature holds a fixed-length Markov chain of
Metropolis proposals.  Energy differences are computed incrementally.

Randomness comes from :class:`random.Random` (MT19937) seeded with the run
seed, so a ``(problem, config)`` pair replays exactly.  A binding wall-time
budget is the one exception, since where the clock cuts a run depends on the
machine.
"""

from __future__ import annotations

import enum
import math
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .model import Assignment, Instance, as_assignment, objective_lambda, shelf_loads
from .qubo import PenaltyWeights, QuboModel, build_qubo, default_weights, qubo_energy


class Operator(str, enum.Enum):
    BITFLIP = "bitflip"
    REAL_SWAP = "real-swap"


@dataclass(frozen=True)
class SAConfig:
    alpha: float = 0.95
    accept_p0: float = 0.2
    chain_length: int = 100
    temperature_floor_ratio: float = 1e-6
    max_wall_time: float | None = None
    seed: int = 0
    operator_set: Operator | str = Operator.REAL_SWAP
    max_iterations: int | None = None
    calibration_samples: int = 100

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.accept_p0 < 1.0:
            raise ValueError(f"accept_p0 must be in (0, 1), got {self.accept_p0}")
        if int(self.chain_length) != self.chain_length or self.chain_length < 1:
            raise ValueError(f"chain_length must be a positive integer, got {self.chain_length}")
        if not self.temperature_floor_ratio > 0:
            raise ValueError("temperature_floor_ratio must be positive")
        if self.max_wall_time is not None and not self.max_wall_time > 0:
            raise ValueError("max_wall_time must be positive")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.calibration_samples < 1:
            raise ValueError("calibration_samples must be at least 1")
        Operator(self.operator_set)


@dataclass
class RunResult:
    best_energy: float
    best_solution: Any
    energy_trace: list[tuple[int, float]]
    iterations: int
    wall_time: float
    seed: int
    initial_temperature: float = 1.0
    temperature_steps: int = 0
    stop_reason: str = ""
    target_time: float | None = None


def acceptance_probability(delta_H: float, beta: float) -> float:
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    if delta_H <= 0:
        return 1.0
    return math.exp(-beta * delta_H)


def initial_temperature(energy_fn, start_state, neighbor_fn, samples: int = 100, p: float = 0.2, rng=None) -> float:
    """Mean of ``-|dE| / ln p`` over ``samples`` neighbors of ``start_state``.

    Neighbors with ``dE == 0`` are skipped; if every sample is flat the
    temperature falls back to 1.0.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = rng if rng is not None else random.Random()
    e0 = energy_fn(start_state)
    log_p = math.log(p)
    temps = []
    for _ in range(samples):
        d = abs(energy_fn(neighbor_fn(start_state, rng)) - e0)
        if d != 0:
            temps.append(-d / log_p)
    return sum(temps) / len(temps) if temps else 1.0


def cooling_temperature(T0: float, alpha: float, k: int) -> float:
    if not T0 > 0:
        raise ValueError(f"T0 must be positive, got {T0}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    return T0 * alpha**k


# -- neighborhood operators --------------------------------------------------

def neighbor_bitflip(bits, rng) -> np.ndarray:
    out = np.array(bits, dtype=np.uint8, copy=True)
    if out.size == 0:
        raise ValueError("cannot flip a bit of an empty bitstring")
    i = rng.randrange(out.size)
    out[i] ^= 1
    return out


def _pick_move(shelf_of: Sequence[int], M: int, rng) -> tuple[int, int]:
    a = rng.randrange(len(shelf_of))
    m2 = rng.randrange(M - 1)
    if m2 >= shelf_of[a]:
        m2 += 1
    return a, m2


def _pick_swap(shelf_of: Sequence[int], rng, tries: int = 16) -> tuple[int, int] | None:
    """Uniform unordered pair of pallets on different shelves, or None if there is none."""
    n = len(shelf_of)
    for _ in range(tries):
        a = rng.randrange(n)
        b = rng.randrange(n)
        if shelf_of[a] != shelf_of[b]:
            return a, b
    # exact fallback: weight each pallet by how many partners it has
    counts: dict[int, int] = {}
    for m in shelf_of:
        counts[m] = counts.get(m, 0) + 1
    weights = [n - counts[m] for m in shelf_of]
    if not any(weights):
        return None
    a = rng.choices(range(n), weights=weights)[0]
    others = [b for b in range(n) if shelf_of[b] != shelf_of[a]]
    return a, others[rng.randrange(len(others))]


def neighbor_move(assignment, M: int, rng) -> Assignment:
    """Move one uniformly chosen pallet to a uniformly chosen different shelf."""
    assignment = as_assignment(assignment)
    if M < 2:
        raise ValueError(f"a move needs at least two shelves, got M={M}")
    if len(assignment) == 0:
        raise ValueError("a move needs at least one pallet")
    a, m2 = _pick_move(assignment.shelf_of, M, rng)
    return assignment.with_shelf(a, m2)


def neighbor_swap(assignment, rng) -> tuple[Assignment, bool]:
    """Exchange the shelves of a uniform pair of pallets that sit on different shelves.

    Returns ``(new_assignment, True)``, or ``(assignment, False)`` when every
    pallet shares one shelf (a null move).
    """
    assignment = as_assignment(assignment)
    pair = _pick_swap(assignment.shelf_of, rng) if len(assignment) >= 2 else None
    if pair is None:
        return assignment, False
    a, b = pair
    s = list(assignment.shelf_of)
    s[a], s[b] = s[b], s[a]
    return Assignment(tuple(s)), True


def assignment_energy(instance: Instance, weights: PenaltyWeights, assignment) -> float:
    """``B * Lambda + C * sum_m max(0, load_m - R_m)**2``.

    This is the QUBO energy of the assignment with every shelf's slack bits
    chosen optimally.
    """
    loads = shelf_loads(instance, assignment)
    overflow = np.maximum(loads - instance.capacities, 0)
    return float(weights.B * objective_lambda(instance, assignment) + weights.C * float((overflow * overflow).sum()))


# -- engines -----------------------------------------------------------------

class _Clock:
    def __init__(self, config: SAConfig):
        self.start = time.perf_counter()
        self.deadline = None if config.max_wall_time is None else self.start + config.max_wall_time
        self.max_iter = config.max_iterations
        self.limit = math.inf if config.max_iterations is None else config.max_iterations

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def expired(self, it: int) -> str | None:
        if it >= self.limit:
            return "iterations"
        if self.deadline is not None and time.perf_counter() >= self.deadline:
            return "wall-time"
        return None


def _target_threshold(target: float | None, margin: float) -> float | None:
    if target is None:
        return None
    return target + margin * abs(target)


def _rs_neighbor(M: int):
    def neighbor(assignment, rng):
        if rng.random() < 0.5:
            return neighbor_move(assignment, M, rng)
        return neighbor_swap(assignment, rng)[0]
    return neighbor


def _run_real_swap(instance: Instance, weights: PenaltyWeights, config: SAConfig, rng, target, margin) -> RunResult:
    clock = _Clock(config)
    N, M = instance.num_pallets, instance.num_shelves
    shelf_of = [rng.randrange(M) for _ in range(N)] if M else []
    energy_fn = lambda s: assignment_energy(instance, weights, s)  # noqa: E731
    if N == 0 or M < 2:
        e = energy_fn(shelf_of)
        return RunResult(e, Assignment(tuple(shelf_of)), [(0, e)], 0, clock.elapsed(), config.seed, stop_reason="trivial")

    T0 = initial_temperature(energy_fn, Assignment(tuple(shelf_of)), _rs_neighbor(M),
                             config.calibration_samples, config.accept_p0, rng)

    B, C = float(weights.B), float(weights.C)
    lam = instance.lam
    lam_list = lam.tolist()
    g = instance.pre_sum.tolist()
    cost = [int(c) for c in instance.costs]
    cap = [int(r) for r in instance.capacities]
    shelf_arr = np.array(shelf_of)
    # aff[m][a] = sum of lam[a][b] over pallets b currently on shelf m
    aff = np.stack([lam[:, shelf_arr == m].sum(axis=1) for m in range(M)])
    loads = [0] * M
    for a, m in enumerate(shelf_of):
        loads[m] += cost[a]

    def pen(load, r):
        over = load - r
        return over * over if over > 0 else 0

    energy = energy_fn(shelf_of)
    best = energy
    best_state = list(shelf_of)
    trace = [(0, best)]
    threshold = _target_threshold(target, margin)
    target_time = clock.elapsed() if threshold is not None and best <= threshold else None

    it = 0
    k = 0
    T = T0
    floor = config.temperature_floor_ratio * T0
    stop = "target" if target_time is not None else None
    randrange, rand, exp = rng.randrange, rng.random, math.exp
    chain = int(config.chain_length)
    limit = clock.limit

    while stop is None:
        beta = 1.0 / T
        for _ in range(chain):
            if it >= limit:
                stop = "iterations"
                break
            it += 1
            if rand() < 0.5:
                a = randrange(N)
                m = shelf_of[a]
                m2 = randrange(M - 1)
                if m2 >= m:
                    m2 += 1
                aff_m, aff_m2 = aff[m], aff[m2]
                c = cost[a]
                dlam = aff_m2[a] + g[m2][a] - aff_m[a] - g[m][a]
                dpen = (pen(loads[m] - c, cap[m]) - pen(loads[m], cap[m])
                        + pen(loads[m2] + c, cap[m2]) - pen(loads[m2], cap[m2]))
                d = B * dlam + C * dpen
                if d <= 0 or rand() < exp(-beta * d):
                    row = lam[a]
                    aff_m -= row
                    aff_m2 += row
                    loads[m] -= c
                    loads[m2] += c
                    shelf_of[a] = m2
                    energy += d
                else:
                    d = None
            else:
                pair = _pick_swap(shelf_of, rng)
                if pair is None:
                    d = None
                else:
                    a, b = pair
                    m, m2 = shelf_of[a], shelf_of[b]
                    aff_m, aff_m2 = aff[m], aff[m2]
                    lab = lam_list[a][b]
                    dlam = (aff_m2[a] - lab - aff_m[a] + aff_m[b] - lab - aff_m2[b]
                            + g[m2][a] - g[m][a] + g[m][b] - g[m2][b])
                    shift = cost[b] - cost[a]
                    if shift:
                        dpen = (pen(loads[m] + shift, cap[m]) - pen(loads[m], cap[m])
                                + pen(loads[m2] - shift, cap[m2]) - pen(loads[m2], cap[m2]))
                    else:
                        dpen = 0
                    d = B * dlam + C * dpen
                    if d <= 0 or rand() < exp(-beta * d):
                        diff = lam[b] - lam[a]
                        aff_m += diff
                        aff_m2 -= diff
                        loads[m] += shift
                        loads[m2] -= shift
                        shelf_of[a], shelf_of[b] = m2, m
                        energy += d
                    else:
                        d = None
            if d is not None and energy < best:
                # resync against drift before trusting the improvement
                energy = energy_fn(shelf_of)
                if energy < best:
                    best = energy
                    best_state = list(shelf_of)
                    trace.append((it, best))
                    if threshold is not None and best <= threshold:
                        target_time = clock.elapsed()
                        stop = "target"
                        break
            if it & 127 == 0:
                stop = clock.expired(it)
                if stop:
                    break
        if stop:
            break
        k += 1
        T = cooling_temperature(T0, config.alpha, k)
        if T < floor:
            stop = "temperature-floor"
        else:
            stop = clock.expired(it)

    best_solution = Assignment(tuple(best_state))
    return RunResult(best, best_solution, trace, it, clock.elapsed(), config.seed,
                     T0, k, stop, target_time)


def _run_bitflip(model: QuboModel, config: SAConfig, rng, target, margin) -> RunResult:
    clock = _Clock(config)
    n = model.num_vars
    bits = np.array([rng.getrandbits(1) for _ in range(n)], dtype=np.uint8)
    energy_fn = lambda b: qubo_energy(model, b)  # noqa: E731
    if n == 0:
        e = energy_fn(bits)
        return RunResult(e, bits, [(0, e)], 0, clock.elapsed(), config.seed, stop_reason="trivial")

    T0 = initial_temperature(energy_fn, bits, neighbor_bitflip, config.calibration_samples, config.accept_p0, rng)

    h, J = model.dense
    # field[i] = h[i] + sum_j J[i, j] b[j]; flipping i changes the energy by (1 - 2 b_i) field[i]
    fld = h + J @ bits.astype(np.float64)
    state = bits.tolist()
    energy = energy_fn(bits)
    best = energy
    best_state = list(state)
    trace = [(0, best)]
    threshold = _target_threshold(target, margin)
    target_time = clock.elapsed() if threshold is not None and best <= threshold else None

    it = 0
    k = 0
    T = T0
    floor = config.temperature_floor_ratio * T0
    stop = "target" if target_time is not None else None
    randrange, rand, exp = rng.randrange, rng.random, math.exp
    chain = int(config.chain_length)
    limit = clock.limit

    while stop is None:
        beta = 1.0 / T
        for _ in range(chain):
            if it >= limit:
                stop = "iterations"
                break
            it += 1
            i = randrange(n)
            if state[i]:
                d = -fld[i]
            else:
                d = fld[i]
            if d <= 0 or rand() < exp(-beta * d):
                if state[i]:
                    state[i] = 0
                    fld -= J[i]
                else:
                    state[i] = 1
                    fld += J[i]
                energy += d
                if energy < best:
                    energy = energy_fn(state)
                    if energy < best:
                        best = energy
                        best_state = list(state)
                        trace.append((it, best))
                        if threshold is not None and best <= threshold:
                            target_time = clock.elapsed()
                            stop = "target"
                            break
            if it & 127 == 0:
                stop = clock.expired(it)
                if stop:
                    break
        if stop:
            break
        k += 1
        T = cooling_temperature(T0, config.alpha, k)
        if T < floor:
            stop = "temperature-floor"
        else:
            stop = clock.expired(it)
        fld = h + J @ np.asarray(state, dtype=np.float64)

    best_solution = np.array(best_state, dtype=np.uint8)
    return RunResult(best, best_solution, trace, it, clock.elapsed(), config.seed,
                     T0, k, stop, target_time)


def _unpack(problem, operator: Operator):
    if isinstance(problem, QuboModel):
        if operator is not Operator.BITFLIP:
            raise ValueError("real-swap mode needs an (Instance, PenaltyWeights) problem, not a QuboModel")
        return problem, None
    if isinstance(problem, Instance):
        problem = (problem, default_weights(problem))
    instance, weights = problem
    if weights is None:
        weights = default_weights(instance)
    if operator is Operator.BITFLIP:
        return build_qubo(instance, weights), None
    return instance, weights


def run_sa(problem, config: SAConfig, target: float | None = None, margin: float = 0.0) -> RunResult:
    """Run one annealing schedule.

    ``problem`` is a :class:`QuboModel` (bit-flip only) or an instance, optionally
    paired with penalty weights as ``(instance, weights)``.  In real-swap mode
    each proposal is a move or a swap with equal probability.

    The run ends at the first of: temperature below ``temperature_floor_ratio *
    T0``, ``max_wall_time`` seconds, ``max_iterations`` proposals, or (when
    ``target`` is given) a best energy at or below ``target + margin * |target|``.
    """
    config.validate()
    operator = Operator(config.operator_set)
    rng = random.Random(config.seed)
    if operator is Operator.BITFLIP:
        model, _ = _unpack(problem, operator)
        return _run_bitflip(model, config, rng, target, margin)
    instance, weights = _unpack(problem, operator)
    return _run_real_swap(instance, weights, config, rng, target, margin)


@dataclass
class BatchResult:
    runs: list[RunResult]
    mean: float
    std: float
    min: float
    mean_wall_time: float

    @property
    def energies(self) -> list[float]:
        return [r.best_energy for r in self.runs]


class BatchAborted(RuntimeError):
    def __init__(self, message: str, partial: list[RunResult]):
        super().__init__(message)
        self.partial = partial


def summarize(runs: list[RunResult]) -> BatchResult:
    energies = [r.best_energy for r in runs]
    std = statistics.stdev(energies) if len(energies) > 1 else 0.0
    return BatchResult(runs, statistics.fmean(energies), std, min(energies),
                       statistics.fmean(r.wall_time for r in runs))


def _run_one(args):
    problem, config, target, margin = args
    return run_sa(problem, config, target, margin)


def run_batch(problem, config: SAConfig, n_runs: int, base_seed: int = 0, jobs: int = 1,
              target: float | None = None, margin: float = 0.0) -> BatchResult:
    """Independent runs with seeds ``base_seed .. base_seed + n_runs - 1``."""
    if n_runs < 1:
        raise ValueError(f"n_runs must be at least 1, got {n_runs}")
    config.validate()
    operator = Operator(config.operator_set)
    if operator is Operator.BITFLIP and not isinstance(problem, QuboModel):
        problem = _unpack(problem, operator)[0]
    tasks = [(problem, replace(config, seed=base_seed + i), target, margin) for i in range(n_runs)]
    runs: list[RunResult] = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for r in pool.map(_run_one, tasks):
                    runs.append(r)
        else:
            for t in tasks:
                runs.append(_run_one(t))
    except Exception as exc:
        raise BatchAborted(f"run {len(runs)} of {n_runs} failed: {exc}", runs) from exc
    return summarize(runs)
