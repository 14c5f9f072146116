"""Benchmark sweep: instance sizes x insertion levels x SA variants x chain rules.

Each (size, insertion) cell generates one instance that every variant and
chain rule in the cell shares.  Results go to a CSV with a fixed header.
"""

from __future__ import annotations

import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .annealer import BatchAborted, Operator, SAConfig, run_batch
from .exact import ENUMERATION_LIMIT, InfeasibleError, brute_force_optimum
from .instances import GeneratorSpec, generate_square
from .model import Instance
from .qubo import PenaltyWeights, default_weights

log = logging.getLogger(__name__)

CSV_HEADER = [
    "size", "insert_pct", "variant", "chain", "runs",
    "mean_energy", "std_energy", "min_energy", "mean_time_s", "gap_to_opt",
]
TTT_HEADER = ["size", "insert_pct", "variant", "chain", "run", "seed", "target", "reached", "time_s"]

VARIANTS = {"BF": Operator.BITFLIP, "RS": Operator.REAL_SWAP}


@dataclass
class ExperimentPlan:
    sizes: list[int] = field(default_factory=lambda: [10, 15, 20, 25])
    prefill: float = 0.20
    insert_fractions: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    sa_variants: list[str] = field(default_factory=lambda: ["BF", "RS"])
    chain_rules: list[str] = field(default_factory=lambda: ["N", "NxM"])
    runs_per_cell: int = 100
    time_budget_per_run: float | None = 5.0
    base_seed: int = 0
    alpha: float = 0.95
    accept_p0: float = 0.2
    max_iterations: int | None = None

    def validate(self):
        if not (self.sizes and self.insert_fractions and self.sa_variants and self.chain_rules):
            raise ValueError("plan lists must be non-empty")
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be at least 1")
        for v in self.sa_variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown SA variant {v!r}; expected one of {sorted(VARIANTS)}")
        for c in self.chain_rules:
            parse_chain_rule(c)


def parse_chain_rule(rule) -> str | int:
    """``"N"``, ``"NxM"`` or a fixed positive integer (accepts ``n``/``nm`` too)."""
    if isinstance(rule, int):
        if rule < 1:
            raise ValueError("chain length must be positive")
        return rule
    key = str(rule).strip().lower()
    if key == "n":
        return "N"
    if key in ("nm", "nxm", "n*m"):
        return "NxM"
    try:
        value = int(key)
    except ValueError:
        raise ValueError(f"unknown chain rule {rule!r}; use n, nm or a positive integer") from None
    if value < 1:
        raise ValueError("chain length must be positive")
    return value


def chain_length(rule, instance: Instance) -> int:
    rule = parse_chain_rule(rule)
    N, M = instance.num_pallets, instance.num_shelves
    if rule == "N":
        return max(1, N)
    if rule == "NxM":
        return max(1, N * M)
    return rule


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _pct(fraction: float) -> int:
    return int(round(fraction * 100))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _cell_instance(plan: ExperimentPlan, size: int, insert: float, instance: Instance | None) -> Instance:
    if instance is not None:
        return instance
    spec = GeneratorSpec(size, size, plan.prefill, insert, seed=derive_seed(plan.base_seed, size, _pct(insert), 0))
    return generate_square(spec)


def _optimum(instance: Instance) -> float | None:
    M, N = instance.num_shelves, instance.num_pallets
    if M**N > ENUMERATION_LIMIT:
        return None
    try:
        return brute_force_optimum(instance)[1]
    except InfeasibleError:
        return None


def _open(output):
    if output is None:
        return None, False
    if hasattr(output, "write"):
        return output, False
    return open(output, "w", newline="", encoding="utf-8"), True


def run_experiment(plan: ExperimentPlan, output=None, jobs: int = 1, instance: Instance | None = None,
                   weights: PenaltyWeights | None = None, with_optimum: bool = True) -> list[dict]:
    """Run every cell of ``plan`` and write one CSV row per (size, insertion, variant, chain).

    ``instance`` replaces the generated instance in every cell when given.
    Rows come out in plan order.
    """
    plan.validate()
    stream, close = _open(output)
    writer = csv.writer(stream, lineterminator="\n") if stream else None
    if writer:
        writer.writerow(CSV_HEADER)
    rows = []
    try:
        for size in plan.sizes:
            for insert in plan.insert_fractions:
                inst = _cell_instance(plan, size, insert, instance)
                w = weights or default_weights(inst)
                run_seed = derive_seed(plan.base_seed, size, _pct(insert), 1)
                infeasible = int(inst.costs.sum()) > int(inst.capacities.sum())
                opt = None if infeasible or not with_optimum else _optimum(inst)
                for variant in plan.sa_variants:
                    for rule in plan.chain_rules:
                        row = {"size": size, "insert_pct": _pct(insert), "variant": variant,
                               "chain": parse_chain_rule(rule), "runs": 0,
                               "mean_energy": None, "std_energy": None, "min_energy": None,
                               "mean_time_s": None, "gap_to_opt": None}
                        if infeasible:
                            log.warning("cell size=%s insert=%s%%: total pallet cost exceeds capacity, skipped",
                                        size, _pct(insert))
                        else:
                            config = SAConfig(alpha=plan.alpha, accept_p0=plan.accept_p0,
                                              chain_length=chain_length(rule, inst),
                                              max_wall_time=plan.time_budget_per_run,
                                              operator_set=VARIANTS[variant],
                                              max_iterations=plan.max_iterations)
                            try:
                                batch = run_batch((inst, w), config, plan.runs_per_cell, run_seed, jobs=jobs)
                            except BatchAborted as exc:
                                log.error("cell size=%s insert=%s%% %s/%s aborted: %s",
                                          size, _pct(insert), variant, rule, exc)
                            else:
                                row.update(runs=len(batch.runs), mean_energy=batch.mean, std_energy=batch.std,
                                           min_energy=batch.min, mean_time_s=batch.mean_wall_time)
                                if opt is not None:
                                    row["gap_to_opt"] = batch.min - w.B * opt
                        rows.append(row)
                        if writer:
                            writer.writerow([_fmt(row[k]) for k in CSV_HEADER])
                            stream.flush()
    finally:
        if close:
            stream.close()
    return rows


@dataclass(frozen=True)
class TargetRecord:
    run: int
    seed: int
    target: float
    reached: bool
    time_s: float | None


def time_to_target(problem, config: SAConfig, target: float, n_runs: int, base_seed: int = 0,
                   margin: float = 0.03, jobs: int = 1) -> list[TargetRecord]:
    """Per-run wall time until the best energy first reaches ``target * (1 + margin)``.

    Runs that finish without reaching it have ``reached=False`` and no time.
    """
    batch = run_batch(problem, config, n_runs, base_seed, jobs=jobs, target=target, margin=margin)
    return [
        TargetRecord(i, r.seed, target, r.target_time is not None, r.target_time)
        for i, r in enumerate(batch.runs)
    ]


def run_time_to_target(plan: ExperimentPlan, output=None, target: float | None = None, margin: float = 0.03,
                       jobs: int = 1, instance: Instance | None = None) -> list[dict]:
    """Time-to-target sweep; the target defaults to the brute-force optimum when it is computable."""
    plan.validate()
    stream, close = _open(output)
    writer = csv.writer(stream, lineterminator="\n") if stream else None
    if writer:
        writer.writerow(TTT_HEADER)
    rows = []
    try:
        for size in plan.sizes:
            for insert in plan.insert_fractions:
                inst = _cell_instance(plan, size, insert, instance)
                w = default_weights(inst)
                goal = target
                if goal is None:
                    opt = _optimum(inst)
                    if opt is None:
                        raise ValueError(f"no --target given and size={size} is too large for the exact optimum")
                    goal = w.B * opt
                run_seed = derive_seed(plan.base_seed, size, _pct(insert), 1)
                for variant in plan.sa_variants:
                    for rule in plan.chain_rules:
                        config = SAConfig(alpha=plan.alpha, accept_p0=plan.accept_p0,
                                          chain_length=chain_length(rule, inst),
                                          max_wall_time=plan.time_budget_per_run,
                                          operator_set=VARIANTS[variant], max_iterations=plan.max_iterations)
                        for rec in time_to_target((inst, w), config, goal, plan.runs_per_cell, run_seed, margin, jobs):
                            row = {"size": size, "insert_pct": _pct(insert), "variant": variant,
                                   "chain": parse_chain_rule(rule), "run": rec.run, "seed": rec.seed,
                                   "target": rec.target, "reached": int(rec.reached), "time_s": rec.time_s}
                            rows.append(row)
                            if writer:
                                writer.writerow([_fmt(row[k]) for k in TTT_HEADER])
    finally:
        if close:
            stream.close()
    return rows
