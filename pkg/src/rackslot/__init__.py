"""Gravity-flow-rack slotting: QUBO formulation, simulated annealing and exact oracles."""

__version__ = "0.1.0"

from .model import Assignment, Instance, MatchingMatrix, Pallet, Shelf, check_feasible, objective_lambda, shelf_load
from .qubo import PenaltyWeights, QuboModel, build_qubo, decode_bits, default_weights, encode_assignment, qubo_energy
from .annealer import SAConfig, RunResult, assignment_energy, run_batch, run_sa
from .exact import brute_force_optimum, count_lower_bound_log10, count_solutions_exact, enumerate_feasible
from .instances import GeneratorSpec, generate_square, load_instance, save_instance
