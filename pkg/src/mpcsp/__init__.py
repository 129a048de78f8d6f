"""Message-passing solvers for constraint satisfaction problems."""
from .decimation import DecimationParams, solve_bp_dec
from .factor_graph import (
    Constraint,
    FactorGraph,
    build_graph,
    condition,
    count_solutions,
    enumerate_solutions,
    evaluate,
    exact_marginals,
    restrict,
)
from .gibbs import run_gibbs
from .harness import ExperimentConfig, run_experiment, verify
from .instances import GeneratorSpec, read_graph, toy_3sat, write_graph
from .outcome import Contradiction, Exhausted, Satisfied
from .perturbed_bp import PerturbedBPParams, solve_perturbed_bp, solve_with_retries
from .sum_product import BPParams, BPStatus, run_bp
from .survey_prop import SPDecParams, SPParams, run_sp, solve_perturbed_sp, solve_sp_dec

__all__ = [
    "BPParams", "BPStatus", "Constraint", "Contradiction", "DecimationParams", "Exhausted",
    "ExperimentConfig", "FactorGraph", "GeneratorSpec", "PerturbedBPParams", "SPDecParams",
    "SPParams", "Satisfied", "build_graph", "condition", "count_solutions", "enumerate_solutions",
    "evaluate", "exact_marginals", "read_graph", "restrict", "run_bp", "run_experiment",
    "run_gibbs", "run_sp", "solve_bp_dec", "solve_perturbed_bp", "solve_perturbed_sp",
    "solve_sp_dec", "solve_with_retries", "toy_3sat", "verify", "write_graph",
]
