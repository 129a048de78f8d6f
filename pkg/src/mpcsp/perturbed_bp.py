"""Perturbed belief propagation.

Every outgoing BP message is mixed with the point mass on a value sampled
from the current belief.  The point-mass weight ``gamma`` grows linearly
from 0 on the first sweep to 1 on the last, so the run starts as plain BP
and ends as a sequential Gibbs sampler whose final particle is the
candidate solution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _bp_kernels as K
from .factor_graph import FactorGraph, evaluate
from .outcome import Contradiction, Exhausted, Satisfied, SolveOutcome
from .sum_product import MessageSet, uniform_marginals

CHUNK = 256


@dataclass
class PerturbedBPParams:
    T: int = 1000
    seed: int | None = None
    initial_T: int = 10
    growth: float = 2.0
    max_attempts: int = 10

    def __post_init__(self):
        if self.T < 2 or self.initial_T < 2:
            raise ValueError("T must be >= 2")
        if not self.growth > 1:
            raise ValueError("growth factor must exceed 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    @classmethod
    def benchmark(cls, seed=None):
        """T starts at 10 and doubles ten times, ending at 10240."""
        return cls(seed=seed, initial_T=10, growth=2, max_attempts=11)

    @classmethod
    def random_csp(cls, seed=None):
        """T starts at 1000 and grows fourfold at most three times."""
        return cls(seed=seed, initial_T=1000, growth=4, max_attempts=4)

    def schedule(self) -> list[int]:
        return [int(round(self.initial_T * self.growth**a)) for a in range(self.max_attempts)]


def gamma_schedule(T: int) -> np.ndarray:
    """Point-mass weight for sweeps ``1..T``: ``(t - 1) / (T - 1)``."""
    if T < 2:
        raise ValueError("T must be >= 2")
    return np.arange(T, dtype=np.float64) / (T - 1)


def perturbed_sweep(graph: FactorGraph, messages: MessageSet, gamma: float,
                    rng: np.random.Generator, marginals: np.ndarray | None = None):
    """One in-place sweep with point-mass weight ``gamma``.

    Returns ``(particle, contradiction_variable)``, the latter -1 when none.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    marg = uniform_marginals(graph) if marginals is None else marginals
    particle = np.zeros(graph.n_vars, dtype=np.int64)
    u = rng.random((1, graph.n_vars))
    orders = np.arange(graph.n_vars, dtype=np.int64)[None, :]
    status, _, var = K.run_sweeps(graph, messages.v2f, messages.f2v, marg, orders,
                                  np.array([gamma]), u, particle)
    return particle, (var if status == K.CONTRADICTION else -1)


def solve_perturbed_bp(graph: FactorGraph, T: int, rng: np.random.Generator,
                       attempt: int = 1) -> SolveOutcome:
    """A single attempt of ``T`` sweeps from uniform messages."""
    gammas = gamma_schedule(T)
    msgs = MessageSet.uniform(graph)
    marg = uniform_marginals(graph)
    particle = np.zeros(graph.n_vars, dtype=np.int64)
    orders = np.arange(graph.n_vars, dtype=np.int64)[None, :]
    per_sweep = 2 * graph.n_edges
    done = 0
    while done < T:
        n = min(CHUNK, T - done)
        u = rng.random((n, graph.n_vars))
        status, k, var = K.run_sweeps(graph, msgs.v2f, msgs.f2v, marg, orders,
                                      gammas[done : done + n], u, particle)
        if status == K.CONTRADICTION:
            sweep = done + k + 1
            return Contradiction(attempt, sweep, var, sweep, per_sweep * sweep)
        done += n
    if evaluate(graph, particle):
        return Satisfied(particle.copy(), T, attempt, per_sweep * T)
    return Contradiction(attempt, T, -1, T, per_sweep * T, reason="unverified")


def solve_with_retries(graph: FactorGraph, params: PerturbedBPParams | None = None,
                       rng: np.random.Generator | None = None) -> SolveOutcome:
    """Retry with ``T`` multiplied by ``growth`` after each failed attempt."""
    params = params or PerturbedBPParams()
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    iters = updates = 0
    for a, T in enumerate(params.schedule(), start=1):
        out = solve_perturbed_bp(graph, T, rng.spawn(1)[0], attempt=a)
        iters += out.iterations
        updates += out.message_updates
        if isinstance(out, Satisfied):
            return Satisfied(out.assignment, iters, a, updates)
    return Exhausted(params.max_attempts, iters, updates)
