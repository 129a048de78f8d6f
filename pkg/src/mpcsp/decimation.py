"""BP-guided decimation.

Each round runs BP from uniform messages on the current reduced graph,
fixes the most biased fraction ``rho`` of the still-free variables and
conditions on them.  The retry schedule divides ``rho`` (and may grow
the first round's iteration cap) after every failed attempt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .factor_graph import FactorGraph, condition, evaluate
from .outcome import Contradiction, Exhausted, Satisfied, SolveOutcome
from .sum_product import BPParams, BPStatus, run_bp

TIE_TOL = 1e-6


@dataclass
class DecimationParams:
    rho: float = 0.01
    bp: BPParams = field(default_factory=BPParams)
    rho_divisor: float = 2.0
    max_attempts: int = 1
    first_round_growth: float = 1.0
    sample_values: bool = False
    strict: bool = False
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.rho_divisor < 1 or self.first_round_growth < 1:
            raise ValueError("rho_divisor and first_round_growth must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    @classmethod
    def benchmark(cls, seed=None):
        """rho starts at 1 and halves after each failure; ten attempts; T = 10240."""
        return cls(rho=1.0, bp=BPParams(epsilon=1e-3, max_iters=10240), rho_divisor=2.0,
                   max_attempts=10, seed=seed)

    @classmethod
    def random_csp(cls, seed=None):
        """rho = 1%, T = 1000; only the first round's cap grows fourfold, three times."""
        return cls(rho=0.01, bp=BPParams(epsilon=1e-3, max_iters=1000), rho_divisor=1.0,
                   max_attempts=4, first_round_growth=4.0, seed=seed)

    def rho_schedule(self) -> list[float]:
        return [self.rho / self.rho_divisor**a for a in range(self.max_attempts)]


@dataclass
class Round:
    attempt: int
    fixed: list[tuple[int, int]]
    status: BPStatus
    iterations: int
    bias: dict[int, float]


@dataclass
class DecimationTrace:
    rounds: list[Round] = field(default_factory=list)

    def fixed_order(self, attempt: int | None = None) -> list[tuple[int, int]]:
        return [f for r in self.rounds if attempt is None or r.attempt == attempt for f in r.fixed]


def bias(row: np.ndarray, size: int) -> float:
    """Distance of the most likely value's probability from uniform."""
    return float(np.max(row)) - 1.0 / size


def select_most_biased(marginals, free, rho: float, sizes=None,
                       rng: np.random.Generator | None = None,
                       tie_tol: float = TIE_TOL) -> list[tuple[int, int]]:
    """Pick ``ceil(rho * len(free))`` free variables with the largest bias.

    Biases (and probabilities) closer than ``tie_tol`` count as ties, which
    go to the lower variable index, then the lower value index.  With
    ``rng`` the value is sampled from the marginal instead of taking the
    arg-max.
    """
    free = list(free)
    if not free:
        raise ValueError("no free variables")
    count = max(1, math.ceil(rho * len(free) - 1e-9))
    scored = []
    for i in free:
        row = np.asarray(marginals[i], dtype=np.float64)
        size = len(row) if sizes is None else sizes[i]
        scored.append((-round(bias(row, size) / tie_tol), i))
    scored.sort()
    out = []
    for _, i in scored[:count]:
        row = np.asarray(marginals[i], dtype=np.float64)
        if rng is None:
            v = int(np.flatnonzero(row >= row.max() - tie_tol)[0])
        else:
            v = int(rng.choice(len(row), p=row / row.sum()))
        out.append((i, v))
    return out


def decimate(graph: FactorGraph, params: DecimationParams, rho: float, first_iters: int,
             attempt: int = 1, trace: DecimationTrace | None = None, rng=None,
             original: FactorGraph | None = None) -> SolveOutcome:
    """One decimation attempt at a fixed ``rho``."""
    original = original if original is not None else graph
    g = graph
    iters = updates = 0
    first = True
    while True:
        free = g.free_variables()
        if not free:
            break
        bp = replace(params.bp, max_iters=first_iters) if first else params.bp
        first = False
        res = run_bp(g, bp)
        iters += res.iterations
        updates += res.message_updates
        if res.status is BPStatus.CONTRADICTION or (params.strict and res.status is BPStatus.MAX_ITERS):
            return Contradiction(attempt, res.iterations, res.contradiction_at, iters, updates)
        sizes = g.masks.sum(axis=1)
        fixes = select_most_biased(res.marginals, free, rho, sizes, rng if params.sample_values else None)
        if trace is not None:
            trace.rounds.append(Round(attempt, fixes, res.status, res.iterations,
                                      {i: bias(res.marginals[i], sizes[i]) for i, _ in fixes}))
        g = condition(g, fixes)
    assignment = g.fixed_assignment()
    if evaluate(original, assignment):
        return Satisfied(assignment, iters, attempt, updates)
    return Contradiction(attempt, 0, -1, iters, updates, reason="unverified")


def solve_bp_dec(graph: FactorGraph, params: DecimationParams | None = None,
                 original: FactorGraph | None = None):
    """Run the retry schedule; returns ``(outcome, trace)``.

    ``original`` is the graph used for final verification when ``graph``
    is itself a reduced instance.
    """
    params = params or DecimationParams()
    rng = np.random.default_rng(params.seed)
    trace = DecimationTrace()
    iters = updates = 0
    last = None
    for a, rho in enumerate(params.rho_schedule(), start=1):
        first_iters = int(round(params.bp.max_iters * params.first_round_growth ** (a - 1)))
        last = decimate(graph, params, rho, first_iters, a, trace, rng, original)
        iters += last.iterations
        updates += last.message_updates
        if isinstance(last, Satisfied):
            return Satisfied(last.assignment, iters, a, updates), trace
    if params.max_attempts == 1:
        return last, trace
    return Exhausted(params.max_attempts, iters, updates), trace
