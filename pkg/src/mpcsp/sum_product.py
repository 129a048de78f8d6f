"""Sum-product belief propagation on 0/1 factor graphs.

Messages live in the linear domain and are renormalized after every
update.  An all-zero vector (sum below ``TINY``) is the contradiction
flag: with hard constraints, zeros carry meaning and are never smoothed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _bp_kernels as K
from .factor_graph import FactorGraph

TINY = K.TINY


class ContradictoryIncoming(ValueError):
    """Incoming messages at a variable jointly forbid every value."""


class BPStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    CONTRADICTION = "contradiction"


_STATUS = {K.CONVERGED: BPStatus.CONVERGED, K.MAX_ITERS: BPStatus.MAX_ITERS,
           K.CONTRADICTION: BPStatus.CONTRADICTION}


@dataclass
class BPParams:
    epsilon: float = 1e-3
    max_iters: int = 1000
    init: str = "uniform"  # or "random"
    update_order: str = "fixed"  # or "shuffled"
    seed: int | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init not in ("uniform", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.update_order not in ("fixed", "shuffled"):
            raise ValueError(f"unknown update order {self.update_order!r}")


class MessageSet:
    """Both directions of every edge, as ``(n_edges, max_domain)`` arrays.

    Row ``graph.edge_index(I, i)`` of ``v2f`` holds ``mu_{i->I}`` and the
    same row of ``f2v`` holds ``mu_{I->i}``.
    """

    def __init__(self, graph: FactorGraph, v2f: np.ndarray, f2v: np.ndarray):
        self.graph = graph
        self.v2f = v2f
        self.f2v = f2v

    @classmethod
    def uniform(cls, graph: FactorGraph) -> "MessageSet":
        fl = graph.flat
        rows = fl.mask[fl.edge_var]
        rows = rows / rows.sum(axis=1, keepdims=True) if len(rows) else rows
        return cls(graph, rows.copy(), rows.copy())

    @classmethod
    def random(cls, graph: FactorGraph, rng: np.random.Generator) -> "MessageSet":
        fl = graph.flat
        rows = fl.mask[fl.edge_var] * rng.random((len(fl.edge_var), graph.max_domain))
        if len(rows):
            rows /= rows.sum(axis=1, keepdims=True)
        return cls(graph, rows, MessageSet.uniform(graph).f2v)

    def copy(self) -> "MessageSet":
        return MessageSet(self.graph, self.v2f.copy(), self.f2v.copy())

    def var_to_fac(self, i: int, I: int) -> np.ndarray:
        return self.v2f[self.graph.edge_index(I, i), : self.graph.domains[i]]

    def fac_to_var(self, I: int, i: int) -> np.ndarray:
        return self.f2v[self.graph.edge_index(I, i), : self.graph.domains[i]]


def _normalized(v: np.ndarray) -> np.ndarray:
    z = v.sum()
    if z < TINY:
        return np.zeros_like(v)
    return v / z


def factor_to_var(graph: FactorGraph, messages: MessageSet, I: int, i: int) -> np.ndarray:
    """Normalized ``mu_{I->i}``; all zeros when the factor forbids every value."""
    c = graph.constraints[I]
    if i not in c.scope:
        raise ValueError(f"variable {i} is not in the scope of constraint {I}")
    t = c.table.astype(np.float64)
    for k, j in enumerate(c.scope):
        if j == i:
            continue
        shape = [1] * c.arity
        shape[k] = graph.domains[j]
        t = t * messages.var_to_fac(j, I).reshape(shape)
    p = c.scope.index(i)
    out = t.sum(axis=tuple(k for k in range(c.arity) if k != p))
    return _normalized(out)


def var_to_factor(graph: FactorGraph, messages: MessageSet, i: int, I: int,
                  quotient: bool = False) -> np.ndarray:
    """Normalized ``mu_{i->I}`` from the stored factor-to-variable messages.

    With ``quotient=True`` the belief is divided by ``mu_{I->i}`` instead of
    multiplying the other messages, unless that divisor has a zero entry.
    """
    if I not in graph.adjacency[i]:
        raise ValueError(f"constraint {I} is not incident to variable {i}")
    d = graph.domains[i]
    mask = graph.masks[i, :d].astype(np.float64)
    divisor = messages.fac_to_var(I, i)
    if quotient and (divisor > 0).all():
        belief = mask.copy()
        for J in graph.adjacency[i]:
            belief = belief * messages.fac_to_var(J, i)
        out = belief / divisor
    else:
        out = mask.copy()
        for J in graph.adjacency[i]:
            if J != I:
                out = out * messages.fac_to_var(J, i)
    if out.sum() < TINY:
        raise ContradictoryIncoming(f"incoming messages at variable {i} are contradictory")
    return out / out.sum()


def marginal(graph: FactorGraph, messages: MessageSet, i: int) -> np.ndarray:
    """Belief at ``i`` from its incoming factor messages (all zeros = contradiction)."""
    d = graph.domains[i]
    out = graph.masks[i, :d].astype(np.float64)
    for J in graph.adjacency[i]:
        out = out * messages.fac_to_var(J, i)
    return _normalized(out)


def uniform_marginals(graph: FactorGraph) -> np.ndarray:
    m = graph.masks.astype(np.float64)
    return m / np.maximum(m.sum(axis=1, keepdims=True), 1.0)


@dataclass
class BPResult:
    messages: MessageSet
    marginals: np.ndarray
    status: BPStatus
    iterations: int
    contradiction_at: int = -1
    message_updates: int = field(default=0)


def sweep_orders(graph: FactorGraph, params: BPParams, n: int) -> np.ndarray:
    if params.update_order == "fixed":
        return np.arange(graph.n_vars, dtype=np.int64)[None, :]
    rng = np.random.default_rng(params.seed)
    return np.stack([rng.permutation(graph.n_vars) for _ in range(n)]).astype(np.int64)


def run_bp(graph: FactorGraph, params: BPParams | None = None,
           messages: MessageSet | None = None) -> BPResult:
    """Sequential sweeps until the largest marginal change drops below ``epsilon``.

    Each sweep visits variables in order and, per variable, recomputes the
    incoming factor messages, the belief, then the outgoing messages.
    """
    params = params or BPParams()
    if messages is None:
        if params.init == "random":
            messages = MessageSet.random(graph, np.random.default_rng(params.seed))
        else:
            messages = MessageSet.uniform(graph)
    marg = uniform_marginals(graph)
    orders = sweep_orders(graph, params, params.max_iters)
    gammas = np.zeros(params.max_iters)
    status, done, var = K.run_sweeps(graph, messages.v2f, messages.f2v, marg, orders, gammas,
                                     eps=params.epsilon, check=True)
    if status == K.CONTRADICTION:
        # the failing sweep counts as work done
        done += 1
    return BPResult(messages, marg, _STATUS[status], done, var, 2 * graph.n_edges * done)


def bp_sweep(graph: FactorGraph, messages: MessageSet, marginals: np.ndarray | None = None):
    """One in-place sweep; returns ``(marginals, contradiction_variable_or_-1)``."""
    marg = uniform_marginals(graph) if marginals is None else marginals
    orders = np.arange(graph.n_vars, dtype=np.int64)[None, :]
    status, _, var = K.run_sweeps(graph, messages.v2f, messages.f2v, marg, orders, np.zeros(1))
    return marg, (var if status == K.CONTRADICTION else -1)
