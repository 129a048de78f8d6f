"""Single-particle Gibbs sampling expressed as a message update.

The particle is encoded as one-hot variable-to-factor messages.  With
those messages the BP belief at a variable is exactly its Gibbs
conditional, so the sampler reuses the BP sweep kernel with the mixing
weight pinned to 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _bp_kernels as K
from .factor_graph import FactorGraph, enumerate_solutions
from .sum_product import MessageSet, factor_to_var, uniform_marginals

CHUNK = 512


class ContradictoryConditional(ValueError):
    pass


class StuckState(RuntimeError):
    """The conditional at ``site`` forbids every value: the chain cannot move."""

    def __init__(self, site: int, sweep: int):
        super().__init__(f"Gibbs chain stuck at variable {site} during sweep {sweep}")
        self.site = site
        self.sweep = sweep


def conditional(graph: FactorGraph, messages: MessageSet, i: int) -> np.ndarray:
    """Normalized product of incoming factor messages at ``i`` (zeros if none allowed)."""
    d = graph.domains[i]
    out = graph.masks[i, :d].astype(np.float64)
    for I in graph.adjacency[i]:
        out = out * factor_to_var(graph, messages, I, i)
    z = out.sum()
    return out / z if z >= K.TINY else np.zeros(d)


def gs_message(graph: FactorGraph, messages: MessageSet, i: int, rng: np.random.Generator):
    """Sample ``x_i`` from its conditional; return ``(one_hot_message, value)``."""
    p = conditional(graph, messages, i)
    if not p.any():
        raise ContradictoryConditional(f"conditional at variable {i} is all zero")
    x = int(K.sample_index(p, len(p), rng.random()))
    msg = np.zeros(len(p))
    msg[x] = 1.0
    return msg, x


def one_hot_messages(graph: FactorGraph, particle) -> MessageSet:
    fl = graph.flat
    v2f = np.zeros((len(fl.edge_var), graph.max_domain))
    v2f[np.arange(len(fl.edge_var)), np.asarray(particle)[fl.edge_var]] = 1.0
    return MessageSet(graph, v2f, MessageSet.uniform(graph).f2v)


def random_particle(graph: FactorGraph, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over each variable's allowed values."""
    u = rng.random(graph.n_vars)
    out = np.empty(graph.n_vars, dtype=np.int64)
    for i in range(graph.n_vars):
        vals = graph.allowed_values(i)
        out[i] = vals[min(int(u[i] * len(vals)), len(vals) - 1)]
    return out


@dataclass
class GibbsResult:
    marginals: np.ndarray
    particle: np.ndarray
    sweeps: int


def run_gibbs(graph: FactorGraph, sweeps: int, burn_in: int | None = None,
              rng: np.random.Generator | None = None) -> GibbsResult:
    """Sequential-scan Gibbs sampler; marginals are visit frequencies after burn-in.

    ``burn_in`` defaults to a tenth of ``sweeps``.  Raises :class:`StuckState`
    if some site's conditional is all zero.
    """
    rng = rng if rng is not None else np.random.default_rng()
    burn_in = sweeps // 10 if burn_in is None else burn_in
    if not 0 <= burn_in < sweeps:
        raise ValueError("need 0 <= burn_in < sweeps")
    particle = random_particle(graph, rng)
    msgs = one_hot_messages(graph, particle)
    marg = uniform_marginals(graph)
    counts = np.zeros((graph.n_vars, graph.max_domain), dtype=np.int64)
    orders = np.arange(graph.n_vars, dtype=np.int64)[None, :]
    done = 0
    while done < sweeps:
        n = min(CHUNK, sweeps - done)
        u = rng.random((n, graph.n_vars))
        status, k, var = K.run_sweeps(graph, msgs.v2f, msgs.f2v, marg, orders, np.ones(n), u,
                                      particle, counts, burn_in - done)
        if status == K.CONTRADICTION:
            raise StuckState(var, done + k + 1)
        done += n
    freq = counts / (sweeps - burn_in)
    return GibbsResult(freq, particle, sweeps)


def single_site_components(graph: FactorGraph) -> list[np.ndarray]:
    """Solutions grouped into classes connected by single-variable changes.

    A sequential Gibbs chain started inside one class can never reach
    another, so the sampler is ergodic on the solutions only when there is
    exactly one class.  Uses the dense enumeration oracle.
    """
    sols = enumerate_solutions(graph)
    n = len(sols)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        diff = (sols[a + 1 :] != sols[a]).sum(axis=1)
        for b in np.flatnonzero(diff == 1) + a + 1:
            parent[find(int(b))] = find(a)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    return [sols[idx] for idx in groups.values()]
