"""Max-product warnings, survey propagation SP(m), SP-guided decimation
and Perturbed SP.

A warning message is a 0/1 vector over a variable's domain, equivalently
the subset of values it allows.  A survey is a distribution over the
nonempty subsets, stored as a length ``2**max_domain`` row indexed by
bitmask (bit ``v`` <-> value ``v``); entry 0, the empty set, is always 0
and entries for subsets outside the variable's domain stay 0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _sp_kernels as K
from .decimation import DecimationParams, Round, TIE_TOL, select_most_biased, solve_bp_dec
from .factor_graph import FactorGraph, condition, evaluate, restrict
from .outcome import Contradiction, Satisfied, SolveOutcome
from .perturbed_bp import gamma_schedule
from .sum_product import BPStatus, MessageSet

CHUNK = 64
DEFAULT_BUDGET = 1 << 20


class DomainCapExceeded(ValueError):
    pass


class EnumerationBudgetExceeded(ValueError):
    pass


# -- subset helpers -------------------------------------------------------

def subset_bits(values) -> int:
    out = 0
    for v in values:
        out |= 1 << int(v)
    return out


def subset_values(y: int) -> list[int]:
    return [v for v in range(y.bit_length()) if (y >> v) & 1]


def size_weights(m: float, dmax: int) -> np.ndarray:
    """``|y| ** m`` for every bitmask ``y`` (0 for the empty set)."""
    sizes = np.array([bin(y).count("1") for y in range(1 << dmax)], dtype=np.float64)
    out = np.where(sizes > 0, sizes**m, 0.0) if m != 0 else (sizes > 0).astype(np.float64)
    return out


def _mask_bits(graph: FactorGraph) -> np.ndarray:
    return (graph.masks.astype(np.int64) << np.arange(graph.max_domain)).sum(axis=1)


def check_domain_cap(graph: FactorGraph, cap: int) -> None:
    big = [i for i, d in enumerate(graph.domains) if d > cap]
    if big:
        raise DomainCapExceeded(
            f"variable {big[0]} has {graph.domains[big[0]]} values; survey propagation is capped at {cap}")


# -- max-product warnings ---------------------------------------------------

def all_ones_warnings(graph: FactorGraph) -> MessageSet:
    fl = graph.flat
    rows = fl.mask[fl.edge_var].copy()
    return MessageSet(graph, rows, rows.copy())


def maxprod_factor_to_var(graph: FactorGraph, warnings: MessageSet, I: int, i: int) -> np.ndarray:
    """Values of ``x_i`` extendable to a satisfying row given the incoming warnings."""
    c = graph.constraints[I]
    if i not in c.scope:
        raise ValueError(f"variable {i} is not in the scope of constraint {I}")
    t = c.table.astype(bool)
    for k, j in enumerate(c.scope):
        if j != i:
            shape = [1] * c.arity
            shape[k] = graph.domains[j]
            t = t & (warnings.var_to_fac(j, I) > 0).reshape(shape)
    p = c.scope.index(i)
    return t.any(axis=tuple(k for k in range(c.arity) if k != p)).astype(np.float64)


def maxprod_var_to_factor(graph: FactorGraph, warnings: MessageSet, i: int, I: int) -> np.ndarray:
    """AND of the other incoming warnings (and the domain mask)."""
    if I not in graph.adjacency[i]:
        raise ValueError(f"constraint {I} is not incident to variable {i}")
    out = graph.masks[i, : graph.domains[i]].copy()
    for J in graph.adjacency[i]:
        if J != I:
            out &= warnings.fac_to_var(J, i) > 0
    return out.astype(np.float64)


def maxprod_marginal(graph: FactorGraph, warnings: MessageSet, i: int) -> np.ndarray:
    """AND of all incoming warnings; all zero means contradiction."""
    out = graph.masks[i, : graph.domains[i]].copy()
    for J in graph.adjacency[i]:
        out &= warnings.fac_to_var(J, i) > 0
    return out.astype(np.float64)


def maxprod_sweep(graph: FactorGraph, warnings: MessageSet) -> MessageSet:
    """One sequential sweep in variable order; returns new warnings."""
    w = warnings.copy()
    for i in range(graph.n_vars):
        d = graph.domains[i]
        for I in graph.adjacency[i]:
            w.f2v[graph.edge_index(I, i), :d] = maxprod_factor_to_var(graph, w, I, i)
        for I in graph.adjacency[i]:
            w.v2f[graph.edge_index(I, i), :d] = maxprod_var_to_factor(graph, w, i, I)
    return w


# -- survey messages --------------------------------------------------------

@dataclass
class SPParams:
    m: float = 0.0
    epsilon: float = 1e-3
    max_iters: int = 1000
    paramagnetic_threshold: float = 0.01
    domain_cap: int = 5
    budget: int = DEFAULT_BUDGET
    init: str = "uniform"  # or "random"
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise ValueError("m must lie in [0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init not in ("uniform", "random"):
            raise ValueError(f"unknown init {self.init!r}")


class _Lookup:
    """Per-edge table of max-product outputs over incoming warning combinations."""

    def __init__(self, graph: FactorGraph, budget: int):
        fl = graph.flat
        counts = np.zeros(len(fl.edge_var), dtype=np.int64)
        for I, c in enumerate(graph.constraints):
            a = int(fl.fac_ptr[I])
            choices = [(1 << graph.domains[j]) - 1 for j in c.scope]
            for p in range(c.arity):
                n = math.prod(choices[:p] + choices[p + 1 :])
                if n > budget:
                    raise EnumerationBudgetExceeded(
                        f"constraint {I} needs {n} warning combinations (budget {budget})")
                counts[a + p] = n
        self.ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.table = np.zeros(int(self.ptr[-1]), dtype=np.int64)
        K.build_lookup(fl.dom, fl.edge_var, fl.edge_fac, fl.fac_ptr, fl.tab_ptr, fl.tables,
                       self.ptr, self.table)


_LOOKUPS: dict[tuple[int, int], tuple[FactorGraph, _Lookup]] = {}


def _lookup(graph: FactorGraph, budget: int) -> _Lookup:
    key = (id(graph), budget)
    hit = _LOOKUPS.get(key)
    if hit is not None and hit[0] is graph:
        return hit[1]
    if len(_LOOKUPS) > 64:
        _LOOKUPS.clear()
    lut = _Lookup(graph, budget)
    _LOOKUPS[key] = (graph, lut)
    return lut


class SurveySet:
    """Surveys on every directed edge, as ``(n_edges, 2**max_domain)`` arrays."""

    def __init__(self, graph: FactorGraph, v2f: np.ndarray, f2v: np.ndarray):
        self.graph = graph
        self.v2f = v2f
        self.f2v = f2v

    @classmethod
    def uniform(cls, graph: FactorGraph) -> "SurveySet":
        fl = graph.flat
        S = 1 << graph.max_domain
        bits = _mask_bits(graph)[fl.edge_var]
        y = np.arange(S)
        rows = ((y[None, :] & ~bits[:, None]) == 0) & (y[None, :] > 0)
        rows = rows.astype(np.float64)
        if len(rows):
            rows /= rows.sum(axis=1, keepdims=True)
        return cls(graph, rows, rows.copy())

    @classmethod
    def random(cls, graph: FactorGraph, rng: np.random.Generator) -> "SurveySet":
        base = cls.uniform(graph)
        rows = base.v2f * rng.random(base.v2f.shape)
        if len(rows):
            rows /= rows.sum(axis=1, keepdims=True)
        return cls(graph, rows, base.f2v)

    def copy(self) -> "SurveySet":
        return SurveySet(self.graph, self.v2f.copy(), self.f2v.copy())

    def var_to_fac(self, i: int, I: int) -> np.ndarray:
        return self.v2f[self.graph.edge_index(I, i), : 1 << self.graph.domains[i]]

    def fac_to_var(self, I: int, i: int) -> np.ndarray:
        return self.f2v[self.graph.edge_index(I, i), : 1 << self.graph.domains[i]]


@dataclass
class ClusterMarginal:
    over_subsets: np.ndarray
    over_values: np.ndarray


def project(over_subsets: np.ndarray, d: int) -> np.ndarray:
    """Normalized values distribution: ``p(x) ∝ sum over y containing x``."""
    out = np.zeros(d)
    K.project_values(np.ascontiguousarray(over_subsets, dtype=np.float64), d, out)
    return out


def sp_factor_to_var(graph: FactorGraph, surveys: SurveySet, I: int, i: int, m: float,
                     domain_cap: int = 5, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Survey from constraint ``I`` to ``i``; all zeros if every combination empties ``x_i``."""
    c = graph.constraints[I]
    if i not in c.scope:
        raise ValueError(f"variable {i} is not in the scope of constraint {I}")
    for j in c.scope:
        if graph.domains[j] > domain_cap:
            raise DomainCapExceeded(f"variable {j} exceeds the domain cap {domain_cap}")
    fl = graph.flat
    lut = _lookup(graph, budget)
    out = np.zeros(surveys.v2f.shape[1])
    K.factor_survey(graph.edge_index(I, i), fl.dom, fl.edge_var, fl.edge_fac, fl.fac_ptr,
                    lut.ptr, lut.table, size_weights(m, graph.max_domain), surveys.v2f, out,
                    np.zeros(max(fl.max_arity, 1), dtype=np.int64))
    return out[: 1 << graph.domains[i]]


def _var_combine(graph: FactorGraph, surveys: SurveySet, i: int, skip: int | None, m: float,
                 domain_cap: int) -> np.ndarray:
    d = graph.domains[i]
    if d > domain_cap:
        raise DomainCapExceeded(f"variable {i} exceeds the domain cap {domain_cap}")
    nsub = 1 << d
    acc = np.zeros(nsub)
    acc[subset_bits(graph.allowed_values(i))] = 1.0
    nxt = np.empty(nsub)
    for J in graph.adjacency[i]:
        if J != skip:
            K.and_combine(acc, np.ascontiguousarray(surveys.fac_to_var(J, i)), nsub, nxt)
            acc, nxt = nxt, acc
    K._finish(acc, nsub, size_weights(m, d))
    return acc


def sp_var_to_factor(graph: FactorGraph, surveys: SurveySet, i: int, I: int, m: float,
                     domain_cap: int = 5) -> np.ndarray:
    """Survey from ``i`` to ``I``, folding in the other incoming surveys one at a time."""
    if I not in graph.adjacency[i]:
        raise ValueError(f"constraint {I} is not incident to variable {i}")
    return _var_combine(graph, surveys, i, I, m, domain_cap)


def sp_cluster_marginal(graph: FactorGraph, surveys: SurveySet, i: int, m: float,
                        domain_cap: int = 5) -> ClusterMarginal:
    sub = _var_combine(graph, surveys, i, None, m, domain_cap)
    return ClusterMarginal(sub, project(sub, graph.domains[i]))


# naive enumerations: exponential, kept as independent references for testing

def sp_factor_to_var_naive(graph: FactorGraph, surveys: SurveySet, I: int, i: int, m: float) -> np.ndarray:
    c = graph.constraints[I]
    p = c.scope.index(i)
    others = [j for j in c.scope if j != i]
    out = np.zeros(1 << graph.domains[i])
    for ys in itertools.product(*[range(1, 1 << graph.domains[j]) for j in others]):
        w = 1.0
        for j, y in zip(others, ys):
            w *= surveys.var_to_fac(j, I)[y]
        if w == 0.0:
            continue
        allowed = 0
        for row in itertools.product(*[range(graph.domains[j]) for j in c.scope]):
            if c.table[row] and all((y >> row[c.scope.index(j)]) & 1 for j, y in zip(others, ys)):
                allowed |= 1 << row[p]
        out[allowed] += w
    return _naive_finish(out, m)


def sp_var_to_factor_naive(graph: FactorGraph, surveys: SurveySet, i: int, I: int | None, m: float) -> np.ndarray:
    d = graph.domains[i]
    incoming = [J for J in graph.adjacency[i] if J != I]
    out = np.zeros(1 << d)
    start = subset_bits(graph.allowed_values(i))
    for ys in itertools.product(*[range(1, 1 << d) for _ in incoming]):
        w = 1.0
        y_and = start
        for J, y in zip(incoming, ys):
            w *= surveys.fac_to_var(J, i)[y]
            y_and &= y
        out[y_and] += w
    return _naive_finish(out, m)


def _naive_finish(out: np.ndarray, m: float) -> np.ndarray:
    out[0] = 0.0
    for y in range(1, len(out)):
        out[y] *= bin(y).count("1") ** m
    z = out.sum()
    return out / z if z >= K.TINY else np.zeros_like(out)


# -- running SP ---------------------------------------------------------------

@dataclass
class SPResult:
    surveys: SurveySet
    over_subsets: np.ndarray
    over_values: np.ndarray
    status: BPStatus
    iterations: int
    contradiction_at: int = -1

    def cluster_marginal(self, i: int) -> ClusterMarginal:
        d = self.surveys.graph.domains[i]
        return ClusterMarginal(self.over_subsets[i, : 1 << d], self.over_values[i, :d])


_STATUS = {K.CONVERGED: BPStatus.CONVERGED, K.MAX_ITERS: BPStatus.MAX_ITERS,
           K.CONTRADICTION: BPStatus.CONTRADICTION}


class _Runner:
    """Binds a graph's flat arrays, lookup table and weights for the SP kernel."""

    def __init__(self, graph: FactorGraph, params: SPParams):
        check_domain_cap(graph, params.domain_cap)
        self.graph = graph
        self.fl = graph.flat
        self.lut = _lookup(graph, params.budget)
        self.w = size_weights(params.m, graph.max_domain)
        self.bits = _mask_bits(graph)
        self.orders = np.arange(graph.n_vars, dtype=np.int64)[None, :]
        S = 1 << graph.max_domain
        self.marg_sub = np.zeros((graph.n_vars, S))
        self.marg_val = graph.masks.astype(np.float64)
        self.marg_val /= np.maximum(self.marg_val.sum(axis=1, keepdims=True), 1.0)

    def run(self, surveys: SurveySet, gammas, uniforms=None, particle=None, eps=0.0, check=False):
        fl = self.fl
        if uniforms is None:
            uniforms = np.empty((0, self.graph.n_vars))
        if particle is None:
            particle = np.zeros(self.graph.n_vars, dtype=np.int64)
        status, done, var = K.sweeps(
            fl.dom, self.bits, fl.var_ptr, fl.var_edges, fl.edge_var, fl.edge_fac, fl.fac_ptr,
            self.lut.ptr, self.lut.table, self.w, fl.max_degree, fl.max_arity,
            surveys.v2f, surveys.f2v, self.marg_sub, self.marg_val, self.orders,
            np.ascontiguousarray(gammas, dtype=np.float64),
            np.ascontiguousarray(uniforms, dtype=np.float64), particle, float(eps), bool(check))
        return int(status), int(done), int(var)


def run_sp(graph: FactorGraph, params: SPParams | None = None,
           surveys: SurveySet | None = None) -> SPResult:
    """Sequential SP(m) sweeps until the largest subset-marginal change is below ``epsilon``."""
    params = params or SPParams()
    runner = _Runner(graph, params)
    if surveys is None:
        if params.init == "random":
            surveys = SurveySet.random(graph, np.random.default_rng(params.seed))
        else:
            surveys = SurveySet.uniform(graph)
    status, done, var = runner.run(surveys, np.zeros(params.max_iters), eps=params.epsilon, check=True)
    if status == K.CONTRADICTION:
        done += 1
    return SPResult(surveys, runner.marg_sub, runner.marg_val, _STATUS[status], done, var)


def sp_sweep(graph: FactorGraph, surveys: SurveySet, m: float, gamma: float = 0.0,
             rng: np.random.Generator | None = None, domain_cap: int = 5):
    """One in-place SP sweep; with ``rng`` also samples and mixes with weight ``gamma``.

    Returns ``(over_values, particle, contradiction_variable_or_-1)``.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    runner = _Runner(graph, SPParams(m=m, domain_cap=domain_cap))
    particle = np.zeros(graph.n_vars, dtype=np.int64)
    u = rng.random((1, graph.n_vars)) if rng is not None else None
    status, _, var = runner.run(surveys, np.array([gamma]), u, particle)
    return runner.marg_val, particle, (var if status == K.CONTRADICTION else -1)


# -- SP-guided decimation -----------------------------------------------------

@dataclass
class SPDecParams:
    sp: SPParams = field(default_factory=SPParams)
    rho: float = 0.01
    handoff: DecimationParams = field(default_factory=DecimationParams)

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")


@dataclass
class SPDecTrace:
    rounds: list[Round] = field(default_factory=list)
    restrictions: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)
    handoff_round: int | None = None
    handoff_iterations: int = 0


def _subset_rows(res: SPResult, graph: FactorGraph, free):
    """Subset marginals restricted to each variable's allowed subsets, plus their counts."""
    rows, sizes = {}, {}
    for i in free:
        d = graph.domains[i]
        rows[i] = res.over_subsets[i, : 1 << d]
        sizes[i] = (1 << graph.effective_size(i)) - 1
    return rows, sizes


def solve_sp_dec(graph: FactorGraph, variant: str = "S", params: SPDecParams | None = None):
    """SP-guided decimation; returns ``(outcome, trace)``.

    Variant ``"S"`` fixes each selected variable to its most likely value.
    Variant ``"C"`` restricts it to its most likely subset, which may keep
    several values.  Once every undecided variable's value marginal is
    within ``paramagnetic_threshold`` of uniform the reduced instance goes
    to BP-guided decimation.  Iterations include that final stage.
    """
    if variant not in ("S", "C"):
        raise ValueError(f"unknown variant {variant!r}")
    params = params or SPDecParams()
    check_domain_cap(graph, params.sp.domain_cap)
    trace = SPDecTrace()
    g = graph
    undecided = set(graph.free_variables())
    iters = 0
    updates = 0
    while True:
        undecided = {i for i in undecided if g.is_free(i)}
        if not undecided:
            break
        res = run_sp(g, params.sp)
        iters += res.iterations
        updates += 2 * g.n_edges * res.iterations
        if res.status is BPStatus.CONTRADICTION:
            return Contradiction(1, res.iterations, res.contradiction_at, iters, updates), trace
        free = sorted(undecided)
        sizes = g.masks.sum(axis=1)
        top = max(float(res.over_values[i].max()) - 1.0 / sizes[i] for i in free)
        if top < params.sp.paramagnetic_threshold:
            break
        if variant == "S":
            fixes = select_most_biased(res.over_values, free, params.rho, sizes)
            trace.rounds.append(Round(1, fixes, res.status, res.iterations,
                                      {i: float(res.over_values[i].max()) - 1.0 / sizes[i] for i, _ in fixes}))
            g = condition(g, fixes)
            undecided -= {i for i, _ in fixes}
        else:
            rows, nsubs = _subset_rows(res, g, free)
            picks = select_most_biased(rows, free, params.rho, nsubs, tie_tol=TIE_TOL)
            allowed = {i: subset_values(y) for i, y in picks}
            trace.rounds.append(Round(1, picks, res.status, res.iterations,
                                      {i: float(rows[i].max()) - 1.0 / nsubs[i] for i, _ in picks}))
            trace.restrictions.extend((i, tuple(v)) for i, v in allowed.items())
            g = restrict(g, allowed)
            undecided -= set(allowed)
    trace.handoff_round = len(trace.rounds)
    if g.free_variables():
        out, _ = solve_bp_dec(g, params.handoff, original=graph)
        trace.handoff_iterations = out.iterations
        iters += out.iterations
        updates += out.message_updates
        if isinstance(out, Satisfied):
            return Satisfied(out.assignment, iters, 1, updates), trace
        return replace(out, iterations=iters, message_updates=updates), trace
    assignment = g.fixed_assignment()
    if evaluate(graph, assignment):
        return Satisfied(assignment, iters, 1, updates), trace
    return Contradiction(1, 0, -1, iters, updates, reason="unverified"), trace


# -- Perturbed SP -------------------------------------------------------------

def solve_perturbed_sp(graph: FactorGraph, T: int, rng: np.random.Generator,
                       params: SPParams | None = None, attempt: int = 1) -> SolveOutcome:
    """``T`` SP sweeps whose outgoing surveys are mixed toward ``{x̂_i}``.

    ``x̂_i`` is drawn from the SP value marginal; its weight follows the
    same linear schedule as Perturbed BP, and the last sweep's draws form
    the candidate assignment.
    """
    params = params or SPParams()
    gammas = gamma_schedule(T)
    runner = _Runner(graph, params)
    surveys = SurveySet.uniform(graph)
    particle = np.zeros(graph.n_vars, dtype=np.int64)
    per_sweep = 2 * graph.n_edges
    done = 0
    while done < T:
        n = min(CHUNK, T - done)
        u = rng.random((n, graph.n_vars))
        status, k, var = runner.run(surveys, gammas[done : done + n], u, particle)
        if status == K.CONTRADICTION:
            sweep = done + k + 1
            return Contradiction(attempt, sweep, var, sweep, per_sweep * sweep)
        done += n
    if evaluate(graph, particle):
        return Satisfied(particle.copy(), T, attempt, per_sweep * T)
    return Contradiction(attempt, T, -1, T, per_sweep * T, reason="unverified")
