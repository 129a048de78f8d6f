"""Discrete factor graphs over 0/1 tabular constraints.

A :class:`FactorGraph` is immutable once built.  Decimation never deletes
variables: conditioning narrows a variable's *domain mask* and slices the
touched tables, so variable indices stay stable across rounds.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

UNSET = -1


class InvalidScope(ValueError):
    pass


class TableSizeMismatch(ValueError):
    pass


class FactorTooLarge(ValueError):
    pass


class UnsetVariable(ValueError):
    pass


class NoSolutions(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Constraint:
    """0/1 table over ``scope``; axis ``k`` of ``table`` indexes ``scope[k]``."""

    scope: tuple[int, ...]
    table: np.ndarray

    @property
    def arity(self) -> int:
        return len(self.scope)

    def flat(self) -> np.ndarray:
        """Row-major 0/1 entries in scope order."""
        return self.table.reshape(-1)

    def n_forbidden(self) -> int:
        return int(self.table.size - np.count_nonzero(self.table))


class _Flat(NamedTuple):
    # contiguous arrays consumed by the compiled kernels
    dom: np.ndarray
    mask: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray
    edge_var: np.ndarray
    edge_fac: np.ndarray
    fac_ptr: np.ndarray
    stride: np.ndarray
    tab_ptr: np.ndarray
    tables: np.ndarray
    max_degree: int
    max_arity: int


class FactorGraph:
    """A CSP ``mu(x) ∝ prod_I C_I(x_I)`` as a bipartite variable/constraint graph.

    Parameters
    ----------
    domains:
        Domain size of each variable.
    constraints:
        ``Constraint`` objects; tables are stored read-only as ``uint8``.
    masks:
        Optional ``(N, max_domain)`` boolean array of still-allowed values.
        Absent means every value is allowed.
    """

    def __init__(self, domains, constraints, masks=None):
        self._domains = tuple(int(d) for d in domains)
        self._constraints = tuple(constraints)
        n = len(self._domains)
        dmax = max(self._domains, default=1)
        if masks is None:
            m = np.zeros((n, dmax), dtype=bool)
            for i, d in enumerate(self._domains):
                m[i, :d] = True
        else:
            m = np.array(masks, dtype=bool).reshape(n, dmax)
        m.setflags(write=False)
        self._masks = m
        adj: list[list[int]] = [[] for _ in range(n)]
        for I, c in enumerate(self._constraints):
            for i in c.scope:
                adj[i].append(I)
        self._adjacency = tuple(tuple(a) for a in adj)

    # -- structure -------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self._domains)

    @property
    def n_factors(self) -> int:
        return len(self._constraints)

    @property
    def domains(self) -> tuple[int, ...]:
        return self._domains

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return self._constraints

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        """``adjacency[i]`` lists the constraints incident to variable ``i``."""
        return self._adjacency

    @property
    def masks(self) -> np.ndarray:
        return self._masks

    @property
    def max_domain(self) -> int:
        return self._masks.shape[1]

    @property
    def n_edges(self) -> int:
        return sum(c.arity for c in self._constraints)

    def allowed_values(self, i: int) -> np.ndarray:
        return np.flatnonzero(self._masks[i, : self._domains[i]])

    def effective_size(self, i: int) -> int:
        return int(self._masks[i].sum())

    def is_free(self, i: int) -> bool:
        return self.effective_size(i) > 1

    def free_variables(self) -> list[int]:
        return np.flatnonzero(self._masks.sum(axis=1) > 1).tolist()

    def fixed_assignment(self) -> np.ndarray:
        """Values of singleton-domain variables; ``UNSET`` elsewhere."""
        out = np.full(self.n_vars, UNSET, dtype=np.int64)
        for i in range(self.n_vars):
            vals = self.allowed_values(i)
            if len(vals) == 1:
                out[i] = vals[0]
        return out

    def edge_index(self, I: int, i: int) -> int:
        """Position of the edge (I, i) in the flat edge ordering."""
        return int(self.flat.fac_ptr[I]) + self._constraints[I].scope.index(i)

    def __repr__(self) -> str:
        return f"FactorGraph(n_vars={self.n_vars}, n_factors={self.n_factors})"

    @cached_property
    def flat(self) -> _Flat:
        n = self.n_vars
        dom = np.asarray(self._domains, dtype=np.int64)
        mask = self._masks.astype(np.float64)
        fac_ptr = np.zeros(self.n_factors + 1, dtype=np.int64)
        tab_ptr = np.zeros(self.n_factors + 1, dtype=np.int64)
        for I, c in enumerate(self._constraints):
            fac_ptr[I + 1] = fac_ptr[I] + c.arity
            tab_ptr[I + 1] = tab_ptr[I] + c.table.size
        n_e = int(fac_ptr[-1])
        edge_var = np.empty(n_e, dtype=np.int64)
        edge_fac = np.empty(n_e, dtype=np.int64)
        stride = np.empty(n_e, dtype=np.int64)
        tables = np.empty(int(tab_ptr[-1]), dtype=np.float64)
        for I, c in enumerate(self._constraints):
            a = fac_ptr[I]
            s = 1
            for p in range(c.arity - 1, -1, -1):
                stride[a + p] = s
                s *= self._domains[c.scope[p]]
            edge_var[a : a + c.arity] = c.scope
            edge_fac[a : a + c.arity] = I
            tables[tab_ptr[I] : tab_ptr[I + 1]] = c.flat()
        var_ptr = np.zeros(n + 1, dtype=np.int64)
        for i in range(n):
            var_ptr[i + 1] = var_ptr[i] + len(self._adjacency[i])
        var_edges = np.empty(n_e, dtype=np.int64)
        for i in range(n):
            var_edges[var_ptr[i] : var_ptr[i + 1]] = [
                fac_ptr[I] + self._constraints[I].scope.index(i) for I in self._adjacency[i]
            ]
        max_degree = max((len(a) for a in self._adjacency), default=0)
        max_arity = max((c.arity for c in self._constraints), default=0)
        return _Flat(dom, mask, var_ptr, var_edges, edge_var, edge_fac, fac_ptr,
                     stride, tab_ptr, tables, max_degree, max_arity)


def make_constraint(scope: Sequence[int], table, domains: Sequence[int]) -> Constraint:
    """Validate ``scope``/``table`` against ``domains`` and build a constraint.

    ``table`` may be flat (row-major) or already shaped.
    """
    scope = tuple(int(i) for i in scope)
    if not scope:
        raise InvalidScope("constraint scope is empty")
    if len(set(scope)) != len(scope):
        raise InvalidScope(f"repeated variable in scope {scope}")
    for i in scope:
        if not 0 <= i < len(domains):
            raise InvalidScope(f"variable {i} out of range in scope {scope}")
    shape = tuple(domains[i] for i in scope)
    arr = np.asarray(table)
    if arr.size != int(np.prod(shape)):
        raise TableSizeMismatch(f"table has {arr.size} entries, scope {scope} needs {int(np.prod(shape))}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("table entries must be 0 or 1")
    arr = arr.astype(np.uint8).reshape(shape)
    arr.setflags(write=False)
    return Constraint(scope, arr)


def build_graph(domains: Sequence[int], constraints: Iterable, max_entries: int | None = None) -> FactorGraph:
    """Build a graph from domain sizes and ``(scope, table)`` pairs.

    ``max_entries`` caps the size of any single table (dense storage limit).
    """
    domains = [int(d) for d in domains]
    if any(d < 1 for d in domains):
        raise ValueError("domain sizes must be >= 1")
    built = []
    for c in constraints:
        scope, table = (c.scope, c.table) if isinstance(c, Constraint) else c
        con = make_constraint(scope, table, domains)
        if max_entries is not None and con.table.size > max_entries:
            raise FactorTooLarge(f"constraint over {con.scope} has {con.table.size} entries")
        built.append(con)
    return FactorGraph(domains, built)


def _check_assignment(graph: FactorGraph, assignment) -> np.ndarray:
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != (graph.n_vars,):
        raise ValueError(f"assignment must have length {graph.n_vars}")
    if (a == UNSET).any():
        raise UnsetVariable(f"variable {int(np.flatnonzero(a == UNSET)[0])} is unset")
    if (a < 0).any() or (a >= np.asarray(graph.domains, dtype=np.int64)).any():
        raise ValueError("assignment value out of domain")
    return a


def evaluate(graph: FactorGraph, assignment) -> bool:
    """True iff every constraint (and every domain restriction) holds."""
    a = _check_assignment(graph, assignment)
    if not graph.masks[np.arange(graph.n_vars), a].all():
        return False
    return all(c.table[tuple(a[list(c.scope)])] == 1 for c in graph.constraints)


def restrict(graph: FactorGraph, allowed: Mapping[int, Iterable[int]]) -> FactorGraph:
    """Narrow variable domains to the given value subsets.

    Variables restricted to a single value are sliced out of every table
    they touch.  Wider restrictions only update the mask.  A table left
    with no scope keeps its verdict: satisfied ones are dropped, violated
    ones survive as an all-zero unary table on their first variable so
    the contradiction stays visible to message passing.
    """
    masks = graph.masks.copy()
    pinned: dict[int, int] = {}
    for i, vals in allowed.items():
        i = int(i)
        if not 0 <= i < graph.n_vars:
            raise InvalidScope(f"variable {i} out of range")
        new = np.zeros(graph.max_domain, dtype=bool)
        for v in vals:
            if not 0 <= int(v) < graph.domains[i] or not masks[i, int(v)]:
                raise ValueError(f"value {v} not in the current domain of variable {i}")
            new[int(v)] = True
        if not new.any():
            raise ValueError(f"empty restriction for variable {i}")
        masks[i] = new
        if new.sum() == 1:
            pinned[i] = int(np.flatnonzero(new)[0])
    if not pinned:
        return FactorGraph(graph.domains, graph.constraints, masks)

    out: list[Constraint] = []
    for c in graph.constraints:
        hit = [k for k, i in enumerate(c.scope) if i in pinned]
        if not hit:
            out.append(c)
            continue
        index = tuple(pinned[i] if i in pinned else slice(None) for i in c.scope)
        sliced = np.ascontiguousarray(c.table[index])
        scope = tuple(i for i in c.scope if i not in pinned)
        if not scope:
            if sliced.item() == 1:
                continue
            first = c.scope[0]
            scope, sliced = (first,), np.zeros(graph.domains[first], dtype=np.uint8)
        elif sliced.all():
            continue
        sliced.setflags(write=False)
        out.append(Constraint(scope, sliced))
    return FactorGraph(graph.domains, out, masks)


def condition(graph: FactorGraph, fixes: Iterable[tuple[int, int]]) -> FactorGraph:
    """Fix each ``(variable, value)`` pair and reduce the touched constraints."""
    fixes = list(fixes)
    seen = [i for i, _ in fixes]
    if len(set(seen)) != len(seen):
        raise ValueError("a variable is fixed more than once")
    if not fixes:
        return graph
    return restrict(graph, {i: [v] for i, v in fixes})


def _satisfying_grid(graph: FactorGraph) -> np.ndarray:
    shape = graph.domains
    ok = np.ones(shape, dtype=bool)
    n = graph.n_vars
    for i in range(n):
        view = [1] * n
        view[i] = shape[i]
        ok &= graph.masks[i, : shape[i]].reshape(view)
    for c in graph.constraints:
        order = np.argsort(c.scope)
        t = np.transpose(c.table.astype(bool), order)
        view = [1] * n
        for i in c.scope:
            view[i] = shape[i]
        ok &= t.reshape(view)
    return ok


def enumerate_solutions(graph: FactorGraph, cap: int | None = None) -> np.ndarray:
    """All satisfying assignments in lexicographic order, shape ``(S, N)``.

    Dense enumeration: only for graphs whose full assignment space fits in
    memory (a few million cells).
    """
    if graph.n_vars == 0:
        return np.zeros((1, 0), dtype=np.int64)
    sols = np.argwhere(_satisfying_grid(graph)).astype(np.int64)
    return sols if cap is None else sols[:cap]


def count_solutions(graph: FactorGraph) -> int:
    return int(_satisfying_grid(graph).sum()) if graph.n_vars else 1


def exact_marginals(graph: FactorGraph) -> list[np.ndarray]:
    """Per-variable marginals of the uniform distribution over solutions."""
    ok = _satisfying_grid(graph)
    total = ok.sum()
    if total == 0:
        raise NoSolutions("the CSP has no solutions")
    n = graph.n_vars
    rows = []
    for i in range(n):
        axes = tuple(k for k in range(n) if k != i)
        rows.append(ok.sum(axis=axes) / total)
    return rows
