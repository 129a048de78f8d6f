"""Random instance generators and file formats (DIMACS CNF, JSON CSP).

Binary SAT variables use value index 0 for True and 1 for False, so a
positive DIMACS literal ``v`` is falsified by value 1 and a negative one
by value 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .factor_graph import Constraint, FactorGraph, build_graph, condition, make_constraint

TRUE, FALSE = 0, 1


class ParseError(ValueError):
    def __init__(self, where, reason):
        super().__init__(f"{where}: {reason}")
        self.where = where
        self.reason = reason


class NotClauseShaped(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    """Random instance recipe: ``kind`` is ``"ksat"`` (arity ``k``) or ``"qcol"`` (``q`` colors)."""

    kind: str
    n: int
    m: int
    k: int = 3
    q: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("ksat", "qcol"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if self.kind == "ksat":
            if self.k < 2 or self.n < self.k:
                raise ValueError("ksat needs k >= 2 and n >= k")
        elif self.q < 2 or self.n < 2:
            raise ValueError("qcol needs q >= 2 and n >= 2")

    @property
    def alpha(self) -> float:
        return self.m / self.n if self.kind == "ksat" else 2 * self.m / self.n

    def generate(self) -> FactorGraph:
        return gen_random_ksat(self) if self.kind == "ksat" else gen_random_qcol(self)


def _frozen(table: np.ndarray) -> np.ndarray:
    table.setflags(write=False)
    return table


def gen_random_ksat(spec: GeneratorSpec) -> FactorGraph:
    """Each clause: ``k`` distinct random variables, one random forbidden row."""
    rng = np.random.default_rng(spec.seed)
    k = spec.k
    # one zero row per clause; tables shared between clauses forbidding the same row
    shared = {}
    cons = []
    for _ in range(spec.m):
        scope = tuple(int(v) for v in rng.choice(spec.n, size=k, replace=False))
        row = int(rng.integers(2**k))
        if row not in shared:
            t = np.ones(2**k, dtype=np.uint8)
            t[row] = 0
            shared[row] = _frozen(t.reshape((2,) * k))
        cons.append(Constraint(scope, shared[row]))
    return FactorGraph([2] * spec.n, cons)


def coloring_table(q: int) -> np.ndarray:
    return _frozen((1 - np.eye(q)).astype(np.uint8))


def gen_random_qcol(spec: GeneratorSpec) -> FactorGraph:
    """``m`` disequality constraints on random distinct pairs (repeats allowed)."""
    rng = np.random.default_rng(spec.seed)
    table = coloring_table(spec.q)
    cons = []
    for _ in range(spec.m):
        i, j = rng.choice(spec.n, size=2, replace=False)
        cons.append(Constraint((int(i), int(j)), table))
    return FactorGraph([spec.q] * spec.n, cons)


def break_symmetry(graph: FactorGraph) -> FactorGraph:
    """Pin the lowest-index free variable to its lowest allowed value."""
    free = graph.free_variables()
    if not free:
        return graph
    i = free[0]
    return condition(graph, [(i, int(graph.allowed_values(i)[0]))])


# -- DIMACS CNF --------------------------------------------------------------

def clause_graph(n_vars: int, clauses) -> FactorGraph:
    """Graph from signed-literal clauses (DIMACS numbering, 1-based)."""
    cons = []
    for lits in clauses:
        scope = tuple(abs(l) - 1 for l in lits)
        table = np.ones((2,) * len(lits), dtype=np.uint8)
        table[tuple(FALSE if l > 0 else TRUE for l in lits)] = 0
        cons.append((scope, table))
    return build_graph([2] * n_vars, cons)


def parse_dimacs_cnf(text: str) -> FactorGraph:
    n_vars = None
    clauses = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            fields = line.split()
            if len(fields) != 4 or fields[1] != "cnf":
                raise ParseError(f"line {lineno}", "bad header, expected 'p cnf N M'")
            try:
                n_vars, _ = int(fields[2]), int(fields[3])
            except ValueError:
                raise ParseError(f"line {lineno}", "non-integer header field") from None
            continue
        if n_vars is None:
            raise ParseError(f"line {lineno}", "clause before header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"line {lineno}", f"bad literal {tok!r}") from None
            if lit == 0:
                if not current:
                    raise ParseError(f"line {lineno}", "empty clause")
                clauses.append(current)
                current = []
            elif abs(lit) > n_vars:
                raise ParseError(f"line {lineno}", f"literal {lit} exceeds variable count {n_vars}")
            else:
                current.append(lit)
    if n_vars is None:
        raise ParseError("end of input", "missing 'p cnf' header")
    if current:
        clauses.append(current)
    kept = []
    for lits in clauses:
        lits = list(dict.fromkeys(lits))
        if any(-l in lits for l in lits):
            continue  # tautology
        kept.append(lits)
    return clause_graph(n_vars, kept)


def clause_literals(c: Constraint) -> list[int]:
    """Signed DIMACS literals of a clause-shaped constraint."""
    if c.table.shape != (2,) * c.arity or c.n_forbidden() != 1:
        raise NotClauseShaped(f"constraint over {c.scope} is not a clause")
    row = np.argwhere(c.table == 0)[0]
    return [(i + 1) if v == FALSE else -(i + 1) for i, v in zip(c.scope, row)]


def write_dimacs_cnf(graph: FactorGraph) -> str:
    if any(d != 2 for d in graph.domains):
        raise NotClauseShaped("all variables must be binary")
    if not graph.masks[:, :2].all():
        raise NotClauseShaped("graph has restricted domains")
    lines = [f"p cnf {graph.n_vars} {graph.n_factors}"]
    for c in graph.constraints:
        lines.append(" ".join(str(l) for l in clause_literals(c)) + " 0")
    return "\n".join(lines) + "\n"


# -- JSON CSP ------------------------------------------------------------------

def write_csp_json(graph: FactorGraph) -> str:
    """Serialize with allowed-tuple lists; restricted domains go under ``"restrict"``."""
    doc = {
        "domains": list(graph.domains),
        "constraints": [
            {"scope": list(c.scope), "allowed": np.argwhere(c.table == 1).tolist()}
            for c in graph.constraints
        ],
    }
    restrict = {
        str(i): graph.allowed_values(i).tolist()
        for i in range(graph.n_vars)
        if graph.effective_size(i) < graph.domains[i]
    }
    if restrict:
        doc["restrict"] = restrict
    return json.dumps(doc, separators=(",", ":")) + "\n"


def parse_csp_json(text: str) -> FactorGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("$", f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("$", "top level must be an object")
    domains = doc.get("domains")
    if not isinstance(domains, list) or not all(isinstance(d, int) and d >= 1 for d in domains):
        raise ParseError("$.domains", "must be a list of positive integers")
    cons = doc.get("constraints", [])
    if not isinstance(cons, list):
        raise ParseError("$.constraints", "must be a list")
    built = []
    for k, c in enumerate(cons):
        path = f"$.constraints[{k}]"
        if not isinstance(c, dict) or "scope" not in c or "allowed" not in c:
            raise ParseError(path, "needs 'scope' and 'allowed'")
        scope, allowed = c["scope"], c["allowed"]
        if not isinstance(scope, list) or not all(isinstance(i, int) for i in scope):
            raise ParseError(f"{path}.scope", "must be a list of integers")
        if any(not 0 <= i < len(domains) for i in scope):
            raise ParseError(f"{path}.scope", "references a missing domain")
        shape = tuple(domains[i] for i in scope)
        if not isinstance(allowed, list):
            raise ParseError(f"{path}.allowed", "must be a list")
        if allowed and all(isinstance(b, int) for b in allowed):
            table = np.asarray(allowed)
        else:
            table = np.zeros(shape, dtype=np.uint8)
            for r, tup in enumerate(allowed):
                if (not isinstance(tup, list) or len(tup) != len(scope)
                        or any(not isinstance(v, int) or not 0 <= v < s for v, s in zip(tup, shape))):
                    raise ParseError(f"{path}.allowed[{r}]", "bad tuple")
                table[tuple(tup)] = 1
        try:
            built.append(make_constraint(scope, table, domains))
        except ValueError as exc:
            raise ParseError(path, str(exc)) from None
    graph = FactorGraph(domains, built)
    restrict = doc.get("restrict", {})
    if restrict:
        if not isinstance(restrict, dict):
            raise ParseError("$.restrict", "must be an object")
        masks = graph.masks.copy()
        for key, vals in restrict.items():
            try:
                i = int(key)
                masks[i] = False
                masks[i, vals] = True
            except (ValueError, IndexError, TypeError):
                raise ParseError(f"$.restrict.{key}", "bad restriction") from None
        graph = FactorGraph(domains, built, masks)
    return graph


# -- DIMACS edge lists (coloring) -----------------------------------------------

def parse_dimacs_edges(text: str, q: int = 3) -> FactorGraph:
    """``p edge N M`` followed by ``e i j`` lines (1-based) as a ``q``-coloring CSP."""
    n_vars = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split()
        if not fields or fields[0] == "c":
            continue
        try:
            if fields[0] == "p":
                if len(fields) != 4 or fields[1] not in ("edge", "col"):
                    raise ParseError(f"line {lineno}", "bad header, expected 'p edge N M'")
                n_vars = int(fields[2])
            elif fields[0] == "e":
                if n_vars is None:
                    raise ParseError(f"line {lineno}", "edge before header")
                if len(fields) != 3:
                    raise ParseError(f"line {lineno}", "edge line needs two endpoints")
                i, j = int(fields[1]), int(fields[2])
                if not (1 <= i <= n_vars and 1 <= j <= n_vars) or i == j:
                    raise ParseError(f"line {lineno}", f"bad edge {i} {j}")
                edges.append((i - 1, j - 1))
            else:
                raise ParseError(f"line {lineno}", f"unknown line type {fields[0]!r}")
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"line {lineno}", "non-integer field") from None
    if n_vars is None:
        raise ParseError("end of input", "missing 'p edge' header")
    table = coloring_table(q)
    return FactorGraph([q] * n_vars, [Constraint(e, table) for e in edges])


def write_dimacs_edges(graph: FactorGraph) -> str:
    """Inverse of :func:`parse_dimacs_edges` for unrestricted coloring graphs."""
    q = graph.max_domain
    if any(d != q for d in graph.domains) or not graph.masks.all():
        raise NotClauseShaped("edge lists need equal, unrestricted domains")
    table = coloring_table(q)
    lines = [f"p edge {graph.n_vars} {graph.n_factors}"]
    for c in graph.constraints:
        if c.arity != 2 or not np.array_equal(c.table, table):
            raise NotClauseShaped(f"constraint over {c.scope} is not a coloring edge")
        lines.append(f"e {c.scope[0] + 1} {c.scope[1] + 1}")
    return "\n".join(lines) + "\n"


def read_graph(path: str, q: int = 3) -> FactorGraph:
    """Format by extension: ``.json`` native, ``.col``/``.edges`` edge list, else CNF."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        return parse_csp_json(text)
    if path.endswith((".col", ".edges")):
        return parse_dimacs_edges(text, q)
    return parse_dimacs_cnf(text)


def format_graph(graph: FactorGraph, path: str) -> str:
    if path.endswith(".json"):
        return write_csp_json(graph)
    if path.endswith((".col", ".edges")):
        return write_dimacs_edges(graph)
    return write_dimacs_cnf(graph)


def write_graph(graph: FactorGraph, path: str) -> None:
    text = format_graph(graph, path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def toy_3sat() -> FactorGraph:
    """Five-clause 3-SAT formula over three variables whose solutions are TTT, FFF, FFT."""
    return clause_graph(3, [[-1, -2, 3], [-1, 2, 3], [1, -2, 3], [-1, 2, -3], [1, -2, -3]])
