"""Experiment runner: multi-seed sweeps over the control parameter alpha.

Every run is verified against the original instance before it is
recorded as a success.  Aggregates follow the usual reporting rule:
mean iterations and mean time are taken over successful runs only.
"""
from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .decimation import DecimationParams, solve_bp_dec
from .factor_graph import FactorGraph, evaluate
from .gibbs import StuckState, run_gibbs
from .instances import GeneratorSpec, break_symmetry, read_graph
from .outcome import Contradiction, Exhausted, Satisfied, SolveOutcome
from .perturbed_bp import PerturbedBPParams, solve_perturbed_bp
from .sum_product import BPParams, BPStatus
from .survey_prop import SPDecParams, SPParams, check_domain_cap, solve_perturbed_sp, solve_sp_dec

SOLVERS = ("bp-dec", "perturbed-bp", "sp-dec-s", "sp-dec-c", "perturbed-sp", "gibbs")
SCHEDULES = ("rcsp", "benchmark")
CSV_HEADER = "solver,alpha,n,seeds,success_rate,avg_iters,avg_time_s"
PARAM_KEYS = {"T", "rho", "epsilon", "m", "max_attempts", "growth", "domain_cap",
              "paramagnetic_threshold", "strict"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """What to solve, with which solver, over which seeds and alphas.

    Either ``kind`` (``"ksat"``/``"qcol"``) with ``n`` and ``alphas`` for
    generated instances, or ``input`` naming an instance file.
    """

    solver: str
    seeds: list[int]
    kind: str | None = None
    n: int | None = None
    alphas: list[float] = field(default_factory=list)
    k: int = 3
    q: int = 3
    input: str | None = None
    schedule: str = "rcsp"
    params: dict = field(default_factory=dict)
    time_budget: float | None = None
    break_symmetry: bool | None = None
    workers: int = 1

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {', '.join(SOLVERS)}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        unknown = set(self.params) - PARAM_KEYS
        if unknown:
            raise ConfigError(f"unknown solver parameters: {', '.join(sorted(unknown))}")
        if (self.input is None) == (self.kind is None):
            raise ConfigError("give exactly one of 'kind' (generated instances) or 'input' (a file)")
        if self.kind is not None:
            if self.kind not in ("ksat", "qcol"):
                raise ConfigError(f"unknown kind {self.kind!r}")
            if not self.n or self.n < 2:
                raise ConfigError("generated instances need n >= 2")
            if not self.alphas:
                raise ConfigError("alphas must be nonempty")
            if self.solver.startswith(("sp", "perturbed-sp")) and self.kind == "qcol":
                if self.q > self.params.get("domain_cap", 5):
                    raise ConfigError(f"q={self.q} exceeds the survey-propagation domain cap")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}") from None
        return cls.from_dict(doc)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


@dataclass
class RunRecord:
    instance: str
    seed: int
    solver: str
    alpha: float
    outcome: str
    iterations: int
    message_updates: int
    time_s: float
    attempts: int
    assignment: list[int] | None = None
    strict: bool = False  # whether an unconverged BP round counted as a decimation failure

    @property
    def ok(self) -> bool:
        return self.outcome == "satisfied"


def verify(graph: FactorGraph, assignment) -> bool:
    """True iff ``assignment`` satisfies every constraint of ``graph``."""
    return evaluate(graph, assignment)


# -- one solve with the configured retry schedule -----------------------------

def _p(params: dict, key: str, default):
    return params.get(key, default)


def solve(graph: FactorGraph, solver: str, seed: int, schedule: str = "rcsp",
          params: dict | None = None, time_budget: float | None = None) -> SolveOutcome:
    """Run ``solver`` with its retry schedule.  Satisfied results are verified."""
    params = params or {}
    rng = np.random.default_rng(seed)
    deadline = None if time_budget is None else time.monotonic() + time_budget
    if solver == "bp-dec":
        base = DecimationParams.random_csp() if schedule == "rcsp" else DecimationParams.benchmark()
        bp = replace(base.bp, epsilon=_p(params, "epsilon", base.bp.epsilon),
                     max_iters=_p(params, "T", base.bp.max_iters))
        dp = replace(base, rho=_p(params, "rho", base.rho), bp=bp,
                     max_attempts=_p(params, "max_attempts", base.max_attempts),
                     strict=bool(_p(params, "strict", False)))
        out, _ = solve_bp_dec(graph, dp)
        return out
    if solver in ("perturbed-bp", "perturbed-sp", "gibbs"):
        base = PerturbedBPParams.random_csp() if schedule == "rcsp" else PerturbedBPParams.benchmark()
        sched = PerturbedBPParams(initial_T=_p(params, "T", base.initial_T),
                                  growth=_p(params, "growth", base.growth),
                                  max_attempts=_p(params, "max_attempts", base.max_attempts)).schedule()
        sp = SPParams(m=_p(params, "m", 0.0), domain_cap=_p(params, "domain_cap", 5))
        iters = updates = 0
        for a, T in enumerate(sched, start=1):
            sub = rng.spawn(1)[0]
            if solver == "perturbed-bp":
                out = solve_perturbed_bp(graph, T, sub, attempt=a)
            elif solver == "perturbed-sp":
                out = solve_perturbed_sp(graph, T, sub, sp, attempt=a)
            else:
                out = _gibbs_attempt(graph, T, sub, a)
            iters += out.iterations
            updates += out.message_updates
            if isinstance(out, Satisfied):
                return Satisfied(out.assignment, iters, a, updates)
            if deadline is not None and time.monotonic() > deadline:
                return Exhausted(a, iters, updates)
        return Exhausted(len(sched), iters, updates)
    if solver in ("sp-dec-s", "sp-dec-c"):
        T = _p(params, "T", 1000)
        growth = _p(params, "growth", 4.0)
        attempts = _p(params, "max_attempts", 4 if schedule == "rcsp" else 10)
        eps = _p(params, "epsilon", 1e-3)
        rho = _p(params, "rho", 0.01)
        iters = updates = 0
        for a in range(1, attempts + 1):
            sp = SPParams(m=_p(params, "m", 0.0), epsilon=eps, max_iters=int(round(T * growth ** (a - 1))),
                          paramagnetic_threshold=_p(params, "paramagnetic_threshold", 0.01),
                          domain_cap=_p(params, "domain_cap", 5))
            handoff = DecimationParams(rho=rho, bp=BPParams(epsilon=eps, max_iters=sp.max_iters))
            out, trace = solve_sp_dec(graph, solver[-1].upper(), SPDecParams(sp=sp, rho=rho, handoff=handoff))
            iters += out.iterations
            updates += out.message_updates
            if isinstance(out, Satisfied):
                return Satisfied(out.assignment, iters, a, updates)
            # a deterministic rerun only differs if some SP run hit its iteration cap
            if all(r.status is not BPStatus.MAX_ITERS for r in trace.rounds):
                return replace(out, iterations=iters, message_updates=updates) if a == 1 \
                    else Exhausted(a, iters, updates)
            if deadline is not None and time.monotonic() > deadline:
                break
        return Exhausted(a, iters, updates)
    raise ConfigError(f"unknown solver {solver!r}")


def _gibbs_attempt(graph: FactorGraph, T: int, rng: np.random.Generator, attempt: int) -> SolveOutcome:
    per_sweep = 2 * graph.n_edges
    try:
        res = run_gibbs(graph, T, burn_in=0, rng=rng)
    except StuckState as exc:
        return Contradiction(attempt, exc.sweep, exc.site, exc.sweep, per_sweep * exc.sweep)
    if evaluate(graph, res.particle):
        return Satisfied(res.particle.copy(), T, attempt, per_sweep * T)
    return Contradiction(attempt, T, -1, T, per_sweep * T, reason="unverified")


# -- experiments ----------------------------------------------------------------

def instance_seed(seed: int, alpha: float) -> int:
    """Generator seed for one (seed, alpha) cell, independent across cells."""
    return int(np.random.SeedSequence([seed, round(alpha * 1_000_000)]).generate_state(1)[0])


def n_constraints(kind: str, n: int, alpha: float) -> int:
    return round(alpha * n) if kind == "ksat" else round(alpha * n / 2)


def _job(config: ExperimentConfig, alpha: float, seed: int) -> RunRecord:
    if config.input is not None:
        graph = read_graph(config.input, config.q)
        name = config.input
        alpha = graph.n_factors / max(graph.n_vars, 1)
        solve_graph = graph
    else:
        spec = GeneratorSpec(config.kind, config.n, n_constraints(config.kind, config.n, alpha),
                             k=config.k, q=config.q, seed=instance_seed(seed, alpha))
        graph = spec.generate()
        name = f"{config.kind}-n{config.n}-a{alpha:g}-s{seed}"
        sym = config.kind == "qcol" if config.break_symmetry is None else config.break_symmetry
        solve_graph = break_symmetry(graph) if sym else graph
    if config.solver.startswith(("sp", "perturbed-sp")):
        check_domain_cap(solve_graph, config.params.get("domain_cap", 5))
    t0 = time.perf_counter()
    out = solve(solve_graph, config.solver, seed, config.schedule, config.params, config.time_budget)
    elapsed = time.perf_counter() - t0
    strict = bool(config.params.get("strict", False))
    if isinstance(out, Satisfied):
        if not verify(graph, out.assignment):
            raise AssertionError(f"{name}: solver returned an assignment that fails verification")
        return RunRecord(name, seed, config.solver, alpha, "satisfied", out.iterations,
                         out.message_updates, elapsed, out.attempts, out.assignment.tolist(), strict)
    kind = "exhausted" if isinstance(out, Exhausted) else "contradiction"
    attempts = out.attempts if isinstance(out, Exhausted) else out.attempt
    return RunRecord(name, seed, config.solver, alpha, kind, out.iterations, out.message_updates,
                     elapsed, attempts, strict=strict)


def _job_star(args):
    return _job(*args)


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """Every (alpha, seed) run, in that deterministic order."""
    alphas = config.alphas if config.input is None else [math.nan]
    jobs = [(config, a, s) for a in alphas for s in config.seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(_job_star, jobs))
    return [_job(*j) for j in jobs]


def aggregate(records: list[RunRecord], n: int | None = None, timing: bool = True) -> list[dict]:
    """One row per (solver, alpha), in first-seen order."""
    groups: dict[tuple[str, float], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.solver, r.alpha), []).append(r)
    rows = []
    for (solver, alpha), rs in groups.items():
        ok = [r for r in rs if r.ok]
        rows.append({
            "solver": solver,
            "alpha": alpha,
            "n": n,
            "seeds": len(rs),
            "success_rate": len(ok) / len(rs),
            "avg_iters": float(np.mean([r.iterations for r in ok])) if ok else math.nan,
            "avg_time_s": (float(np.mean([r.time_s for r in ok])) if ok else math.nan) if timing else 0.0,
        })
    return rows


def format_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r['solver']},{float(r['alpha'])},{'' if r['n'] is None else r['n']},{r['seeds']},"
                  f"{r['success_rate']:.4f},{r['avg_iters']:.1f},{r['avg_time_s']:.4f}\n")
    return buf.getvalue()


def bench(config: ExperimentConfig, timing: bool = True) -> str:
    """Run the experiment and return its CSV table."""
    records = run_experiment(config)
    n = config.n
    if config.input is not None:
        n = read_graph(config.input, config.q).n_vars
    return format_csv(aggregate(records, n, timing))
