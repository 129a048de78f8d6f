import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_graphs
from mpcsp.factor_graph import build_graph, enumerate_solutions, evaluate
from mpcsp.instances import GeneratorSpec
from mpcsp.outcome import Contradiction, Exhausted, Satisfied
from mpcsp.perturbed_bp import (
    PerturbedBPParams,
    gamma_schedule,
    perturbed_sweep,
    solve_perturbed_bp,
    solve_with_retries,
)
from mpcsp.sum_product import MessageSet, bp_sweep


class TestSchedule:
    def test_gamma_endpoints(self):
        g = gamma_schedule(5)
        np.testing.assert_allclose(g, [0, 0.25, 0.5, 0.75, 1])

    def test_benchmark_schedule(self):
        s = PerturbedBPParams.benchmark().schedule()
        assert len(s) == 11 and s[0] == 10 and s[-1] == 10240

    def test_random_csp_schedule(self):
        assert PerturbedBPParams.random_csp().schedule() == [1000, 4000, 16000, 64000]

    def test_validation(self):
        with pytest.raises(ValueError):
            gamma_schedule(1)
        with pytest.raises(ValueError):
            PerturbedBPParams(T=1)
        with pytest.raises(ValueError):
            PerturbedBPParams(growth=1.0)


class TestSweep:
    @settings(max_examples=40, deadline=None)
    @given(small_graphs(), st.integers(0, 2**31))
    def test_zero_weight_is_bp_sweep(self, g, seed):
        a = MessageSet.uniform(g)
        b = a.copy()
        perturbed_sweep(g, a, 0.0, np.random.default_rng(seed))
        bp_sweep(g, b)
        assert np.array_equal(a.v2f, b.v2f) and np.array_equal(a.f2v, b.f2v)

    @settings(max_examples=40, deadline=None)
    @given(small_graphs(), st.integers(0, 2**31))
    def test_full_weight_one_hot(self, g, seed):
        msgs = MessageSet.uniform(g)
        _, bad = perturbed_sweep(g, msgs, 1.0, np.random.default_rng(seed))
        if bad != -1 or g.n_edges == 0:
            return
        rows = msgs.v2f
        assert np.isin(rows, (0.0, 1.0)).all() and (rows.sum(axis=1) == 1).all()

    def test_half_mixing_arithmetic(self):
        # neighbour sends (0.8, 0.2) through an equality constraint, sample lands on 0
        g = build_graph([2, 2], [((0, 1), [1, 0, 0, 1]), ((0,), [1, 1])])
        msgs = MessageSet.uniform(g)
        msgs.v2f[g.edge_index(0, 1), :2] = [0.8, 0.2]

        class Low:
            def random(self, shape):
                return np.zeros(shape)

        perturbed_sweep(g, msgs, 0.5, Low())
        # variable 0 sends (0.8, 0.2) to the unary factor, mixed with delta(0)
        np.testing.assert_allclose(msgs.v2f[g.edge_index(1, 0), :2], [0.9, 0.1])

    def test_mixed_messages_normalized(self):
        g = GeneratorSpec("ksat", 30, 90, seed=1).generate()
        msgs = MessageSet.uniform(g)
        rng = np.random.default_rng(0)
        for gamma in np.linspace(0, 1, 7):
            perturbed_sweep(g, msgs, float(gamma), rng)
            np.testing.assert_allclose(msgs.v2f.sum(axis=1), 1, atol=1e-12)

    def test_gamma_validated(self, toy):
        with pytest.raises(ValueError):
            perturbed_sweep(toy, MessageSet.uniform(toy), 1.5, np.random.default_rng(0))


class TestSolve:
    def test_toy(self, toy):
        sols = {tuple(s) for s in enumerate_solutions(toy).tolist()}
        outs = [solve_perturbed_bp(toy, 10, np.random.default_rng(s)) for s in range(5)]
        hits = [o for o in outs if isinstance(o, Satisfied)]
        assert hits
        assert all(tuple(o.assignment.tolist()) in sols for o in hits)

    def test_contradiction(self, contradiction):
        out = solve_perturbed_bp(contradiction, 10, np.random.default_rng(0))
        assert isinstance(out, Contradiction) and out.variable == 0 and out.sweep == 1

    def test_constraint_free(self):
        g = build_graph([2, 3, 4], [])
        out = solve_perturbed_bp(g, 2, np.random.default_rng(0))
        assert isinstance(out, Satisfied) and out.iterations == 2

    def test_deterministic(self):
        g = GeneratorSpec("ksat", 100, 380, seed=3).generate()
        a = solve_perturbed_bp(g, 200, np.random.default_rng(4))
        b = solve_perturbed_bp(g, 200, np.random.default_rng(4))
        assert a == b if not isinstance(a, Satisfied) else np.array_equal(a.assignment, b.assignment)

    def test_satisfied_always_verified(self):
        for seed in range(10):
            g = GeneratorSpec("ksat", 60, 250, seed=seed).generate()
            out = solve_perturbed_bp(g, 100, np.random.default_rng(seed))
            if isinstance(out, Satisfied):
                assert evaluate(g, out.assignment)

    def test_retries_first_attempt(self, toy):
        out = solve_with_retries(toy, PerturbedBPParams.benchmark(seed=0))
        assert isinstance(out, Satisfied)

    def test_retries_exhausted(self, contradiction):
        out = solve_with_retries(contradiction, PerturbedBPParams(initial_T=4, max_attempts=3, seed=0))
        assert isinstance(out, Exhausted) and out.attempts == 3
        assert out.iterations == 3  # each attempt dies on its first sweep
