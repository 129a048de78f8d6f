import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import small_graphs
from mpcsp.factor_graph import build_graph, count_solutions, evaluate, restrict
from mpcsp.instances import (
    GeneratorSpec,
    NotClauseShaped,
    ParseError,
    break_symmetry,
    clause_literals,
    format_graph,
    parse_csp_json,
    parse_dimacs_cnf,
    parse_dimacs_edges,
    read_graph,
    toy_3sat,
    write_csp_json,
    write_dimacs_cnf,
    write_dimacs_edges,
    write_graph,
)

# upper 0.1% point of chi-square with 21 degrees of freedom
CHI2_21_999 = 46.797


def _same(a, b):
    assert a.domains == b.domains
    np.testing.assert_array_equal(a.masks, b.masks)
    assert [c.scope for c in a.constraints] == [c.scope for c in b.constraints]
    for x, y in zip(a.constraints, b.constraints):
        np.testing.assert_array_equal(x.table, y.table)


def _degree_chi2(degrees, lam, lo, hi):
    """Chi-square of a degree histogram against Poisson(lam), tails pooled into the end bins."""
    n = len(degrees)
    pmf = np.array([math.exp(-lam) * lam**k / math.factorial(k) for k in range(hi + 1)])
    expect = np.concatenate([[pmf[: lo + 1].sum()], pmf[lo + 1 : hi], [1 - pmf[:hi].sum()]]) * n
    d = np.clip(degrees, lo, hi)
    obs = np.bincount(d - lo, minlength=hi - lo + 1)
    return float(((obs - expect) ** 2 / expect).sum())


class TestGenerators:
    def test_ksat_structure(self):
        g = GeneratorSpec("ksat", 50, 200, k=4, seed=1).generate()
        assert g.n_vars == 50 and g.n_factors == 200
        assert all(c.arity == 4 and len(set(c.scope)) == 4 for c in g.constraints)
        assert all(c.table.shape == (2,) * 4 for c in g.constraints)

    def test_each_clause_forbids_one_row(self):
        g = GeneratorSpec("ksat", 100, 1000, seed=2).generate()
        assert all(c.n_forbidden() == 1 for c in g.constraints)
        rows = [tuple(np.argwhere(c.table == 0)[0]) for c in g.constraints]
        # every one of the 8 sign patterns shows up
        assert len(set(rows)) == 8

    def test_qcol_structure(self):
        g = GeneratorSpec("qcol", 30, 60, q=4, seed=0).generate()
        assert g.domains == (4,) * 30
        for c in g.constraints:
            assert c.arity == 2 and c.scope[0] != c.scope[1]
            np.testing.assert_array_equal(c.table, 1 - np.eye(4))

    def test_no_constraints(self):
        g = GeneratorSpec("ksat", 10, 0, seed=0).generate()
        assert g.n_factors == 0 and count_solutions(g) == 2**10

    def test_alpha(self):
        assert GeneratorSpec("ksat", 100, 420).alpha == 4.2
        assert GeneratorSpec("qcol", 100, 200).alpha == 4.0

    def test_seeded(self):
        a = GeneratorSpec("ksat", 40, 100, seed=9).generate()
        b = GeneratorSpec("ksat", 40, 100, seed=9).generate()
        _same(a, b)
        c = GeneratorSpec("ksat", 40, 100, seed=10).generate()
        assert [x.scope for x in a.constraints] != [x.scope for x in c.constraints]

    def test_ksat_degrees_poisson(self):
        n, alpha = 10_000, 5.0
        g = GeneratorSpec("ksat", n, int(alpha * n), seed=4).generate()
        deg = np.array([len(a) for a in g.adjacency])
        assert abs(deg.mean() - 3 * alpha) < 1e-9
        assert _degree_chi2(deg, 3 * alpha, 5, 26) < CHI2_21_999

    def test_qcol_degrees_poisson(self):
        n, alpha = 10_000, 5.0
        g = GeneratorSpec("qcol", n, int(alpha * n / 2), seed=4).generate()
        deg = np.array([len(a) for a in g.adjacency])
        assert abs(deg.mean() - alpha) < 1e-9
        assert _degree_chi2(deg, alpha, 0, 21) < CHI2_21_999

    def test_validation(self):
        with pytest.raises(ValueError):
            GeneratorSpec("xsat", 10, 10)
        with pytest.raises(ValueError):
            GeneratorSpec("ksat", 2, 10, k=3)
        with pytest.raises(ValueError):
            GeneratorSpec("qcol", 10, -1)

    def test_break_symmetry(self):
        g = GeneratorSpec("qcol", 9, 12, seed=1).generate()
        h = break_symmetry(g)
        assert h.allowed_values(0).tolist() == [0]
        # colour permutations map every coloring to one with x0 = 0
        assert count_solutions(g) == 3 * count_solutions(h)


class TestDimacs:
    def test_toy_roundtrip(self):
        g = toy_3sat()
        _same(parse_dimacs_cnf(write_dimacs_cnf(g)), g)

    def test_literal_mapping(self):
        g = parse_dimacs_cnf("p cnf 3 1\n1 -3 0\n")
        c = g.constraints[0]
        assert c.scope == (0, 2) and clause_literals(c) == [1, -3]
        # the only forbidden row is x1 = False, x3 = True
        assert c.table.tolist() == [[1, 1], [0, 1]]

    def test_empty_formula(self):
        g = parse_dimacs_cnf("c nothing\np cnf 3 0\n")
        assert g.n_vars == 3 and g.n_factors == 0

    def test_clause_across_lines_and_trailing(self):
        g = parse_dimacs_cnf("p cnf 3 2\n1 2\n 3 0 -1\n")
        assert [clause_literals(c) for c in g.constraints] == [[1, 2, 3], [-1]]

    def test_tautology_dropped(self):
        g = parse_dimacs_cnf("p cnf 2 2\n1 -1 2 0\n2 0\n")
        assert g.n_factors == 1

    @pytest.mark.parametrize("text", [
        "1 2 0\n",
        "p cnf 2 1\n1 3 0\n",
        "p cnf 2 1\n1 x 0\n",
        "p cnf 2\n1 0\n",
        "p cnf 2 1\n0\n",
        "",
    ])
    def test_errors(self, text):
        with pytest.raises(ParseError):
            parse_dimacs_cnf(text)

    def test_error_names_line(self):
        with pytest.raises(ParseError) as info:
            parse_dimacs_cnf("p cnf 2 1\n1 3 0\n")
        assert info.value.where == "line 2"

    def test_non_clause_rejected(self):
        with pytest.raises(NotClauseShaped):
            write_dimacs_cnf(build_graph([3, 3], [((0, 1), 1 - np.eye(3))]))
        with pytest.raises(NotClauseShaped):
            write_dimacs_cnf(build_graph([2, 2], [((0, 1), [1, 0, 0, 1])]))


class TestJson:
    def test_triangle(self):
        text = ('{"domains":[3,3,3],"constraints":['
                '{"scope":[0,1],"allowed":[[0,1],[0,2],[1,0],[1,2],[2,0],[2,1]]},'
                '{"scope":[1,2],"allowed":[[0,1],[0,2],[1,0],[1,2],[2,0],[2,1]]},'
                '{"scope":[0,2],"allowed":[[0,1],[0,2],[1,0],[1,2],[2,0],[2,1]]}]}')
        g = parse_csp_json(text)
        assert count_solutions(g) == 6
        assert evaluate(g, [0, 1, 2]) and not evaluate(g, [0, 0, 1])

    def test_flat_table_form(self):
        g = parse_csp_json('{"domains":[2,2],"constraints":[{"scope":[0,1],"allowed":[1,1,1,0]}]}')
        assert g.constraints[0].table.tolist() == [[1, 1], [1, 0]]

    @settings(max_examples=100, deadline=None)
    @given(small_graphs())
    def test_roundtrip(self, g):
        _same(parse_csp_json(write_csp_json(g)), g)

    def test_restriction_roundtrip(self):
        g = restrict(GeneratorSpec("qcol", 6, 8, seed=1).generate(), {2: [0, 2]})
        h = parse_csp_json(write_csp_json(g))
        _same(h, g)
        assert h.allowed_values(2).tolist() == [0, 2]

    @pytest.mark.parametrize("text,where", [
        ("[1]", "$"),
        ("{", "$"),
        ('{"constraints":[]}', "$.domains"),
        ('{"domains":[2],"constraints":[{"scope":[1],"allowed":[[0]]}]}', "$.constraints[0].scope"),
        ('{"domains":[2],"constraints":[{"scope":[0]}]}', "$.constraints[0]"),
        ('{"domains":[2],"constraints":[{"scope":[0],"allowed":[[2]]}]}', "$.constraints[0].allowed[0]"),
    ])
    def test_errors(self, text, where):
        with pytest.raises(ParseError) as info:
            parse_csp_json(text)
        assert info.value.where == where


class TestEdgeList:
    def test_roundtrip(self):
        g = GeneratorSpec("qcol", 25, 40, seed=3).generate()
        _same(parse_dimacs_edges(write_dimacs_edges(g)), g)

    def test_parse(self):
        g = parse_dimacs_edges("c triangle\np edge 3 3\ne 1 2\ne 2 3\ne 1 3\n", q=3)
        assert count_solutions(g) == 6

    @pytest.mark.parametrize("text", ["e 1 2\n", "p edge 2 1\ne 1 3\n", "p edge 2 1\ne 1 1\n", "p edge 2\n"])
    def test_errors(self, text):
        with pytest.raises(ParseError):
            parse_dimacs_edges(text)

    def test_rejects_non_coloring(self):
        with pytest.raises(NotClauseShaped):
            write_dimacs_edges(toy_3sat())


class TestFiles:
    @pytest.mark.parametrize("ext", [".cnf", ".json"])
    def test_sat_files(self, tmp_path, ext):
        g = GeneratorSpec("ksat", 20, 60, seed=5).generate()
        path = str(tmp_path / f"f{ext}")
        write_graph(g, path)
        _same(read_graph(path), g)

    def test_edge_file(self, tmp_path):
        g = GeneratorSpec("qcol", 20, 30, q=4, seed=5).generate()
        path = str(tmp_path / "g.col")
        write_graph(g, path)
        _same(read_graph(path, q=4), g)

    def test_format_matches_writer(self, tmp_path):
        g = toy_3sat()
        path = tmp_path / "t.cnf"
        write_graph(g, str(path))
        assert path.read_text() == format_graph(g, "x.cnf")
