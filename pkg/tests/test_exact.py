import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitylab.errors import DegenerateMeasure, NotATree, ReducibleMatrix, TooLarge
from cavitylab.exact import BoundaryCondition, exact_log_z, rc_log_z, transfer_matrix_rate, tree_log_z
from cavitylab.factor_spec import make_hardcore, make_ising, make_potts, make_raw
from cavitylab.graphs import FiniteGraph, RootedTree, complete_graph, cycle_graph, gen_tree, path_graph

GOLDEN = (1 + math.sqrt(5)) / 2


def brute(graph, spec):
    """Plain-loop enumeration, kept separate from the vectorized oracle."""
    psi, psibar = spec.psi, spec.psibar
    z = 0.0
    for s in itertools.product(range(spec.q), repeat=graph.n):
        w = np.prod([psibar[x] for x in s])
        for u, v in graph.edges:
            w *= psi[s[u], s[v]]
        z += w
    return math.log(z)


def test_single_vertex():
    assert exact_log_z(FiniteGraph(1, []), make_potts(3, 2.0, 0.0)).log_z == pytest.approx(math.log(3))


@pytest.mark.parametrize("beta", [0.0, 0.4, 1.3])
def test_path3_ising(beta):
    z = 2 * (2 * math.cosh(beta)) ** 2
    assert exact_log_z(path_graph(3), make_ising(beta, 0.0)).log_z == pytest.approx(math.log(z), abs=1e-12)


def test_matches_plain_enumeration(triangle):
    for spec in (make_potts(3, 0.7, 0.2), make_ising(-0.4, 0.3), make_hardcore(2.5)):
        for g in (triangle, cycle_graph(5), complete_graph(4)):
            assert exact_log_z(g, spec, marginals=False).log_z == pytest.approx(brute(g, spec), abs=1e-10)


def test_zero_partition_function():
    tri = FiniteGraph(3, [(0, 1), (1, 2), (2, 0)])
    spec = make_raw([[0, 1], [1, 0]], [1, 1])  # proper 2-coloring of an odd cycle
    assert exact_log_z(tri, spec, marginals=False).log_z == -np.inf
    with pytest.raises(DegenerateMeasure):
        exact_log_z(tri, spec, marginals=True)


def test_state_space_guard():
    with pytest.raises(TooLarge):
        exact_log_z(path_graph(20), make_potts(3, 0.1, 0.0))


def test_tree_free_boundary_symmetric():
    tree = gen_tree(("regular", 3), 2)
    res = tree_log_z(tree, make_potts(3, 0.5, 0.0))
    assert np.allclose(res.vertex_marginals[tree.root], 1 / 3, atol=1e-12)
    fixed = tree_log_z(tree, make_potts(3, 0.5, 0.0), BoundaryCondition.fixed(0))
    assert fixed.vertex_marginals[tree.root, 0] > 1 / 3 + 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.floats(-2, 2), st.floats(-1, 1))
def test_tree_dp_equals_enumeration(seed, beta, B):
    from cavitylab.graphs import OffspringLaw

    tree = gen_tree(("galton_watson", OffspringLaw.explicit([0.3, 0.3, 0.4])), 3, seed)
    if tree.n > 11:
        return
    spec = make_potts(3, beta, B)
    a, b = tree_log_z(tree, spec), exact_log_z(tree.graph, spec)
    assert a.log_z == pytest.approx(b.log_z, abs=1e-10)
    assert np.allclose(a.vertex_marginals, b.vertex_marginals, atol=1e-10)


def test_tree_rejects_cycle():
    with pytest.raises(NotATree):
        RootedTree.from_graph(cycle_graph(4))


def test_random_cluster(triangle):
    assert rc_log_z(triangle, 2, 1.0) == pytest.approx(exact_log_z(triangle, make_potts(2, 1.0, 0.0)).log_z, abs=1e-10)
    assert rc_log_z(cycle_graph(5), 3, 0.0) == pytest.approx(5 * math.log(3))
    q, beta = 4, 0.8
    z = q * q + q * (math.exp(beta) - 1)
    assert z == pytest.approx(q * (math.exp(beta) + q - 1))
    assert rc_log_z(path_graph(2), q, beta) == pytest.approx(math.log(z), abs=1e-12)


def test_transfer_matrix_hardcore():
    log_rho, pair, m = transfer_matrix_rate(make_hardcore(1.0))
    assert log_rho == pytest.approx(math.log(GOLDEN), abs=1e-12)
    assert log_rho == pytest.approx(0.48121182505960347, abs=1e-12)
    assert np.allclose(pair.sum(0), pair.sum(1)) and pair.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.7])
def test_transfer_matrix_ising(beta):
    log_rho, pair, _ = transfer_matrix_rate(make_ising(beta, 0.0))
    assert log_rho == pytest.approx(math.log(2 * math.cosh(beta)), abs=1e-12)
    if beta == 0.0:
        assert np.allclose(pair, 0.25)


def test_transfer_matrix_reducible():
    with pytest.raises(ReducibleMatrix):
        transfer_matrix_rate(make_raw([[1, 0], [0, 1]], [1, 1]))


def test_path_rate_approaches_transfer_rate():
    spec = make_ising(1.0, 0.3)
    log_rho = transfer_matrix_rate(spec)[0]
    gaps = [abs(exact_log_z(path_graph(n), spec, marginals=False).log_z / n - log_rho) for n in (4, 8, 12)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_derivative_identity():
    # d log Z / d beta = sum over edges of P(agree) for Potts
    g, B, h = complete_graph(4), 0.3, 1e-6
    lz = lambda b: exact_log_z(g, make_potts(3, b, B), marginals=False).log_z
    res = exact_log_z(g, make_potts(3, 0.9, B))
    agree = sum(np.trace(em) for em in res.edge_marginals)
    assert (lz(0.9 + h) - lz(0.9 - h)) / (2 * h) == pytest.approx(agree, abs=1e-6)


def test_log_z_convex_in_beta():
    g = cycle_graph(6)
    vals = [exact_log_z(g, make_potts(3, b, 0.1), marginals=False).log_z for b in np.linspace(0, 2, 9)]
    assert np.all(np.diff(vals, 2) >= -1e-12)
