import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitylab.errors import InvalidParameter, ParseError
from cavitylab.graphs import (
    OffspringLaw,
    complete_graph,
    cycle_graph,
    gen_random_regular,
    gen_tree,
    graph_from_edge_list,
    neighborhood,
    tree_fraction,
)


def test_edge_list_parsing():
    tri = graph_from_edge_list("0 1\n1 2\n2 0")
    assert tri.degrees().tolist() == [2, 2, 2]
    path = graph_from_edge_list("0 1\n1 2")
    assert path.degrees().tolist() == [1, 2, 1]


@pytest.mark.parametrize("text", ["0 0", "0 1\n1 0", "0 1\nx y", "0 1 2"])
def test_edge_list_errors(text):
    with pytest.raises(ParseError):
        graph_from_edge_list(text)


def test_directed_edge_involution():
    g = cycle_graph(5)
    for e in range(2 * len(g.edges)):
        assert g.src[e ^ 1] == g.dst[e] and g.dst[e ^ 1] == g.src[e]


def test_random_regular_basic():
    g = gen_random_regular(8, 3, seed=1)
    assert len(g.edges) == 12
    assert set(g.degrees().tolist()) == {3}
    assert gen_random_regular(8, 3, seed=1).edges == g.edges


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_random_regular_k4(seed):
    g = gen_random_regular(4, 3, seed)
    assert sorted(tuple(sorted(e)) for e in g.edges) == sorted(tuple(sorted(e)) for e in complete_graph(4).edges)


def test_random_regular_odd():
    with pytest.raises(InvalidParameter):
        gen_random_regular(5, 3, 0)


def test_tree_sizes():
    assert gen_tree(("regular", 3), 1).n == 4
    assert gen_tree(("regular", 3), 2).n == 10
    t = gen_tree(("galton_watson", OffspringLaw.deterministic(2)), 2, seed=9)
    assert t.n == 7 and t.depth == 2


def test_neighborhoods():
    sub, is_tree = neighborhood(cycle_graph(4), 0, 1)
    assert sub.n == 3 and is_tree and len(sub.edges) == 2
    sub, is_tree = neighborhood(cycle_graph(3), 0, 1)
    assert sub.n == 3 and not is_tree
    sub, _ = neighborhood(gen_random_regular(8, 3, 2), 5, 0)
    assert sub.n == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 20).map(lambda k: 2 * k), st.integers(0, 2**32))
def test_handshake_and_nesting(n, seed):
    g = gen_random_regular(n, 3, seed)
    assert g.degrees().sum() == 2 * len(g.edges)
    prev = 0
    for t in range(4):
        sub, _ = neighborhood(g, 0, t)
        assert sub.n >= prev
        prev = sub.n


def test_tree_fraction_trend():
    fr = [np.mean([tree_fraction(gen_random_regular(n, 3, s), 2) for s in range(3)]) for n in (64, 256, 1024)]
    assert fr[0] < fr[2] and fr[2] > 0.9


def test_offspring_law_validation():
    with pytest.raises(InvalidParameter):
        OffspringLaw.explicit([0.5, 0.6])
    law = OffspringLaw.poisson(2.0)
    assert law.pmf().sum() == pytest.approx(1.0, abs=1e-12)
    assert law.mean() == pytest.approx(2.0, abs=1e-9)
