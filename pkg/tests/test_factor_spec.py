import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitylab.errors import InvalidParameter
from cavitylab.exact import exact_log_z
from cavitylab.factor_spec import (
    load_spec,
    make_hardcore,
    make_ising,
    make_potts,
    make_raw,
    spec_from_config,
    validate_permissive,
)
from cavitylab.graphs import FiniteGraph, cycle_graph, path_graph

reals = st.floats(-3, 3, allow_nan=False)


def test_potts_beta_zero_is_all_ones():
    s = make_potts(3, 0.0, 0.0)
    assert np.array_equal(s.psi, np.ones((3, 3)))
    assert np.array_equal(s.psibar, np.ones(3))


def test_potts_diagonal():
    s = make_potts(3, 1.0, 0.0)
    assert np.allclose(np.diag(s.psi), math.e)
    assert np.allclose(s.psi[~np.eye(3, dtype=bool)], 1.0)


def test_potts_field_on_index_zero():
    s = make_potts(4, 0.0, 0.5)
    assert s.log_psibar.tolist() == [0.5, 0.0, 0.0, 0.0]


def test_potts_rejects_small_q():
    with pytest.raises(InvalidParameter):
        make_potts(1, 0.3, 0.0)


def test_ising_entries():
    s = make_ising(1.0, 0.0)
    assert s.psi[0, 0] == pytest.approx(math.e)
    assert s.psi[0, 1] == pytest.approx(1 / math.e)
    assert np.array_equal(make_ising(0, 0).psi, np.ones((2, 2)))


def test_ising_single_edge_partition_function():
    beta = 0.7
    res = exact_log_z(path_graph(2), make_ising(beta, 0.0))
    assert res.log_z == pytest.approx(math.log(2 * math.exp(beta) + 2 * math.exp(-beta)), abs=1e-12)


def test_hardcore_support_is_exact():
    s = make_hardcore(2.0)
    assert s.log_psi[1, 1] == -np.inf
    assert s.psibar.tolist() == pytest.approx([1.0, 2.0])
    with pytest.raises(InvalidParameter):
        make_hardcore(0.0)


def test_hardcore_triangle_and_star():
    tri = FiniteGraph(3, [(0, 1), (1, 2), (2, 0)])
    assert math.exp(exact_log_z(tri, make_hardcore(1.0)).log_z) == pytest.approx(4.0)
    star = FiniteGraph(4, [(0, 1), (0, 2), (0, 3)])
    res = exact_log_z(star, make_hardcore(1.0))
    assert math.exp(res.log_z) == pytest.approx(9.0)
    assert res.vertex_marginals[0, 1] == pytest.approx(1 / 9)


def test_permissive_reports():
    r = validate_permissive(make_hardcore(1.0))
    assert r.permissive and r.permitted_state == 0
    r = validate_permissive(make_potts(3, 2.0, 0.0))
    assert r.permissive and r.permitted_state == 0
    psi = np.ones((3, 3))
    psi[0, :] = psi[:, 0] = 0.0
    psi[1, 2] = psi[2, 1] = 0.0
    psi[1, 1] = 0.0
    r = validate_permissive(make_raw(psi, [1, 1, 1]))
    assert not r.permissive and r.failing_rows


def test_raw_rejects_asymmetric():
    with pytest.raises(InvalidParameter):
        make_raw([[1, 2], [3, 1]], [1, 1])


@settings(max_examples=40, deadline=None)
@given(reals, reals)
def test_potts2_ising_correspondence(beta, B):
    for g in (FiniteGraph(3, [(0, 1), (1, 2), (2, 0)]), cycle_graph(5)):
        lp = exact_log_z(g, make_potts(2, beta, B), marginals=False).log_z
        li = exact_log_z(g, make_ising(beta / 2, B / 2), marginals=False).log_z
        assert lp - li == pytest.approx(beta * len(g.edges) / 2 + B * g.n / 2, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), reals, reals, st.floats(0.01, 50))
def test_regeneration_is_bit_exact(q, beta, B, lam):
    for s in (make_potts(q, beta, B), make_ising(beta, B), make_hardcore(lam)):
        r = s.regenerate()
        assert np.array_equal(r.log_psi, s.log_psi)
        assert np.array_equal(r.log_psibar, s.log_psibar)
        assert np.array_equal(s.log_psi, s.log_psi.T)


def test_spec_is_immutable():
    s = make_potts(3, 1.0, 0.0)
    with pytest.raises(ValueError):
        s.log_psi[0, 0] = 5.0


def test_config_file_roundtrip(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"model": "raw", "psi": [[1, 1], [1, 0]], "psibar": [1, 2]}))
    s = load_spec(p)
    assert s.log_psi[1, 1] == -np.inf
    assert spec_from_config({"model": "potts", "q": 3, "beta": 0.4}).params["B"] == 0.0
