import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitylab.bethe import (
    _tangent_direction,
    embed,
    interpolation_functionals,
    optimize_local_polytope,
    phi_local_polytope,
    phi_popdyn,
    phi_regular,
    second_order_check,
    stationarity_check,
)
from cavitylab.bp import bp_fixed_point_regular
from cavitylab.errors import InvalidDirection, InvalidParameter, InvalidPolytopePoint
from cavitylab.exact import transfer_matrix_rate
from cavitylab.factor_spec import make_hardcore, make_ising, make_potts, make_raw
from cavitylab.graphs import OffspringLaw

LOG_GOLDEN = 0.48121182505960347


@pytest.mark.parametrize("d,beta", [(2, 0.3), (3, 0.3), (4, 1.1)])
def test_ising_uniform_closed_form(d, beta):
    val = phi_regular(d, make_ising(beta, 0.0), [0.5, 0.5]).phi_total
    assert val == pytest.approx(math.log(2) + d / 2 * math.log(math.cosh(beta)), abs=1e-13)
    if d == 2:
        assert val == pytest.approx(transfer_matrix_rate(make_ising(beta, 0.0))[0], abs=1e-12)


def test_hardcore_line():
    spec = make_hardcore(1.0)
    fp = bp_fixed_point_regular(2, spec)
    assert phi_regular(2, spec, fp.h).phi_total == pytest.approx(LOG_GOLDEN, abs=1e-12)
    _, val = optimize_local_polytope(2, spec)
    assert val == pytest.approx(LOG_GOLDEN, abs=1e-6)


def test_degenerate_breakdown():
    out = phi_regular(3, make_hardcore(1.0), [0.0, 1.0])
    assert out.degenerate and math.isnan(out.phi_total)


@pytest.mark.parametrize(
    "spec,d,branch",
    [(make_potts(3, 1.5, 0.0), 3, "ordered"), (make_potts(3, 0.8, 0.3), 4, "free"), (make_hardcore(2.0), 3, "free")],
)
def test_polytope_agrees_at_embedding(spec, d, branch):
    h = bp_fixed_point_regular(d, spec, branch).h
    assert phi_local_polytope(d, spec, embed(spec, h)) == pytest.approx(phi_regular(d, spec, h).phi_total, abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, 1.0), st.integers(2, 4))
def test_line_optimum_is_transfer_rate(beta, B, q):
    spec = make_potts(q, beta, B)
    _, val = optimize_local_polytope(2, spec, n_starts=4)
    assert val == pytest.approx(transfer_matrix_rate(spec)[0], abs=1e-6)


def test_polytope_rejects_bad_points():
    spec = make_potts(2, 0.5, 0.0)
    with pytest.raises(InvalidPolytopePoint):
        phi_local_polytope(3, spec, [[0.5, 0.3], [0.1, 0.1]])
    with pytest.raises(InvalidPolytopePoint):
        phi_local_polytope(3, spec, [[0.5, 0.5], [0.5, 0.5]])
    assert phi_local_polytope(3, make_hardcore(1.0), [[0.4, 0.1], [0.1, 0.4]]) == -np.inf


def test_optimizer_picks_ordered_branch():
    spec = make_ising(1.5, 0.0)
    vals = [phi_regular(3, spec, bp_fixed_point_regular(3, spec, b).h).phi_total for b in ("free", "ordered")]
    _, val = optimize_local_polytope(3, spec)
    assert vals[1] > vals[0]
    assert val == pytest.approx(max(vals), abs=1e-8)


def test_stationarity_discriminates():
    spec = make_potts(3, 2.0, 0.1)
    h = bp_fixed_point_regular(3, spec, "ordered").h
    assert stationarity_check(3, spec, h) < 1e-6
    assert stationarity_check(3, spec, np.full(3, 1 / 3)) > 1e-3


def _magnetization_direction(spec, h, scale=0.4):
    b = embed(spec, h).joint
    r = np.array([[1.0, 0.0], [0.0, -1.0]])
    return scale * b * (r - np.sum(b * r))


def test_second_order_signs():
    lo, hi = make_ising(0.3, 0.0), make_ising(1.5, 0.0)
    h = np.array([0.5, 0.5])
    a_lo, n_lo = second_order_check(3, lo, h, _magnetization_direction(lo, h))
    a_hi, n_hi = second_order_check(3, hi, h, _magnetization_direction(hi, h))
    assert a_lo < 0 < a_hi
    assert a_lo == pytest.approx(n_lo, rel=1e-4) and a_hi == pytest.approx(n_hi, rel=1e-4)


def test_second_order_random_directions():
    spec = make_potts(3, 0.7, 0.2)
    h = bp_fixed_point_regular(3, spec).h
    b = embed(spec, h).joint
    rng = np.random.default_rng(5)
    for _ in range(5):
        a, n = second_order_check(3, spec, h, _tangent_direction(spec, b, rng))
        assert a == pytest.approx(n, rel=1e-5, abs=1e-9)


def test_second_order_rejects_direction():
    h = np.array([0.5, 0.5])
    with pytest.raises(InvalidDirection):
        second_order_check(3, make_ising(0.3, 0), h, [[0.1, 0.0], [0.0, 0.0]])


@pytest.mark.parametrize("q,d", [(3, 3), (4, 5)])
def test_edge_functional_at_beta_zero(q, d):
    a_e, a_v = interpolation_functionals(d, make_potts(q, 0.0, 0.0), np.full(q, 1 / q))
    assert a_e == pytest.approx(d / (2 * q), abs=1e-14)
    assert a_v == pytest.approx(1 / q, abs=1e-14)


def test_interpolation_needs_family():
    with pytest.raises(InvalidParameter):
        interpolation_functionals(3, make_raw([[1, 1], [1, 1]], [1, 1]), [0.5, 0.5])


def test_continuity_of_phi_across_beta_f():
    # the value along the free branch is continuous even where the ordered branch appears
    spec = lambda b: make_potts(3, b, 0.0)
    vals = [phi_regular(3, spec(b), np.full(3, 1 / 3)).phi_total for b in np.linspace(1.33, 1.36, 7)]
    assert np.max(np.abs(np.diff(vals))) < 0.01


def test_popdyn_regular_and_reproducible():
    spec = make_potts(3, 0.5, 0.1)
    est = phi_popdyn(OffspringLaw.deterministic(3), OffspringLaw.deterministic(2), spec, pool=5000, sweeps=60, seed=3)
    ref = phi_regular(3, spec, bp_fixed_point_regular(3, spec).h).phi_total
    assert abs(est.mean - ref) <= 3 * est.stderr + 1e-10
    again = phi_popdyn(OffspringLaw.deterministic(3), OffspringLaw.deterministic(2), spec, pool=5000, sweeps=60, seed=3)
    assert again.mean == est.mean


def test_popdyn_poisson_seed_consistency():
    spec, law = make_ising(0.2, 0.3), OffspringLaw.poisson(1.0)
    a = phi_popdyn(law, law, spec, pool=20000, sweeps=40, seed=1)
    b = phi_popdyn(law, law, spec, pool=20000, sweeps=40, seed=2)
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)


def test_popdyn_small_pool():
    with pytest.raises(InvalidParameter):
        phi_popdyn(OffspringLaw.deterministic(3), OffspringLaw.deterministic(2), make_ising(0.1, 0), pool=10)
