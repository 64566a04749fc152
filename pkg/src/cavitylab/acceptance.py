"""The twelve acceptance checks, shared by ``cavitylab verify`` and the test suite.

Each check returns ``(passed, detail)``.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.integrate import simpson

from .bethe import (
    _tangent_direction,
    embed,
    interpolation_functionals,
    optimize_local_polytope,
    phi_popdyn,
    phi_regular,
    second_order_check,
    stationarity_check,
)
from .bp import bp_fixed_point_regular, bp_run_graph, bp_tree_boundary
from .exact import BoundaryCondition, exact_log_z, rc_log_z, transfer_matrix_rate, tree_log_z
from .factor_spec import make_hardcore, make_ising, make_potts
from .graphs import OffspringLaw, complete_graph, cycle_graph, gen_random_regular, gen_tree
from .phase import (
    PottsRecursion,
    beta_minus,
    curve_B_minus,
    curve_B_plus,
    hardcore_lambda_c,
    ising_phase,
    potts_fixed_points,
    potts_free_energy_bounds,
    potts_region,
    potts_thresholds,
)

TREE_PARAMS = {
    "potts": [(0.5, 0.2), (1.2, 0.0), (2.0, 0.7)],
    "ising": [(0.3, 0.1), (-0.8, 0.5), (1.5, -0.3)],
    "hardcore": [0.5, 1.0, 3.0],
}


def _family_specs():
    out = [make_potts(3, b, B) for b, B in TREE_PARAMS["potts"]]
    out += [make_ising(b, B) for b, B in TREE_PARAMS["ising"]]
    out += [make_hardcore(lam) for lam in TREE_PARAMS["hardcore"]]
    return out


def random_trees(count: int = 20, seed: int = 0):
    """Galton-Watson trees with depth 1..4 and offspring uniform on {0..k}, k <= 4."""
    rng = np.random.Generator(np.random.PCG64(seed))
    trees = []
    for i in range(count):
        depth = int(rng.integers(1, 5))
        k = int(rng.integers(1, 5))
        law = OffspringLaw.explicit([1.0 / (k + 1)] * (k + 1))
        trees.append(gen_tree(("galton_watson", law), depth, seed=1000 + i))
    return trees


def check_tree_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    for tree in random_trees():
        for spec in _family_specs():
            r = bp_run_graph(tree.graph, spec, tol=1e-13)
            ex = tree_log_z(tree, spec)
            worst = max(worst, abs(r.bethe_value * tree.n - ex.log_z))
    dt = time.perf_counter() - t0
    return worst <= 1e-8 and dt < 5, f"max |n*bethe - log Z| = {worst:.2e}, {dt:.2f}s"


def check_random_cluster():
    t0 = time.perf_counter()
    graphs = {"triangle": cycle_graph(3), "C4": cycle_graph(4), "K4": complete_graph(4)}
    worst = 0.0
    for g in graphs.values():
        for q in (2, 3):
            for beta in (0.5, 1.0, 2.0):
                worst = max(worst, abs(rc_log_z(g, q, beta) - exact_log_z(g, make_potts(q, beta, 0), False).log_z))
    dt = time.perf_counter() - t0
    return worst <= 1e-9 and dt < 1, f"max diff = {worst:.2e}, {dt:.2f}s"


def check_thresholds():
    pairs = [
        (hardcore_lambda_c(3), 4.0),
        (hardcore_lambda_c(4), 27 / 16),
        (hardcore_lambda_c(6), 3125 / 4096),
        (potts_thresholds(3, 3).beta_plus, math.log(4)),
        (potts_thresholds(3, 4).beta_plus, math.log(2.5)),
        (potts_thresholds(2, 3).beta_minus, math.log(3)),
        (potts_thresholds(2, 4).beta_minus, math.log(2)),
    ]
    worst = max(abs(a - b) for a, b in pairs)
    return worst <= 1e-12, f"max diff = {worst:.2e}"


def check_beta_zero():
    worst = 0.0
    g = gen_random_regular(8, 3, 5)
    for q in (2, 3, 5):
        for B in (0.0, 0.5, 2.0):
            target = math.log(math.exp(B) + q - 1)
            spec = make_potts(q, 0.0, B)
            for d in (2, 3, 4):
                h = bp_fixed_point_regular(d, spec).h
                worst = max(worst, abs(phi_regular(d, spec, h).phi_total - target))
            ok_n = abs(exact_log_z(g, spec, False).log_z / g.n - target)
            if ok_n > 1e-10:
                return False, f"finite-graph value off by {ok_n:.2e} at q={q}, B={B}"
    return worst <= 1e-12, f"max Bethe diff = {worst:.2e}"


def check_line_graph():
    worst = 0.0
    for spec in _family_specs():
        _, value = optimize_local_polytope(2, spec, n_starts=4)
        worst = max(worst, abs(value - transfer_matrix_rate(spec)[0]))
    golden = abs(transfer_matrix_rate(make_hardcore(1.0))[0] - math.log((1 + math.sqrt(5)) / 2))
    return worst <= 1e-6 and golden <= 1e-9, f"optimizer vs eigen max diff = {worst:.2e}, golden diff = {golden:.2e}"


def check_stationarity():
    rng = np.random.Generator(np.random.PCG64(7))
    stat = 0.0
    rel = 0.0
    cases = [(3, make_potts(3, 0.8, 0.2)), (4, make_ising(0.4, 0.3)), (3, make_hardcore(1.0)), (2, make_potts(4, 1.5, 0.1))]
    for d, spec in cases:
        for branch in ("free", "ordered"):
            h = bp_fixed_point_regular(d, spec, branch).h
            stat = max(stat, stationarity_check(d, spec, h, directions=32, seed=3))
            b = embed(spec, h).joint
            for _ in range(4):
                a, n = second_order_check(d, spec, h, _tangent_direction(spec, b, rng))
                rel = max(rel, abs(a - n) / (1 + abs(a)))
    u = np.array([0.5, 0.5])
    dmag = np.array([[1.0, 0.0], [0.0, -1.0]])
    sign_lo, _ = second_order_check(3, make_ising(0.3, 0), u, dmag * embed(make_ising(0.3, 0), u).joint)
    sign_hi, _ = second_order_check(3, make_ising(1.5, 0), u, dmag * embed(make_ising(1.5, 0), u).joint)
    ok = stat <= 1e-6 and rel <= 1e-4 and sign_lo < 0 < sign_hi
    return ok, f"max |dPhi| = {stat:.2e}, second-order rel err = {rel:.2e}, signs {sign_lo:.3f} / {sign_hi:.3f}"


INTEGRAL_CONFIGS = [(3, 3, 0.2, 0.0, 0.5), (2, 3, 0.1, 0.0, 0.4), (3, 4, 0.5, 0.2, 0.7), (4, 3, 0.0, 0.0, 1.0), (5, 5, 1.0, 0.1, 0.6)]


def check_integral_identity(points: int = 201):
    worst = 0.0
    for q, d, B, b0, b1 in INTEGRAL_CONFIGS:
        if b1 >= beta_minus(q, d):
            return False, f"interval ({b0}, {b1}) leaves the uniqueness range for q={q}, d={d}"
        betas = np.linspace(b0, b1, points)
        a_e = []
        for b in betas:
            spec = make_potts(q, b, B)
            a_e.append(interpolation_functionals(d, spec, bp_fixed_point_regular(d, spec).h)[0])

        def phi(b):
            spec = make_potts(q, b, B)
            return phi_regular(d, spec, bp_fixed_point_regular(d, spec).h).phi_total

        worst = max(worst, abs(simpson(a_e, x=betas) - (phi(b1) - phi(b0))))
    return worst <= 1e-6, f"max quadrature error = {worst:.2e}"


def region_grid(q=3, d=3, n=40):
    b_plus = potts_region(q, d, 0.0).B_plus
    return np.linspace(1.30, 1.42, n), np.linspace(0.0, 1.2 * b_plus, n)


def check_region():
    q, d = 3, 3
    betas, fields = region_grid(q, d)
    mismatches = 0
    for B in fields:
        reg = potts_region(q, d, float(B))
        for b in betas:
            rf, r1, _ = potts_fixed_points(PottsRecursion(q, d, float(b), float(B)))
            if reg.in_R_ne(float(b)) != (r1 - rf > 1e-8):
                mismatches += 1
    lo, hi = potts_thresholds(q, d).beta_minus, potts_thresholds(q, d).beta_plus
    grid = np.linspace(lo + 1e-6, hi, 200)
    bm = np.array([curve_B_minus(q, d, b) for b in grid])
    bp = np.array([curve_B_plus(q, d, b) for b in grid])
    decreasing = bool((np.diff(bm) < 0).all() and (np.diff(bp) < 0).all())
    meet = potts_region(q, d, 0.0).B_plus
    near = potts_region(q, d, meet * (1 - 1e-12))
    gap = abs(near.beta_plus_of_B - near.beta_f_of_B)
    ok = mismatches == 0 and decreasing and gap <= 1e-6
    return ok, f"{mismatches} mismatches on {len(betas)}x{len(fields)}, curves decreasing={decreasing}, meeting gap={gap:.2e}"


def check_bounds():
    q, d = 3, 3
    betas, fields = region_grid(q, d)
    violations = 0
    eq_worst = 0.0
    for B in fields:
        for b in betas:
            rep = potts_free_energy_bounds(q, d, float(b), float(B))
            if rep.lower > rep.upper + 1e-12:
                violations += 1
            if rep.region == "UNIQUE":
                eq_worst = max(eq_worst, abs(rep.upper - rep.lower), abs(rep.phi_f - rep.phi_1))
    rep = potts_free_energy_bounds(q, d, 1.45, 0.0)
    gap = rep.upper - rep.lower
    ok = violations == 0 and eq_worst <= 1e-9 and gap > 1e-4
    return ok, f"{violations} sandwich violations, outside-region spread {eq_worst:.2e}, gap at beta=1.45: {gap:.2e} ({rep.region})"


def _nondecreasing(xs, tol=1e-12):
    return all(b >= a - tol for a, b in zip(xs, xs[1:]))


def check_monotonicity():
    tree = gen_tree(("regular", 3), 3)
    grid = np.linspace(0.0, 2.0, 10)
    failures = []
    for name, make in (("potts", lambda b, B: make_potts(3, b, B)), ("ising", make_ising)):
        for bc in (BoundaryCondition.free(), BoundaryCondition.fixed(0)):
            along_beta = [tree_log_z(tree, make(b, 0.3), bc).vertex_marginals[tree.root][0] for b in grid]
            along_B = [tree_log_z(tree, make(0.7, B), bc).vertex_marginals[tree.root][0] for B in grid]
            if not (_nondecreasing(along_beta) and _nondecreasing(along_B)):
                failures.append(f"{name}/{bc.kind}")
    for lam in (1.0, 6.0):
        spec = make_hardcore(lam)
        even, odd = [], []
        for t in range(1, 7):
            ball = gen_tree(("regular", 3), 2 * t - 1)
            odd.append(bp_tree_boundary(ball, spec, BoundaryCondition.fixed(1))[0])
            even.append(bp_tree_boundary(ball, spec, BoundaryCondition.fixed(0))[0])
        if not (_nondecreasing(odd) and _nondecreasing(even[::-1])):
            failures.append(f"hardcore lambda={lam}")
    return not failures, "all monotone" if not failures else "non-monotone: " + ", ".join(failures)


def finite_n_trend(sizes=(8, 12, 16), graphs=20, beta=0.2, B=0.1, d=3):
    spec = make_ising(beta, B)
    target = ising_phase(d, beta, B).phi
    gaps = []
    for n in sizes:
        vals = [exact_log_z(gen_random_regular(n, d, 1000 * n + s), spec, False).log_z / n for s in range(graphs)]
        gaps.append(abs(float(np.mean(vals)) - target))
    return target, gaps


def check_finite_n():
    t0 = time.perf_counter()
    _, gaps = finite_n_trend()
    dt = time.perf_counter() - t0
    ok = all(b < a for a, b in zip(gaps, gaps[1:])) and gaps[-1] < 0.05 and dt < 120
    return ok, "gaps " + ", ".join(f"{g:.5f}" for g in gaps) + f", {dt:.1f}s"


def check_popdyn(pool: int = 100_000, sweeps: int = 120):
    t0 = time.perf_counter()
    details = []
    ok = True
    for spec in (make_ising(0.3, 0.2), make_hardcore(1.0)):
        d = 3
        est = phi_popdyn(OffspringLaw.deterministic(d), OffspringLaw.deterministic(d - 1), spec, pool, sweeps, seed=11, init="random")
        ref = phi_regular(d, spec, bp_fixed_point_regular(d, spec).h).phi_total
        diff = abs(est.mean - ref)
        # the floor absorbs rounding when the pool has collapsed to one message
        ok &= diff <= 3 * est.stderr + 1e-12 and est.stderr < 1e-3
        details.append(f"{spec.model}: diff {diff:.1e}, stderr {est.stderr:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt < 60
    return ok, "; ".join(details) + f", {dt:.1f}s"


CRITERIA = [
    (1, "tree exactness", check_tree_exactness),
    (2, "random-cluster identity", check_random_cluster),
    (3, "closed-form thresholds", check_thresholds),
    (4, "beta = 0 exactness", check_beta_zero),
    (5, "line graph eigenvalue", check_line_graph),
    (6, "stationarity and second order", check_stationarity),
    (7, "integral identity", check_integral_identity),
    (8, "region consistency", check_region),
    (9, "bounds sandwich", check_bounds),
    (10, "monotonicity suite", check_monotonicity),
    (11, "finite-n trend", check_finite_n),
    (12, "population dynamics", check_popdyn),
]


def run_all(only=None, stream=None):
    """Run the checks; returns a list of ``(number, name, passed, detail)``."""
    rows = []
    for num, name, fn in CRITERIA:
        if only and num not in only:
            continue
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, reported with its message
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append((num, name, bool(ok), detail))
        if stream is not None:
            print(f"[{'PASS' if ok else 'FAIL'}] {num:2d} {name}: {detail}", file=stream, flush=True)
    return rows
