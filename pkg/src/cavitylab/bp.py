"""Belief propagation on finite graphs, truncated trees, and the d-regular tree."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateUpdate, InvalidParameter
from .exact import BoundaryCondition
from .factor_spec import FactorSpec
from .graphs import FiniteGraph, RootedTree

OSCILLATION_RUN = 10
AUTO_DAMPING = 0.5


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def psi_dot(log_psi: np.ndarray, h: np.ndarray) -> np.ndarray:
    """log sum_{s'} psi(s, s') h(s') for each row of ``h`` (shape ``(..., q)``)."""
    return logsumexp(log_psi[None, :, :] + _log(h)[..., None, :], axis=-1)


def _normalize_log(lv: np.ndarray, where=None) -> np.ndarray:
    """Rows of ``exp(lv)`` normalized; raises on an all-zero row."""
    top = lv.max(axis=-1, keepdims=True)
    bad = ~np.isfinite(top[..., 0])
    if bad.any():
        row = int(np.flatnonzero(bad.ravel())[0])
        edge = where(row) if where else row
        raise DegenerateUpdate(f"zero normalizer on directed edge {edge}", edge=edge)
    p = np.exp(lv - top)
    return p / p.sum(axis=-1, keepdims=True)


@dataclass
class MessageSet:
    h: np.ndarray  # (2m, q), row e is the message along directed edge e
    iteration: int = 0
    change: float = float("inf")


@dataclass
class BPResult:
    messages: MessageSet
    converged: bool
    iterations: int
    residual: float
    vertex_beliefs: np.ndarray
    pair_beliefs: np.ndarray
    bethe_value: float
    damping: float = 0.0

    def to_dict(self, messages: bool = True) -> dict:
        out = {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "damping": self.damping,
            "bethe_value": self.bethe_value,
            "vertex_beliefs": self.vertex_beliefs.tolist(),
            "pair_beliefs": self.pair_beliefs.tolist(),
        }
        if messages:
            out["messages"] = self.messages.h.tolist()
        return out


def _init_messages(graph: FiniteGraph, q: int, init) -> np.ndarray:
    m2 = 2 * graph.n_edges
    if isinstance(init, str):
        init = (init,)
    kind = init[0]
    if kind == "uniform":
        return np.full((m2, q), 1.0 / q)
    if kind == "fixed":
        s = int(init[1])
        if not 0 <= s < q:
            raise InvalidParameter(f"initial spin {s} outside alphabet")
        h = np.zeros((m2, q))
        h[:, s] = 1.0
        return h
    if kind == "random":
        rng = np.random.Generator(np.random.PCG64(int(init[1])))
        x = rng.standard_exponential((m2, q))
        return x / x.sum(axis=1, keepdims=True)
    raise InvalidParameter(f"unknown init {init!r}")


def _excluded_sums(graph: FiniteGraph, m: np.ndarray) -> np.ndarray:
    """For directed edge u->v: sum of m over edges w->u with w != v.

    Infinite entries are counted separately so that -inf is never subtracted.
    """
    n, q = graph.n, m.shape[1]
    neg = np.isneginf(m)
    fin = np.where(neg, 0.0, m)
    tot = np.zeros((n, q))
    cnt = np.zeros((n, q), dtype=np.int64)
    dst = graph.dst
    np.add.at(tot, dst, fin)
    np.add.at(cnt, dst, neg.astype(np.int64))
    src = graph.src
    rev = np.arange(m.shape[0]) ^ 1
    s = tot[src] - fin[rev]
    c = cnt[src] - neg[rev]
    return np.where(c > 0, -np.inf, s)


def _sync_update(graph: FiniteGraph, spec: FactorSpec, h: np.ndarray) -> np.ndarray:
    m = psi_dot(spec.log_psi, h)
    lv = spec.log_psibar[None, :] + _excluded_sums(graph, m)
    return _normalize_log(lv, where=lambda e: (int(graph.src[e]), int(graph.dst[e])))


def _edge_update(graph: FiniteGraph, spec: FactorSpec, h: np.ndarray, e: int) -> np.ndarray:
    u, v = int(graph.src[e]), int(graph.dst[e])
    lv = spec.log_psibar.copy()
    for f in graph.out_edges(u):
        if f != e:
            lv = lv + psi_dot(spec.log_psi, h[f ^ 1])
    return _normalize_log(lv[None, :], where=lambda _: (u, v))[0]


def beliefs(graph: FiniteGraph, spec: FactorSpec, h: np.ndarray):
    """Vertex beliefs, pair beliefs and Bethe value from a message set."""
    n, q = graph.n, spec.q
    m = psi_dot(spec.log_psi, h) if h.size else np.zeros((0, q))
    inc = np.zeros((n, q))
    if h.size:
        np.add.at(inc, graph.dst, m)
    lv = spec.log_psibar[None, :] + inc
    phi_vx = logsumexp(lv, axis=1) if n else np.zeros(0)
    vb = _normalize_log(lv) if n else np.zeros((0, q))
    k = graph.n_edges
    lh = _log(h)
    pair_log = spec.log_psi[None, :, :] + lh[0::2, :, None] + lh[1::2, None, :]
    phi_e = logsumexp(pair_log.reshape(k, -1), axis=1) if k else np.zeros(0)
    pb = np.exp(pair_log - phi_e[:, None, None]) if k else np.zeros((0, q, q))
    value = (float(phi_vx.sum()) - float(phi_e.sum())) / n if n else float("nan")
    return vb, pb, value


def bp_run_graph(
    graph: FiniteGraph,
    spec: FactorSpec,
    init="uniform",
    schedule: str = "synchronous",
    damping: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> BPResult:
    """Iterate the BP recursion to a fixed point.

    ``init`` is ``"uniform"``, ``("fixed", s)`` or ``("random", seed)``.
    Damping 0.5 switches on automatically if the residual rises for
    ``OSCILLATION_RUN`` consecutive sweeps.
    """
    if not 0 <= damping < 1:
        raise InvalidParameter("damping must lie in [0, 1)")
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    if schedule not in ("synchronous", "sequential"):
        raise InvalidParameter(f"unknown schedule {schedule!r}")
    h = _init_messages(graph, spec.q, init)
    residual = 0.0 if h.size == 0 else float("inf")
    rising = 0
    it = 0
    while h.size and it < max_iter:
        it += 1
        old = h.copy()
        if schedule == "synchronous":
            new = _sync_update(graph, spec, h)
            h = (1 - damping) * new + damping * h if damping else new
        else:
            for e in range(h.shape[0]):
                new = _edge_update(graph, spec, h, e)
                h[e] = (1 - damping) * new + damping * h[e] if damping else new
        h /= h.sum(axis=1, keepdims=True)
        prev, residual = residual, float(np.abs(h - old).max())
        if residual < tol:
            break
        rising = rising + 1 if residual > prev else 0
        if rising >= OSCILLATION_RUN and damping == 0:
            damping = AUTO_DAMPING
            rising = 0
    vb, pb, value = beliefs(graph, spec, h)
    return BPResult(
        messages=MessageSet(h, it, residual),
        converged=residual < tol,
        iterations=it,
        residual=residual,
        vertex_beliefs=vb,
        pair_beliefs=pb,
        bethe_value=value,
        damping=damping,
    )


def bp_tree_boundary(tree: RootedTree, spec: FactorSpec, boundary: BoundaryCondition | None = None) -> np.ndarray:
    """Root marginal from one leaf-to-root BP pass with boundary messages injected."""
    boundary = boundary or BoundaryCondition.free()
    local = spec.log_psibar[None, :] + boundary.log_factors(tree, spec)
    up = {}
    levels = tree.levels()
    for level in reversed(levels):
        for v in level:
            lv = local[v].copy()
            for c in tree.children(v):
                lv = lv + psi_dot(spec.log_psi, up[c][None, :])[0]
            up[v] = _normalize_log(lv[None, :], where=lambda _, v=v: (v, tree.parent[v]))[0]
    return up[tree.root]


# --- homogeneous messages on the d-regular tree ---------------------------------


def bp_regular_map(spec: FactorSpec, h: np.ndarray, k: int) -> np.ndarray:
    """One BP step with ``k`` identical incoming messages."""
    lv = spec.log_psibar + k * psi_dot(spec.log_psi, h[None, :])[0] if k else spec.log_psibar.copy()
    return _normalize_log(lv[None, :])[0]


@dataclass
class RegularFixedPoint:
    h: np.ndarray
    converged: bool
    iterations: int
    residual: float
    branch: str
    trace: list = field(default_factory=list, repr=False)


def _hardcore_bisect(lam: float, d: int, tol: float = 1e-15) -> float:
    """Root of u - 1/(1 + lam u^(d-1)) on [0, 1]."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid - 1.0 / (1.0 + lam * mid ** (d - 1)) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bp_fixed_point_regular(
    d: int,
    spec: FactorSpec,
    branch: str = "free",
    tol: float = 1e-13,
    max_iter: int = 100_000,
    record: bool = False,
) -> RegularFixedPoint:
    """Homogeneous BP fixed point on the d-regular tree.

    Potts/Ising/raw: ``free`` iterates from uniform, ``ordered`` from the point
    mass on index 0.  Hard-core: branches ``"0"``/``"1"`` (aliases ``free`` /
    ``ordered``) iterate the double map from an unoccupied / occupied boundary.
    When the two hard-core endpoints differ the returned message is a 2-cycle
    endpoint, not a BP fixed point; ``converged`` refers to the double map.
    """
    if d < 2:
        raise InvalidParameter("need d >= 2")
    k = d - 1
    if spec.model == "hardcore":
        return _hardcore_branch(d, spec, branch, tol, max_iter, record)
    q = spec.q
    if branch == "free":
        h = np.full(q, 1.0 / q)
    elif branch == "ordered":
        h = np.zeros(q)
        h[0] = 1.0
    else:
        raise InvalidParameter(f"unknown branch {branch!r}")
    trace = [h.copy()] if record else []
    residual = float("inf")
    it = 0
    while it < max_iter:
        it += 1
        new = bp_regular_map(spec, h, k)
        residual = float(np.abs(new - h).max())
        h = new
        if record:
            trace.append(h.copy())
        if residual < tol:
            break
    return RegularFixedPoint(h, residual < tol, it, residual, branch, trace)


def _hardcore_branch(d, spec, branch, tol, max_iter, record):
    lam = math.exp(spec.log_psibar[1] - spec.log_psibar[0])
    k = d - 1

    def F(u):
        return 1.0 / (1.0 + lam * u**k)

    alias = {"free": "0", "ordered": "1", "0": "0", "1": "1"}
    if branch not in alias:
        raise InvalidParameter(f"unknown hard-core branch {branch!r}")
    br = alias[branch]
    # boundary spin at even depth: 0 -> unoccupied (u = 1), 1 -> occupied (u = 0)
    u = 1.0 if br == "0" else 0.0
    trace = [u] if record else []
    it = 0
    residual = float("inf")
    while it < max_iter:
        it += 1
        new = F(F(u))
        residual = abs(new - u)
        u = new
        if record:
            trace.append(u)
        if residual < tol:
            break
    converged = residual < tol
    star = _hardcore_bisect(lam, d)
    if converged and abs(F(u) - u) < 1e-9:
        # uniqueness: polish onto the exact root so the BP residual is tiny
        u = star
    h = np.array([u, 1.0 - u])
    return RegularFixedPoint(h, converged, it, abs(F(u) - u), br, trace)


def hardcore_symmetric_fixed_point(d: int, lam: float) -> np.ndarray:
    """The unique solution of u = 1/(1 + lam u^(d-1)), as a message."""
    u = _hardcore_bisect(lam, d)
    return np.array([u, 1.0 - u])
