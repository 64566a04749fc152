"""Exact partition functions and marginals.

Four independent routes: brute-force enumeration, leaf-to-root dynamic
programming on trees, the random-cluster subset sum (Potts, zero field), and
the transfer matrix of the infinite line.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateMeasure, InvalidParameter, NotATree, ReducibleMatrix, TooLarge
from .factor_spec import FactorSpec, validate_permissive
from .graphs import FiniteGraph, RootedTree

MAX_STATES = 10**8
MAX_RC_EDGES = 30
CHUNK = 1 << 17


@dataclass
class ExactResult:
    log_z: float
    vertex_marginals: np.ndarray | None = None
    edge_marginals: np.ndarray | None = None
    n: int = 0

    @property
    def free_energy_density(self) -> float:
        return self.log_z / self.n if self.n else float("nan")

    def to_dict(self, marginals: bool = False) -> dict:
        out = {"log_z": self.log_z, "fed": self.free_energy_density, "n": self.n}
        if marginals and self.vertex_marginals is not None:
            out["vertex_marginals"] = self.vertex_marginals.tolist()
            out["edge_marginals"] = self.edge_marginals.tolist()
        return out


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary spins on the phantom children just below a truncated tree.

    ``free`` adds nothing (the bare tree); ``fixed`` pins every phantom child to
    ``sigma``; ``message`` draws each phantom child independently from the
    vector ``message`` (uniform gives the classical free boundary).
    ``counts`` overrides the tree's own phantom-child counts.
    """

    kind: str = "free"
    sigma: int | None = None
    message: tuple[float, ...] | None = None
    counts: Mapping[int, int] | None = None

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def fixed(cls, sigma: int, counts=None):
        return cls("fixed", sigma=int(sigma), counts=counts)

    @classmethod
    def from_message(cls, h, counts=None):
        return cls("message", message=tuple(float(x) for x in h), counts=counts)

    def log_factors(self, tree: RootedTree, spec: FactorSpec) -> np.ndarray:
        """Per-vertex log boundary weight, shape ``(n, q)``."""
        out = np.zeros((tree.n, spec.q))
        if self.kind == "free":
            return out
        if self.counts is not None:
            counts = np.zeros(tree.n, dtype=np.int64)
            for v, c in self.counts.items():
                counts[v] = c
        else:
            counts = tree.phantom_counts()
        if self.kind == "fixed":
            if not 0 <= self.sigma < spec.q:
                raise InvalidParameter(f"boundary spin {self.sigma} outside alphabet of size {spec.q}")
            col = spec.log_psi[:, self.sigma]
        elif self.kind == "message":
            h = np.asarray(self.message)
            if h.shape != (spec.q,) or (h < 0).any() or abs(h.sum() - 1) > 1e-12:
                raise InvalidParameter("boundary message must lie in the simplex")
            with np.errstate(divide="ignore"):
                col = logsumexp(spec.log_psi + np.log(h)[None, :], axis=1)
        else:
            raise InvalidParameter(f"unknown boundary kind {self.kind!r}")
        for v in np.flatnonzero(counts):
            out[v] = counts[v] * col
        return out


def _pairwise_logaddexp(values):
    vals = list(values)
    if not vals:
        return -np.inf
    while len(vals) > 1:
        nxt = [np.logaddexp(vals[i], vals[i + 1]) for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return float(vals[0])


def _configs(n: int, q: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((idx.size, n), dtype=np.int64)
    for v in range(n - 1, -1, -1):
        out[:, v] = idx % q
        idx //= q
    return out


def _log_weights(graph: FiniteGraph, spec: FactorSpec, s: np.ndarray) -> np.ndarray:
    w = spec.log_psibar[s].sum(axis=1)
    for u, v in graph.edges:
        w = w + spec.log_psi[s[:, u], s[:, v]]
    return w


def exact_log_z(graph: FiniteGraph, spec: FactorSpec, marginals: bool = True) -> ExactResult:
    """Enumerate all ``q**n`` configurations."""
    n, q = graph.n, spec.q
    total = q**n
    if total > MAX_STATES:
        raise TooLarge(f"q**n = {total} exceeds the enumeration guard {MAX_STATES}")
    chunks = range(0, total, CHUNK)
    partial = []
    for start in chunks:
        w = _log_weights(graph, spec, _configs(n, q, start, min(start + CHUNK, total)))
        m = w.max()
        partial.append(-np.inf if m == -np.inf else m + math.log(np.exp(w - m).sum()))
    log_z = _pairwise_logaddexp(partial)
    res = ExactResult(log_z=log_z, n=n)
    if not marginals:
        return res
    if log_z == -np.inf:
        raise DegenerateMeasure("Z = 0; marginals are undefined")
    vm = np.zeros((n, q))
    em = np.zeros((graph.n_edges, q * q))
    for start in chunks:
        s = _configs(n, q, start, min(start + CHUNK, total))
        p = np.exp(_log_weights(graph, spec, s) - log_z)
        for v in range(n):
            vm[v] += np.bincount(s[:, v], weights=p, minlength=q)
        for k, (u, v) in enumerate(graph.edges):
            em[k] += np.bincount(s[:, u] * q + s[:, v], weights=p, minlength=q * q)
    res.vertex_marginals = vm / vm.sum(axis=1, keepdims=True)
    em = em.reshape(-1, q, q)
    res.edge_marginals = em / em.sum(axis=(1, 2), keepdims=True)
    return res


def _msg(log_psi: np.ndarray, log_vec: np.ndarray) -> np.ndarray:
    """log sum_{s'} psi(s, s') exp(log_vec(s'))."""
    return logsumexp(log_psi + log_vec[None, :], axis=1)


def tree_log_z(tree: RootedTree, spec: FactorSpec, boundary: BoundaryCondition | None = None) -> ExactResult:
    """Exact log Z and all marginals on a tree by upward/downward passes."""
    g = tree.graph
    if not g.is_forest() or not g.is_connected():
        raise NotATree("tree_log_z needs a connected acyclic graph")
    boundary = boundary or BoundaryCondition.free()
    lp = spec.log_psi
    local = spec.log_psibar[None, :] + boundary.log_factors(tree, spec)
    order = [v for level in tree.levels() for v in level]
    children = {v: tree.children(v) for v in order}
    up = {}
    inner = {}
    for v in reversed(order):
        acc = local[v].copy()
        for c in children[v]:
            acc = acc + up[c]
        inner[v] = acc
        if tree.parent[v] >= 0:
            up[v] = _msg(lp, acc)
    root = tree.root
    log_z = float(logsumexp(inner[root]))
    if log_z == -np.inf:
        raise DegenerateMeasure("Z = 0 on this tree")
    down = {root: np.zeros(spec.q)}
    cavity = {}
    full = {}
    for v in order:
        full[v] = inner[v] + down[v]
        for c in children[v]:
            # cavity field at v without child c, summed explicitly so that -inf never cancels
            cav = local[v] + down[v]
            for c2 in children[v]:
                if c2 != c:
                    cav = cav + up[c2]
            cavity[c] = cav
            down[c] = _msg(lp, cav)
    vm = np.exp(np.array([full[v] - logsumexp(full[v]) for v in range(tree.n)]))
    em = np.zeros((g.n_edges, spec.q, spec.q))
    for k, (a, b) in enumerate(g.edges):
        p, c = (a, b) if tree.parent[b] == a else (b, a)
        joint = cavity[c][:, None] + lp + inner[c][None, :]
        joint = np.exp(joint - logsumexp(joint))
        em[k] = joint if (a, b) == (p, c) else joint.T
    return ExactResult(log_z=log_z, vertex_marginals=vm, edge_marginals=em, n=tree.n)


def rc_log_z(graph: FiniteGraph, q: int, beta: float) -> float:
    """log of sum over edge subsets F of (e^beta - 1)^|F| q^k(F)."""
    m = graph.n_edges
    if m > MAX_RC_EDGES:
        raise TooLarge(f"{m} edges exceeds the subset-sum guard {MAX_RC_EDGES}")
    if beta < 0:
        raise InvalidParameter("random-cluster weights need beta >= 0")
    counts: Counter = Counter()
    edges = graph.edges
    for mask in range(1 << m):
        parent = list(range(graph.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        comps = graph.n
        size = 0
        for k in range(m):
            if mask >> k & 1:
                size += 1
                ru, rv = find(edges[k][0]), find(edges[k][1])
                if ru != rv:
                    parent[ru] = rv
                    comps -= 1
        counts[size, comps] += 1
    log_p = math.log(math.expm1(beta)) if beta > 0 else -math.inf
    terms = []
    for (size, comps), c in sorted(counts.items()):
        if size and log_p == -math.inf:
            continue
        terms.append(math.log(c) + size * (log_p if size else 0.0) + comps * math.log(q))
    return float(logsumexp(terms))


def _is_irreducible(a: np.ndarray) -> bool:
    q = a.shape[0]
    reach = (a > 0) | np.eye(q, dtype=bool)
    for _ in range(max(q - 1, 1).bit_length() + 1):
        reach = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
    return bool(reach.all())


def transfer_matrix_rate(spec: FactorSpec, tol: float = 1e-13):
    """Perron-Frobenius rate of the line.

    Returns ``(log_rho, pair_belief, m)`` where ``m`` is the unit-norm positive
    eigenvector of ``psi(s, s') * sqrt(psibar(s) psibar(s'))``.
    """
    half = 0.5 * spec.log_psibar
    tilde = np.exp(spec.log_psi + half[:, None] + half[None, :])
    if not _is_irreducible(tilde):
        raise ReducibleMatrix("weighted edge matrix is reducible")
    if not validate_permissive(spec).permissive:
        raise InvalidParameter("transfer matrix needs a permissive specification")
    # the shift by the identity makes the top eigenvalue strictly dominant
    shifted = tilde + np.eye(spec.q) * tilde.max()
    m = np.full(spec.q, 1.0 / math.sqrt(spec.q))
    power = shifted / np.abs(shifted).max()
    for _ in range(200):
        new = power @ m
        new /= np.linalg.norm(new)
        change = np.abs(new - m).max() / np.abs(new).max()
        m = new
        if change < tol:
            break
        power = power @ power
        power /= np.abs(power).max()
    for _ in range(5):
        new = shifted @ m
        m = new / np.linalg.norm(new)
    rho = float(m @ tilde @ m)
    pair = tilde * np.outer(m, m) / rho
    return math.log(rho), pair, m
