"""Graph and rooted-tree containers, generators, and neighbourhood balls."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GenerationFailure, InvalidParameter, NotATree, ParseError

MAX_RESTARTS = 10**6


class FiniteGraph:
    """Immutable undirected graph on vertices ``0..n-1``.

    Edge ``k = (u, v)`` yields directed edges ``2k`` (u -> v) and ``2k + 1``
    (v -> u), so the reverse of directed edge ``e`` is ``e ^ 1``.
    """

    def __init__(self, n: int, edges: Iterable[Sequence[int]], allow_multi: bool = False):
        n = int(n)
        if n < 0:
            raise InvalidParameter("vertex count must be nonnegative")
        edge_list = []
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidParameter(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise InvalidParameter(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen and not allow_multi:
                raise InvalidParameter(f"duplicate edge {key}")
            seen.add(key)
            edge_list.append((u, v))
        self._n = n
        self._edges = tuple(edge_list)
        adj = [[] for _ in range(n)]
        out_edges = [[] for _ in range(n)]
        for k, (u, v) in enumerate(edge_list):
            adj[u].append(v)
            adj[v].append(u)
            out_edges[u].append(2 * k)
            out_edges[v].append(2 * k + 1)
        self._adj = tuple(tuple(a) for a in adj)
        self._out = tuple(tuple(o) for o in out_edges)
        src = np.empty(2 * len(edge_list), dtype=np.int64)
        dst = np.empty_like(src)
        for k, (u, v) in enumerate(edge_list):
            src[2 * k], dst[2 * k] = u, v
            src[2 * k + 1], dst[2 * k + 1] = v, u
        src.setflags(write=False)
        dst.setflags(write=False)
        self._src, self._dst = src, dst
        self._index = {(int(a), int(b)): e for e, (a, b) in enumerate(zip(src, dst))}

    @property
    def n(self) -> int:
        return self._n

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    @property
    def src(self) -> np.ndarray:
        """Tail vertex of each directed edge."""
        return self._src

    @property
    def dst(self) -> np.ndarray:
        """Head vertex of each directed edge."""
        return self._dst

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def out_edges(self, v: int) -> tuple[int, ...]:
        """Directed edges ``v -> w``, in the same order as ``neighbors(v)``."""
        return self._out[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=np.int64)

    def directed_index(self, u: int, v: int) -> int:
        return self._index[(u, v)]

    @staticmethod
    def reverse(e: int) -> int:
        return e ^ 1

    def is_forest(self) -> bool:
        parent = list(range(self._n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in self._edges:
            ru, rv = find(u), find(v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True

    def is_connected(self) -> bool:
        if self._n == 0:
            return True
        return len(_bfs_dist(self, 0)) == self._n

    def to_edge_list(self) -> str:
        return "".join(f"{u} {v}\n" for u, v in self._edges)

    def __eq__(self, other):
        if not isinstance(other, FiniteGraph):
            return NotImplemented
        norm = lambda g: sorted((min(e), max(e)) for e in g.edges)  # noqa: E731
        return self._n == other._n and norm(self) == norm(other)

    def __hash__(self):
        return hash((self._n, tuple(sorted((min(e), max(e)) for e in self._edges))))

    def __repr__(self):
        return f"FiniteGraph(n={self._n}, edges={self.n_edges})"


@dataclass(frozen=True, eq=False)
class RootedTree:
    """A finite tree with a root, parent array, and depth.

    ``full_degree`` is the degree every vertex would have in the untruncated
    tree (``d`` for balls in the d-regular tree); it fixes how many phantom
    boundary children a depth-``t`` vertex has.  ``None`` means no phantom
    boundary unless counts are supplied explicitly.
    """

    graph: FiniteGraph
    root: int
    parent: tuple[int, ...]
    depth: int
    full_degree: int | None = None

    @classmethod
    def from_graph(cls, graph: FiniteGraph, root: int = 0, full_degree: int | None = None):
        if not graph.is_forest() or not graph.is_connected():
            raise NotATree("graph is not a tree")
        dist = _bfs_dist(graph, root)
        parent = [-1] * graph.n
        for v in range(graph.n):
            for w in graph.neighbors(v):
                if dist[w] == dist[v] - 1:
                    parent[v] = w
        return cls(graph, root, tuple(parent), max(dist.values(), default=0), full_degree)

    @property
    def n(self) -> int:
        return self.graph.n

    def levels(self) -> list[list[int]]:
        """Vertices grouped by distance from the root."""
        dist = _bfs_dist(self.graph, self.root)
        out = [[] for _ in range(self.depth + 1)]
        for v, dv in sorted(dist.items()):
            out[dv].append(v)
        return out

    def children(self, v: int) -> list[int]:
        return [w for w in self.graph.neighbors(v) if self.parent[w] == v]

    def phantom_counts(self) -> np.ndarray:
        """Number of missing boundary children of each depth-``depth`` vertex."""
        counts = np.zeros(self.n, dtype=np.int64)
        if self.full_degree is None:
            return counts
        for v in self.levels()[self.depth]:
            counts[v] = max(self.full_degree - self.graph.degree(v), 0)
        return counts

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "root": self.root, "parent": list(self.parent)})

    @classmethod
    def from_json(cls, text: str, full_degree: int | None = None) -> "RootedTree":
        data = json.loads(text)
        parent = data["parent"]
        n = int(data.get("n", len(parent)))
        edges = [(v, p) for v, p in enumerate(parent) if p >= 0]
        return cls.from_graph(FiniteGraph(n, edges), int(data.get("root", 0)), full_degree)


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring distribution: ``deterministic``, ``poisson`` or ``explicit`` pmf."""

    kind: str
    value: float | tuple[float, ...]

    def __post_init__(self):
        if self.kind == "deterministic":
            if int(self.value) != self.value or self.value < 0:
                raise InvalidParameter("deterministic law needs a nonnegative integer")
        elif self.kind == "poisson":
            if not self.value >= 0:
                raise InvalidParameter("Poisson mean must be nonnegative")
        elif self.kind == "explicit":
            pmf = np.asarray(self.value, dtype=float)
            if (pmf < 0).any() or abs(pmf.sum() - 1.0) > 1e-12:
                raise InvalidParameter("pmf must be nonnegative and sum to 1")
            object.__setattr__(self, "value", tuple(float(p) for p in pmf))
        else:
            raise InvalidParameter(f"unknown offspring law {self.kind!r}")

    @classmethod
    def deterministic(cls, k: int) -> "OffspringLaw":
        return cls("deterministic", int(k))

    @classmethod
    def poisson(cls, mean: float) -> "OffspringLaw":
        return cls("poisson", float(mean))

    @classmethod
    def explicit(cls, pmf: Sequence[float]) -> "OffspringLaw":
        return cls("explicit", tuple(pmf))

    def pmf(self) -> np.ndarray:
        """Probability mass on ``0..K`` (Poisson truncated at its inversion cutoff)."""
        if self.kind == "deterministic":
            p = np.zeros(int(self.value) + 1)
            p[-1] = 1.0
            return p
        if self.kind == "explicit":
            return np.array(self.value)
        mean = float(self.value)
        kmax = poisson_cutoff(mean)
        k = np.arange(kmax + 1)
        logp = -mean + k * (math.log(mean) if mean > 0 else 0.0) - np.array([math.lgamma(i + 1) for i in k])
        if mean == 0:
            logp = np.where(k == 0, 0.0, -np.inf)
        return np.exp(logp)

    def mean(self) -> float:
        if self.kind == "poisson":
            return float(self.value)
        p = self.pmf()
        return float(np.dot(np.arange(p.size), p))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self.kind == "deterministic":
            k = int(self.value)
            return k if size is None else np.full(size, k, dtype=np.int64)
        cdf = np.cumsum(self.pmf())
        cdf[-1] = 1.0
        u = rng.random(size)
        out = np.searchsorted(cdf, u, side="right")
        return int(out) if size is None else out.astype(np.int64)


def poisson_cutoff(mean: float) -> int:
    return int(math.ceil(mean + 12.0 * math.sqrt(mean) + 20))


def graph_from_edge_list(text: str) -> FiniteGraph:
    """Parse ``"u v"`` lines; blank lines and ``#`` comments are ignored."""
    pairs = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected two vertex ids, got {raw!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer vertex id in {raw!r}", lineno) from None
        if u < 0 or v < 0:
            raise ParseError("vertex ids must be nonnegative", lineno)
        if u == v:
            raise ParseError(f"self-loop at vertex {u}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ParseError(f"duplicate edge {u} {v}", lineno)
        seen.add(key)
        pairs.append((u, v))
    n = 1 + max((max(p) for p in pairs), default=-1)
    return FiniteGraph(n, pairs)


def path_graph(n: int) -> FiniteGraph:
    return FiniteGraph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> FiniteGraph:
    if n < 3:
        raise InvalidParameter("a simple cycle needs n >= 3")
    return FiniteGraph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> FiniteGraph:
    return FiniteGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(leaves: int) -> FiniteGraph:
    return FiniteGraph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def gen_random_regular(n: int, d: int, seed: int) -> FiniteGraph:
    """Uniform-ish simple d-regular graph by the configuration model.

    Any matching with a self-loop or multi-edge is discarded and the whole
    matching is redrawn.
    """
    if n < 1 or d < 0:
        raise InvalidParameter("need n >= 1 and d >= 0")
    if (n * d) % 2:
        raise InvalidParameter(f"n*d must be even (n={n}, d={d})")
    if d >= n:
        raise InvalidParameter(f"need d < n (n={n}, d={d})")
    rng = np.random.Generator(np.random.PCG64(seed))
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(MAX_RESTARTS):
        perm = rng.permutation(stubs)
        a, b = perm[0::2], perm[1::2]
        if np.any(a == b):
            continue
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo * n + hi
        if np.unique(keys).size != keys.size:
            continue
        order = np.argsort(keys, kind="stable")
        return FiniteGraph(n, zip(lo[order].tolist(), hi[order].tolist()))
    raise GenerationFailure(f"no simple {d}-regular graph on {n} vertices after {MAX_RESTARTS} restarts")


def gen_tree(kind, depth: int, seed: int = 0) -> RootedTree:
    """Regular tree ball (``kind=("regular", d)``) or Galton-Watson tree
    (``kind=("galton_watson", OffspringLaw)``), truncated at ``depth``.

    The root of a Galton-Watson tree uses the plain offspring law.
    """
    if depth < 0:
        raise InvalidParameter("depth must be nonnegative")
    name, arg = kind
    rng = np.random.Generator(np.random.PCG64(seed))
    if name == "regular":
        d = int(arg)
        counts = lambda level: d if level == 0 else max(d - 1, 0)  # noqa: E731
        full = d
    elif name == "galton_watson":
        law = arg if isinstance(arg, OffspringLaw) else OffspringLaw(*arg)
        counts = lambda level: law.sample(rng)  # noqa: E731
        full = None
    else:
        raise InvalidParameter(f"unknown tree kind {name!r}")
    parent = [-1]
    frontier = [0]
    reached = 0
    for level in range(depth):
        nxt = []
        for v in frontier:
            for _ in range(counts(level)):
                parent.append(v)
                nxt.append(len(parent) - 1)
        if not nxt:
            break
        reached = level + 1
        frontier = nxt
    edges = [(v, p) for v, p in enumerate(parent) if p >= 0]
    g = FiniteGraph(len(parent), edges)
    if name == "regular":
        # vertices at the truncation depth are the ones that get phantom children
        return RootedTree(g, 0, tuple(parent), depth if reached == depth else reached, full)
    return RootedTree(g, 0, tuple(parent), reached, full)


def _bfs_dist(graph: FiniteGraph, v: int, limit: int | None = None) -> dict[int, int]:
    dist = {v: 0}
    queue = deque([v])
    while queue:
        x = queue.popleft()
        if limit is not None and dist[x] >= limit:
            continue
        for w in graph.neighbors(x):
            if w not in dist:
                dist[w] = dist[x] + 1
                queue.append(w)
    return dist


def neighborhood(graph: FiniteGraph, v: int, t: int) -> tuple[FiniteGraph, bool]:
    """Induced ball of radius ``t`` around ``v``, relabelled with ``v`` as vertex 0."""
    if not 0 <= v < graph.n:
        raise InvalidParameter(f"vertex {v} out of range")
    if t < 0:
        raise InvalidParameter("radius must be nonnegative")
    dist = _bfs_dist(graph, v, limit=t)
    order = sorted(dist, key=lambda x: (dist[x], x))
    label = {x: i for i, x in enumerate(order)}
    edges = [(label[a], label[b]) for a, b in graph.edges if a in label and b in label]
    ball = FiniteGraph(len(order), edges)
    return ball, ball.n_edges == ball.n - 1


def tree_fraction(graph: FiniteGraph, t: int) -> float:
    """Fraction of vertices whose radius-``t`` ball is a tree."""
    if graph.n == 0:
        return 1.0
    return sum(neighborhood(graph, v, t)[1] for v in range(graph.n)) / graph.n
