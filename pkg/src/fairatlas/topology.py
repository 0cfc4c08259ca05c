"""Graph construction, ingestion, reduction, and the all-pairs hop-count histogram.

The hop-count histogram (one row per distinct shortest-path cost, counted over
ordered node pairs) is the sufficient statistic for every metric downstream:
nothing after this module ever needs the graph itself.

Random generators use numpy's Philox engine, a counter-based 64-bit generator,
so a given (kind, parameters, seed) triple reproduces the same graph on any
platform.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import (
    ConnectivityError,
    DegenerateGraphError,
    EmptyCoreError,
    ParameterError,
    ParseError,
)

log = logging.getLogger(__name__)

RANDOM_KINDS = ("er", "ba", "ws")
KINDS = ("complete", "path", "star", "grid") + RANDOM_KINDS


def _rng(seed: int) -> np.random.Generator:
    """Counter-based PRNG (Philox) so seeds reproduce across builds."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected simple graph with internal ids 0..N-1 and external labels.

    ``neighbors[u]`` is the sorted tuple of internal neighbor ids of ``u``;
    ``labels[u]`` is the external id (e.g. an AS number) carried through
    loading and reduction.  Instances are immutable and validated on
    construction.
    """

    neighbors: tuple[tuple[int, ...], ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        n = len(self.neighbors)
        if n < 2:
            raise DegenerateGraphError(f"graph needs at least 2 nodes, got {n}")
        if len(self.labels) != n:
            raise ParameterError("labels length must equal node count")
        if len(set(self.labels)) != n:
            raise ParameterError("labels must be unique")
        deg = np.fromiter((len(row) for row in self.neighbors), dtype=np.int64, count=n)
        flat = np.fromiter(
            (w for row in self.neighbors for w in row), dtype=np.int64, count=int(deg.sum())
        )
        if flat.size:
            if flat.min() < 0 or flat.max() >= n:
                raise ParameterError("neighbor id out of range")
            u_rep = np.repeat(np.arange(n), deg)
            if (flat == u_rep).any():
                raise ParameterError("self-loops are not allowed")
            # sorted, duplicate-free rows: consecutive entries within a row increase
            boundary = np.zeros(flat.size, dtype=bool)
            boundary[np.cumsum(deg)[:-1]] = True
            d = np.diff(flat)
            if not (d[~boundary[1:]] > 0).all():
                raise ParameterError("neighbor lists must be sorted and duplicate-free")
            # symmetry: the directed edge multiset equals its transpose
            fwd = np.lexsort((flat, u_rep))
            rev = np.lexsort((u_rep, flat))
            if not (
                np.array_equal(u_rep[fwd], flat[rev]) and np.array_equal(flat[fwd], u_rep[rev])
            ):
                raise ParameterError("adjacency is not symmetric")

    @property
    def node_count(self) -> int:
        return len(self.neighbors)

    @property
    def edge_count(self) -> int:
        return sum(len(row) for row in self.neighbors) // 2

    def degree(self, v: int) -> int:
        return len(self.neighbors[v])

    def edges(self):
        """Yield internal-id edges (u, v) with u < v."""
        for u, row in enumerate(self.neighbors):
            for v in row:
                if u < v:
                    yield u, v

    def label_edges(self):
        """Yield external-label edges, each with the smaller label first."""
        for u, v in self.edges():
            a, b = self.labels[u], self.labels[v]
            yield (a, b) if a <= b else (b, a)


def _from_label_edges(edge_set: set[tuple[int, int]], labels: set[int]) -> Topology:
    """Build a Topology from undirected label pairs; ids follow sorted label order."""
    ordered = sorted(labels)
    if len(ordered) < 2:
        raise DegenerateGraphError(f"graph needs at least 2 nodes, got {len(ordered)}")
    index = {lab: i for i, lab in enumerate(ordered)}
    adj: list[list[int]] = [[] for _ in ordered]
    for a, b in edge_set:
        u, v = index[a], index[b]
        adj[u].append(v)
        adj[v].append(u)
    return Topology(
        neighbors=tuple(tuple(sorted(row)) for row in adj),
        labels=tuple(ordered),
    )


def _from_internal_edges(n: int, edges: np.ndarray) -> Topology:
    """Build a Topology on labels 0..n-1 from an (E, 2) array of unique u<v pairs."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[int(u)].append(int(v))
        adj[int(v)].append(int(u))
    return Topology(
        neighbors=tuple(tuple(sorted(row)) for row in adj),
        labels=tuple(range(n)),
    )


@dataclass(frozen=True)
class TopologySpec:
    """Recipe for a generated graph.

    ``kind`` is one of complete/path/star/grid/er/ba/ws.  ``seed`` matters
    only for the random kinds and must fit in 64 unsigned bits.
    """

    kind: str
    n: int = 0
    rows: int = 0
    cols: int = 0
    p: float = 0.0
    m: int = 0
    k: int = 0
    beta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown topology kind {self.kind!r}")
        if not (0 <= self.seed < 2**64):
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if self.kind == "grid":
            if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2:
                raise ParameterError("grid needs rows, cols >= 1 and at least 2 nodes")
            return
        if self.n < 2:
            raise ParameterError(f"{self.kind} needs n >= 2")
        if self.kind == "er" and not (0.0 <= self.p <= 1.0):
            raise ParameterError("er needs 0 <= p <= 1")
        if self.kind == "ba" and not (1 <= self.m < self.n):
            raise ParameterError("ba needs 1 <= m < n")
        if self.kind == "ws":
            if self.k % 2 != 0 or not (2 <= self.k < self.n):
                raise ParameterError("ws needs even k with 2 <= k < n")
            if not (0.0 <= self.beta <= 1.0):
                raise ParameterError("ws needs 0 <= beta <= 1")

    # concise constructors, mirroring the CLI flags
    @classmethod
    def complete(cls, n: int) -> "TopologySpec":
        return cls(kind="complete", n=n)

    @classmethod
    def path(cls, n: int) -> "TopologySpec":
        return cls(kind="path", n=n)

    @classmethod
    def star(cls, n: int) -> "TopologySpec":
        return cls(kind="star", n=n)

    @classmethod
    def grid(cls, rows: int, cols: int) -> "TopologySpec":
        return cls(kind="grid", rows=rows, cols=cols)

    @classmethod
    def er(cls, n: int, p: float, seed: int = 0) -> "TopologySpec":
        return cls(kind="er", n=n, p=p, seed=seed)

    @classmethod
    def ba(cls, n: int, m: int, seed: int = 0) -> "TopologySpec":
        return cls(kind="ba", n=n, m=m, seed=seed)

    @classmethod
    def ws(cls, n: int, k: int, beta: float, seed: int = 0) -> "TopologySpec":
        return cls(kind="ws", n=n, k=k, beta=beta, seed=seed)


def generate(spec: TopologySpec) -> Topology:
    """Materialize a TopologySpec.

    Deterministic kinds ignore the seed; er/ba/ws are reproducible functions
    of (parameters, seed).
    """
    if spec.kind == "complete":
        iu = np.stack(np.triu_indices(spec.n, k=1), axis=1)
        return _from_internal_edges(spec.n, iu)
    if spec.kind == "path":
        e = np.stack([np.arange(spec.n - 1), np.arange(1, spec.n)], axis=1)
        return _from_internal_edges(spec.n, e)
    if spec.kind == "star":
        e = np.stack([np.zeros(spec.n - 1, dtype=np.int64), np.arange(1, spec.n)], axis=1)
        return _from_internal_edges(spec.n, e)
    if spec.kind == "grid":
        return _gen_grid(spec.rows, spec.cols)
    rng = _rng(spec.seed)
    if spec.kind == "er":
        u, v = np.triu_indices(spec.n, k=1)
        mask = rng.random(u.size) < spec.p
        return _from_internal_edges(spec.n, np.stack([u[mask], v[mask]], axis=1))
    if spec.kind == "ba":
        return _gen_ba(spec.n, spec.m, rng)
    return _gen_ws(spec.n, spec.k, spec.beta, rng)


def _gen_grid(rows: int, cols: int) -> Topology:
    def nid(r, c):
        return r * cols + c

    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((nid(r, c), nid(r, c + 1)))
            if r + 1 < rows:
                edges.append((nid(r, c), nid(r + 1, c)))
    return _from_internal_edges(rows * cols, np.array(edges, dtype=np.int64))


def _gen_ba(n: int, m: int, rng: np.random.Generator) -> Topology:
    """Preferential attachment: each arriving node draws m distinct targets
    with probability proportional to degree, resampling repeats to keep the
    graph simple.  The first arriving node attaches to all m seed nodes."""
    src: list[int] = []
    dst: list[int] = []
    repeated = np.empty(2 * max(n - m, 1) * m, dtype=np.int64)
    rlen = 0
    targets = np.arange(m, dtype=np.int64)
    for v in range(m, n):
        for t in targets:
            src.append(v)
            dst.append(int(t))
        repeated[rlen : rlen + targets.size] = targets
        rlen += targets.size
        repeated[rlen : rlen + targets.size] = v
        rlen += targets.size
        if v + 1 == n:
            break
        picked: set[int] = set()
        while len(picked) < m:
            for i in rng.integers(0, rlen, size=m):
                picked.add(int(repeated[i]))
                if len(picked) == m:
                    break
        targets = np.fromiter(picked, dtype=np.int64, count=m)
    edges = np.stack(
        [np.minimum(src, dst), np.maximum(src, dst)], axis=1
    )
    return _from_internal_edges(n, np.unique(edges, axis=0))


def _gen_ws(n: int, k: int, beta: float, rng: np.random.Generator) -> Topology:
    """Ring lattice with k/2 neighbors per side, then independent rewiring of
    each lattice edge with probability beta, avoiding self-loops and
    duplicates.  A node already adjacent to everything keeps its edge."""
    half = k // 2
    adj: list[set[int]] = [set() for _ in range(n)]
    for j in range(1, half + 1):
        for u in range(n):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, half + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= beta:
                continue
            if len(adj[u]) >= n - 1:
                continue
            w = int(rng.integers(n))
            while w == u or w in adj[u]:
                w = int(rng.integers(n))
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    return Topology(
        neighbors=tuple(tuple(sorted(row)) for row in adj),
        labels=tuple(range(n)),
    )


def _iter_text_lines(source) -> list[str]:
    """Accept str, bytes, or a file-like object; split on LF or CRLF."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    return text.splitlines()


def _collect_edges(pairs) -> Topology:
    """Shared dedup/self-loop policy for both text loaders."""
    edge_set: set[tuple[int, int]] = set()
    labels: set[int] = set()
    duplicates = 0
    self_loops = 0
    for u, v in pairs:
        labels.add(u)
        labels.add(v)
        if u == v:
            self_loops += 1
            continue
        key = (u, v) if u < v else (v, u)
        if key in edge_set:
            duplicates += 1
        else:
            edge_set.add(key)
    if duplicates or self_loops:
        log.warning(
            "dropped %d duplicate edge(s) and %d self-loop(s)", duplicates, self_loops
        )
    return _from_label_edges(edge_set, labels)


def load_edge_list(source) -> Topology:
    """Parse whitespace-separated "u v" lines into a graph.

    Lines starting with '#' and blank lines are ignored.  Duplicate edges and
    self-loops are dropped (counts go to the module logger).  Node labels are
    the integer tokens from the file.
    """

    def pairs():
        for lineno, raw in enumerate(_iter_text_lines(source), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise ParseError(f"expected 'u v', got {line!r}", lineno)
            try:
                yield int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ParseError(f"non-numeric token in {line!r}", lineno) from None

    return _collect_edges(pairs())


def load_caida(source) -> Topology:
    """Parse CAIDA AS-relationship lines "as1|as2|rel[|...]" into a graph.

    The relationship field (and any extra fields) is ignored; edges are
    undirected and duplicates are merged.  '#' comment lines are skipped.
    """

    def pairs():
        for lineno, raw in enumerate(_iter_text_lines(source), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("|")
            if len(fields) < 2:
                raise ParseError(f"expected 'as1|as2[|rel]', got {line!r}", lineno)
            try:
                yield int(fields[0]), int(fields[1])
            except ValueError:
                raise ParseError(f"non-numeric AS number in {line!r}", lineno) from None

    return _collect_edges(pairs())


def write_edge_list(g: Topology, stream) -> None:
    """Write "u v" label lines, sorted, suitable for load_edge_list."""
    for a, b in sorted(g.label_edges()):
        stream.write(f"{a} {b}\n")


def _to_csr(g: Topology) -> csr_matrix:
    n = g.node_count
    deg = np.fromiter((len(row) for row in g.neighbors), dtype=np.int64, count=n)
    indices = np.fromiter(
        (w for row in g.neighbors for w in row), dtype=np.int64, count=int(deg.sum())
    )
    indptr = np.concatenate([[0], np.cumsum(deg)])
    data = np.ones(indices.size, dtype=np.int8)
    return csr_matrix((data, indices, indptr), shape=(n, n))


def _induced_subgraph(g: Topology, keep: np.ndarray) -> Topology:
    """Subgraph on the given internal ids; new ids follow sorted label order."""
    order = sorted(keep.tolist(), key=lambda i: g.labels[i])
    remap = {old: new for new, old in enumerate(order)}
    adj: list[list[int]] = [[] for _ in order]
    for old in order:
        u = remap[old]
        for w in g.neighbors[old]:
            if w in remap:
                adj[u].append(remap[w])
    return Topology(
        neighbors=tuple(tuple(sorted(row)) for row in adj),
        labels=tuple(g.labels[i] for i in order),
    )


def largest_component(g: Topology) -> Topology:
    """Largest connected component; ties go to the component whose minimum
    external label is smallest.  Internal ids are re-compacted, labels kept."""
    ncomp, comp = connected_components(_to_csr(g), directed=False)
    if ncomp == 1:
        return g
    sizes = np.bincount(comp)
    best_size = sizes.max()
    best = None
    best_key = None
    for c in np.nonzero(sizes == best_size)[0]:
        members = np.nonzero(comp == c)[0]
        key = min(g.labels[i] for i in members)
        if best_key is None or key < best_key:
            best_key = key
            best = members
    return _induced_subgraph(g, best)


def k_core(g: Topology, k: int) -> Topology:
    """Maximal subgraph with every internal degree >= k, by iterative peeling.

    Raises EmptyCoreError when peeling removes everything.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    n = g.node_count
    deg = np.fromiter((len(row) for row in g.neighbors), dtype=np.int64, count=n)
    alive = np.ones(n, dtype=bool)
    stack = list(np.nonzero(deg < k)[0])
    while stack:
        v = stack.pop()
        if not alive[v]:
            continue
        alive[v] = False
        for w in g.neighbors[v]:
            if alive[w]:
                deg[w] -= 1
                if deg[w] == k - 1:
                    stack.append(w)
    survivors = np.nonzero(alive)[0]
    if survivors.size == 0:
        raise EmptyCoreError(f"{k}-core is empty")
    if survivors.size == n:
        return g
    return _induced_subgraph(g, survivors)


@dataclass(frozen=True, eq=False)
class CostHistogram:
    """Multiset {cost -> ordered-pair count} of all-pairs shortest-path costs.

    Costs are reals (so affine transforms of hop counts stay expressible),
    strictly increasing and positive; counts are positive integers.  The pair
    total M is the ordered-pair count N(N-1) when built from a connected graph.
    """

    costs: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        costs = np.array(self.costs, dtype=float)
        counts = np.array(self.counts, dtype=np.int64)
        if costs.ndim != 1 or counts.ndim != 1 or costs.size != counts.size:
            raise ParameterError("costs and counts must be 1-D and equally long")
        if costs.size < 1:
            raise ParameterError("histogram needs at least one class")
        if not (np.diff(costs) > 0).all():
            raise ParameterError("costs must be strictly increasing")
        if costs[0] <= 0:
            raise ParameterError("costs must be positive")
        if (counts < 1).any():
            raise ParameterError("counts must be >= 1")
        if counts.sum() < 2:
            raise ParameterError("histogram needs pair total M >= 2")
        costs.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_pairs(cls, pairs) -> "CostHistogram":
        pairs = sorted(pairs)
        return cls(
            costs=np.array([c for c, _ in pairs], dtype=float),
            counts=np.array([k for _, k in pairs], dtype=np.int64),
        )

    @property
    def pair_total(self) -> int:
        return int(self.counts.sum())

    @property
    def classes(self) -> tuple[tuple[float, int], ...]:
        return tuple((float(c), int(k)) for c, k in zip(self.costs, self.counts))

    def __eq__(self, other):
        return (
            isinstance(other, CostHistogram)
            and np.array_equal(self.costs, other.costs)
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(frozen=True)
class Moments:
    """Count-weighted moments of the cost distribution over ordered pairs."""

    mean: float
    variance: float
    m3: float  # E[|h - mean|^3]
    m4: float  # E[|h - mean|^4]


def hop_histogram(g: Topology, workers: int = 1) -> CostHistogram:
    """All-pairs shortest-path cost histogram by per-source BFS.

    Requires a connected graph (apply largest_component first otherwise);
    counts cover all N(N-1) ordered pairs.  ``workers`` only changes the
    execution schedule: per-chunk counts are summed, so the result is
    identical for any degree of parallelism.
    """
    csr = _to_csr(g)
    n = g.node_count
    ncomp, comp = connected_components(csr, directed=False)
    if ncomp > 1:
        u = int(np.nonzero(comp == comp[0])[0][0])
        v = int(np.nonzero(comp != comp[0])[0][0])
        raise ConnectivityError(
            f"graph is disconnected: no path between nodes {g.labels[u]} and {g.labels[v]}"
        )
    chunk = max(1, min(n, 4_000_000 // n))
    starts = range(0, n, chunk)

    def bfs_counts(lo: int) -> np.ndarray:
        idx = np.arange(lo, min(lo + chunk, n))
        dist = dijkstra(csr, directed=False, unweighted=True, indices=idx)
        return np.bincount(dist.astype(np.int64).ravel())

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partial = list(pool.map(bfs_counts, starts))
    else:
        partial = [bfs_counts(lo) for lo in starts]
    width = max(p.size for p in partial)
    counts = np.zeros(width, dtype=np.int64)
    for p in partial:
        counts[: p.size] += p
    counts[0] = 0  # the n diagonal zeros
    nz = np.nonzero(counts)[0]
    hist = CostHistogram(costs=nz.astype(float), counts=counts[nz])
    assert hist.pair_total == n * (n - 1)
    return hist


def moments(h: CostHistogram) -> Moments:
    """Exact count-weighted mean, variance, and absolute central moments."""
    m = h.pair_total
    mean = float((h.counts * h.costs).sum() / m)
    dev = h.costs - mean
    variance = float((h.counts * dev**2).sum() / m)
    m3 = float((h.counts * np.abs(dev) ** 3).sum() / m)
    m4 = float((h.counts * dev**4).sum() / m)
    return Moments(mean=mean, variance=variance, m3=m3, m4=m4)


def cumulative_count(h: CostHistogram, h0: float) -> int:
    """Number of ordered pairs with cost strictly below h0."""
    idx = int(np.searchsorted(h.costs, h0, side="left"))
    return int(h.counts[:idx].sum())
