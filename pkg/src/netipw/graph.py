"""Observed-network representation and analysis.

Nodes are opaque string identifiers mapped to dense integer indices in
first-appearance order.  Graphs are undirected, simple (no self-loops,
parallel edges collapsed) and immutable once constructed, so they are safe
to share across concurrent workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import GraphInputError

__all__ = [
    "Network",
    "ComponentPartition",
    "NetworkStats",
    "load_network",
    "read_edge_csv",
    "components",
    "fast_greedy_communities",
    "modularity",
    "network_stats",
]


class Network:
    """Immutable undirected graph with adjacency stored as sorted index lists."""

    __slots__ = ("node_ids", "_index", "adjacency", "n", "edge_count", "degrees")

    def __init__(self, node_ids, adjacency):
        self.node_ids = tuple(node_ids)
        self._index = {nid: i for i, nid in enumerate(self.node_ids)}
        self.adjacency = tuple(
            np.asarray(sorted(neigh), dtype=np.intp) for neigh in adjacency
        )
        self.n = len(self.node_ids)
        self.degrees = np.array([len(a) for a in self.adjacency], dtype=np.intp)
        self.edge_count = int(self.degrees.sum()) // 2
        for arr in self.adjacency:
            arr.setflags(write=False)
        self.degrees.setflags(write=False)
        self._check_invariants()

    def _check_invariants(self):
        for i, neigh in enumerate(self.adjacency):
            if i in neigh:
                raise GraphInputError(f"self-loop stored for node {self.node_ids[i]!r}")
            if len(set(neigh.tolist())) != len(neigh):
                raise GraphInputError(f"duplicate neighbor for node {self.node_ids[i]!r}")
            for j in neigh:
                if i not in self.adjacency[j]:
                    raise GraphInputError(
                        f"asymmetric adjacency between {self.node_ids[i]!r} "
                        f"and {self.node_ids[j]!r}"
                    )

    def index_of(self, node_id):
        return self._index[node_id]

    def __contains__(self, node_id):
        return node_id in self._index

    def neighbors(self, i):
        """Neighbor indices of node ``i`` (sorted)."""
        return self.adjacency[i]

    def subgraph(self, keep):
        """Induced subgraph on the node indices in ``keep`` (order preserved)."""
        keep = sorted(set(int(i) for i in keep))
        old_to_new = {old: new for new, old in enumerate(keep)}
        ids = [self.node_ids[i] for i in keep]
        adj = [
            [old_to_new[j] for j in self.adjacency[i] if int(j) in old_to_new]
            for i in keep
        ]
        return Network(ids, adj)

    def __repr__(self):
        return f"Network(n={self.n}, edges={self.edge_count})"


def load_network(edge_rows):
    """Build a :class:`Network` from (id, id) pairs.

    Nominations are symmetrized and parallel edges collapse to a single
    undirected edge.  Node order is first-appearance order.

    Raises
    ------
    GraphInputError
        On empty input, empty ids, or a row whose endpoints coincide
        (the offending row number is reported).
    """
    rows = list(edge_rows)
    if not rows:
        raise GraphInputError("empty edge list")
    ids: list[str] = []
    index: dict[str, int] = {}
    neighbor_sets: list[set[int]] = []

    def intern(nid):
        if nid not in index:
            index[nid] = len(ids)
            ids.append(nid)
            neighbor_sets.append(set())
        return index[nid]

    for rownum, row in enumerate(rows, start=1):
        try:
            u, v = row
        except (TypeError, ValueError):
            raise GraphInputError(f"row {rownum}: expected two columns, got {row!r}")
        u, v = str(u), str(v)
        if not u or not v:
            raise GraphInputError(f"row {rownum}: empty node id")
        if u == v:
            raise GraphInputError(f"row {rownum}: self-loop {u!r} -> {v!r} rejected")
        iu, iv = intern(u), intern(v)
        neighbor_sets[iu].add(iv)
        neighbor_sets[iv].add(iu)

    return Network(ids, neighbor_sets)


def read_edge_csv(path):
    """Read a ``from,to`` edge list CSV (header required, UTF-8)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GraphInputError(f"{path}: empty file")
        if [h.strip().lower() for h in header[:2]] != ["from", "to"]:
            raise GraphInputError(f"{path}: expected header 'from,to', got {header!r}")
        rows = [(r[0].strip(), r[1].strip()) for r in reader if r]
    return load_network(rows)


@dataclass(frozen=True)
class ComponentPartition:
    """Partition of the node set into parts used as independence units.

    ``assignment[i]`` is the 1-based part id of node ``i``.  ``cut_edges``
    counts edges crossing parts and is 0 when the parts are the observed
    connected components.
    """

    assignment: np.ndarray
    m: int
    kind: str  # "observed-components" | "community-detected"
    cut_edges: int = 0
    merge_modularity: tuple = ()

    def __post_init__(self):
        self.assignment.setflags(write=False)

    @property
    def parts(self):
        """List of node-index arrays, one per part, in part-id order."""
        return [
            np.flatnonzero(self.assignment == nu) for nu in range(1, self.m + 1)
        ]

    @property
    def sizes(self):
        return np.bincount(self.assignment, minlength=self.m + 1)[1:]

    def to_records(self, net):
        return [
            {"node": net.node_ids[i], "component": int(self.assignment[i])}
            for i in range(net.n)
        ]


def _relabel(raw):
    """Relabel arbitrary part labels to 1..m by smallest member index."""
    order = {}
    out = np.empty(len(raw), dtype=np.intp)
    for i, lab in enumerate(raw):
        if lab not in order:
            order[lab] = len(order) + 1
        out[i] = order[lab]
    return out, len(order)


def components(net):
    """Connected components of the network, via breadth-first search."""
    label = np.full(net.n, -1, dtype=np.intp)
    current = 0
    for start in range(net.n):
        if label[start] >= 0:
            continue
        stack = [start]
        label[start] = current
        while stack:
            u = stack.pop()
            for v in net.adjacency[u]:
                if label[v] < 0:
                    label[v] = current
                    stack.append(v)
        current += 1
    assignment, m = _relabel(label)
    return ComponentPartition(assignment=assignment, m=m, kind="observed-components")


def modularity(net, assignment):
    """Newman modularity of a node partition (labels may be arbitrary)."""
    m_e = net.edge_count
    if m_e == 0:
        return 0.0
    intra = {}
    deg = {}
    for i in range(net.n):
        ci = assignment[i]
        deg[ci] = deg.get(ci, 0) + len(net.adjacency[i])
        for j in net.adjacency[i]:
            if j > i and assignment[j] == ci:
                intra[ci] = intra.get(ci, 0) + 1
    q = 0.0
    for c, d in deg.items():
        q += intra.get(c, 0) / m_e - (d / (2.0 * m_e)) ** 2
    return q


def fast_greedy_communities(net):
    """Greedy modularity agglomeration, deterministic across platforms.

    Starts from singletons and repeatedly merges the connected pair of parts
    with the largest modularity increase, stopping when no merge increases
    modularity.  Ties break on the lexicographically smallest
    ``(min part id, max part id)`` pair.  Pairs in different observed
    components share no edges, so their merge gain is negative and community
    boundaries never join disconnected components.
    """
    m_e = net.edge_count
    if m_e == 0:
        assignment, m = _relabel(list(range(net.n)))
        return ComponentPartition(
            assignment=assignment, m=m, kind="community-detected", cut_edges=0
        )

    part = list(range(net.n))  # current part id per node; merged part keeps min id
    deg = {i: float(len(net.adjacency[i])) for i in range(net.n)}
    between = {}  # (a, b) with a < b -> edge count between parts a and b
    for i in range(net.n):
        for j in net.adjacency[i]:
            if j > i:
                between[(i, int(j))] = between.get((i, int(j)), 0) + 1

    two_m = 2.0 * m_e
    trace = []
    q = modularity(net, np.asarray(part))
    while True:
        best_gain = 0.0
        best_pair = None
        for (a, b), e_ab in between.items():
            gain = e_ab / m_e - 2.0 * deg[a] * deg[b] / (two_m * two_m)
            if gain > best_gain + 1e-15 or (
                best_pair is not None
                and abs(gain - best_gain) <= 1e-15
                and (a, b) < best_pair
            ):
                best_gain = gain
                best_pair = (a, b)
        if best_pair is None or best_gain <= 0.0:
            break
        a, b = best_pair
        q += best_gain
        trace.append(q)
        deg[a] += deg.pop(b)
        merged_between = {}
        for (x, y), e in between.items():
            if (x, y) == (a, b):
                continue
            x = a if x == b else x
            y = a if y == b else y
            key = (x, y) if x < y else (y, x)
            merged_between[key] = merged_between.get(key, 0) + e
        between = merged_between
        for i in range(net.n):
            if part[i] == b:
                part[i] = a

    assignment, m = _relabel(part)
    cut = 0
    for i in range(net.n):
        for j in net.adjacency[i]:
            if j > i and assignment[i] != assignment[j]:
                cut += 1
    return ComponentPartition(
        assignment=assignment,
        m=m,
        kind="community-detected",
        cut_edges=cut,
        merge_modularity=tuple(trace),
    )


@dataclass(frozen=True)
class NetworkStats:
    nodes: int
    edges: int
    components: int
    mean_degree: float
    sd_degree: float
    density: float
    transitivity: float
    assortativity: float

    def to_dict(self):
        return {
            "nodes": self.nodes,
            "edges": self.edges,
            "components": self.components,
            "mean_degree": self.mean_degree,
            "sd_degree": self.sd_degree,
            "density": self.density,
            "transitivity": self.transitivity,
            "assortativity": self.assortativity,
        }


def network_stats(net):
    """Descriptive statistics of the observed network.

    Transitivity is 3 x (closed triples) / (connected triples) and is NaN
    when fewer than 3 nodes or no connected triples exist.  Assortativity is
    the Pearson correlation of endpoint degrees over edges (NaN when the
    degree sequence over edge endpoints is degenerate).
    """
    if net.n < 1:
        raise GraphInputError("network_stats requires at least one node")
    deg = net.degrees.astype(float)
    mean_degree = float(deg.mean())
    sd_degree = float(deg.std(ddof=1)) if net.n > 1 else float("nan")
    density = (
        net.edge_count / (net.n * (net.n - 1) / 2.0) if net.n > 1 else float("nan")
    )

    open_triples = float((deg * (deg - 1) / 2.0).sum())
    if net.n < 3 or open_triples == 0:
        transitivity = float("nan")
    else:
        closed = 0
        neighbor_sets = [set(a.tolist()) for a in net.adjacency]
        for i in range(net.n):
            for j in net.adjacency[i]:
                if j > i:
                    closed += len(neighbor_sets[i] & neighbor_sets[int(j)])
        # each triangle contributes one shared neighbor per edge -> 3T total
        transitivity = closed / open_triples

    if net.edge_count == 0:
        assortativity = float("nan")
    else:
        dj, dk = [], []
        for i in range(net.n):
            for j in net.adjacency[i]:
                if j > i:
                    dj.append(deg[i])
                    dk.append(deg[int(j)])
        dj = np.asarray(dj)
        dk = np.asarray(dk)
        num = (dj * dk).mean() - ((dj + dk) / 2.0).mean() ** 2
        den = ((dj**2 + dk**2) / 2.0).mean() - ((dj + dk) / 2.0).mean() ** 2
        assortativity = float(num / den) if den > 0 else float("nan")

    return NetworkStats(
        nodes=net.n,
        edges=net.edge_count,
        components=components(net).m,
        mean_degree=mean_degree,
        sd_degree=sd_degree,
        density=density,
        transitivity=transitivity,
        assortativity=assortativity,
    )
