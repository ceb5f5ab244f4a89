"""Per-second interaction graphs and resolution-parameterised Louvain communities."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

DEFAULT_EDGE_FLOOR = 0.05
_EPS = 1e-12


@dataclass(frozen=True)
class InteractionGraph:
    vertices: tuple
    edges: dict = field(default_factory=dict)  # frozenset({a, b}) -> weight
    second: int = 0

    def __post_init__(self):
        vs = set(self.vertices)
        for e, w in self.edges.items():
            if len(e) != 2:
                raise ValueError("self-loops are not allowed")
            if not e <= vs:
                raise ValueError(f"edge {sorted(e)} references unknown vertices")
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"edge weight {w} outside [0, 1]")

    @property
    def total_weight(self):
        return sum(self.edges.values())

    def degrees(self):
        k = {v: 0.0 for v in self.vertices}
        for e, w in self.edges.items():
            a, b = tuple(e)
            k[a] += w
            k[b] += w
        return k


@dataclass(frozen=True)
class Partition:
    community_of: dict
    second: int = 0

    def communities(self):
        out = {}
        for v, c in self.community_of.items():
            out.setdefault(c, set()).add(v)
        return [frozenset(m) for _, m in sorted(out.items())]


def build_graph(probabilities, vertices, edge_floor=DEFAULT_EDGE_FLOOR, second=0):
    """Graph over all ``vertices`` keeping pair edges with probability >= ``edge_floor``."""
    edges = {}
    for (a, b), p in probabilities.items():
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
        if p >= edge_floor and p > 0:
            edges[frozenset((a, b))] = float(p)
    return InteractionGraph(tuple(vertices), edges, second)


def modularity(graph, partition, resolution=1.0):
    """Newman modularity with resolution; 0 for an edgeless graph."""
    m = graph.total_weight
    if m == 0:
        return 0.0
    comm = partition.community_of if isinstance(partition, Partition) else partition
    internal, tot = {}, {}
    for v, kv in graph.degrees().items():
        tot[comm[v]] = tot.get(comm[v], 0.0) + kv
    for e, w in graph.edges.items():
        a, b = tuple(e)
        if comm[a] == comm[b]:
            internal[comm[a]] = internal.get(comm[a], 0.0) + w
    return sum(internal.get(c, 0.0) / m - resolution * (t / (2.0 * m)) ** 2 for c, t in tot.items())


def _one_level(adj, degree, m, resolution, order, comm=None):
    """Local-move phase on a (possibly aggregated) weighted graph.

    ``adj[u]`` maps neighbours to edge weights (no self entries) and
    ``degree[u]`` includes any self-loop weight twice. ``comm`` is the
    starting assignment (default: singletons). Returns (community per node,
    whether anything moved).
    """
    comm = list(range(len(adj))) if comm is None else list(comm)
    tot = [0.0] * len(adj)
    for u, c in enumerate(comm):
        tot[c] += degree[u]
    moved_any = False
    two_m2 = 2.0 * m * m
    improved = True
    while improved:
        improved = False
        for u in order:
            cu, ku = comm[u], degree[u]
            links = {}
            for v, w in adj[u].items():
                links[comm[v]] = links.get(comm[v], 0.0) + w
            tot[cu] -= ku
            best_c = cu
            best_gain = links.get(cu, 0.0) / m - resolution * tot[cu] * ku / two_m2
            for c, w in links.items():
                if c == cu:
                    continue
                gain = w / m - resolution * tot[c] * ku / two_m2
                if gain > best_gain + _EPS:
                    best_c, best_gain = c, gain
            tot[best_c] += ku
            if best_c != cu:
                comm[u] = best_c
                improved = moved_any = True
    return comm, moved_any


def _aggregate(adj, loops, comm, order):
    """Collapse communities into nodes numbered by first appearance in ``order``."""
    relabel = {}
    for u in order:
        relabel.setdefault(comm[u], len(relabel))
    new_adj = [dict() for _ in relabel]
    new_loops = [0.0] * len(relabel)
    for u in range(len(adj)):
        cu = relabel[comm[u]]
        new_loops[cu] += loops[u]
        for v, w in adj[u].items():
            cv = relabel[comm[v]]
            if cu == cv:
                new_loops[cu] += w / 2.0  # each internal edge is seen from both ends
            else:
                new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
    return new_adj, new_loops, relabel


def _degrees(adj, loops):
    return [2.0 * loops[u] + sum(adj[u].values()) for u in range(len(adj))]


def louvain(graph, resolution=1.0, rng_seed=0):
    """Greedy two-phase modularity maximisation.

    Vertices are swept in an order shuffled once with ``rng_seed``; each joins
    the neighbouring community with the largest modularity gain if that beats
    staying put. Communities are then collapsed into weighted nodes (internal
    weight becomes a self-loop) and the process repeats until nothing moves.
    """
    verts = list(graph.vertices)
    index = {v: i for i, v in enumerate(verts)}
    m = graph.total_weight
    if m == 0:
        return Partition({v: i for i, v in enumerate(verts)}, graph.second)

    adj = [dict() for _ in verts]
    for e, w in graph.edges.items():
        a, b = (index[x] for x in e)
        adj[a][b] = adj[a].get(b, 0.0) + w
        adj[b][a] = adj[b].get(a, 0.0) + w
    loops = [0.0] * len(verts)
    order = list(range(len(verts)))
    random.Random(rng_seed).shuffle(order)

    member = list(range(len(verts)))  # original vertex -> current node
    while True:
        comm, moved = _one_level(adj, _degrees(adj, loops), m, resolution, order)
        if not moved:
            break
        adj, loops, relabel = _aggregate(adj, loops, comm, order)
        member = [relabel[comm[c]] for c in member]
        order = list(range(len(adj)))

    # stable community ids: order of first member in the vertex list
    ids = {}
    out = {}
    for i, v in enumerate(verts):
        out[v] = ids.setdefault(member[i], len(ids))
    return Partition(out, graph.second)


def extract_groups(partition, min_size=2):
    """Split communities into detected groups and non-interacting participants."""
    groups, alone = [], []
    for c in partition.communities():
        if len(c) >= min_size:
            groups.append(c)
        else:
            alone.extend(sorted(c))
    return groups, sorted(alone)
