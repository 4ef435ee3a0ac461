"""Reply-interaction graphs and the fixed network-statistics schema."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels

DELETED_AUTHOR = "[deleted]"

NETWORK_SCHEMA = (
    "n_nodes",
    "n_edges",
    "density",
    "reciprocity",
    "avg_in_degree",
    "std_in_degree",
    "max_in_degree",
    "avg_out_degree",
    "std_out_degree",
    "max_out_degree",
    "n_triangles",
    "global_clustering",
    "avg_local_clustering",
    "n_weakly_connected_components",
    "largest_wcc_fraction",
    "isolated_fraction",
    "avg_pagerank",
    "std_pagerank",
    "avg_degree_centrality",
    "std_degree_centrality",
    "self_loop_count",
    "avg_edge_weight",
    "std_edge_weight",
)

PAGERANK_DAMPING = 0.85
PAGERANK_MAX_ITER = 50
PAGERANK_TOL = 1e-9


@dataclass(frozen=True)
class InteractionGraph:
    """Directed reply graph: edge u->v with weight = replies by u to v's content."""

    nodes: tuple[str, ...]
    edges: dict[tuple[str, str], int] = field(repr=False)
    n_dropped_replies: int = 0


def build_interaction_graph(items) -> InteractionGraph:
    """Resolve each comment's parent within the same item set into an edge.

    Replies whose parent is absent from the set are dropped and counted.
    Deleted authors carry no identity, so their items contribute neither
    nodes nor edges. Self-replies are kept and surface as self-loops.
    """
    author_of: dict[str, str] = {}
    nodes: set[str] = set()
    for item in items:
        author_of[item.id] = item.author
        if item.author and item.author != DELETED_AUTHOR:
            nodes.add(item.author)
    edges: dict[tuple[str, str], int] = {}
    dropped = 0
    for item in items:
        if item.kind != "comment" or not item.parent_id:
            continue
        parent = _strip_thing_prefix(item.parent_id)
        target = author_of.get(parent)
        if target is None:
            dropped += 1
            continue
        if item.author == DELETED_AUTHOR or target == DELETED_AUTHOR:
            continue
        key = (item.author, target)
        edges[key] = edges.get(key, 0) + 1
    return InteractionGraph(
        nodes=tuple(sorted(nodes)), edges=edges, n_dropped_replies=dropped
    )


def _strip_thing_prefix(parent_id: str) -> str:
    if len(parent_id) > 3 and parent_id[0] == "t" and parent_id[1].isdigit() and parent_id[2] == "_":
        return parent_id[3:]
    return parent_id


def network_features(graph: InteractionGraph) -> dict[str, float]:
    """The fixed statistics schema; an empty graph yields all zeros."""
    n = len(graph.nodes)
    out = dict.fromkeys(NETWORK_SCHEMA, 0.0)
    out["n_nodes"] = float(n)
    if n == 0:
        return out

    index = {name: i for i, name in enumerate(graph.nodes)}
    plain = []  # directed non-self edges
    weights = []
    self_loops = 0
    for (u, v), w in graph.edges.items():
        weights.append(float(w))
        if u == v:
            self_loops += 1
        else:
            plain.append((index[u], index[v]))
    e = len(plain)
    out["n_edges"] = float(e)
    out["self_loop_count"] = float(self_loops)
    if weights:
        warr = np.array(weights)
        out["avg_edge_weight"] = float(warr.mean())
        out["std_edge_weight"] = float(warr.std())
    if n > 1:
        out["density"] = e / (n * (n - 1))

    in_deg = np.zeros(n)
    out_deg = np.zeros(n)
    edge_set = set(plain)
    mutual = 0
    for u, v in plain:
        out_deg[u] += 1
        in_deg[v] += 1
        if (v, u) in edge_set:
            mutual += 1
    out["reciprocity"] = mutual / e if e else 0.0
    out["avg_in_degree"] = float(in_deg.mean())
    out["std_in_degree"] = float(in_deg.std())
    out["max_in_degree"] = float(in_deg.max())
    out["avg_out_degree"] = float(out_deg.mean())
    out["std_out_degree"] = float(out_deg.std())
    out["max_out_degree"] = float(out_deg.max())

    indptr, indices = _undirected_csr(n, plain)
    tri = kernels.triangles(indptr, indices)
    n_triangles = int(tri.sum()) // 3
    deg = np.diff(indptr)
    wedges = float((deg * (deg - 1) // 2).sum())
    out["n_triangles"] = float(n_triangles)
    out["global_clustering"] = 3.0 * n_triangles / wedges if wedges else 0.0
    local = np.zeros(n)
    can = deg >= 2
    local[can] = tri[can] / (deg[can] * (deg[can] - 1) / 2.0)
    out["avg_local_clustering"] = float(local.mean())

    components = _weak_components(n, plain)
    sizes = np.bincount(components)
    out["n_weakly_connected_components"] = float(sizes.shape[0])
    out["largest_wcc_fraction"] = float(sizes.max()) / n
    out["isolated_fraction"] = float((deg == 0).sum()) / n

    pr = _pagerank(n, graph.edges, index)
    out["avg_pagerank"] = float(pr.mean())
    out["std_pagerank"] = float(pr.std())
    if n > 1:
        centrality = deg / (n - 1)
        out["avg_degree_centrality"] = float(centrality.mean())
        out["std_degree_centrality"] = float(centrality.std())
    return out


def _undirected_csr(n, plain_edges):
    """Simple undirected projection as CSR with sorted neighbor lists."""
    pairs = {(min(u, v), max(u, v)) for u, v in plain_edges}
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i, neighbors in enumerate(adj):
        neighbors.sort()
        indptr[i + 1] = indptr[i] + len(neighbors)
    indices = np.empty(int(indptr[-1]), dtype=np.int64)
    for i, neighbors in enumerate(adj):
        indices[indptr[i]: indptr[i + 1]] = neighbors
    return indptr, indices


def _weak_components(n, plain_edges):
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in plain_edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    roots = np.array([find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    return labels


def _pagerank(n, edges, index):
    """Weighted power iteration with uniform teleport and dangling spread."""
    targets: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    out_weight = np.zeros(n)
    for (u, v), w in edges.items():
        if u not in index or v not in index:
            continue
        ui, vi = index[u], index[v]
        targets[ui].append((vi, float(w)))
        out_weight[ui] += float(w)
    rank = np.full(n, 1.0 / n)
    for _ in range(PAGERANK_MAX_ITER):
        nxt = np.zeros(n)
        dangling = 0.0
        for ui in range(n):
            if out_weight[ui] == 0.0:
                dangling += rank[ui]
                continue
            share = rank[ui] / out_weight[ui]
            for vi, w in targets[ui]:
                nxt[vi] += share * w
        nxt = (1.0 - PAGERANK_DAMPING) / n + PAGERANK_DAMPING * (nxt + dangling / n)
        delta = np.abs(nxt - rank).sum()
        rank = nxt
        if delta < PAGERANK_TOL:
            break
    return rank
