from __future__ import annotations
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Tuple
import networkx as nx
import numpy as np

from rigidnet.exceptions import (
    Disconnected,
    InvalidEdge,
    InvalidVertex,
    NoPath,
    ScenarioError,
)

Edge = Tuple[int, int]
Triple = Tuple[int, int, int]


def hash_edge(i: int, j: int, n: int) -> int:
    """Integer id of the undirected edge {i, j} of a graph on vertices 1..n.

    Parameters
    ----------
    i, j: int
        Endpoints, 1 based.
    n: int
        Number of vertices.

    Returns
    -------
    a_ij: int
        (min(i, j) - 1) * n + max(i, j).
    """
    for v in (i, j):
        if not 1 <= v <= n:
            raise InvalidVertex("Vertex %d is outside 1..%d" % (v, n))
    if i == j:
        raise InvalidVertex("Edge endpoints must differ, got (%d, %d)" % (i, j))
    return (min(i, j) - 1) * n + max(i, j)


def unhash_edge(a: int, n: int) -> Edge:
    low, high = divmod(a - 1, n)
    return (low + 1, high + 1)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 1..n.

    Edges are stored as (min, max) pairs in ascending hash order.
    """

    n: int
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise InvalidVertex("A graph needs at least one vertex, got n = %d" % self.n)
        canonical = set()
        for edge in self.edges:
            if len(edge) != 2:
                raise InvalidEdge("Edges are vertex pairs, got %s" % (edge,))
            i, j = int(edge[0]), int(edge[1])
            if i == j:
                raise InvalidEdge("Self-loop at vertex %d" % i)
            for v in (i, j):
                if not 1 <= v <= self.n:
                    raise InvalidVertex("Vertex %d is outside 1..%d" % (v, self.n))
            pair = (min(i, j), max(i, j))
            if pair in canonical:
                raise InvalidEdge("Duplicate edge %s" % (pair,))
            canonical.add(pair)
        object.__setattr__(self, "edges", tuple(sorted(canonical)))

    @property
    def vertices(self) -> range:
        return range(1, self.n + 1)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._edge_set

    @property
    def _edge_set(self) -> frozenset:
        # frozen dataclass: cache lazily on the instance dict
        cached = self.__dict__.get("_edges_cached")
        if cached is None:
            cached = frozenset(self.edges)
            object.__setattr__(self, "_edges_cached", cached)
        return cached

    @property
    def _adjacency(self) -> Dict[int, Tuple[int, ...]]:
        cached = self.__dict__.get("_adjacency_cached")
        if cached is None:
            lists = {v: [] for v in self.vertices}
            for i, j in self.edges:
                lists[i].append(j)
                lists[j].append(i)
            cached = {v: tuple(sorted(nbrs)) for v, nbrs in lists.items()}
            object.__setattr__(self, "_adjacency_cached", cached)
        return cached

    def neighbors(self, v: int) -> List[int]:
        """Ascending list of the neighbours of v."""
        return list(self._adjacency.get(v, ()))

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def edge_index(self) -> Dict[Edge, int]:
        """Row position of every edge in ascending hash order."""
        return {edge: row for row, edge in enumerate(self.edges)}

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges)
        return g

    def edge_subgraph(self, edges: Iterable[Edge]) -> "Graph":
        """Spanning subgraph keeping only the given edges (all n vertices stay)."""
        edges = list(edges)
        for i, j in edges:
            if not self.has_edge(i, j):
                raise InvalidEdge("(%d, %d) is not an edge of the host graph" % (i, j))
        return Graph(self.n, tuple(edges))

    def with_edges(self, edges: Iterable[Edge]) -> "Graph":
        extra = [
            (min(i, j), max(i, j)) for i, j in edges if not self.has_edge(i, j)
        ]
        return Graph(self.n, self.edges + tuple(extra))

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(edge) for edge in self.edges]}

    @classmethod
    def from_dict(cls, data: dict) -> "Graph":
        try:
            n = data["n"]
            edges = data["edges"]
        except (KeyError, TypeError):
            raise ScenarioError('Graph JSON needs "n" and "edges" keys')
        if not isinstance(n, int) or isinstance(n, bool):
            raise ScenarioError('Graph "n" must be an integer, got %r' % (n,))
        if not isinstance(edges, list) or not all(
            isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)
            for e in edges
        ):
            raise ScenarioError('Graph "edges" must be a list of [i, j] integer pairs')
        return cls(n, tuple(tuple(edge) for edge in edges))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(combinations(range(1, n + 1), 2)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((v, v + 1) for v in range(1, n)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((v, v + 1) for v in range(1, n)) + ((1, n),))


def is_connected(g: Graph) -> bool:
    return nx.is_connected(g.to_networkx())


def _bfs_tree_edges(nx_graph: nx.Graph, root) -> List[Tuple]:
    # FIFO queue, neighbours visited in ascending order
    return list(nx.bfs_edges(nx_graph, root, sort_neighbors=sorted))


def bfs_spanning_tree(g: Graph, root: int = 1) -> List[Edge]:
    """Breadth first spanning tree.

    Parameters
    ----------
    g: Graph
        Connected graph.
    root: int, optional
        Root vertex. Default 1.

    Returns
    -------
    tree: list
        n - 1 edges as (parent, child) pairs in discovery order.
    """
    if not 1 <= root <= g.n:
        raise InvalidVertex("Root %d is outside 1..%d" % (root, g.n))
    tree = _bfs_tree_edges(g.to_networkx(), root)
    if len(tree) != g.n - 1:
        raise Disconnected(
            "Graph is disconnected: BFS from %d reached %d of %d vertices"
            % (root, len(tree) + 1, g.n)
        )
    return tree


def undirected_path(g: Graph, u: int, v: int) -> List[int]:
    """Shortest path from u to v found by ascending-neighbour BFS."""
    for w in (u, v):
        if not 1 <= w <= g.n:
            raise InvalidVertex("Vertex %d is outside 1..%d" % (w, g.n))
    parents = {u: None}
    for parent, child in _bfs_tree_edges(g.to_networkx(), u):
        parents[child] = parent
        if child == v:
            break
    if v not in parents:
        raise NoPath("No path between %d and %d" % (u, v))
    path = [v]
    while path[-1] != u:
        path.append(parents[path[-1]])
    return path[::-1]


def canonical_triple(i: int, j: int, k: int) -> Triple:
    return (i, j, k) if i < k else (k, j, i)


@dataclass(frozen=True)
class AngleIndexSet:
    """A set of angle triples (i, j, k) over a host graph.

    Each triple names the signed angle at j between the edges (j, i) and (j, k).
    Triples are stored with i < k, ordered lexicographically on (j, i, k).
    """

    host: Graph
    triples: Tuple[Triple, ...] = ()

    def __post_init__(self):
        canonical = set()
        for triple in self.triples:
            if len(triple) != 3:
                raise InvalidEdge("Angle triples have three vertices, got %s" % (triple,))
            i, j, k = (int(v) for v in triple)
            for v in (i, j, k):
                if not 1 <= v <= self.host.n:
                    raise InvalidVertex("Vertex %d is outside 1..%d" % (v, self.host.n))
            if i == k:
                raise InvalidEdge("Triple %s repeats its outer vertex" % ((i, j, k),))
            for a in (i, k):
                if not self.host.has_edge(j, a):
                    raise InvalidEdge(
                        "Triple %s uses (%d, %d), which is not a host edge"
                        % ((i, j, k), j, a)
                    )
            canonical.add(canonical_triple(i, j, k))
        ordered = tuple(sorted(canonical, key=lambda t: (t[1], t[0], t[2])))
        object.__setattr__(self, "triples", ordered)

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)

    def __contains__(self, triple) -> bool:
        return canonical_triple(*triple) in set(self.triples)

    def centered_at(self, j: int) -> "AngleIndexSet":
        return AngleIndexSet(self.host, tuple(t for t in self.triples if t[1] == j))

    def covered_edges(self) -> List[Edge]:
        """Host edges that appear in at least one triple, ascending hash order."""
        covered = set()
        for i, j, k in self.triples:
            covered.add((min(i, j), max(i, j)))
            covered.add((min(j, k), max(j, k)))
        return sorted(covered)

    def without(self, triple: Triple) -> "AngleIndexSet":
        target = canonical_triple(*triple)
        return AngleIndexSet(self.host, tuple(t for t in self.triples if t != target))

    def union(self, other: "AngleIndexSet") -> "AngleIndexSet":
        return AngleIndexSet(self.host, self.triples + tuple(other.triples))

    def zero_based(self) -> np.ndarray:
        """(m, 3) array of the triples shifted to 0 based vertex ids."""
        return np.array(self.triples, dtype=int).reshape(-1, 3) - 1

    def to_dict(self) -> dict:
        return {"triples": [list(t) for t in self.triples]}

    @classmethod
    def from_dict(cls, host: Graph, data: dict) -> "AngleIndexSet":
        try:
            triples = data["triples"]
        except (KeyError, TypeError):
            raise ScenarioError('Angle index set JSON needs a "triples" key')
        return cls(host, tuple(tuple(t) for t in triples))


def all_angle_triples(g: Graph) -> AngleIndexSet:
    """Every angle at every vertex: (i, j, k) with (j, i), (j, k) edges and i < k."""
    triples = []
    for j in g.vertices:
        for i, k in combinations(g.neighbors(j), 2):
            triples.append((i, j, k))
    return AngleIndexSet(g, tuple(triples))


class AngleIndexGraph:
    """Graph whose vertices are the hash ids of the host edges.

    Each triple (i, j, k) of the generating set joins a_ji and a_jk; the triple
    is kept on the edge under the "triple" attribute so the set can be
    recovered from the graph.

    Parameters
    ----------
    ais: AngleIndexSet
        Generating angle index set.

    Attributes
    ----------
    host: Graph
        Host graph of the angle index set.
    graph: networkx.Graph
        The angle index graph itself.
    """

    def __init__(self, ais: AngleIndexSet):
        self.host = ais.host
        n = ais.host.n
        self.graph = nx.Graph()
        self.graph.add_nodes_from(hash_edge(i, j, n) for i, j in ais.host.edges)
        for i, j, k in ais.triples:
            self.graph.add_edge(hash_edge(j, i, n), hash_edge(j, k, n), triple=(i, j, k))

    @property
    def vertices(self) -> List[int]:
        return sorted(self.graph.nodes)

    @property
    def edges(self) -> List[Tuple[int, int]]:
        return sorted((min(a, b), max(a, b)) for a, b in self.graph.edges)

    def host_edge(self, a: int) -> Edge:
        return unhash_edge(a, self.host.n)

    def triple(self, a: int, b: int) -> Triple:
        return self.graph.edges[a, b]["triple"]

    def is_connected(self) -> bool:
        if self.graph.number_of_nodes() == 0:
            return False
        return nx.is_connected(self.graph)

    def spanning_tree_triples(self, root: Optional[int] = None) -> List[Triple]:
        """Triples on the edges of the BFS spanning tree, in discovery order.

        The root defaults to the smallest edge id.
        """
        if root is None:
            root = self.vertices[0]
        tree = _bfs_tree_edges(self.graph, root)
        if len(tree) != self.graph.number_of_nodes() - 1:
            raise Disconnected(
                "Angle index graph is disconnected: BFS reached %d of %d edge vertices"
                % (len(tree) + 1, self.graph.number_of_nodes())
            )
        return [self.triple(a, b) for a, b in tree]

    def to_angle_index_set(self) -> AngleIndexSet:
        return AngleIndexSet(
            self.host, tuple(data["triple"] for _, _, data in self.graph.edges(data=True))
        )


def build_angle_index_graph(ais: AngleIndexSet) -> AngleIndexGraph:
    return AngleIndexGraph(ais)


def is_angle_connected(ais: AngleIndexSet) -> bool:
    """Whether the angle index graph connects every host edge."""
    return build_angle_index_graph(ais).is_connected()


def random_connected_graph(
    n: int, rng: np.random.Generator, edge_probability: float = 0.3
) -> Graph:
    """Seeded random connected graph: a random recursive tree plus Bernoulli extra edges."""
    edges = set()
    for v in range(2, n + 1):
        u = int(rng.integers(1, v))
        edges.add((u, v))
    for i, j in combinations(range(1, n + 1), 2):
        if (i, j) not in edges and rng.random() < edge_probability:
            edges.add((i, j))
    return Graph(n, tuple(edges))


def henneberg_laman_graph(
    n: int, rng: np.random.Generator, split_probability: float = 0.5
) -> Graph:
    """Seeded Laman graph grown from a triangle.

    Each new vertex either joins two existing vertices, or splits an existing
    edge (a, b) and joins a, b and a third vertex. Both moves keep the Laman
    counts.
    """
    if n < 3:
        raise InvalidVertex("Laman graphs need at least 3 vertices, got %d" % n)
    edges = [(1, 2), (1, 3), (2, 3)]
    for v in range(4, n + 1):
        if rng.random() < split_probability:
            a, b = edges.pop(int(rng.integers(len(edges))))
            others = [w for w in range(1, v) if w not in (a, b)]
            c = others[int(rng.integers(len(others)))]
            edges.extend([(a, v), (b, v), (c, v)])
        else:
            a, b = (int(w) + 1 for w in rng.choice(v - 1, size=2, replace=False))
            edges.extend([(a, v), (b, v)])
    return Graph(n, tuple(edges))
