from __future__ import annotations
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple
import numpy as np

import rigidnet.geometry.geometry as geo
import rigidnet.graph.graph as gr
import rigidnet.numerics.numerics as num
import rigidnet.rigidity.rigidity as rig
from rigidnet.exceptions import (
    DegreeTooLow,
    InvalidEdge,
    MissingAngle,
    NotAngleConnected,
    NotISAR,
    NotLaman,
)


@dataclass
class GaisResult:
    """Minimal globally constraining angle index set built from a Laman spanning subgraph.

    Attributes
    ----------
    ais: AngleIndexSet
        The 2n - 4 selected triples; hosted on laman_subgraph.
    laman_subgraph: Graph
        Laman spanning subgraph the triples were drawn from.
    size: int
        Number of triples.
    angle_connected: bool
        Whether the angle index graph of ais is connected.
    restricted_rank: int
        Rank of the signed angle rigidity matrix restricted to ais.
    """

    ais: gr.AngleIndexSet
    laman_subgraph: gr.Graph
    size: int
    angle_connected: bool
    restricted_rank: int

    def to_dict(self) -> dict:
        n = self.laman_subgraph.n
        return {
            "n": n,
            "triples": [list(t) for t in self.ais.triples],
            "laman_edges": [list(e) for e in self.laman_subgraph.edges],
            "size": self.size,
            "expected_size": 2 * n - 4,
            "angle_connected": self.angle_connected,
            "restricted_rank": self.restricted_rank,
        }


def measure_signed_angles(
    fw: rig.Framework, ais: gr.AngleIndexSet
) -> Dict[gr.Triple, float]:
    """Signed angle of every triple of ais on the configuration of fw."""
    values = rig.signed_angle_function(fw, ais)
    return {triple: float(alpha) for triple, alpha in zip(ais.triples, values)}


def restricted_rank(
    fw: rig.Framework, ais: gr.AngleIndexSet, tolerance: float = num.RANK_TOLERANCE
) -> int:
    rank, _ = rig.numerical_rank(rig.signed_angle_rigidity_matrix(fw, ais), tolerance)
    return rank


def is_rais(
    fw: rig.Framework, ais: gr.AngleIndexSet, tolerance: float = num.RANK_TOLERANCE
) -> bool:
    """Whether ais keeps the rank of the signed angle rigidity matrix over all triples."""
    full = gr.all_angle_triples(fw.graph)
    return restricted_rank(fw, ais, tolerance) == restricted_rank(fw, full, tolerance)


def spanning_angle_index_set(g: gr.Graph) -> gr.AngleIndexSet:
    """Angle connected set of |E| - 1 triples: a BFS spanning tree of the full angle index graph."""
    aig = gr.build_angle_index_graph(gr.all_angle_triples(g))
    return gr.AngleIndexSet(g, tuple(aig.spanning_tree_triples()))


def algorithm1_minimal_gais(
    fw: rig.Framework, tolerance: float = num.RANK_TOLERANCE
) -> GaisResult:
    """Minimal angle index set that fixes every signed angle of an ISAR framework.

    1. Extract a Laman spanning subgraph with independent distance rows.
    2. Take the BFS spanning tree of its full angle index graph, rooted at the
       smallest edge id.
    3. Read the tree edges back as triples.

    Parameters
    ----------
    fw: Framework
        Infinitesimally signed angle rigid framework.
    tolerance: float, optional
        Relative rank tolerance. Default 1e-8.

    Returns
    -------
    result: GaisResult
    """
    if not rig.analyze(fw, tolerance).is_isar:
        raise NotISAR("Framework is not infinitesimally signed angle rigid")
    laman = rig.extract_laman_spanning_subgraph(fw, tolerance)
    ais = spanning_angle_index_set(laman)
    return GaisResult(
        ais=ais,
        laman_subgraph=laman,
        size=len(ais),
        angle_connected=gr.is_angle_connected(ais),
        restricted_rank=restricted_rank(fw, ais, tolerance),
    )


def verify_minimal_gais(fw: rig.Framework, ais: gr.AngleIndexSet) -> bool:
    """For a Laman host: minimal GAIS iff 2n - 4 triples and angle connected."""
    if not rig.is_laman(ais.host):
        raise NotLaman("Host graph of the angle index set is not a Laman graph")
    for i, j in ais.host.edges:
        if not fw.graph.has_edge(i, j):
            raise InvalidEdge("Host edge (%d, %d) is not an edge of the framework" % (i, j))
    return len(ais) == 2 * fw.n - 4 and gr.is_angle_connected(ais)


def decentralized_local_ais(fw: rig.Framework) -> gr.AngleIndexSet:
    """Union of per-vertex star patterns (n_1, i, n_2), (n_2, i, n_3), ... over sorted neighbours."""
    g = fw.graph
    triples = []
    for i in g.vertices:
        neighbors = g.neighbors(i)
        if len(neighbors) < 2:
            raise DegreeTooLow("Vertex %d has degree %d; need at least 2" % (i, len(neighbors)))
        for a, b in zip(neighbors[:-1], neighbors[1:]):
            triples.append((a, i, b))
    return gr.AngleIndexSet(g, tuple(triples))


def _lookup_angle(angles: Mapping, triple: gr.Triple) -> float:
    i, j, k = triple
    if (i, j, k) in angles:
        return float(angles[(i, j, k)])
    if (k, j, i) in angles:
        return geo.wrap_angle(-float(angles[(k, j, i)]))
    raise MissingAngle("No angle supplied for triple %s" % ((i, j, k),))


@dataclass
class ReferenceAngleTable:
    """Directed edge (i, j) -> angle a with b_ij = R(a) b_ref.

    Attributes
    ----------
    reference: tuple
        Reference directed edge; its own angle is 0.
    angles: dict
        Angle in [0, 2pi) for both directions of every host edge.
    max_cycle_residual: float
        Largest wrapped disagreement found on angle index graph edges that
        close a cycle. Near zero for angles measured on one configuration.
    """

    reference: Tuple[int, int]
    angles: Dict[Tuple[int, int], float]
    max_cycle_residual: float = 0.0

    def __getitem__(self, edge: Tuple[int, int]) -> float:
        return self.angles[tuple(edge)]

    def __contains__(self, edge) -> bool:
        return tuple(edge) in self.angles

    def bearing(self, i: int, j: int, reference_bearing: np.ndarray) -> np.ndarray:
        return geo.rotation_matrix(self.angles[(i, j)]) @ np.asarray(reference_bearing)

    def to_dict(self) -> dict:
        return {
            "reference": list(self.reference),
            "angles": {"%d,%d" % edge: value for edge, value in sorted(self.angles.items())},
            "max_cycle_residual": self.max_cycle_residual,
        }


def reference_angle_table(
    ais: gr.AngleIndexSet,
    angles: Mapping[gr.Triple, float],
    reference: Tuple[int, int] = (1, 2),
) -> ReferenceAngleTable:
    """Propagate directed bearing angles over the angle index graph.

    Crossing triple (i, j, k) turns the held bearing b_ji into b_jk = R(alpha_ijk) b_ji
    (and back by subtracting). Reversing an edge adds pi.

    Parameters
    ----------
    ais: AngleIndexSet
        Angle connected set.
    angles: mapping
        Signed angle for every triple of ais.
    reference: tuple, optional
        Directed host edge whose bearing is the reference. Default (1, 2).

    Returns
    -------
    table: ReferenceAngleTable
    """
    host = ais.host
    r1, r2 = reference
    if not host.has_edge(r1, r2):
        raise InvalidEdge("Reference %s is not an edge of the host graph" % (reference,))
    aig = gr.build_angle_index_graph(ais)
    if not aig.is_connected():
        raise NotAngleConnected("Angle index set is not angle connected")

    theta: Dict[Tuple[int, int], float] = {}

    def assign(a: int, b: int, value: float) -> None:
        theta[(a, b)] = geo.wrap_angle(value)
        theta[(b, a)] = geo.wrap_angle(value + np.pi)

    assign(r1, r2, 0.0)
    root = gr.hash_edge(r1, r2, host.n)
    visited = {root}
    queue = deque([root])
    residual = 0.0
    while queue:
        current = queue.popleft()
        for other in sorted(aig.graph.neighbors(current)):
            i, j, k = aig.triple(current, other)
            alpha = _lookup_angle(angles, (i, j, k))
            if gr.hash_edge(j, i, host.n) == current:
                predicted, target = theta[(j, i)] + alpha, (j, k)
            else:
                predicted, target = theta[(j, k)] - alpha, (j, i)
            if other in visited:
                residual = max(residual, float(geo.angular_distance(predicted, theta[target])))
                continue
            assign(target[0], target[1], predicted)
            visited.add(other)
            queue.append(other)
    return ReferenceAngleTable(
        reference=(r1, r2), angles=theta, max_cycle_residual=residual
    )
