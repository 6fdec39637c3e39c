from __future__ import annotations
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, List, Optional, Tuple
import numpy as np
from scipy.spatial.distance import pdist, squareform

import rigidnet.geometry.geometry as geo
import rigidnet.graph.graph as gr
import rigidnet.numerics.numerics as num
from rigidnet.exceptions import (
    CoincidentPoints,
    DegenerateConfiguration,
    NonFinite,
    NotISAR,
    ScenarioError,
    TooFewPoints,
)

DEGENERACY_TOLERANCE = 1e-9
FINITE_DIFFERENCE_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class Framework:
    """A graph together with a planar configuration.

    Parameters
    ----------
    graph: Graph
        Graph on vertices 1..n.
    config: numpy.ndarray
        (n, 2) array; row m - 1 holds the position of vertex m.
    """

    graph: gr.Graph
    config: np.ndarray

    def __post_init__(self):
        config = np.array(self.config, dtype=float)
        if config.ndim != 2 or config.shape[1] != 2:
            raise ScenarioError("Configuration must be an (n, 2) array, got shape %s" % (config.shape,))
        if config.shape[0] != self.graph.n:
            raise ScenarioError(
                "Graph has %d vertices but the configuration has %d points"
                % (self.graph.n, config.shape[0])
            )
        if not np.all(np.isfinite(config)):
            raise ScenarioError("Configuration has non-finite coordinates")
        if self.graph.n > 1:
            distances = squareform(pdist(config))
            np.fill_diagonal(distances, np.inf)
            if distances.min() < geo.COINCIDENCE_TOLERANCE:
                a, b = np.unravel_index(np.argmin(distances), distances.shape)
                raise CoincidentPoints(
                    "Vertices %d and %d coincide within %.0e"
                    % (a + 1, b + 1, geo.COINCIDENCE_TOLERANCE)
                )
        config.setflags(write=False)
        object.__setattr__(self, "config", config)

    @property
    def n(self) -> int:
        return self.graph.n

    def position(self, v: int) -> np.ndarray:
        return self.config[v - 1]

    def with_config(self, config: np.ndarray) -> "Framework":
        return Framework(self.graph, config)

    def to_dict(self) -> dict:
        return {"graph": self.graph.to_dict(), "positions": self.config.tolist()}


def framework_from_dict(data: dict) -> Framework:
    """Build a framework from {"graph": {...}, "positions": [[x, y], ...]}."""
    if not isinstance(data, dict) or "graph" not in data or "positions" not in data:
        raise ScenarioError('Framework JSON needs "graph" and "positions" keys')
    positions = data["positions"]
    if not isinstance(positions, list) or not all(
        isinstance(p, list) and len(p) == 2 for p in positions
    ):
        raise ScenarioError('"positions" must be a list of [x, y] pairs')
    try:
        config = np.array(positions, dtype=float).reshape(-1, 2)
    except (TypeError, ValueError):
        raise ScenarioError('"positions" must hold numbers')
    return Framework(gr.Graph.from_dict(data["graph"]), config)


@dataclass
class RigidityReport:
    n: int
    num_edges: int
    num_triples: int
    rank_bearing: int
    rank_signed_angle: int
    null_dim_signed_angle: int
    is_ibr: bool
    is_isar: bool
    is_laman: bool
    is_degenerate: bool
    tolerance_used: float
    threshold_bearing: float
    threshold_signed_angle: float
    singular_values: np.ndarray
    singular_values_bearing: np.ndarray
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "num_edges": self.num_edges,
            "num_triples": self.num_triples,
            "rank_bearing": self.rank_bearing,
            "rank_signed_angle": self.rank_signed_angle,
            "null_dim_signed_angle": self.null_dim_signed_angle,
            "is_ibr": self.is_ibr,
            "is_isar": self.is_isar,
            "is_laman": self.is_laman,
            "is_degenerate": self.is_degenerate,
            "tolerance_used": self.tolerance_used,
            "threshold_bearing": self.threshold_bearing,
            "threshold_signed_angle": self.threshold_signed_angle,
            "singular_values": [float(s) for s in self.singular_values],
            "singular_values_bearing": [float(s) for s in self.singular_values_bearing],
            "seed": self.seed,
        }


@dataclass
class TrivialMotionBasis:
    scaling: np.ndarray
    rotation: np.ndarray
    translation_x: np.ndarray
    translation_y: np.ndarray

    def as_matrix(self) -> np.ndarray:
        """2n x 4 matrix with the motions as columns."""
        return np.column_stack(
            [self.scaling, self.rotation, self.translation_x, self.translation_y]
        )


def incidence_matrix(g: gr.Graph) -> np.ndarray:
    """Signed incidence matrix H; edge (i, j), i < j, starts at i and ends at j."""
    h = np.zeros((g.num_edges, g.n))
    for row, (i, j) in enumerate(g.edges):
        h[row, i - 1] = -1.0
        h[row, j - 1] = 1.0
    return h


def _edge_bearings(fw: Framework):
    edges = np.array(fw.graph.edges, dtype=int).reshape(-1, 2) - 1
    return geo.bearings(fw.config[edges[:, 0]], fw.config[edges[:, 1]])


def bearing_function(fw: Framework) -> np.ndarray:
    """Stacked bearings of every edge (from its smaller to its larger vertex), ascending hash order."""
    if fw.graph.num_edges == 0:
        return np.zeros(0)
    unit, _ = _edge_bearings(fw)
    return unit.ravel()


def bearing_rigidity_matrix(fw: Framework) -> np.ndarray:
    """Jacobian of the bearing function: diag(P_e / |e|) (H kron I2)."""
    g = fw.graph
    matrix = np.zeros((2 * g.num_edges, 2 * g.n))
    if g.num_edges == 0:
        return matrix
    unit, lengths = _edge_bearings(fw)
    for row, ((i, j), b, length) in enumerate(zip(g.edges, unit, lengths)):
        block = geo.projection_matrix(b) / length
        matrix[2 * row : 2 * row + 2, 2 * (j - 1) : 2 * j] = block
        matrix[2 * row : 2 * row + 2, 2 * (i - 1) : 2 * i] = -block
    return matrix


def signed_angle_function(fw: Framework, ais: gr.AngleIndexSet) -> np.ndarray:
    """Stacked signed angles of the triples of ais, in its (j, i, k) order."""
    return geo.signed_angles(fw.config, ais.zero_based())


def _orientation(j: int, a: int) -> float:
    # +1 when the incidence row of edge {j, a} reads p_a - p_j
    return 1.0 if j < a else -1.0


def signed_angle_rigidity_matrix(fw: Framework, ais: gr.AngleIndexSet) -> np.ndarray:
    """Jacobian of the signed angle function in the form R_T(p) (H kron I2).

    Row (i, j, k) of R_T has b_ji^T R(pi/2) / |e_ji| on edge (j, i) and
    -b_jk^T R(pi/2) / |e_jk| on edge (j, k). The form has no 1/sin factor so it
    stays finite on collinear triples.
    """
    g = fw.graph
    index = g.edge_index()
    bar = np.zeros((len(ais), 2 * g.num_edges))
    quarter = geo.rotation_matrix(np.pi / 2)
    for row, (i, j, k) in enumerate(ais.triples):
        p_i, p_j, p_k = fw.position(i), fw.position(j), fw.position(k)
        b_ji = geo.bearing(p_j, p_i)
        b_jk = geo.bearing(p_j, p_k)
        col_ji = index[(min(i, j), max(i, j))]
        col_jk = index[(min(j, k), max(j, k))]
        bar[row, 2 * col_ji : 2 * col_ji + 2] += (
            _orientation(j, i) * (b_ji @ quarter) / np.linalg.norm(p_i - p_j)
        )
        bar[row, 2 * col_jk : 2 * col_jk + 2] -= (
            _orientation(j, k) * (b_jk @ quarter) / np.linalg.norm(p_k - p_j)
        )
    h_bar = np.kron(incidence_matrix(g), np.eye(2))
    return bar @ h_bar


def signed_angle_rigidity_matrix_sine_form(
    fw: Framework, ais: gr.AngleIndexSet, min_sine: float = 1e-12
) -> np.ndarray:
    """Signed angle rigidity matrix as diag(-1/sin(alpha)) R_b R_B.

    Only defined when no angle of ais is 0 or pi.
    """
    g = fw.graph
    index = g.edge_index()
    r_bearing = bearing_rigidity_matrix(fw)
    matrix = np.zeros((len(ais), 2 * g.n))
    for row, (i, j, k) in enumerate(ais.triples):
        p_i, p_j, p_k = fw.position(i), fw.position(j), fw.position(k)
        b_ji = geo.bearing(p_j, p_i)
        b_jk = geo.bearing(p_j, p_k)
        sine = np.sin(geo.signed_angle(p_i, p_j, p_k))
        if abs(sine) < min_sine:
            raise NonFinite(
                "sin(alpha) vanishes on triple %s; use the singularity-free form"
                % ((i, j, k),)
            )
        col_ji = index[(min(i, j), max(i, j))]
        col_jk = index[(min(j, k), max(j, k))]
        d_cos = _orientation(j, i) * b_jk @ r_bearing[2 * col_ji : 2 * col_ji + 2]
        d_cos = d_cos + _orientation(j, k) * b_ji @ r_bearing[2 * col_jk : 2 * col_jk + 2]
        matrix[row] = -d_cos / sine
    return matrix


def numerical_jacobian(
    function: Callable[[np.ndarray], np.ndarray],
    config: np.ndarray,
    step: float = FINITE_DIFFERENCE_STEP,
    wrap: bool = False,
) -> np.ndarray:
    """Central difference Jacobian of a function of an (n, 2) configuration.

    Parameters
    ----------
    function: callable
        Maps an (n, 2) configuration to a vector.
    config: numpy.ndarray
        Point of evaluation.
    step: float, optional
        Difference step. Default 1e-6.
    wrap: bool, optional
        Reduce output differences into (-pi, pi] before dividing, for angle valued functions.

    Returns
    -------
    jacobian: numpy.ndarray
        m x 2n matrix, columns ordered x_1, y_1, x_2, y_2, ...
    """
    config = np.array(config, dtype=float)
    flat = config.ravel()
    columns = []
    for c in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[c] += step
        minus[c] -= step
        diff = function(plus.reshape(config.shape)) - function(minus.reshape(config.shape))
        if wrap:
            diff = geo.wrap_to_pi(diff)
        columns.append(np.asarray(diff) / (2 * step))
    return np.column_stack(columns)


def numerical_rank(
    matrix: np.ndarray, tau_rel: float = num.RANK_TOLERANCE
) -> Tuple[int, np.ndarray]:
    """Rank as the count of singular values above tau_rel * sigma_max."""
    _, sigma, _ = num.svd(matrix)
    return num.rank_from_svd(sigma, tau_rel), sigma


def distance_rigidity_matrix(fw: Framework) -> np.ndarray:
    """Row for edge (i, j): (p_i - p_j)^T at vertex i and (p_j - p_i)^T at vertex j."""
    g = fw.graph
    matrix = np.zeros((g.num_edges, 2 * g.n))
    for row, (i, j) in enumerate(g.edges):
        e = fw.position(i) - fw.position(j)
        matrix[row, 2 * (i - 1) : 2 * i] = e
        matrix[row, 2 * (j - 1) : 2 * j] = -e
    return matrix


def is_degenerate(config: np.ndarray, tolerance: float = DEGENERACY_TOLERANCE) -> bool:
    """Whether all points lie within a least squares line (residual below tolerance)."""
    config = np.asarray(config, dtype=float)
    if len(config) < 3:
        return True
    centered = config - config.mean(axis=0)
    sigma = np.linalg.svd(centered, compute_uv=False)
    return bool(sigma[-1] < tolerance)


def trivial_motion_basis(fw: Framework) -> TrivialMotionBasis:
    if is_degenerate(fw.config):
        raise DegenerateConfiguration(
            "All points lie on a common line; trivial motions are not 4 dimensional"
        )
    n = fw.n
    quarter = geo.rotation_matrix(np.pi / 2)
    return TrivialMotionBasis(
        scaling=fw.config.ravel().copy(),
        rotation=(fw.config @ quarter.T).ravel(),
        translation_x=np.kron(np.ones(n), [1.0, 0.0]),
        translation_y=np.kron(np.ones(n), [0.0, 1.0]),
    )


def analyze(
    fw: Framework, tolerance: float = num.RANK_TOLERANCE, seed: Optional[int] = None
) -> RigidityReport:
    """Bearing and signed angle rank tests over all edges and all angle triples.

    Parameters
    ----------
    fw: Framework
        Framework to test.
    tolerance: float, optional
        Relative singular value cutoff. Default 1e-8.
    seed: int, optional
        Seed that produced the configuration, recorded in the report.

    Returns
    -------
    report: RigidityReport
        is_isar holds when rank(R_S) = 2n - 4, is_ibr when rank(R_B) = 2n - 3.
    """
    n = fw.n
    if n < 3:
        raise TooFewPoints("Signed angle rigidity needs at least 3 vertices, got n = %d" % n)
    triples = gr.all_angle_triples(fw.graph)
    r_bearing = bearing_rigidity_matrix(fw)
    r_angle = signed_angle_rigidity_matrix(fw, triples)
    rank_b, sigma_b = numerical_rank(r_bearing, tolerance)
    rank_s, sigma_s = numerical_rank(r_angle, tolerance)
    return RigidityReport(
        n=n,
        num_edges=fw.graph.num_edges,
        num_triples=len(triples),
        rank_bearing=rank_b,
        rank_signed_angle=rank_s,
        null_dim_signed_angle=2 * n - rank_s,
        is_ibr=rank_b == 2 * n - 3,
        is_isar=rank_s == 2 * n - 4,
        is_laman=is_laman(fw.graph) if n >= 3 else False,
        is_degenerate=is_degenerate(fw.config),
        tolerance_used=tolerance,
        threshold_bearing=num.rank_threshold(sigma_b, tolerance),
        threshold_signed_angle=num.rank_threshold(sigma_s, tolerance),
        singular_values=sigma_s,
        singular_values_bearing=sigma_b,
        seed=seed,
    )


class PebbleGame:
    """(2, 3)-pebble game on a fixed vertex set.

    Every vertex starts with two pebbles. An edge is accepted when four pebbles
    can be gathered on its endpoints; one of them then covers the edge, which
    is directed away from the vertex that paid for it. Accepted edges form an
    independent set of the generic rigidity matroid.

    Parameters
    ----------
    n: int
        Number of vertices (1 based ids).
    """

    def __init__(self, n: int):
        self.n = n
        self.pebbles = {v: 2 for v in range(1, n + 1)}
        self.out = {v: set() for v in range(1, n + 1)}
        self.accepted = []

    def _find_pebble(self, root: int, blocked: int) -> bool:
        # DFS along covered edges for a free pebble, then reverse the path to bring it to root
        visited = {root, blocked}
        parent = {}
        stack = [root]
        while stack:
            x = stack.pop()
            for y in sorted(self.out[x]):
                if y in visited:
                    continue
                visited.add(y)
                parent[y] = x
                if self.pebbles[y] > 0:
                    node = y
                    while node != root:
                        prev = parent[node]
                        self.out[prev].remove(node)
                        self.out[node].add(prev)
                        node = prev
                    self.pebbles[y] -= 1
                    self.pebbles[root] += 1
                    return True
                stack.append(y)
        return False

    def add_edge(self, u: int, v: int) -> bool:
        """Try to accept edge (u, v). Returns whether it was independent."""
        while self.pebbles[u] < 2:
            if not self._find_pebble(u, v):
                return False
        while self.pebbles[v] < 2:
            if not self._find_pebble(v, u):
                return False
        self.pebbles[u] -= 1
        self.out[u].add(v)
        self.accepted.append((min(u, v), max(u, v)))
        return True

    def independent_edges(self, edges) -> List[gr.Edge]:
        for u, v in edges:
            self.add_edge(u, v)
        return list(self.accepted)


def is_laman(g: gr.Graph) -> bool:
    """Laman test by the (2, 3)-pebble game: 2n - 3 edges, all of them independent."""
    if g.n < 3 or g.num_edges != 2 * g.n - 3:
        return False
    return len(PebbleGame(g.n).independent_edges(g.edges)) == g.num_edges


def is_laman_exhaustive(g: gr.Graph) -> bool:
    """Laman test by counting edges in every vertex subset. Exponential in n."""
    if g.n < 3 or g.num_edges != 2 * g.n - 3:
        return False
    for size in range(2, g.n):
        for subset in combinations(g.vertices, size):
            members = set(subset)
            induced = sum(1 for i, j in g.edges if i in members and j in members)
            if induced > 2 * size - 3:
                return False
    return True


def has_laman_spanning_subgraph(g: gr.Graph) -> bool:
    """Whether the generic rigidity matroid of g has rank 2n - 3."""
    if g.n < 3:
        return False
    return len(PebbleGame(g.n).independent_edges(g.edges)) == 2 * g.n - 3


def extract_laman_spanning_subgraph(
    fw: Framework, tolerance: float = num.RANK_TOLERANCE
) -> gr.Graph:
    """Spanning subgraph whose distance rigidity rows are a basis of the row space.

    Rows are scanned in ascending hash order and kept when they are independent
    of the rows kept so far (Gaussian elimination with partial pivoting).

    Parameters
    ----------
    fw: Framework
        Infinitesimally signed angle rigid framework.
    tolerance: float, optional
        Relative pivot threshold. Default 1e-8.

    Returns
    -------
    laman: Graph
        Subgraph with 2n - 3 edges.
    """
    if not analyze(fw, tolerance).is_isar:
        raise NotISAR("Framework is not infinitesimally signed angle rigid")
    matrix = distance_rigidity_matrix(fw)
    target = 2 * fw.n - 3
    threshold = tolerance * max(1.0, float(np.abs(matrix).max(initial=0.0)))
    pivots = []
    kept = []
    for edge, row in zip(fw.graph.edges, matrix):
        residual = row.copy()
        for column, pivot_row in pivots:
            residual -= residual[column] * pivot_row
        column = int(np.argmax(np.abs(residual)))
        if abs(residual[column]) > threshold:
            pivots.append((column, residual / residual[column]))
            kept.append(edge)
            if len(kept) == target:
                break
    if len(kept) != target:
        raise NotISAR(
            "Found only %d independent distance rows, need %d" % (len(kept), target)
        )
    return fw.graph.edge_subgraph(kept)


def random_configuration(
    n: int, rng: np.random.Generator, min_separation: float = 0.0, max_tries: int = 1000
) -> np.ndarray:
    """Uniform points in [0, 1]^2, redrawn until all pairs are min_separation apart."""
    for _ in range(max_tries):
        config = rng.uniform(0.0, 1.0, size=(n, 2))
        if n < 2 or pdist(config).min() > max(min_separation, geo.COINCIDENCE_TOLERANCE):
            return config
    raise ValueError(
        "Could not place %d points %.3g apart in %d tries" % (n, min_separation, max_tries)
    )


@dataclass
class GenericVerdict:
    samples: List[bool]
    majority: bool
    combinatorial: bool
    trials: int
    seed: int
    rng_algorithm: str = num.RNG_ALGORITHM

    def to_dict(self) -> dict:
        return {
            "samples": list(self.samples),
            "majority": self.majority,
            "combinatorial": self.combinatorial,
            "trials": self.trials,
            "seed": self.seed,
            "rng_algorithm": self.rng_algorithm,
        }


def generic_verdict(
    g: gr.Graph, trials: int = 10, seed: int = 0, tolerance: float = num.RANK_TOLERANCE
) -> GenericVerdict:
    """Generic signed angle rigidity of a graph.

    Each trial draws a uniform configuration from its own child seed, so the
    verdicts do not depend on the order the trials are evaluated in. The
    combinatorial verdict is the pebble game test for a Laman spanning subgraph.
    """
    samples = []
    for child in num.spawn_seeds(seed, trials):
        config = random_configuration(g.n, num.seeded_rng(child))
        samples.append(analyze(Framework(g, config), tolerance).is_isar)
    return GenericVerdict(
        samples=samples,
        majority=sum(samples) * 2 > trials,
        combinatorial=has_laman_spanning_subgraph(g),
        trials=trials,
        seed=seed,
    )


def same_shape(p: np.ndarray, q: np.ndarray, tolerance: float = 1e-9) -> bool:
    """Whether q = c R(theta) p + xi for some c > 0, theta and xi."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    zp = (p[:, 0] - p[:, 0].mean()) + 1j * (p[:, 1] - p[:, 1].mean())
    zq = (q[:, 0] - q[:, 0].mean()) + 1j * (q[:, 1] - q[:, 1].mean())
    norm_p = np.vdot(zp, zp).real
    if norm_p == 0:
        return bool(np.allclose(zq, 0, atol=tolerance))
    factor = np.vdot(zp, zq) / norm_p
    residual = np.linalg.norm(zq - factor * zp)
    return bool(abs(factor) > 0 and residual <= tolerance * max(1.0, np.linalg.norm(zq)))
