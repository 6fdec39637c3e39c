"""Distributed network localization from signed angle measurements.

Followers estimate the bearings to their neighbours from the measured signed
angles (a linear consensus-like system pinned by the anchor pair bearings)
and, in cascade, their own locations from the bearing estimates.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple
import numpy as np

import rigidnet.ais.ais as ais_lib
import rigidnet.geometry.geometry as geo
import rigidnet.graph.graph as gr
import rigidnet.numerics.numerics as num
import rigidnet.rigidity.rigidity as rig
import rigidnet.rigidnet as rn
from rigidnet.exceptions import (
    AssumptionViolated,
    InvalidVertex,
    MissingAngleMeasurement,
    NoAdjacentAnchors,
    NotLocalizable,
    ScenarioError,
)

DEFAULT_STEP = 1e-3
DEFAULT_HORIZON = 50.0
DEFAULT_RECORD_INTERVAL = 0.05
DEFAULT_GAIN = 1.0
LOCATION_THRESHOLD = 1e-4
BEARING_THRESHOLD = 1e-6
AIS_MODES = ("minimal", "local", "full")

Pair = Tuple[int, int]


@dataclass(eq=False)
class SensorNetwork:
    """Framework of true sensor locations plus the anchors that know theirs.

    Parameters
    ----------
    framework: Framework
        Sensing graph and true locations.
    anchors: sequence of int
        Anchor vertex ids.
    """

    framework: rig.Framework
    anchors: Tuple[int, ...] = ()

    def __post_init__(self):
        anchors = tuple(sorted(set(int(a) for a in self.anchors)))
        for a in anchors:
            if not 1 <= a <= self.framework.n:
                raise InvalidVertex("Anchor %d is outside 1..%d" % (a, self.framework.n))
        self.anchors = anchors

    @property
    def followers(self) -> Tuple[int, ...]:
        anchors = set(self.anchors)
        return tuple(v for v in self.framework.graph.vertices if v not in anchors)

    def adjacent_anchor_pairs(self) -> List[gr.Edge]:
        anchors = set(self.anchors)
        return [e for e in self.framework.graph.edges if e[0] in anchors and e[1] in anchors]

    def assumption_violations(self, tolerance: float = num.RANK_TOLERANCE) -> List[str]:
        """Unmet parts of the standing assumption (ISAR Laman, two anchors, an anchor edge)."""
        problems = []
        report = rig.analyze(self.framework, tolerance)
        if not report.is_isar:
            problems.append("framework is not infinitesimally signed angle rigid")
        elif not report.is_laman:
            problems.append("graph is not a Laman graph")
        if len(self.anchors) < 2:
            problems.append("fewer than two anchors")
        if not self.adjacent_anchor_pairs():
            problems.append("no two anchors are neighbours")
        return problems


@dataclass
class LocalizationState:
    """Location estimates for all nodes and bearing estimates per directed pair.

    p_hat rows follow vertex ids (row v - 1); b_hat rows follow pairs.
    """

    p_hat: np.ndarray
    b_hat: np.ndarray
    pairs: List[Pair]

    def bearing_estimates(self) -> Dict[Pair, np.ndarray]:
        return {pair: self.b_hat[r] for r, pair in enumerate(self.pairs)}

    def to_dict(self) -> dict:
        return {
            "positions": {str(v + 1): p.tolist() for v, p in enumerate(self.p_hat)},
            "bearings": {"%d,%d" % pair: b.tolist() for pair, b in zip(self.pairs, self.b_hat)},
        }


@dataclass
class LocalizationTrajectory:
    times: np.ndarray
    location_error: np.ndarray
    bearing_error: np.ndarray
    final_state: LocalizationState
    estimates: np.ndarray
    seed: int
    rng_algorithm: str = num.RNG_ALGORITHM

    def tail_fit(self) -> num.FitResult:
        return num.log_error_tail_fit(self.times, self.location_error)

    def summary(self) -> dict:
        summary = {
            "final_time": float(self.times[-1]),
            "final_location_error": float(self.location_error[-1]),
            "final_bearing_error": float(self.bearing_error[-1]),
            "initial_location_error": float(self.location_error[0]),
            "initial_bearing_error": float(self.bearing_error[0]),
            "converged": bool(
                self.location_error[-1] < LOCATION_THRESHOLD
                and self.bearing_error[-1] < BEARING_THRESHOLD
            ),
            "seed": self.seed,
            "rng_algorithm": self.rng_algorithm,
        }
        try:
            summary["location_fit"] = self.tail_fit().to_dict()
        except ValueError:
            summary["location_fit"] = None
        return summary


def check_localizable(net: SensorNetwork, tolerance: float = num.RANK_TOLERANCE) -> bool:
    """Signed angle localizable iff the framework is ISAR and there are two or more anchors."""
    return len(net.anchors) >= 2 and rig.analyze(net.framework, tolerance).is_isar


def rotated_impostor(net: SensorNetwork) -> np.ndarray:
    """Configuration q != p with the same signed angles that keeps a single anchor fixed.

    q = (I kron R(pi/2)) p + 1 kron eta with eta = (I - R(pi/2)) p_a for the
    first anchor a (no shift without anchors).
    """
    quarter = geo.rotation_matrix(np.pi / 2)
    config = net.framework.config
    shift = np.zeros(2)
    if net.anchors:
        shift = (np.eye(2) - quarter) @ net.framework.position(net.anchors[0])
    return config @ quarter.T + shift


def local_measurement_ais(gais: gr.AngleIndexSet, i: int) -> gr.AngleIndexSet:
    """Triples node i measures itself: those centred at i."""
    return gais.centered_at(i)


def estimation_pairs(ais: gr.AngleIndexSet) -> List[Pair]:
    """Directed pairs (i, j), (j, i) for every edge the angle index set covers."""
    pairs = []
    for i, j in ais.covered_edges():
        pairs.extend([(i, j), (j, i)])
    return pairs


class BearingEstimator:
    """Linear bearing estimation dynamics assembled once as a matrix.

    For every canonical triple (a, c, b) with measured angle alpha the four
    directed pairs it touches receive
        (c, a): b_ca - R(alpha)^T b_cb
        (c, b): b_cb - R(alpha) b_ca
        (a, c): b_ac + R(alpha)^T b_cb
        (b, c): b_bc + R(alpha) b_ca
    and the derivative of each pair is minus the sum of its terms. Pinned
    pairs have zero derivative.

    Parameters
    ----------
    ais: AngleIndexSet
        Angle index set the estimator runs on.
    angles: mapping
        Measured signed angle per triple.
    pinned: iterable of pairs, optional
        Directed pairs with known bearings.
    gain: float, optional
        Positive factor on the whole right-hand side. Default 1.
    """

    def __init__(
        self,
        ais: gr.AngleIndexSet,
        angles: Mapping[gr.Triple, float],
        pinned: Iterable[Pair] = (),
        gain: float = DEFAULT_GAIN,
    ):
        if not gain > 0:
            raise ScenarioError("Estimator gain must be positive, got %r" % (gain,))
        self.ais = ais
        self.gain = float(gain)
        self.pairs = estimation_pairs(ais)
        self.index = {pair: r for r, pair in enumerate(self.pairs)}
        self.pinned = set(tuple(p) for p in pinned)
        for pair in self.pinned:
            if pair not in self.index:
                raise AssumptionViolated(
                    "Pinned pair %s is not covered by the angle index set" % (pair,)
                )
        self.matrix = self._assemble(angles)

    def _assemble(self, angles: Mapping[gr.Triple, float]) -> np.ndarray:
        m = len(self.pairs)
        matrix = np.zeros((2 * m, 2 * m))

        def add(target: Pair, source: Pair, block: np.ndarray) -> None:
            if target in self.pinned:
                return
            r, s = self.index[target], self.index[source]
            matrix[2 * r : 2 * r + 2, 2 * r : 2 * r + 2] -= np.eye(2)
            matrix[2 * r : 2 * r + 2, 2 * s : 2 * s + 2] += block

        for a, c, b in self.ais.triples:
            if (a, c, b) not in angles:
                raise MissingAngleMeasurement(
                    "No measurement for triple %s" % ((a, c, b),)
                )
            rotation = geo.rotation_matrix(angles[(a, c, b)])
            add((c, a), (c, b), rotation.T)
            add((c, b), (c, a), rotation)
            add((a, c), (c, b), -rotation.T)
            add((b, c), (c, a), -rotation)
        return self.gain * matrix

    def rhs(self, b_hat: np.ndarray) -> np.ndarray:
        """Derivative of the (m, 2) bearing estimates."""
        return (self.matrix @ b_hat.ravel()).reshape(-1, 2)


def bearing_estimator_rhs(
    b_hat: Mapping[Pair, np.ndarray],
    gais: gr.AngleIndexSet,
    angles: Mapping[gr.Triple, float],
    pins: Mapping[Pair, np.ndarray],
) -> Dict[Pair, np.ndarray]:
    """Derivative of every bearing estimate, keyed by directed pair.

    Parameters
    ----------
    b_hat: mapping
        Current estimate per directed pair covered by gais.
    gais: AngleIndexSet
        Angle index set.
    angles: mapping
        Measured signed angle per triple.
    pins: mapping
        Anchor pair bearings; their derivatives are zero and their values are
        taken from here instead of b_hat.

    Returns
    -------
    derivative: dict
    """
    estimator = BearingEstimator(gais, angles, pinned=pins.keys())
    stacked = np.array(
        [pins[pair] if pair in pins else b_hat[pair] for pair in estimator.pairs], dtype=float
    )
    derivative = estimator.rhs(stacked)
    return {pair: derivative[r] for r, pair in enumerate(estimator.pairs)}


def position_estimator_rhs(
    p_hat: np.ndarray,
    b_hat: np.ndarray,
    pairs: Sequence[Pair],
    anchors: Sequence[int],
    gain: float = DEFAULT_GAIN,
) -> np.ndarray:
    """Location estimate derivative: -gain * sum_j P(b_hat_ij) (p_hat_i - p_hat_j) for followers.

    The bearing estimates need not be unit vectors.
    """
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2) - 1
    heads, tails = pairs[:, 0], pairs[:, 1]
    diffs = p_hat[heads] - p_hat[tails]
    along = np.sum(b_hat * diffs, axis=1)
    projected = diffs - b_hat * along[:, None]
    derivative = np.zeros_like(p_hat)
    np.add.at(derivative, heads, -gain * projected)
    derivative[np.asarray(anchors, dtype=int) - 1] = 0.0
    return derivative


def augment_gais_for_anchors(gais: gr.AngleIndexSet, net: SensorNetwork) -> gr.AngleIndexSet:
    """Make sure an anchor edge (i, j) is measured by some triple.

    If no triple of gais uses the first adjacent anchor pair, one triple
    (i, j, k) is added with k the smallest other neighbour of j already on the
    host of gais, and the anchor edge joins the host.
    """
    anchor_pairs = net.adjacent_anchor_pairs()
    if not anchor_pairs:
        raise NoAdjacentAnchors("No two anchors share an edge")
    covered = set(gais.covered_edges())
    if any(pair in covered for pair in anchor_pairs):
        return gais
    i, j = anchor_pairs[0]
    host = gais.host
    for center, outer in ((j, i), (i, j)):
        candidates = [k for k in host.neighbors(center) if k != outer]
        if candidates:
            k = candidates[0]
            new_host = gr.Graph(host.n, host.edges + ((i, j),)) if not host.has_edge(i, j) else host
            return gr.AngleIndexSet(new_host, gais.triples + ((outer, center, k),))
    raise AssumptionViolated(
        "Neither anchor %d nor %d has another neighbour on the angle index set host" % (i, j)
    )


def localization_ais(
    net: SensorNetwork, mode: str = "minimal", tolerance: float = num.RANK_TOLERANCE
) -> gr.AngleIndexSet:
    """Angle index set the estimator runs on.

    "minimal": algorithm1_minimal_gais followed by the anchor edge augmentation;
    "local": per-node star patterns; "full": every triple.
    """
    if mode == "minimal":
        gais = ais_lib.algorithm1_minimal_gais(net.framework, tolerance).ais
        return augment_gais_for_anchors(gais, net)
    if mode == "local":
        return ais_lib.decentralized_local_ais(net.framework)
    if mode == "full":
        return gr.all_angle_triples(net.framework.graph)
    raise ScenarioError("Unknown angle index set mode %r; use one of %s" % (mode, AIS_MODES))


class LocalizationSystem:
    """Joint bearing and location estimator as an ODE.

    State layout: the (m, 2) bearing estimates followed by the (n, 2) location
    estimates, flattened. Anchor pair bearings and anchor locations are reset
    to their true values by the projection hook after every step.

    Parameters
    ----------
    net: SensorNetwork
        Network with true locations (used only for measurements and pins).
    ais: AngleIndexSet
        Angle index set the estimator runs on.
    bearing_gain, position_gain: float, optional
        Gains of the two estimators. Default 1.
    """

    def __init__(
        self,
        net: SensorNetwork,
        ais: gr.AngleIndexSet,
        bearing_gain: float = DEFAULT_GAIN,
        position_gain: float = DEFAULT_GAIN,
    ):
        if not position_gain > 0:
            raise ScenarioError("Estimator gain must be positive, got %r" % (position_gain,))
        self.net = net
        self.ais = ais
        self.position_gain = float(position_gain)
        angles = ais_lib.measure_signed_angles(net.framework, ais)
        pins = {}
        for i, j in net.adjacent_anchor_pairs():
            if (i, j) in set(ais.covered_edges()):
                b = geo.bearing(net.framework.position(i), net.framework.position(j))
                pins[(i, j)] = b
                pins[(j, i)] = -b
        self.pins = pins
        self.estimator = BearingEstimator(ais, angles, pinned=pins.keys(), gain=bearing_gain)
        self.pairs = self.estimator.pairs
        self.m = len(self.pairs)
        self.n = net.framework.n
        self.anchor_rows = np.asarray(net.anchors, dtype=int) - 1
        self.pin_rows = np.array([self.estimator.index[p] for p in pins], dtype=int)
        self.pin_values = np.array([pins[p] for p in pins], dtype=float).reshape(-1, 2)
        self.true_bearings = self._true_bearings()

    def _true_bearings(self) -> np.ndarray:
        config = self.net.framework.config
        pairs = np.asarray(self.pairs, dtype=int) - 1
        unit, _ = geo.bearings(config[pairs[:, 0]], config[pairs[:, 1]])
        return unit

    def split(self, state: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        b_hat = state[: 2 * self.m].reshape(-1, 2)
        p_hat = state[2 * self.m :].reshape(-1, 2)
        return b_hat, p_hat

    def join(self, b_hat: np.ndarray, p_hat: np.ndarray) -> np.ndarray:
        return np.concatenate([np.ravel(b_hat), np.ravel(p_hat)])

    def rhs(self, t: float, state: np.ndarray) -> np.ndarray:
        b_hat, p_hat = self.split(state)
        db = self.estimator.rhs(b_hat)
        dp = position_estimator_rhs(
            p_hat, b_hat, self.pairs, self.net.anchors, self.position_gain
        )
        return self.join(db, dp)

    def project(self, t: float, state: np.ndarray) -> np.ndarray:
        state = state.copy()
        b_hat, p_hat = self.split(state)
        if len(self.pin_rows):
            b_hat[self.pin_rows] = self.pin_values
        if len(self.anchor_rows):
            p_hat[self.anchor_rows] = self.net.framework.config[self.anchor_rows]
        return state

    def ode_system(self) -> num.OdeSystem:
        return num.OdeSystem(dimension=2 * (self.m + self.n), rhs=self.rhs, project=self.project)

    def bearing_system(self) -> num.OdeSystem:
        """Bearing estimates alone; they never read the location estimates."""

        def rhs(t, b):
            return self.estimator.rhs(b.reshape(-1, 2)).ravel()

        def project(t, b):
            b = b.reshape(-1, 2).copy()
            if len(self.pin_rows):
                b[self.pin_rows] = self.pin_values
            return b.ravel()

        return num.OdeSystem(dimension=2 * self.m, rhs=rhs, project=project)

    def exact_state(self) -> np.ndarray:
        return self.join(self.true_bearings, self.net.framework.config)

    def random_state(self, seed: int) -> np.ndarray:
        rng = num.seeded_rng(seed)
        b_hat = rng.uniform(-1.0, 1.0, size=(self.m, 2))
        p_hat = rng.uniform(-1.0, 1.0, size=(self.n, 2))
        return self.project(0.0, self.join(b_hat, p_hat))

    def errors(self, state: np.ndarray) -> Tuple[float, float]:
        b_hat, p_hat = self.split(state)
        location = np.sum(np.linalg.norm(p_hat - self.net.framework.config, axis=1))
        bearing = np.sum(np.linalg.norm(b_hat - self.true_bearings, axis=1))
        return float(location), float(bearing)


def _check_localizable(net: SensorNetwork, tolerance: float) -> None:
    if not check_localizable(net, tolerance):
        raise NotLocalizable(
            "Network is not signed angle localizable: it needs an ISAR framework and at "
            "least two anchors (has %d); with fewer anchors a rotated configuration "
            "satisfies every angle constraint" % len(net.anchors)
        )


def _check_assumptions(net: SensorNetwork, gais: gr.AngleIndexSet) -> None:
    anchor_pairs = net.adjacent_anchor_pairs()
    if not anchor_pairs:
        raise AssumptionViolated("No two anchors share an edge")
    covered = set(gais.covered_edges())
    if not any(pair in covered for pair in anchor_pairs):
        raise AssumptionViolated(
            "No triple measures an anchor edge; apply augment_gais_for_anchors first"
        )
    if not gr.is_angle_connected(gais):
        raise AssumptionViolated("Angle index set is not angle connected")


def simulate_localization(
    net: SensorNetwork,
    gais: Optional[gr.AngleIndexSet] = None,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    horizon: float = DEFAULT_HORIZON,
    record_interval: float = DEFAULT_RECORD_INTERVAL,
    initial_state: Optional[np.ndarray] = None,
    diagnostic: bool = False,
    tolerance: float = num.RANK_TOLERANCE,
    bearing_gain: float = DEFAULT_GAIN,
    position_gain: float = DEFAULT_GAIN,
) -> LocalizationTrajectory:
    """Integrate the bearing and location estimators with RK4.

    Parameters
    ----------
    net: SensorNetwork
        Network to localize.
    gais: AngleIndexSet, optional
        Angle index set; defaults to localization_ais(net, "minimal").
    seed: int, optional
        Seed for the uniform [-1, 1]^2 initial estimates. Default 0.
    step: float, optional
        RK4 step. Default 1e-3.
    horizon: float, optional
        Final time. Default 50.
    record_interval: float, optional
        Time between recorded samples. Default 0.05.
    initial_state: numpy.ndarray, optional
        Start from this flattened state instead of a random one.
    diagnostic: bool, optional
        Skip the localizability and standing assumption checks.
    tolerance: float, optional
        Relative rank tolerance for the checks.
    bearing_gain, position_gain: float, optional
        Estimator gains. Default 1.

    Returns
    -------
    trajectory: LocalizationTrajectory
    """
    if not diagnostic:
        _check_localizable(net, tolerance)
    if gais is None:
        gais = localization_ais(net, "minimal", tolerance)
    if not diagnostic:
        _check_assumptions(net, gais)
    system = LocalizationSystem(net, gais, bearing_gain, position_gain)
    state0 = system.random_state(seed) if initial_state is None else np.asarray(initial_state, float)
    stride = max(1, int(round(record_interval / step)))
    trajectory = num.integrate(system.ode_system(), state0, 0.0, horizon, step, stride=stride)

    errors = np.array([system.errors(state) for state in trajectory.states])
    estimates = np.array([system.split(state)[1] for state in trajectory.states])
    b_final, p_final = system.split(trajectory.final_state)
    return LocalizationTrajectory(
        times=trajectory.times,
        location_error=errors[:, 0],
        bearing_error=errors[:, 1],
        final_state=LocalizationState(p_hat=p_final.copy(), b_hat=b_final.copy(), pairs=system.pairs),
        estimates=estimates,
        seed=seed,
    )


def network_from_scenario(scenario: dict) -> SensorNetwork:
    fw = rig.framework_from_dict(scenario)
    anchors = scenario.get("anchors", [])
    if not isinstance(anchors, list) or not all(isinstance(a, int) for a in anchors):
        raise ScenarioError('"anchors" must be a list of vertex ids')
    return SensorNetwork(fw, tuple(anchors))


def run_localization_scenario(scenario: dict, **overrides) -> LocalizationTrajectory:
    """Run a localization scenario dict; keyword overrides replace scenario values."""
    settings = dict(scenario)
    settings.update({k: v for k, v in overrides.items() if v is not None})
    net = network_from_scenario(settings)
    _check_localizable(net, num.RANK_TOLERANCE)
    return simulate_localization(
        net,
        localization_ais(net, settings.get("ais", "minimal")),
        seed=rn.resolve_seed(scenario=settings),
        step=rn.positive_setting(settings, "step", DEFAULT_STEP),
        horizon=rn.positive_setting(settings, "horizon", DEFAULT_HORIZON),
        record_interval=rn.positive_setting(settings, "record_interval", DEFAULT_RECORD_INTERVAL),
        bearing_gain=rn.positive_setting(settings, "bearing_gain", DEFAULT_GAIN),
        position_gain=rn.positive_setting(settings, "position_gain", DEFAULT_GAIN),
    )


def trajectory_to_csv(trajectory: LocalizationTrajectory, path: str) -> None:
    data = np.column_stack(
        [trajectory.times, trajectory.location_error, trajectory.bearing_error]
    )
    np.savetxt(
        path,
        data,
        delimiter=",",
        header="# schema_version: %d\nt,location_error,bearing_error" % rn.SCHEMA_VERSION,
        comments="",
        fmt="%.17g",
    )


def final_state_to_dict(trajectory: LocalizationTrajectory) -> dict:
    out = rn.with_schema_version(trajectory.final_state.to_dict())
    out["summary"] = trajectory.summary()
    return out


def localization_run_namer(run_params: dict) -> str:
    return "localize_seed_%d_ais_%s" % (run_params["seed"], run_params.get("ais", "minimal"))


def localization_run_submitter(run_dir: str) -> str:
    """Run the scenario in run_dir once, writing results.json and status.json."""
    return rn.scenario_run_submitter(run_dir, run_localization_scenario, final_state_to_dict)
