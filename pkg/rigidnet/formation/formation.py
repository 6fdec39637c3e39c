"""Formation stabilization of single-integrator agents from signed angles.

Every agent i carries a body frame rotated by its attitude beta_i. It
measures the body-frame direction alpha^i_ij of each neighbour and the
attitude difference beta_ij, and knows the desired angles alpha*_ij of its
edges relative to the reference edge (1, 2).
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import warnings
import numpy as np
from scipy.spatial.distance import pdist, squareform

import rigidnet.ais.ais as ais_lib
import rigidnet.geometry.geometry as geo
import rigidnet.graph.graph as gr
import rigidnet.numerics.numerics as num
import rigidnet.rigidity.rigidity as rig
import rigidnet.rigidnet as rn
from rigidnet.exceptions import AgentCollision, AssumptionViolated, ScenarioError

DEFAULT_STEP = 0.005
DEFAULT_HORIZON = 100.0
DEFAULT_RECORD_INTERVAL = 0.1
DEFAULT_INIT_BOX = (0.0, 5.0)
DEFAULT_ATTITUDE_RANGE = (-np.pi / 2, np.pi / 2)
COLLISION_DISTANCE = 1e-6
EQUILIBRIUM_TOLERANCE = 1e-3
ANGLE_THRESHOLD = 1e-3
ATTITUDE_THRESHOLD = 1e-6
EQUILIBRIA = ("target", "reversed", "mirror", "unconverged")


@dataclass
class AgentState:
    position: np.ndarray
    attitude: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.attitude = geo.wrap_angle(float(self.attitude))


@dataclass(eq=False)
class TargetFormation:
    """Target framework (G, p*) with its constraint set and desired angles.

    Attributes
    ----------
    framework: Framework
        Sensing graph and target configuration p*.
    gais: AngleIndexSet
        Minimal globally constraining angle index set of the target.
    reference_table: ReferenceAngleTable
        alpha*_ij for both directions of every edge; b*_ij = R(alpha*_ij) b*_ref.
    """

    framework: rig.Framework
    gais: gr.AngleIndexSet
    reference_table: ais_lib.ReferenceAngleTable

    def __post_init__(self):
        triples = gr.all_angle_triples(self.framework.graph)
        self.angle_triples = triples.zero_based()
        self.target_angles = geo.signed_angles(self.framework.config, self.angle_triples)

    @classmethod
    def from_framework(
        cls,
        fw: rig.Framework,
        reference: Tuple[int, int] = (1, 2),
        tolerance: float = num.RANK_TOLERANCE,
    ) -> "TargetFormation":
        """Check that the target is ISAR and derive its constraint set and desired angles."""
        if not rig.analyze(fw, tolerance).is_isar:
            raise AssumptionViolated(
                "Target formation is not infinitesimally signed angle rigid"
            )
        gais = ais_lib.algorithm1_minimal_gais(fw, tolerance).ais
        spanning = ais_lib.spanning_angle_index_set(fw.graph)
        angles = ais_lib.measure_signed_angles(fw, spanning)
        table = ais_lib.reference_angle_table(spanning, angles, reference)
        return cls(framework=fw, gais=gais, reference_table=table)

    @property
    def n(self) -> int:
        return self.framework.n

    @property
    def graph(self) -> gr.Graph:
        return self.framework.graph

    def desired_angle(self, i: int, j: int) -> float:
        return self.reference_table[(i, j)]

    def reference_bearing(self) -> np.ndarray:
        r1, r2 = self.reference_table.reference
        return geo.bearing(self.framework.position(r1), self.framework.position(r2))

    def to_dict(self) -> dict:
        out = self.framework.to_dict()
        out["gais"] = self.gais.to_dict()
        out["reference_table"] = self.reference_table.to_dict()
        return out


def measured_body_angle(agent: AgentState, p_j: np.ndarray) -> float:
    """Direction of neighbour p_j in the body frame of agent, in [0, 2pi)."""
    b_ij = geo.bearing(agent.position, p_j)
    return geo.wrap_angle(geo.polar_angle(b_ij) - agent.attitude)


def bar_matrix(alpha: float) -> np.ndarray:
    """[[1 - cos 2a, -sin 2a], [-sin 2a, 1 + cos 2a]]: twice the projection orthogonal to (cos a, sin a)."""
    c2 = np.cos(2 * alpha)
    s2 = np.sin(2 * alpha)
    return np.array([[1 - c2, -s2], [-s2, 1 + c2]])


def eta(beta_ij: float, alpha_star: float) -> np.ndarray:
    return geo.rotation_matrix((2 * alpha_star - beta_ij) / 2) @ np.array(
        [0.0, np.cos(beta_ij / 2)]
    )


def control_position(
    target: TargetFormation, i: int, positions: np.ndarray, attitudes: Sequence[float]
) -> np.ndarray:
    """Body-frame position input u^p_i of agent i.

    Parameters
    ----------
    target: TargetFormation
        Supplies the neighbours and desired angles of agent i.
    i: int
        Agent id.
    positions: numpy.ndarray
        (n, 2) current positions.
    attitudes: sequence of float
        Current attitudes.

    Returns
    -------
    u: numpy.ndarray
        -sum_j bar_matrix(alpha^i_ij) eta(beta_ij, alpha*_ij).
    """
    positions = np.asarray(positions, dtype=float)
    agent = AgentState(positions[i - 1], attitudes[i - 1])
    u = np.zeros(2)
    for j in target.graph.neighbors(i):
        alpha = measured_body_angle(agent, positions[j - 1])
        beta_ij = geo.wrap_to_pi(attitudes[i - 1] - attitudes[j - 1])
        u -= bar_matrix(alpha) @ eta(beta_ij, target.desired_angle(i, j))
    return u


def control_attitude(g: gr.Graph, i: int, attitudes: Sequence[float]) -> float:
    """Attitude input u^a_i = -sum_j beta_ij, differences wrapped into (-pi, pi]."""
    return -float(
        sum(geo.wrap_to_pi(attitudes[i - 1] - attitudes[j - 1]) for j in g.neighbors(i))
    )


def equilibrium_attitude(target: TargetFormation) -> float:
    """Common attitude at which p* itself is an equilibrium of the controller."""
    return geo.wrap_angle(geo.polar_angle(target.reference_bearing()) - np.pi / 2)


def _desired_bearings(target: TargetFormation, pairs: np.ndarray, common_attitude: float):
    angles = np.array([target.desired_angle(i, j) for i, j in pairs]) + common_attitude + np.pi / 2
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _directed_pairs(g: gr.Graph) -> np.ndarray:
    pairs = []
    for i, j in g.edges:
        pairs.extend([(i, j), (j, i)])
    return np.array(pairs, dtype=int).reshape(-1, 2)


def bearing_pursuit_field(
    positions: np.ndarray, common_attitude: float, target: TargetFormation
) -> np.ndarray:
    """Global frame velocity -2 sum_j P(b_ij) R(beta + alpha*_ij) e2 for every agent.

    Equals the closed loop once all attitudes agree on common_attitude.
    """
    positions = np.asarray(positions, dtype=float)
    pairs = _directed_pairs(target.graph)
    heads, tails = pairs[:, 0] - 1, pairs[:, 1] - 1
    b, _ = geo.bearings(positions[heads], positions[tails])
    desired = _desired_bearings(target, pairs, common_attitude)
    projected = desired - b * np.sum(b * desired, axis=1)[:, None]
    field = np.zeros_like(positions)
    np.add.at(field, heads, -2.0 * projected)
    return field


def shape_error(p: np.ndarray, target: TargetFormation) -> float:
    """Largest wrapped distance between the signed angles of p and p* over every triple."""
    alphas = geo.signed_angles(p, target.angle_triples)
    if len(alphas) == 0:
        return 0.0
    return float(np.max(geo.angular_distance(alphas, target.target_angles)))


def attitude_disagreement(g: gr.Graph, attitudes: Sequence[float]) -> float:
    """max |beta_i - beta_j| over edges, wrapped into [0, pi]."""
    attitudes = np.asarray(attitudes, dtype=float)
    edges = np.asarray(g.edges, dtype=int).reshape(-1, 2) - 1
    if len(edges) == 0:
        return 0.0
    return float(np.max(geo.angular_distance(attitudes[edges[:, 0]], attitudes[edges[:, 1]])))


def circular_mean(attitudes: Sequence[float]) -> float:
    attitudes = np.asarray(attitudes, dtype=float)
    return geo.wrap_angle(np.arctan2(np.sum(np.sin(attitudes)), np.sum(np.cos(attitudes))))


def classify_equilibrium(
    positions: np.ndarray,
    attitudes: Sequence[float],
    target: TargetFormation,
    tolerance: float = EQUILIBRIUM_TOLERANCE,
) -> str:
    """Which equilibrium a final state sits at.

    "target": bearings match the desired bearings of the common attitude;
    "reversed": bearings match their negation; "mirror": the configuration is
    the reflection of p*; otherwise "unconverged".
    """
    positions = np.asarray(positions, dtype=float)
    if attitude_disagreement(target.graph, attitudes) > tolerance:
        return "unconverged"
    pairs = _directed_pairs(target.graph)
    b, _ = geo.bearings(positions[pairs[:, 0] - 1], positions[pairs[:, 1] - 1])
    desired = _desired_bearings(target, pairs, circular_mean(attitudes))
    if np.max(np.linalg.norm(b - desired, axis=1)) < tolerance:
        return "target"
    if np.max(np.linalg.norm(b + desired, axis=1)) < tolerance:
        return "reversed"
    if shape_error(geo.reflect(positions), target) < tolerance:
        return "mirror"
    return "unconverged"


class FormationSystem:
    """Closed loop p_i' = R(beta_i) u^p_i, beta_i' = u^a_i for all agents at once.

    State layout: (n, 2) positions followed by n attitudes, flattened. The
    projection hook wraps attitudes into [0, 2pi) and aborts on collisions.
    """

    def __init__(self, target: TargetFormation, collision_distance: float = COLLISION_DISTANCE):
        self.target = target
        self.n = target.n
        self.collision_distance = collision_distance
        pairs = _directed_pairs(target.graph)
        self.heads = pairs[:, 0] - 1
        self.tails = pairs[:, 1] - 1
        self.alpha_star = np.array([target.desired_angle(i, j) for i, j in pairs])

    def split(self, state: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return state[: 2 * self.n].reshape(-1, 2), state[2 * self.n :]

    def join(self, positions: np.ndarray, attitudes: np.ndarray) -> np.ndarray:
        return np.concatenate([np.ravel(positions), np.ravel(attitudes)])

    def position_field(self, positions: np.ndarray, attitudes: np.ndarray) -> np.ndarray:
        b, _ = geo.bearings(positions[self.heads], positions[self.tails])
        alpha = geo.polar_angle(b) - attitudes[self.heads]
        beta_ij = geo.wrap_to_pi(attitudes[self.heads] - attitudes[self.tails])
        theta = (2 * self.alpha_star - beta_ij) / 2
        half = np.cos(beta_ij / 2)
        eta_x, eta_y = -np.sin(theta) * half, np.cos(theta) * half
        c2, s2 = np.cos(2 * alpha), np.sin(2 * alpha)
        terms = np.column_stack([(1 - c2) * eta_x - s2 * eta_y, -s2 * eta_x + (1 + c2) * eta_y])
        u = np.zeros((self.n, 2))
        np.add.at(u, self.heads, -terms)
        cos_b, sin_b = np.cos(attitudes), np.sin(attitudes)
        return np.column_stack([cos_b * u[:, 0] - sin_b * u[:, 1], sin_b * u[:, 0] + cos_b * u[:, 1]])

    def attitude_field(self, attitudes: np.ndarray) -> np.ndarray:
        beta_ij = geo.wrap_to_pi(attitudes[self.heads] - attitudes[self.tails])
        u = np.zeros(self.n)
        np.add.at(u, self.heads, -beta_ij)
        return u

    def rhs(self, t: float, state: np.ndarray) -> np.ndarray:
        positions, attitudes = self.split(state)
        return self.join(self.position_field(positions, attitudes), self.attitude_field(attitudes))

    def project(self, t: float, state: np.ndarray) -> np.ndarray:
        state = state.copy()
        positions, attitudes = self.split(state)
        attitudes[:] = geo.wrap_angle(attitudes)
        if self.n > 1:
            distances = squareform(pdist(positions))
            np.fill_diagonal(distances, np.inf)
            if distances.min() < self.collision_distance:
                a, b = np.unravel_index(np.argmin(distances), distances.shape)
                raise AgentCollision(
                    "Agents %d and %d collided at t = %.6g (distance %.3g)"
                    % (a + 1, b + 1, t, distances[a, b])
                )
        return state

    def ode_system(self) -> num.OdeSystem:
        return num.OdeSystem(dimension=3 * self.n, rhs=self.rhs, project=self.project)


@dataclass
class FormationTrajectory:
    times: np.ndarray
    positions: np.ndarray
    attitudes: np.ndarray
    angle_error: np.ndarray
    attitude_error: np.ndarray
    equilibrium: str
    seed: int
    rng_algorithm: str = num.RNG_ALGORITHM

    @property
    def final_state(self) -> List[AgentState]:
        return [AgentState(p, beta) for p, beta in zip(self.positions[-1], self.attitudes[-1])]

    def tail_fit(self) -> num.FitResult:
        return num.log_error_tail_fit(self.times, self.angle_error)

    def summary(self) -> dict:
        summary = {
            "final_time": float(self.times[-1]),
            "final_angle_error": float(self.angle_error[-1]),
            "final_attitude_error": float(self.attitude_error[-1]),
            "initial_angle_error": float(self.angle_error[0]),
            "initial_attitude_error": float(self.attitude_error[0]),
            "converged": bool(
                self.angle_error[-1] < ANGLE_THRESHOLD
                and self.attitude_error[-1] < ATTITUDE_THRESHOLD
            ),
            "equilibrium": self.equilibrium,
            "flagged": self.equilibrium != "target",
            "seed": self.seed,
            "rng_algorithm": self.rng_algorithm,
        }
        try:
            summary["angle_fit"] = self.tail_fit().to_dict()
        except ValueError:
            summary["angle_fit"] = None
        return summary


def random_initial_state(
    n: int,
    seed: int,
    init_box: Tuple[float, float] = DEFAULT_INIT_BOX,
    attitude_range: Tuple[float, float] = DEFAULT_ATTITUDE_RANGE,
) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform positions in init_box^2 and attitudes in attitude_range."""
    lo, hi = init_box
    a_lo, a_hi = attitude_range
    if not (hi > lo and a_hi > a_lo):
        raise ScenarioError("Initial ranges must have lo < hi, got %s and %s" % (init_box, attitude_range))
    if a_hi - a_lo > np.pi:
        warnings.warn(
            "Initial attitudes span %.3g rad; attitude consensus is only guaranteed "
            "for spreads below pi" % (a_hi - a_lo)
        )
    rng = num.seeded_rng(seed)
    positions = rng.uniform(lo, hi, size=(n, 2))
    attitudes = rng.uniform(a_lo, a_hi, size=n)
    return positions, attitudes


def simulate_formation(
    target: TargetFormation,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    horizon: float = DEFAULT_HORIZON,
    record_interval: float = DEFAULT_RECORD_INTERVAL,
    init_box: Tuple[float, float] = DEFAULT_INIT_BOX,
    attitude_range: Tuple[float, float] = DEFAULT_ATTITUDE_RANGE,
    initial_positions: Optional[np.ndarray] = None,
    initial_attitudes: Optional[Sequence[float]] = None,
    collision_distance: float = COLLISION_DISTANCE,
    tolerance: float = num.RANK_TOLERANCE,
) -> FormationTrajectory:
    """Integrate the closed loop with RK4 from a seeded or given initial state.

    Parameters
    ----------
    target: TargetFormation
        Target formation; must be ISAR.
    seed: int, optional
        Seed for the random initial state. Default 0.
    step: float, optional
        RK4 step. Default 0.005.
    horizon: float, optional
        Final time. Default 100.
    record_interval: float, optional
        Time between recorded samples. Default 0.1.
    init_box: tuple, optional
        Initial positions are uniform in init_box^2. Default (0, 5).
    attitude_range: tuple, optional
        Initial attitudes are uniform in this interval. Default (-pi/2, pi/2).
        Wider intervals are allowed with a warning.
    initial_positions, initial_attitudes: optional
        Start from this state instead; both must be given.
    collision_distance: float, optional
        Agents closer than this abort the run with AgentCollision.
    tolerance: float, optional
        Relative rank tolerance for the ISAR check.

    Returns
    -------
    trajectory: FormationTrajectory
    """
    if not rig.analyze(target.framework, tolerance).is_isar:
        raise AssumptionViolated("Target formation is not infinitesimally signed angle rigid")
    if (initial_positions is None) != (initial_attitudes is None):
        raise ScenarioError("Give both initial positions and initial attitudes, or neither")
    if initial_positions is None:
        positions0, attitudes0 = random_initial_state(target.n, seed, init_box, attitude_range)
    else:
        positions0 = np.asarray(initial_positions, dtype=float).reshape(target.n, 2)
        attitudes0 = np.asarray(initial_attitudes, dtype=float).reshape(target.n)

    system = FormationSystem(target, collision_distance)
    stride = max(1, int(round(record_interval / step)))
    trajectory = num.integrate(
        system.ode_system(), system.join(positions0, attitudes0), 0.0, horizon, step, stride=stride
    )

    positions = trajectory.states[:, : 2 * target.n].reshape(len(trajectory.times), target.n, 2)
    attitudes = trajectory.states[:, 2 * target.n :]
    angle_error = np.array([shape_error(p, target) for p in positions])
    attitude_error = np.array([attitude_disagreement(target.graph, b) for b in attitudes])
    equilibrium = classify_equilibrium(positions[-1], attitudes[-1], target)
    if equilibrium != "target":
        warnings.warn(
            "Formation run with seed %d ended at the %s equilibrium (angle error %.3g)"
            % (seed, equilibrium, angle_error[-1])
        )
    return FormationTrajectory(
        times=trajectory.times,
        positions=positions,
        attitudes=attitudes,
        angle_error=angle_error,
        attitude_error=attitude_error,
        equilibrium=equilibrium,
        seed=seed,
    )


def _pair(settings: dict, key: str, default: Tuple[float, float]) -> Tuple[float, float]:
    value = settings.get(key, default)
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError('"%s" must be a [lo, hi] pair' % key)
    try:
        lo, hi = float(value[0]), float(value[1])
    except (TypeError, ValueError):
        raise ScenarioError('"%s" must hold two numbers, got %r' % (key, value))
    if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
        raise ScenarioError('"%s" must be a finite [lo, hi] pair with lo <= hi' % key)
    return lo, hi


def target_from_scenario(scenario: dict, tolerance: float = num.RANK_TOLERANCE) -> TargetFormation:
    """TargetFormation from {"graph": {...}, "target_positions": [[x, y], ...]}."""
    if "target_positions" not in scenario:
        raise ScenarioError('Formation scenario needs "target_positions"')
    fw = rig.framework_from_dict(
        {"graph": scenario.get("graph"), "positions": scenario["target_positions"]}
    )
    return TargetFormation.from_framework(fw, tolerance=tolerance)


def run_formation_scenario(scenario: dict, **overrides) -> FormationTrajectory:
    """Run a formation scenario dict; keyword overrides replace scenario values."""
    settings = dict(scenario)
    settings.update({k: v for k, v in overrides.items() if v is not None})
    target = target_from_scenario(settings)
    return simulate_formation(
        target,
        seed=rn.resolve_seed(scenario=settings),
        step=rn.positive_setting(settings, "step", DEFAULT_STEP),
        horizon=rn.positive_setting(settings, "horizon", DEFAULT_HORIZON),
        record_interval=rn.positive_setting(settings, "record_interval", DEFAULT_RECORD_INTERVAL),
        init_box=_pair(settings, "init_box", DEFAULT_INIT_BOX),
        attitude_range=_pair(settings, "init_attitude_range", DEFAULT_ATTITUDE_RANGE),
    )


def trajectory_to_csv(trajectory: FormationTrajectory, path: str) -> None:
    n = trajectory.positions.shape[1]
    columns = ["t"]
    for v in range(1, n + 1):
        columns.extend(["x%d" % v, "y%d" % v, "beta%d" % v])
    columns.extend(["angle_error", "attitude_error"])
    per_agent = np.concatenate(
        [trajectory.positions, trajectory.attitudes[:, :, None]], axis=2
    ).reshape(len(trajectory.times), -1)
    data = np.column_stack(
        [trajectory.times, per_agent, trajectory.angle_error, trajectory.attitude_error]
    )
    np.savetxt(
        path,
        data,
        delimiter=",",
        header="# schema_version: %d\n%s" % (rn.SCHEMA_VERSION, ",".join(columns)),
        comments="",
        fmt="%.17g",
    )


def final_state_to_dict(trajectory: FormationTrajectory) -> dict:
    out = rn.with_schema_version(
        {
            "positions": {str(v + 1): p.tolist() for v, p in enumerate(trajectory.positions[-1])},
            "attitudes": {str(v + 1): float(b) for v, b in enumerate(trajectory.attitudes[-1])},
        }
    )
    out["summary"] = trajectory.summary()
    return out


def formation_run_namer(run_params: dict) -> str:
    return "formation_seed_%d" % run_params["seed"]


def formation_run_submitter(run_dir: str) -> str:
    """Run the scenario in run_dir once, writing results.json and status.json."""
    return rn.scenario_run_submitter(run_dir, run_formation_scenario, final_state_to_dict)
