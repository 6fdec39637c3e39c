import pytest
import numpy as np
import rigidnet.ais.ais as ais_lib
import rigidnet.geometry.geometry as geo
import rigidnet.graph.graph as gr
import rigidnet.localization.localization as loc
import rigidnet.numerics.numerics as num
import rigidnet.rigidity.rigidity as rig
import rigidnet.rigidnet as rn
from rigidnet.exceptions import (
    AssumptionViolated,
    MissingAngleMeasurement,
    NoAdjacentAnchors,
    NotLocalizable,
    ScenarioError,
)


@pytest.fixture
def scenario():
    return rn.load_template("localization_six_sensors")


@pytest.fixture
def network(scenario):
    return loc.network_from_scenario(scenario)


@pytest.fixture
def triangle_network():
    fw = rig.Framework(gr.complete_graph(3), np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    return loc.SensorNetwork(fw, (1, 2))


@pytest.fixture(scope="module")
def converged():
    # the shipped scenario: minimal index set, unit gains, RK4 step 1e-3, horizon 50
    scenario = rn.load_template("localization_six_sensors")
    return loc.run_localization_scenario(scenario)


def test_scenario_network(network):
    assert network.anchors == (1, 2)
    assert network.followers == (3, 4, 5, 6)
    assert network.adjacent_anchor_pairs() == [(1, 2)]
    assert network.assumption_violations() == []
    assert loc.check_localizable(network)


def test_acceptance_run_converges(converged, scenario):
    assert "bearing_gain" not in scenario and "position_gain" not in scenario
    assert converged.bearing_error[-1] < loc.BEARING_THRESHOLD
    assert converged.location_error[-1] < loc.LOCATION_THRESHOLD
    fit = converged.tail_fit()
    assert fit.slope < -0.5
    assert fit.r_squared > 0.95
    summary = converged.summary()
    assert summary["converged"]
    assert summary["final_time"] == pytest.approx(50.0)
    assert summary["seed"] == 0


def test_acceptance_run_is_deterministic(converged, scenario):
    again = loc.run_localization_scenario(scenario, horizon=1.0)
    first_second = converged.location_error[: len(again.times)]
    assert np.allclose(first_second, again.location_error, rtol=1e-12, atol=0.0)


def test_one_anchor_is_not_localizable(network):
    single = loc.SensorNetwork(network.framework, (1,))
    assert not loc.check_localizable(single)
    assert "fewer than two anchors" in single.assumption_violations()
    with pytest.raises(NotLocalizable):
        loc.simulate_localization(single, horizon=1.0)
    assert not loc.check_localizable(loc.SensorNetwork(network.framework, ()))


def test_rotated_impostor_satisfies_every_angle(network):
    single = loc.SensorNetwork(network.framework, (1,))
    q = loc.rotated_impostor(single)
    triples = gr.all_angle_triples(network.framework.graph)
    before = rig.signed_angle_function(network.framework, triples)
    after = rig.signed_angle_function(network.framework.with_config(q), triples)
    assert np.all(geo.angular_distance(before, after) < 1e-9)
    assert np.allclose(q[0], network.framework.config[0], atol=1e-9)
    assert not np.allclose(q, network.framework.config)


def test_rotated_impostor_is_a_fixed_point(network):
    single = loc.SensorNetwork(network.framework, (1,))
    q = loc.rotated_impostor(single)
    system = loc.LocalizationSystem(single, loc.localization_ais(network, "full"))
    pairs = np.asarray(system.pairs) - 1
    b_q, _ = geo.bearings(q[pairs[:, 0]], q[pairs[:, 1]])
    state = system.join(b_q, q)
    assert np.allclose(system.rhs(0.0, state), 0.0, atol=1e-9)
    trajectory = loc.simulate_localization(
        single, system.ais, initial_state=state, step=0.01, horizon=1.0, diagnostic=True
    )
    assert np.allclose(trajectory.final_state.p_hat, q, atol=1e-9)


def test_local_measurement_ais():
    prism = gr.Graph(6, ((1, 2), (1, 3), (2, 3), (2, 6), (3, 4), (4, 5), (4, 6), (1, 5), (5, 6)))
    gais = gr.AngleIndexSet(
        prism, ((2, 1, 3), (1, 2, 6), (1, 3, 2), (2, 3, 4), (3, 4, 5), (5, 4, 6), (1, 5, 4), (4, 6, 5))
    )
    assert loc.local_measurement_ais(gais, 4).triples == ((3, 4, 5), (5, 4, 6))
    union = set()
    for i in prism.vertices:
        union |= set(loc.local_measurement_ais(gais, i).triples)
    assert union == set(gais.triples)
    path = gr.AngleIndexSet(gr.path_graph(3), ((1, 2, 3),))
    assert len(loc.local_measurement_ais(path, 1)) == 0


def test_bearing_estimator_rhs_vanishes_at_truth(network):
    gais = loc.localization_ais(network, "minimal")
    angles = ais_lib.measure_signed_angles(network.framework, gais)
    config = network.framework.config
    b_hat = {
        (i, j): geo.bearing(config[i - 1], config[j - 1]) for i, j in loc.estimation_pairs(gais)
    }
    pins = {(1, 2): b_hat[(1, 2)], (2, 1): b_hat[(2, 1)]}
    derivative = loc.bearing_estimator_rhs(b_hat, gais, angles, pins)
    assert set(derivative) == set(b_hat)
    for value in derivative.values():
        assert np.allclose(value, 0.0, atol=1e-12)


def test_bearing_estimator_pins_and_linearity(network):
    gais = loc.localization_ais(network, "full")
    angles = ais_lib.measure_signed_angles(network.framework, gais)
    rng = np.random.default_rng(0)
    pairs = loc.estimation_pairs(gais)
    b_hat = {pair: rng.uniform(-1, 1, 2) for pair in pairs}
    pins = {(1, 2): np.array([1.0, 0.0]), (2, 1): np.array([-1.0, 0.0])}
    derivative = loc.bearing_estimator_rhs(b_hat, gais, angles, pins)
    assert np.all(derivative[(1, 2)] == 0.0)
    assert np.all(derivative[(2, 1)] == 0.0)

    estimator = loc.BearingEstimator(gais, angles)
    x = rng.uniform(-1, 1, (len(pairs), 2))
    y = rng.uniform(-1, 1, (len(pairs), 2))
    assert np.allclose(estimator.rhs(x + 2 * y), estimator.rhs(x) + 2 * estimator.rhs(y))
    doubled = x.copy()
    doubled[0] *= 2
    changed = np.any(np.abs(estimator.rhs(doubled) - estimator.rhs(x)) > 1e-12, axis=1)
    touched = np.any(estimator.matrix.reshape(len(pairs), 2, len(pairs), 2)[:, :, 0, :] != 0, axis=(1, 2))
    assert np.array_equal(changed, touched)


def test_bearing_estimator_errors(network):
    gais = loc.localization_ais(network, "minimal")
    with pytest.raises(MissingAngleMeasurement):
        loc.BearingEstimator(gais, {})
    angles = ais_lib.measure_signed_angles(network.framework, gais)
    with pytest.raises(ScenarioError):
        loc.BearingEstimator(gais, angles, gain=0.0)
    with pytest.raises(ScenarioError):
        loc.LocalizationSystem(network, gais, position_gain=-1.0)


def test_position_estimator_rhs(network):
    config = network.framework.config
    pairs = loc.estimation_pairs(gr.all_angle_triples(network.framework.graph))
    index = np.asarray(pairs) - 1
    b_true, _ = geo.bearings(config[index[:, 0]], config[index[:, 1]])
    assert np.allclose(loc.position_estimator_rhs(config, b_true, pairs, network.anchors), 0.0)
    shifted = config + 0.3
    derivative = loc.position_estimator_rhs(shifted, b_true, pairs, network.anchors, gain=4.0)
    assert np.all(derivative[[0, 1]] == 0.0)
    noisy = np.random.default_rng(1).uniform(-1, 1, config.shape)
    derivative = loc.position_estimator_rhs(noisy, 2.0 * b_true, pairs, network.anchors)
    assert np.all(derivative[[0, 1]] == 0.0)
    assert np.all(np.isfinite(derivative))


def test_single_follower_equilibrium(triangle_network):
    config = triangle_network.framework.config
    projections = [geo.projection_matrix(geo.bearing(config[2], config[j])) for j in (0, 1)]
    solved = np.linalg.solve(sum(projections), sum(p @ config[j] for p, j in zip(projections, (0, 1))))
    assert np.allclose(solved, config[2])

    ais = loc.localization_ais(triangle_network, "full")
    system = loc.LocalizationSystem(triangle_network, ais)
    b_true, _ = system.split(system.exact_state())
    state = system.join(b_true, np.array([[0.0, 0.0], [1.0, 0.0], [0.8, -0.7]]))
    trajectory = loc.simulate_localization(
        triangle_network, ais, initial_state=state, step=0.01, horizon=80.0
    )
    assert np.allclose(trajectory.final_state.p_hat[2], config[2], atol=1e-6)


def test_exact_start_stays_exact(network):
    ais = loc.localization_ais(network, "minimal")
    system = loc.LocalizationSystem(network, ais)
    trajectory = loc.simulate_localization(
        network, ais, initial_state=system.exact_state(), step=0.005, horizon=2.0
    )
    assert np.max(trajectory.location_error) <= 1e-12
    assert np.max(trajectory.bearing_error) <= 1e-12


def test_bearing_estimates_ignore_location_estimates(network):
    system = loc.LocalizationSystem(network, loc.localization_ais(network, "minimal"))
    state0 = system.random_state(5)
    joint = num.integrate(system.ode_system(), state0, 0.0, 2.0, 0.005)
    alone = num.integrate(system.bearing_system(), state0[: 2 * system.m], 0.0, 2.0, 0.005)
    assert np.allclose(joint.states[:, : 2 * system.m], alone.states, rtol=0.0, atol=1e-14)


def test_anchor_pins_hold_during_run(network):
    trajectory = loc.simulate_localization(
        network, seed=3, step=0.005, horizon=2.0
    )
    config = network.framework.config
    assert np.all(trajectory.estimates[:, [0, 1], :] == config[[0, 1]])
    bearings = trajectory.final_state.bearing_estimates()
    assert np.allclose(bearings[(1, 2)], [1.0, 0.0])
    assert np.allclose(bearings[(2, 1)], [-1.0, 0.0])


def test_perturbed_equilibrium_returns(network):
    ais = loc.localization_ais(network, "minimal")
    system = loc.LocalizationSystem(network, ais)
    exact = system.exact_state()
    state = exact + 1e-3 * np.random.default_rng(2).uniform(-1, 1, exact.shape)
    trajectory = loc.simulate_localization(
        network, ais, initial_state=state, step=0.005, horizon=40.0
    )
    assert np.allclose(trajectory.final_state.p_hat, network.framework.config, atol=1e-6)
    assert np.allclose(trajectory.final_state.b_hat, system.true_bearings, atol=1e-6)


def test_augment_gais_for_anchors(network):
    gais = loc.localization_ais(network, "minimal")
    assert loc.augment_gais_for_anchors(gais, network) is gais

    graph = network.framework.graph
    without_anchor_edge = graph.edge_subgraph(e for e in graph.edges if e != (1, 2))
    lacking = ais_lib.spanning_angle_index_set(without_anchor_edge)
    augmented = loc.augment_gais_for_anchors(lacking, network)
    assert len(augmented) == len(lacking) + 1
    assert (1, 2, 3) in augmented
    assert gr.is_angle_connected(augmented)

    with pytest.raises(NoAdjacentAnchors):
        loc.augment_gais_for_anchors(gais, loc.SensorNetwork(network.framework, (3, 4)))


def test_standing_assumptions_are_checked(network):
    graph = network.framework.graph
    without_anchor_edge = graph.edge_subgraph(e for e in graph.edges if e != (1, 2))
    lacking = ais_lib.spanning_angle_index_set(without_anchor_edge)
    with pytest.raises(AssumptionViolated):
        loc.simulate_localization(network, lacking, horizon=1.0)
    minimal = loc.localization_ais(network, "minimal")
    broken = minimal.without(minimal.triples[-1])
    with pytest.raises(AssumptionViolated):
        loc.simulate_localization(network, broken, horizon=1.0)


def test_localization_ais_modes(network):
    n = network.framework.n
    minimal = loc.localization_ais(network, "minimal")
    assert len(minimal) == 2 * n - 4
    assert len(loc.localization_ais(network, "local")) == 2 * network.framework.graph.num_edges - n
    assert len(loc.localization_ais(network, "full")) == len(gr.all_angle_triples(network.framework.graph))
    with pytest.raises(ScenarioError):
        loc.localization_ais(network, "everything")


def test_network_from_scenario_errors(scenario):
    scenario["anchors"] = "1,2"
    with pytest.raises(ScenarioError):
        loc.network_from_scenario(scenario)


def test_outputs(tmpdir, network):
    trajectory = loc.simulate_localization(
        network, seed=1, step=0.01, horizon=1.0
    )
    path = str(tmpdir.join("errors.csv"))
    loc.trajectory_to_csv(trajectory, path)
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == "# schema_version: %d" % rn.SCHEMA_VERSION
    assert lines[1] == "t,location_error,bearing_error"
    assert len(lines) == 2 + len(trajectory.times)

    state = loc.final_state_to_dict(trajectory)
    assert state["schema_version"] == rn.SCHEMA_VERSION
    assert set(state["positions"]) == {"1", "2", "3", "4", "5", "6"}
    assert "1,2" in state["bearings"]
    assert state["summary"]["seed"] == 1
    assert loc.localization_run_namer({"seed": 4, "ais": "full"}) == "localize_seed_4_ais_full"


def test_gains_rescale_time(network):
    fast = loc.simulate_localization(
        network, seed=3, step=0.001, horizon=2.0, bearing_gain=2.0, position_gain=2.0
    )
    slow = loc.simulate_localization(network, seed=3, step=0.002, horizon=4.0, record_interval=0.1)
    assert len(fast.times) == len(slow.times)
    assert np.allclose(2.0 * fast.times, slow.times)
    assert np.allclose(fast.location_error, slow.location_error, rtol=1e-9, atol=1e-14)
    assert np.allclose(fast.bearing_error, slow.bearing_error, rtol=1e-9, atol=1e-14)


def test_scenario_gain_is_opt_in(scenario):
    boosted = loc.run_localization_scenario(scenario, horizon=1.0, bearing_gain=2.0, position_gain=2.0)
    plain = loc.run_localization_scenario(scenario, horizon=2.0, step=0.002, record_interval=0.1)
    assert boosted.location_error[0] == plain.location_error[0]
    assert boosted.location_error[-1] == pytest.approx(plain.location_error[-1], rel=1e-9)
    with pytest.raises(ScenarioError):
        loc.run_localization_scenario(scenario, horizon=1.0, position_gain="fast")
