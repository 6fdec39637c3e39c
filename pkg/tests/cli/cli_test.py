import json
import os
import pytest
import matplotlib

matplotlib.use("Agg")

import rigidnet.cli.cli as cli
import rigidnet.rigidnet as rn


@pytest.fixture
def triangle_file(tmpdir):
    path = str(tmpdir.join("triangle.json"))
    rn.write_json(
        {"graph": {"n": 3, "edges": [[1, 2], [1, 3], [2, 3]]}, "positions": [[0, 0], [1, 0], [0, 1]]},
        path,
    )
    return path


@pytest.fixture
def path_file(tmpdir):
    path = str(tmpdir.join("path.json"))
    rn.write_json(
        {"graph": {"n": 3, "edges": [[1, 2], [2, 3]]}, "positions": [[0, 0], [1, 0], [1, 1]]}, path
    )
    return path


@pytest.fixture
def formation_file(tmpdir):
    path = str(tmpdir.join("formation.json"))
    rn.write_json(rn.load_template("formation_seven_agents"), path)
    return path


@pytest.fixture
def localization_file(tmpdir):
    path = str(tmpdir.join("localization.json"))
    rn.write_json(rn.load_template("localization_six_sensors"), path)
    return path


def run(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_analyze(capsys, triangle_file):
    code, out, err = run(capsys, ["analyze", triangle_file])
    assert code == 0
    data = json.loads(out)
    assert data["schema_version"] == rn.SCHEMA_VERSION
    assert data["is_isar"]
    assert data["rank_signed_angle"] == 2
    assert data["laman_subgraph"] == [[1, 2], [1, 3], [2, 3]]
    assert "ISAR: True" in err


def test_analyze_not_isar(capsys, path_file):
    code, out, _ = run(capsys, ["analyze", path_file])
    assert code == 0
    data = json.loads(out)
    assert not data["is_isar"]
    assert data["laman_subgraph"] is None


def test_analyze_generic(capsys, triangle_file):
    code, out, _ = run(capsys, ["--seed", "5", "analyze", triangle_file, "--generic", "--trials", "3"])
    assert code == 0
    generic = json.loads(out)["generic"]
    assert generic["trials"] == 3
    assert generic["seed"] == 5
    assert generic["majority"]


def test_gais(capsys, triangle_file):
    code, out, err = run(capsys, ["gais", triangle_file])
    assert code == 0
    data = json.loads(out)
    assert data["triples"] == [[2, 1, 3], [1, 2, 3]]
    assert data["size"] == data["expected_size"] == 2
    assert "2 triples" in err


def test_gais_needs_isar(capsys, path_file):
    code, out, err = run(capsys, ["gais", path_file])
    assert code == 4
    assert out == ""
    assert "NotISAR" in err


def test_bad_input_exit_codes(capsys, tmpdir, triangle_file):
    broken = str(tmpdir.join("broken.json"))
    with open(broken, "w") as f:
        f.write("{not json")
    assert run(capsys, ["analyze", broken])[0] == 2
    assert run(capsys, ["analyze", str(tmpdir.join("missing.json"))])[0] == 2

    wrong_kind = str(tmpdir.join("wrong_kind.json"))
    rn.write_json({"kind": "formation", "graph": {"n": 2, "edges": [[1, 2]]}, "positions": [[0, 0], [1, 0]]}, wrong_kind)
    code, _, err = run(capsys, ["analyze", wrong_kind])
    assert code == 2
    assert "ScenarioError" in err

    no_positions = str(tmpdir.join("no_positions.json"))
    rn.write_json({"graph": {"n": 2, "edges": [[1, 2]]}}, no_positions)
    assert run(capsys, ["gais", no_positions])[0] == 2
    assert run(capsys, ["--tolerance", "-1", "analyze", triangle_file])[0] == 2


def test_validate_scenario():
    assert cli.validate_scenario({"graph": {}, "target_positions": []}, "formation")["graph"] == {}
    with pytest.raises(cli.ScenarioError):
        cli.validate_scenario([], "analyze")
    with pytest.raises(cli.ScenarioError):
        cli.validate_scenario({"kind": "bogus", "graph": {}, "positions": []}, "analyze")


def test_out_flag_and_quiet(capsys, tmpdir, triangle_file):
    target = str(tmpdir.join("report.json"))
    code, out, err = run(capsys, ["--quiet", "--out", target, "analyze", triangle_file])
    assert code == 0
    assert out == ""
    assert err == ""
    assert rn.read_json(target)["is_isar"]


def test_randgen_laman(capsys):
    code, out, _ = run(capsys, ["--seed", "3", "randgen", "laman", "10"])
    assert code == 0
    data = json.loads(out)
    assert data["graph"]["n"] == 10
    assert len(data["graph"]["edges"]) == 17
    assert data["seed"] == 3
    assert run(capsys, ["--seed", "3", "randgen", "laman", "10"])[1] == out

    code, out, _ = run(capsys, ["randgen", "laman", "3"])
    assert code == 0
    assert json.loads(out)["graph"]["edges"] == [[1, 2], [1, 3], [2, 3]]
    assert run(capsys, ["randgen", "laman", "2"])[0] == 2


def test_randgen_bad_kind(capsys):
    with pytest.raises(SystemExit) as exit_info:
        cli.main(["randgen", "tree", "5"])
    assert exit_info.value.code == 2


def test_randgen_random_isar_feeds_analyze(capsys, tmpdir):
    target = str(tmpdir.join("random.json"))
    assert run(capsys, ["--seed", "1", "--out", target, "randgen", "random-isar", "6"])[0] == 0
    code, out, _ = run(capsys, ["analyze", target])
    assert code == 0
    assert json.loads(out)["is_isar"]


def test_formation_outputs(capsys, tmpdir, formation_file):
    csv_path = str(tmpdir.join("formation.csv"))
    state_path = str(tmpdir.join("state.json"))
    plot_path = str(tmpdir.join("formation.png"))
    argv = [
        "formation", formation_file, "--horizon", "0.5", "--step", "0.01",
        "--out-csv", csv_path, "--out-state", state_path, "--plot", plot_path,
    ]
    code, out, err = run(capsys, argv)
    assert code == 0
    summary = json.loads(out)["summary"]
    assert summary["final_time"] == pytest.approx(0.5)
    assert summary["seed"] == 0
    assert "equilibrium" in err
    assert os.path.isfile(csv_path)
    assert os.path.isfile(plot_path)
    assert rn.read_json(state_path)["schema_version"] == rn.SCHEMA_VERSION


def test_formation_is_deterministic(capsys, formation_file):
    argv = ["--seed", "4", "formation", formation_file, "--horizon", "0.5", "--step", "0.01"]
    code, first, _ = run(capsys, argv)
    assert code == 0
    assert run(capsys, argv)[1] == first
    assert json.loads(first)["summary"]["seed"] == 4


def test_localize(capsys, tmpdir, localization_file):
    csv_path = str(tmpdir.join("localization.csv"))
    argv = ["localize", localization_file, "--horizon", "10", "--ais", "full", "--out-csv", csv_path]
    code, out, err = run(capsys, argv)
    assert code == 0
    summary = json.loads(out)["summary"]
    assert summary["final_location_error"] < summary["initial_location_error"]
    assert "final location error" in err
    with open(csv_path) as f:
        assert f.readline().strip() == "# schema_version: %d" % rn.SCHEMA_VERSION


def test_localize_one_anchor(capsys, tmpdir):
    scenario = rn.load_template("localization_six_sensors")
    scenario["anchors"] = [1]
    path = str(tmpdir.join("one_anchor.json"))
    rn.write_json(scenario, path)
    code, out, err = run(capsys, ["localize", path, "--horizon", "1"])
    assert code == 4
    assert "NotLocalizable" in err


@pytest.mark.parametrize(
    "key, value",
    [("step", 0), ("horizon", "long"), ("seed", "abc"), ("bearing_gain", "x"), ("record_interval", -0.1)],
)
def test_localize_bad_run_settings(capsys, tmpdir, key, value):
    scenario = rn.load_template("localization_six_sensors")
    scenario[key] = value
    path = str(tmpdir.join("bad_setting.json"))
    rn.write_json(scenario, path)
    code, out, err = run(capsys, ["localize", path])
    assert code == 2
    assert out == ""
    assert "ScenarioError" in err
    assert key in err


def test_formation_bad_run_settings(capsys, tmpdir):
    scenario = rn.load_template("formation_seven_agents")
    scenario["step"] = -0.01
    path = str(tmpdir.join("bad_step.json"))
    rn.write_json(scenario, path)
    assert run(capsys, ["formation", path])[0] == 2
    scenario["step"] = 0.01
    scenario["init_box"] = [5.0, "x"]
    rn.write_json(scenario, path)
    assert run(capsys, ["formation", path])[0] == 2
    assert run(capsys, ["--seed", "-3", "formation", path])[0] == 2


def test_validate_scenario_coerces_run_settings():
    checked = cli.validate_scenario(
        {"graph": {}, "positions": [], "step": 1, "horizon": 20, "seed": 3}, "localize"
    )
    assert isinstance(checked["step"], float)
    assert checked["horizon"] == 20.0
    assert checked["seed"] == 3
    with pytest.raises(cli.ScenarioError):
        cli.validate_scenario({"graph": {}, "positions": [], "seed": 1.5}, "localize")
    with pytest.raises(cli.ScenarioError):
        cli.validate_scenario({"graph": {}, "positions": [], "horizon": True}, "localize")


def test_localize_seed_changes_start_not_verdict(capsys, localization_file):
    summaries = []
    for seed in ("1", "2"):
        code, out, _ = run(capsys, ["--seed", seed, "localize", localization_file, "--step", "0.005"])
        assert code == 0
        summaries.append(json.loads(out)["summary"])
    first, second = summaries
    assert first["initial_location_error"] != second["initial_location_error"]
    assert (first["seed"], second["seed"]) == (1, 2)
    assert first["converged"] and second["converged"]


def test_gais_is_byte_identical(capsys, tmpdir):
    framework = str(tmpdir.join("random.json"))
    assert run(capsys, ["--seed", "2", "--out", framework, "randgen", "random-isar", "8"])[0] == 0
    outputs = []
    for name in ("first.json", "second.json"):
        target = str(tmpdir.join(name))
        assert run(capsys, ["--out", target, "gais", framework])[0] == 0
        with open(target, "rb") as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1]
    assert json.loads(outputs[0])["size"] == 2 * 8 - 4


def test_formation_target_not_isar(capsys, tmpdir):
    scenario = rn.load_template("formation_seven_agents")
    scenario["graph"] = {
        "n": 6,
        "edges": [[1, 2], [1, 3], [2, 3], [2, 6], [3, 4], [4, 5], [4, 6], [1, 5], [5, 6]],
    }
    scenario["target_positions"] = [[0, 0], [0, 2], [1, 1], [3, 1], [4, 0], [4, 2]]
    path = str(tmpdir.join("flexible.json"))
    rn.write_json(scenario, path)
    code, out, err = run(capsys, ["formation", path, "--horizon", "1"])
    assert code == 4
    assert out == ""
    assert "AssumptionViolated" in err


def test_analyze_two_vertices(capsys, tmpdir):
    bar = str(tmpdir.join("bar.json"))
    rn.write_json({"graph": {"n": 2, "edges": [[1, 2]]}, "positions": [[0, 0], [1, 0]]}, bar)
    code, out, err = run(capsys, ["analyze", bar])
    assert code == 2
    assert out == ""
    assert "TooFewPoints" in err
