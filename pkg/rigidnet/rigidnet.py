from __future__ import annotations
from glob import glob
from typing import Callable, List, Optional
import json
import math
import numbers
import os
import pathlib
import warnings

from rigidnet.exceptions import ScenarioError

libpath = pathlib.Path(__file__).parent.resolve()

SCHEMA_VERSION = 1
SEED_ENVIRONMENT_VARIABLE = "RIGIDNET_SEED"


def regroup_dicts_by_keys(list_of_dictionaries: list) -> dict:
    """Groups run results by property instead of by run.

    Parameters
    ----------
    list_of_dictionaries: list
        List of dictionaries.

    Returns
    -------
    results: dict
        Dictionary of all data grouped by keys (not grouped by run)

    Notes
    ------
    This function assumes that all dictionaries have the same keys.
    """
    data = list_of_dictionaries
    keys = data[0].keys()
    data_collect = [[] for _ in keys]
    for element_dict in data:
        for index, key in enumerate(keys):
            data_collect[index].append(element_dict[key])
    return dict(zip(keys, data_collect))


def dumps_json(data: dict) -> str:
    """Serialize with sorted keys so repeated runs give byte identical output."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(data: dict, path: str) -> None:
    with open(path, "w") as f:
        f.write(dumps_json(data))


def read_json(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def with_schema_version(data: dict) -> dict:
    out = {"schema_version": SCHEMA_VERSION}
    out.update(data)
    return out


def load_template(name: str) -> dict:
    """Load one of the scenario templates shipped in rigidnet/templates.

    Parameters
    ----------
    name: str
        File name, with or without the .json suffix.

    Returns
    -------
    scenario: dict
    """
    if not name.endswith(".json"):
        name = name + ".json"
    return read_json(os.path.join(libpath, "templates", name))


def resolve_seed(seed: Optional[int] = None, scenario: Optional[dict] = None) -> int:
    """Seed precedence: explicit argument, then the scenario's "seed", then RIGIDNET_SEED, then 0."""
    if seed is not None:
        return _integer_seed(seed)
    if scenario is not None and scenario.get("seed") is not None:
        return _integer_seed(scenario["seed"])
    from_env = os.environ.get(SEED_ENVIRONMENT_VARIABLE)
    if from_env:
        try:
            return int(from_env)
        except ValueError:
            warnings.warn(
                "Ignoring %s=%r; it is not an integer" % (SEED_ENVIRONMENT_VARIABLE, from_env)
            )
    return 0


def _integer_seed(value) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 0:
        raise ScenarioError('"seed" must be a non-negative integer, got %r' % (value,))
    return int(value)


POSITIVE_SETTINGS = ("step", "horizon", "record_interval", "bearing_gain", "position_gain")


def positive_setting(settings: dict, key: str, default: float) -> float:
    """settings[key] (or default) as a finite float > 0; ScenarioError otherwise."""
    value = settings.get(key, default)
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ScenarioError('"%s" must be a number, got %r' % (key, value))
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ScenarioError('"%s" must be finite and > 0, got %r' % (key, value))
    return value


def check_run_settings(scenario: dict) -> dict:
    """Copy of scenario with its run settings (step, horizon, gains, seed) checked.

    Present numeric settings are coerced to float; a present seed must be a
    non-negative integer or null.
    """
    checked = dict(scenario)
    for key in POSITIVE_SETTINGS:
        if key in checked:
            checked[key] = positive_setting(checked, key, None)
    if checked.get("seed") is not None:
        checked["seed"] = _integer_seed(checked["seed"])
    return checked


def scenario_run_creator(run_params: dict, run_dir: str) -> None:
    """Write scenario.json and a not_submitted status.json into run_dir."""
    write_json(run_params, os.path.join(run_dir, "scenario.json"))
    write_json({"status": "not_submitted"}, os.path.join(run_dir, "status.json"))


def status_updater(run_dir: str) -> str:
    """Mark a run complete once results.json exists. Returns the status."""
    status_file = os.path.join(run_dir, "status.json")
    status = read_json(status_file)["status"]
    if status == "not_submitted" and os.path.isfile(os.path.join(run_dir, "results.json")):
        status = "complete"
        write_json({"status": status}, status_file)
    return status


def run_parser(run_dir: str) -> Optional[dict]:
    """Scenario and results of a completed run, or None."""
    if read_json(os.path.join(run_dir, "status.json"))["status"] != "complete":
        return None
    run = {"run_dir": run_dir, "scenario": read_json(os.path.join(run_dir, "scenario.json"))}
    run.update(read_json(os.path.join(run_dir, "results.json")))
    return run


def scenario_run_submitter(
    run_dir: str, runner: Callable[[dict], object], to_dict: Callable[[object], dict]
) -> str:
    """Run scenario.json in run_dir if it was not run yet.

    Parameters
    ----------
    run_dir: str
        Directory made by scenario_run_creator.
    runner: callable
        Maps the scenario dict to a result object.
    to_dict: callable
        Maps the result object to the dict written to results.json.

    Returns
    -------
    status: str
        "complete", "failed", or the unchanged status of a run already handled.
    """
    status_file = os.path.join(run_dir, "status.json")
    status = read_json(status_file)["status"]
    if status != "not_submitted":
        return status
    scenario = read_json(os.path.join(run_dir, "scenario.json"))
    try:
        result = runner(scenario)
    except Exception as error:
        warnings.warn("Run in %s failed: %s" % (run_dir, error))
        status = "failed"
    else:
        write_json(to_dict(result), os.path.join(run_dir, "results.json"))
        status = "complete"
    write_json({"status": status}, status_file)
    return status


class gridspace_manager:
    """
    A class for managing repeated simulations over a grid of scenario parameters.

    Parameters
    ----------
    origin_dir : str, optional
        The directory that will hold one sub-directory per run. Default is the current directory.
    namer : callable, optional
        Maps a scenario dict to a unique directory name.
    run_parser : callable, optional
        Extracts results from a run directory; returns None for runs without results.
    run_creator : callable, optional
        Writes the input files of a run into its directory.
    status_updater : callable, optional
        Updates the status of a run based on its output.
    run_submitter : callable, optional
        Executes a run.
    grid_params : list, optional
        One scenario dict per run.

    Methods
    -------
    collect_data()
        Collects the results of every run into self.data.
    format_run_dirs()
        Creates one directory per entry of grid_params.
    update_status()
        Updates the status of every run.
    run_valid_calculations()
        Executes every run.
    """

    def __init__(
        self,
        origin_dir: str = "./",
        namer: Callable = None,
        run_parser: Callable = run_parser,
        run_creator: Callable = scenario_run_creator,
        status_updater: Callable = status_updater,
        run_submitter: Callable = None,
        grid_params: List[dict] = None,
    ) -> None:
        self.data = None
        self.origin_dir = origin_dir
        self.namer = namer
        self.run_parser = run_parser
        self.run_creator = run_creator
        self.grid_params = grid_params if grid_params is not None else []
        self.status_updater = status_updater
        self.run_submitter = run_submitter

    def _run_dirs(self) -> List[str]:
        return sorted(d for d in glob(os.path.join(self.origin_dir, "*")) if os.path.isdir(d))

    def collect_data(self) -> None:
        self.data = []
        for run_dir in self._run_dirs():
            try:
                self.data.append(self.run_parser(run_dir))
            except Exception as error:
                warnings.warn("Failed to parse %s: %s" % (run_dir, error))
        self.data = [entry for entry in self.data if entry is not None]

    def format_run_dirs(self) -> None:
        for entry in self.grid_params:
            run_dir = os.path.join(self.origin_dir, self.namer(entry))
            os.makedirs(run_dir, exist_ok=True)
            self.run_creator(entry, run_dir)

    def update_status(self) -> None:
        for run_dir in self._run_dirs():
            try:
                self.status_updater(run_dir)
            except Exception as error:
                warnings.warn("Failed to update %s: %s" % (run_dir, error))

    def run_valid_calculations(self) -> None:
        for run_dir in self._run_dirs():
            try:
                self.run_submitter(run_dir)
            except Exception as error:
                warnings.warn("Failed to run %s: %s" % (run_dir, error))
