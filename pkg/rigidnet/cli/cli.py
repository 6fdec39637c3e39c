"""Command line interface: rigidnet {analyze,gais,localize,formation,randgen}.

Data goes to stdout (or --out), diagnostics to stderr. Exit codes: 0 on
success, 2 for bad input, 3 for numerical failures, 4 for unmet
preconditions.
"""
from __future__ import annotations
from typing import List, Optional
import argparse
import json
import sys
import warnings

import rigidnet.ais.ais as ais_lib
import rigidnet.formation.formation as form
import rigidnet.graph.graph as gr
import rigidnet.localization.localization as loc
import rigidnet.numerics.numerics as num
import rigidnet.rigidity.rigidity as rig
import rigidnet.rigidnet as rn
from rigidnet.exceptions import InputError, RigidnetError, ScenarioError

SCENARIO_KINDS = ("analyze", "gais", "localize", "formation", "randgen")
RANDGEN_KINDS = ("laman", "random-isar")
RANDGEN_MAX_TRIES = 100
RANDGEN_MIN_SEPARATION = 0.05


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="rigidnet",
        description="Signed angle rigidity analysis, network localization and formation control",
    )
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to RIGIDNET_SEED)")
    parser.add_argument(
        "--tolerance", type=float, default=num.RANK_TOLERANCE, help="Relative rank tolerance"
    )
    parser.add_argument("--out", default=None, help="Write the JSON result here instead of stdout")
    parser.add_argument("--quiet", action="store_true", help="Silence diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="Rank tests of a framework")
    analyze.add_argument("input", help="Framework JSON")
    analyze.add_argument("--generic", action="store_true", help="Also test generic rigidity of the graph")
    analyze.add_argument("--trials", type=int, default=10, help="Random configurations for --generic")

    gais = sub.add_parser("gais", help="Minimal globally constraining angle index set")
    gais.add_argument("input", help="Framework JSON")

    for name, help_text in (("localize", "Network localization run"), ("formation", "Formation control run")):
        run = sub.add_parser(name, help=help_text)
        run.add_argument("scenario", help="Scenario JSON")
        run.add_argument("--out-csv", default=None, help="Error time series CSV")
        run.add_argument("--out-state", default=None, help="Final state JSON")
        run.add_argument("--plot", default=None, help="Save a figure of the run")
        run.add_argument("--step", type=float, default=None, help="RK4 step")
        run.add_argument("--horizon", type=float, default=None, help="Final time")
        if name == "localize":
            run.add_argument("--ais", choices=loc.AIS_MODES, default=None, help="Angle index set")

    randgen = sub.add_parser("randgen", help="Random framework")
    randgen.add_argument("kind", choices=RANDGEN_KINDS)
    randgen.add_argument("n", type=int)
    return parser.parse_args(argv)


def validate_args(args: argparse.Namespace) -> None:
    if args.tolerance <= 0:
        raise InputError("--tolerance must be > 0")
    if getattr(args, "trials", 1) < 1:
        raise InputError("--trials must be >= 1")
    for flag in ("step", "horizon"):
        value = getattr(args, flag, None)
        if value is not None and value <= 0:
            raise InputError("--%s must be > 0" % flag)


def validate_scenario(scenario, kind: str) -> dict:
    """Check the top level shape and run settings of a scenario file.

    A "kind" field is optional; when present it must match the command.
    Returns the scenario with step, horizon, record_interval and gains as
    positive floats and the seed as an int.
    """
    if not isinstance(scenario, dict):
        raise ScenarioError("Scenario must be a JSON object")
    declared = scenario.get("kind", kind)
    if declared not in SCENARIO_KINDS:
        raise ScenarioError("Unknown scenario kind %r" % (declared,))
    if declared != kind:
        raise ScenarioError("Scenario kind %r cannot run with the %s command" % (declared, kind))
    if kind in ("analyze", "gais", "localize"):
        missing = [key for key in ("graph", "positions") if key not in scenario]
    elif kind == "formation":
        missing = [key for key in ("graph", "target_positions") if key not in scenario]
    else:
        missing = []
    if missing:
        raise ScenarioError("Scenario is missing %s" % ", ".join('"%s"' % key for key in missing))
    return rn.check_run_settings(scenario)


def _load(path: str, kind: str) -> dict:
    try:
        scenario = rn.read_json(path)
    except OSError as error:
        raise InputError("Cannot read %s: %s" % (path, error))
    return validate_scenario(scenario, kind)


def _emit(args: argparse.Namespace, data: dict) -> None:
    data = rn.with_schema_version(data)
    if args.out:
        rn.write_json(data, args.out)
    else:
        sys.stdout.write(rn.dumps_json(data))


def _note(args: argparse.Namespace, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def cmd_analyze(args: argparse.Namespace) -> int:
    scenario = _load(args.input, "analyze")
    fw = rig.framework_from_dict(scenario)
    seed = rn.resolve_seed(args.seed, scenario)
    report = rig.analyze(fw, args.tolerance, seed=seed)
    out = report.to_dict()
    out["laman_subgraph"] = (
        [list(e) for e in rig.extract_laman_spanning_subgraph(fw, args.tolerance).edges]
        if report.is_isar
        else None
    )
    if args.generic:
        out["generic"] = rig.generic_verdict(fw.graph, args.trials, seed, args.tolerance).to_dict()
    _emit(args, out)
    _note(args, "ISAR: %s, IBR: %s, Laman: %s" % (report.is_isar, report.is_ibr, report.is_laman))
    return 0


def cmd_gais(args: argparse.Namespace) -> int:
    fw = rig.framework_from_dict(_load(args.input, "gais"))
    result = ais_lib.algorithm1_minimal_gais(fw, args.tolerance)
    _emit(args, result.to_dict())
    _note(args, "%d triples, angle connected: %s" % (result.size, result.angle_connected))
    return 0


def _fit_slope(summary: dict, key: str) -> str:
    fit = summary.get(key)
    return "n/a" if fit is None else "%.4g" % fit["slope"]


def cmd_localize(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario, "localize")
    trajectory = loc.run_localization_scenario(
        scenario, seed=args.seed, step=args.step, horizon=args.horizon, ais=args.ais
    )
    summary = trajectory.summary()
    _emit(args, {"summary": summary})
    if args.out_csv:
        loc.trajectory_to_csv(trajectory, args.out_csv)
    if args.out_state:
        rn.write_json(loc.final_state_to_dict(trajectory), args.out_state)
    if args.plot:
        from rigidnet.plotting import localization_plotting

        net = loc.network_from_scenario(scenario)
        localization_plotting.plot_localization(trajectory, net).savefig(args.plot)
    _note(
        args,
        "final location error %.3e, final bearing error %.3e, log-error slope %s"
        % (summary["final_location_error"], summary["final_bearing_error"], _fit_slope(summary, "location_fit")),
    )
    return 0


def cmd_formation(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario, "formation")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        trajectory = form.run_formation_scenario(
            scenario, seed=args.seed, step=args.step, horizon=args.horizon
        )
    for warning in caught:
        _note(args, "warning: %s" % warning.message)
    summary = trajectory.summary()
    _emit(args, {"summary": summary})
    if args.out_csv:
        form.trajectory_to_csv(trajectory, args.out_csv)
    if args.out_state:
        rn.write_json(form.final_state_to_dict(trajectory), args.out_state)
    if args.plot:
        from rigidnet.plotting import formation_plotting

        target = form.target_from_scenario(scenario)
        formation_plotting.plot_formation(trajectory, target).savefig(args.plot)
    _note(
        args,
        "final angle error %.3e, final attitude error %.3e, equilibrium %s"
        % (summary["final_angle_error"], summary["final_attitude_error"], summary["equilibrium"]),
    )
    return 0


def random_framework(kind: str, n: int, seed: int, tolerance: float = num.RANK_TOLERANCE) -> rig.Framework:
    """Seeded random framework: a Henneberg Laman graph, or a random connected ISAR framework."""
    if n < 3:
        raise InputError("randgen needs n >= 3, got %d" % n)
    rng = num.seeded_rng(seed)
    if kind == "laman":
        g = gr.henneberg_laman_graph(n, rng)
        return rig.Framework(g, rig.random_configuration(n, rng, RANDGEN_MIN_SEPARATION))
    if kind == "random-isar":
        for _ in range(RANDGEN_MAX_TRIES):
            g = gr.random_connected_graph(n, rng, edge_probability=0.5)
            if not rig.has_laman_spanning_subgraph(g):
                continue
            fw = rig.Framework(g, rig.random_configuration(n, rng, RANDGEN_MIN_SEPARATION))
            if rig.analyze(fw, tolerance).is_isar:
                return fw
        raise InputError("No ISAR framework on %d vertices found in %d tries" % (n, RANDGEN_MAX_TRIES))
    raise InputError("Unknown randgen kind %r; use one of %s" % (kind, RANDGEN_KINDS))


def cmd_randgen(args: argparse.Namespace) -> int:
    seed = rn.resolve_seed(args.seed)
    fw = random_framework(args.kind, args.n, seed, args.tolerance)
    out = fw.to_dict()
    out.update({"seed": seed, "rng_algorithm": num.RNG_ALGORITHM})
    _emit(args, out)
    _note(args, "%s framework: %d vertices, %d edges" % (args.kind, fw.n, fw.graph.num_edges))
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "gais": cmd_gais,
    "localize": cmd_localize,
    "formation": cmd_formation,
    "randgen": cmd_randgen,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    try:
        validate_args(args)
        return COMMANDS[args.command](args)
    except json.JSONDecodeError as error:
        print("error: malformed JSON: %s" % error, file=sys.stderr)
        return InputError.exit_code
    except RigidnetError as error:
        print("error: %s: %s" % (type(error).__name__, error), file=sys.stderr)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
