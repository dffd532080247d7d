"""Command-line interface.

Exit codes: 0 success, 1 domain error (exhaustion, limits, conflicts),
2 usage or parse error. Machine output (``--format json``) goes to stdout
as exactly one JSON document; error details go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import perf, scenario
from .composition import FabricComposer, PlanPolicy, PlanRequest
from .enumeration import enumerate_host, min_addr_bits, render_lspci_tree
from .errors import FabricError, ScenarioError, UnknownNodeError
from .scenario import (ScenarioFile, export_address_map, load_scenario,
                       parse_composition, parse_size, serialize_composition)

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _emit(doc: dict, args, human: str | None = None) -> None:
    if args.format == "json":
        print(json.dumps(doc, sort_keys=True))
    else:
        print(human if human is not None
              else json.dumps(doc, sort_keys=True, indent=2))


def _load(args) -> ScenarioFile:
    return load_scenario(args.scenario)


def _composer(sc: ScenarioFile, policy_name: str) -> FabricComposer:
    return FabricComposer(sc.effective_topology(), sc.policy(policy_name),
                          sc.profile_set())


def _state_for(sc: ScenarioFile, args, composer: FabricComposer):
    """Composition state from --state, or an implicit view.

    Without a state file, read-only commands treat every endpoint as
    composed onto the scenario's only host so path and pool questions can
    be asked against the static layout.
    """
    state_path = getattr(args, "state", None)
    topo = sc.effective_topology()
    if state_path and os.path.exists(state_path):
        with open(state_path, "rb") as fh:
            return parse_composition(fh.read(), topo)
    if state_path:
        return composer.initial_state()
    if len(topo.hosts) != 1:
        raise FabricError(
            "no --state given and the scenario does not have exactly one "
            "host; cannot infer an implicit composition", "BAD_REQUEST")
    host = topo.hosts[0]
    state = composer.initial_state()
    return composer.compose(state, host.id, state.pool)


def _write_state(args, state, topo) -> None:
    data = serialize_composition(state, topo, scenario_ref=args.scenario)
    with open(args.state, "wb") as fh:
        fh.write(data)


def _endpoint_list(raw: str) -> list[str]:
    return [e for e in (part.strip() for part in raw.split(",")) if e]


# -- subcommands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    from .topology import validate_topology
    sc = _load(args)
    report = validate_topology(sc.topology)
    doc = {"ok": report.ok,
           "violations": [{"kind": v.kind, "subject": v.subject,
                           "message": v.message}
                          for v in report.violations]}
    lines = ["ok" if report.ok else "invalid"]
    lines += [f"  {v.kind}({v.subject}): {v.message}"
              for v in report.violations]
    _emit(doc, args, "\n".join(lines))
    return 0 if report.ok else DOMAIN_ERROR


def cmd_enumerate(args) -> int:
    sc = _load(args)
    topo = sc.effective_topology()
    host = topo.host(args.host)
    addr_map = enumerate_host(host, topo, sc.policy(args.policy))
    if args.format == "tree":
        sys.stdout.write(render_lspci_tree(addr_map, topo))
    elif args.format == "json":
        doc = json.loads(export_address_map(addr_map, topo))
        print(json.dumps(doc, sort_keys=True))
    else:
        sys.stdout.write(export_address_map(addr_map, topo).decode("utf-8"))
    return 0


def cmd_min_bits(args) -> int:
    sc = _load(args)
    topo = sc.effective_topology()
    bits = min_addr_bits(topo, sc.policy(args.policy), host_id=args.host)
    doc = {"min_bits": bits, "feasible": bits is not None,
           "policy": args.policy}
    _emit(doc, args, f"min_addr_bits: {bits}" if bits is not None
          else "infeasible even at 57 bits")
    return 0


def cmd_compose(args) -> int:
    sc = _load(args)
    composer = _composer(sc, args.policy)
    topo = sc.effective_topology()
    state = _state_for(sc, args, composer)
    new_state = composer.compose(state, args.host,
                                 _endpoint_list(args.endpoints))
    _write_state(args, new_state, topo)
    doc = scenario.composition_to_doc(new_state, topo)
    _emit(doc, args,
          f"composed {len(_endpoint_list(args.endpoints))} endpoint(s) onto "
          f"{args.host}; version {new_state.version}; "
          f"{len(new_state.assigned_to(args.host))} assigned, "
          f"{len(new_state.pool)} pooled")
    return 0


def cmd_decompose(args) -> int:
    sc = _load(args)
    composer = _composer(sc, args.policy)
    topo = sc.effective_topology()
    state = _state_for(sc, args, composer)
    new_state = composer.decompose(state, args.host,
                                   _endpoint_list(args.endpoints))
    _write_state(args, new_state, topo)
    doc = scenario.composition_to_doc(new_state, topo)
    _emit(doc, args,
          f"released {len(_endpoint_list(args.endpoints))} endpoint(s) from "
          f"{args.host}; version {new_state.version}; "
          f"{len(new_state.pool)} pooled")
    return 0


def cmd_plan(args) -> int:
    sc = _load(args)
    composer = _composer(sc, args.policy_name)
    state = _state_for(sc, args, composer) if args.state \
        else composer.initial_state()
    request = PlanRequest(gpu_count=args.gpus,
                          policy=PlanPolicy(args.policy),
                          host_id=args.host)
    chosen = composer.plan(state, request)
    _emit({"endpoints": chosen, "policy": args.policy}, args,
          "\n".join(chosen))
    return 0


def cmd_p2p(args) -> int:
    sc = _load(args)
    composer = _composer(sc, "default")
    topo = sc.effective_topology()
    state = _state_for(sc, args, composer)
    path = perf.p2p_path(topo, state, args.a, args.b)
    est = perf.p2p_bandwidth(topo, path, args.efficiency)
    doc = scenario.bandwidth_estimate_to_doc(est)
    if est.is_local:
        human = f"{args.a} -> {args.b}: local (same device)"
    else:
        human = (f"{args.a} -> {args.b}: {est.estimated_bw:.3f} GB/s "
                 f"(hop count {path.hop_count}, bottleneck "
                 f"{est.bottleneck_bw:.3f} GB/s, efficiency "
                 f"{est.efficiency:.5f}, via {path.nearest_common_switch})")
    _emit(doc, args, human)
    return 0


def _read_points(data_arg: str):
    """--data accepts a measurements/scenario file, a bundled scenario
    name, or inline JSON points."""
    doc = None
    if os.path.isfile(data_arg):
        with open(data_arg, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        try:
            doc = json.loads(data_arg)
        except json.JSONDecodeError:
            sc = load_scenario(data_arg)
            if sc.measurements is None:
                raise FabricError(
                    f"scenario {data_arg} carries no measurements",
                    "BAD_MEASUREMENTS")
            return sc.measurements.scaling_points
    if isinstance(doc, dict):
        if "points" in doc:
            return [(n, t) for n, t in doc["points"]]
        if "measurements" in doc:
            return [(n, t)
                    for n, t in doc["measurements"].get("scaling_points", ())]
        raise FabricError("no points found in --data document",
                          "BAD_MEASUREMENTS")
    return [(n, t) for n, t in doc]


def cmd_fit(args) -> int:
    points = _read_points(args.data)
    model = perf.fit_scaling(points)
    doc = scenario.scaling_model_to_doc(model)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
    _emit(doc, args,
          f"T(n) = {model.serial_minutes:.3f} + "
          f"{model.parallel_minutes:.3f}/n minutes  "
          f"(max relative residual "
          f"{100 * model.max_rel_residual:.2f}%)")
    return 0


def cmd_predict(args) -> int:
    if bool(args.model) == bool(args.data):
        raise FabricError("predict needs exactly one of --model or --data",
                          "BAD_REQUEST")
    if args.model:
        with open(args.model, "r", encoding="utf-8") as fh:
            model = scenario.scaling_model_from_doc(json.load(fh))
    else:
        model = perf.fit_scaling(_read_points(args.data))
    minutes = perf.predict_runtime(model, args.n)
    _emit({"n": args.n, "minutes": minutes}, args,
          f"predicted runtime at n={args.n}: {minutes:.2f} minutes")
    return 0


def cmd_pool(args) -> int:
    sc = _load(args)
    composer = _composer(sc, "default")
    topo = sc.effective_topology()
    state = _state_for(sc, args, composer)
    pool = perf.vram_pool(topo, state, args.host)
    required = parse_size(args.required)
    result = perf.fits_in_pool(pool, required)
    doc = scenario.feasibility_to_doc(args.host, pool, required, result)
    _emit(doc, args,
          f"pooled VRAM on {args.host}: {pool.total_bytes} bytes over "
          f"{len(pool.per_gpu_bytes)} GPUs; required {required}: "
          f"{'feasible' if result.feasible else 'infeasible'} "
          f"(margin {result.margin_bytes})")
    return 0


def cmd_serve(args) -> int:
    from .gateway import serve
    sc = _load(args)
    server = serve(sc, args.listen, allow_origin=args.allow_origin,
                   state_file=args.state)
    host, port = server.server_address[:2]
    print(f"fabricsim gateway listening on {host}:{port}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fabricsim",
        description="Composable GPU fabric simulator and planning engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, scenario_arg=True):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(fn=fn)
        if scenario_arg:
            p.add_argument("scenario",
                           help="scenario path or bundled name "
                                f"({', '.join(scenario.BUILTIN_SCENARIOS)})")
        p.add_argument("--format", choices=["text", "json", "tree"],
                       default="text", help="output format")
        return p

    add("validate", cmd_validate, "check topology well-formedness")

    p = add("enumerate", cmd_enumerate, "BIOS-style enumeration of a host")
    p.add_argument("--host", required=True)
    p.add_argument("--policy", default="default")
    p.set_defaults(format="tree")

    p = add("min-bits", cmd_min_bits,
            "smallest address width that enumerates")
    p.add_argument("--policy", default="default")
    p.add_argument("--host", default=None)

    p = add("compose", cmd_compose, "attach pooled GPUs to a host")
    p.add_argument("--state", required=True, help="composition.v1 state file")
    p.add_argument("--host", required=True)
    p.add_argument("--endpoints", required=True,
                   help="comma-separated endpoint ids")
    p.add_argument("--policy", default="default")

    p = add("decompose", cmd_decompose, "release GPUs back to the pool")
    p.add_argument("--state", required=True)
    p.add_argument("--host", required=True)
    p.add_argument("--endpoints", required=True)
    p.add_argument("--policy", default="default")

    p = add("plan", cmd_plan, "pick pooled GPUs by placement policy")
    p.add_argument("--gpus", type=int, required=True)
    p.add_argument("--policy", choices=[p.value for p in PlanPolicy],
                   default="locality")
    p.add_argument("--policy-name", dest="policy_name", default="default",
                   help="enumeration policy used for state checks")
    p.add_argument("--state", default=None)
    p.add_argument("--host", default=None)

    p = add("p2p", cmd_p2p, "peer-to-peer bandwidth estimate")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--efficiency", type=float,
                   default=perf.DEFAULT_EFFICIENCY)
    p.add_argument("--state", default=None)

    p = add("fit", cmd_fit, "fit the strong-scaling runtime model",
            scenario_arg=False)
    p.add_argument("--data", required=True,
                   help="points file, inline JSON, or scenario with "
                        "measurements")
    p.add_argument("--out", default=None, help="write the fitted model JSON")

    p = add("predict", cmd_predict, "predict runtime at a GPU count",
            scenario_arg=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--data", default=None)

    p = add("pool", cmd_pool, "pooled VRAM and feasibility check")
    p.add_argument("--host", required=True)
    p.add_argument("--required", required=True,
                   help="bytes (suffixes like 2TB accepted)")
    p.add_argument("--state", default=None)

    p = add("serve", cmd_serve, "run the HTTP gateway")
    p.add_argument("--listen", default="127.0.0.1:8721")
    p.add_argument("--allow-origin", default=None)
    p.add_argument("--state", default=None,
                   help="flush composition state to this file on mutation")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except UnknownNodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FabricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR if exc.code == "BAD_REQUEST" else DOMAIN_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
