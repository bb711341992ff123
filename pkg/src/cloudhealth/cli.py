"""Operator command line: serve, resolve, snapshot (replay), validate.

JSON results go to stdout so commands compose in pipelines; logs and errors
go to stderr. Exit codes: 0 success, 1 usage error, 2 validation error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import aggregator, model as chmm, resolver
from .collector import Collector, HEARTBEAT_STREAM, KpiSample
from .errors import CloudHealthError, ParseError, ValidationError
from .model import GoalSelection
from .resolver import Layer, ServiceDescriptor, ServiceState

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_model(path: Optional[str]):
    if path is None:
        return chmm.default_model()
    with open(path, encoding="utf-8") as fh:
        return chmm.load_model(fh.read())


def _load_catalog(path: Optional[str]):
    if path is None:
        return resolver.default_catalog()
    with open(path, encoding="utf-8") as fh:
        return resolver.load_catalog(fh.read())


def _parse_services(arg: str) -> list[ServiceDescriptor]:
    services = []
    for chunk in arg.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        sid, _, layer = chunk.partition(":")
        services.append(ServiceDescriptor(service_id=sid,
                                          layer=Layer(layer or "VM"),
                                          state=ServiceState.RUNNING))
    return services


def cmd_validate(args) -> int:
    try:
        model = _load_model(args.model)
    except ValidationError as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(json.dumps({"valid": True, "version": model.version,
                      "nodes": len(model.nodes), "metrics": len(model.metrics)},
                     sort_keys=True))
    return EXIT_OK


def cmd_resolve(args) -> int:
    model = _load_model(args.model)
    catalog = _load_catalog(args.catalog)
    goals = frozenset(g.strip() for g in args.goals.split(",") if g.strip())
    services = _parse_services(args.services)
    metrics = chmm.subtree_metrics(model, goals)
    assignments = resolver.resolve_probes(metrics, services, catalog, model)
    print(json.dumps({
        "goals": sorted(goals),
        "metrics": sorted(metrics),
        "assignments": sorted((a.to_dict() for a in assignments),
                              key=lambda d: d["assignment_id"]),
    }, indent=2, sort_keys=True))
    return EXIT_OK


def _replay_collector(model, trace_path: str) -> tuple[Collector, dict[str, int]]:
    collector = Collector(model)
    samples = []
    with open(trace_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                samples.append(KpiSample.from_line(line))
    for s in samples:
        collector.register_probe(s.probe_id)
    for s in samples:
        collector.ingest(s)
    # Infer heartbeat cadence per service from consecutive beat spacing.
    beats: dict[str, list[int]] = {}
    for s in samples:
        if s.metric_id == HEARTBEAT_STREAM:
            beats.setdefault(s.service_id, []).append(s.ts)
    intervals = {}
    for sid, ts_list in beats.items():
        ts_list.sort()
        gaps = [b - a for a, b in zip(ts_list, ts_list[1:]) if b > a]
        intervals[sid] = min(gaps) if gaps else 1000
    return collector, intervals


def cmd_snapshot(args) -> int:
    model = _load_model(args.model)
    collector, beat_intervals = _replay_collector(model, args.replay)
    lo, hi = (int(x) for x in args.window.split(","))
    goals = frozenset(g.strip() for g in args.goals.split(",") if g.strip())
    service_ids = frozenset(args.services.split(",")) if args.services \
        else frozenset(collector.service_ids())
    selection = GoalSelection(actor_id="cli", node_ids=goals, service_ids=service_ids)
    snap = aggregator.snapshot(model, selection, (lo, hi), collector,
                               beat_intervals_ms=beat_intervals)
    print(json.dumps(snap.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_serve(args) -> int:
    # Imported lazily: uvicorn and the sim wiring are not needed by batch commands.
    import threading
    import time

    import uvicorn

    from .api import ServerState, create_app
    from .simenv import SimEnv, load_scenario

    model = _load_model(args.model)
    catalog = _load_catalog(args.catalog)
    with open(args.scenario, encoding="utf-8") as fh:
        spec = load_scenario(fh.read())
    collector = Collector(model, trace_path=args.trace)
    env = SimEnv(spec, collector)
    state = ServerState(model, catalog, env, collector, state_path=args.state)
    state.restore()
    app = create_app(state)

    if args.realtime:
        def ticker():
            tick_ms = 200
            while env.clock_ms < spec.duration_ms:
                time.sleep(tick_ms / 1000.0)
                with state.lock:
                    env.advance(tick_ms)
                state.events.publish("snapshot-updated", {"clock_ms": env.clock_ms})

        threading.Thread(target=ticker, daemon=True).start()
    else:
        with state.lock:
            env.advance(spec.duration_ms)
        print(f"scenario advanced to {env.clock_ms} ms (virtual clock)",
              file=sys.stderr)

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="cloudhealth",
                     description="Model-driven cloud health monitoring")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a model document")
    p.add_argument("--model", help="model JSON file (default: built-in model)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("resolve", help="resolve goals to metrics and probe assignments")
    p.add_argument("--model")
    p.add_argument("--catalog")
    p.add_argument("--goals", required=True, help="comma-separated node ids")
    p.add_argument("--services", default="S1",
                   help="comma-separated service ids, optional :layer suffix")
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("snapshot", help="recompute a health snapshot from a trace")
    p.add_argument("--replay", required=True, help="NDJSON KPI trace file")
    p.add_argument("--model")
    p.add_argument("--goals", required=True)
    p.add_argument("--services", default="")
    p.add_argument("--window", required=True, help="from,to in epoch/sim ms")
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("serve", help="run the API against a simulated scenario")
    p.add_argument("--model")
    p.add_argument("--catalog")
    p.add_argument("--scenario", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--realtime", action="store_true",
                   help="advance sim-time in step with wall time")
    p.add_argument("--trace", help="append ingested samples to this NDJSON file")
    p.add_argument("--state", help="JSON state file for actors/selections")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ValidationError as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return EXIT_VALIDATION
    except CloudHealthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if exc.code in ("validation_error", "unresolved_stub",
                                               "unknown_node") else EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
