import json

import pytest

from cloudhealth import Collector, default_model
from cloudhealth.cli import main
from cloudhealth.resolver import (Layer, Mode, ProbeAssignment, ServiceDescriptor,
                                  ServiceState)
from cloudhealth.simenv import (BehaviorProfile, FaultEvent, FaultKind, ScenarioSpec,
                                SimEnv)


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_builtin_model(capsys):
    code, out, _ = _run(capsys, "validate")
    assert code == 0
    doc = json.loads(out)
    assert doc["valid"] is True
    assert doc["nodes"] == len(default_model().nodes)


def test_validate_invalid_model_exits_2(tmp_path, capsys):
    bad = {"version": 1, "nodes": [
        {"id": "A", "kind": "Property", "children": []}], "metrics": [], "stubs": []}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    code, _, err = _run(capsys, "validate", "--model", str(path))
    assert code == 2
    assert err.strip()  # violations are reported


def test_validate_missing_file_exits_2(capsys):
    code, _, err = _run(capsys, "validate", "--model", "/no/such/file.json")
    assert code == 2
    assert "error" in err


def test_usage_errors_exit_1(capsys):
    assert _run(capsys, )[0] == 1                       # no subcommand
    assert _run(capsys, "frobnicate")[0] == 1           # unknown subcommand
    assert _run(capsys, "resolve")[0] == 1              # missing --goals


def test_resolve_performance_goal(capsys):
    code, out, _ = _run(capsys, "resolve", "--goals", "Performance",
                        "--services", "S1:VM,S2:Container")
    assert code == 0
    doc = json.loads(out)
    assert {"response_time", "latency", "throughput"} <= set(doc["metrics"])
    services = {a["service_id"] for a in doc["assignments"]}
    assert services == {"S1", "S2"}
    ids = [a["assignment_id"] for a in doc["assignments"]]
    assert ids == sorted(ids)


def test_resolve_unknown_goal_exits_2(capsys):
    code, _, err = _run(capsys, "resolve", "--goals", "Nonsense")
    assert code == 2
    assert "Nonsense" in err


def test_resolve_stub_goal_exits_2(capsys):
    code, _, err = _run(capsys, "resolve", "--goals", "Adaptability")
    assert code == 2
    assert "stub" in err.lower()


def _write_trace(path):
    """Simulate a 60 s scenario with a 3 s outage, tracing all KPI samples."""
    svc = ServiceDescriptor("S1", Layer.VM, state=ServiceState.RUNNING)
    spec = ScenarioSpec(
        seed=11, duration_ms=60_000,
        services=((svc, BehaviorProfile(base_latency_ms=40, jitter_ms=10, noise=1.0)),),
        faults=(FaultEvent("S1", FaultKind.OUTAGE, 20_000, 3000),),
        workload={"S1": [(0, 25.0)]})
    collector = Collector(default_model(), trace_path=str(path))
    env = SimEnv(spec, collector)
    for kind, metrics, interval in (
            ("heartbeat", {"failure_count", "failure_duration", "recovery_time"}, 1000),
            ("latency-probe", {"latency", "response_time"}, 5000)):
        env.activate_probe(ProbeAssignment(
            assignment_id=f"{kind}@S1", probe_kind=kind,
            metric_ids=frozenset(metrics), service_id="S1", layer=Layer.VM,
            modes=frozenset(Mode), interval_ms=interval))
    env.advance(60_000)


def test_snapshot_replay_is_deterministic(tmp_path, capsys):
    trace = tmp_path / "trace.ndjson"
    _write_trace(trace)
    args = ("snapshot", "--replay", str(trace), "--goals", "Availability,latency",
            "--window", "0,60000")
    code1, out1, _ = _run(capsys, *args)
    code2, out2, _ = _run(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2  # byte-identical replays

    scores = json.loads(out1)["scores"]
    # One 3 s outage in the window: failure_count is exactly 1.
    assert scores["failure_count"]["score"] == 0.0
    assert scores["Availability"]["state"] == "Unhealthy"
    assert scores["latency"]["score"] is not None


def test_snapshot_window_subsets_differ(tmp_path, capsys):
    trace = tmp_path / "trace.ndjson"
    _write_trace(trace)
    _, healthy_out, _ = _run(capsys, "snapshot", "--replay", str(trace),
                             "--goals", "Availability", "--window", "0,19000")
    scores = json.loads(healthy_out)["scores"]
    # Before the outage starts, availability is perfect.
    assert scores["Availability"]["state"] == "Healthy"
    assert scores["failure_count"]["score"] == 1.0
