import json

import pytest
from fastapi.testclient import TestClient

from cloudhealth import Collector, default_catalog, default_model
from cloudhealth.api import ServerState, create_app
from cloudhealth.resolver import Layer, ServiceDescriptor, ServiceState
from cloudhealth.simenv import (BehaviorProfile, FaultEvent, FaultKind, ScenarioSpec,
                                SimEnv)


def _state(tmp_path=None, faults=()):
    model = default_model()
    services = tuple(
        (ServiceDescriptor(sid, Layer.VM, state=ServiceState.RUNNING),
         BehaviorProfile(base_latency_ms=40, jitter_ms=0))
        for sid in ("S1", "S2"))
    spec = ScenarioSpec(seed=1, duration_ms=600_000, services=services,
                        faults=tuple(faults), workload={"S1": [(0, 50.0)]})
    collector = Collector(model)
    env = SimEnv(spec, collector)
    path = str(tmp_path / "state.json") if tmp_path else None
    return ServerState(model, default_catalog(), env, collector, state_path=path)


@pytest.fixture
def state(tmp_path):
    return _state(tmp_path)


@pytest.fixture
def client(state):
    return TestClient(create_app(state))


def _put_selection(client, actor, nodes, services=("S1",)):
    return client.put(f"/api/v1/actors/{actor}/selection",
                      json={"node_ids": list(nodes), "service_ids": list(services)})


def test_get_model_and_catalog(client):
    doc = client.get("/api/v1/model").json()
    assert {n["id"] for n in doc["nodes"]} >= {"Reliability", "Performance"}
    catalog = client.get("/api/v1/catalog").json()
    assert {c["probe_kind"] for c in catalog} == {
        "heartbeat", "latency-probe", "throughput-probe", "resource-probe"}


def test_selection_deploys_probes(client, state):
    r = _put_selection(client, "tech", ["Performance"])
    assert r.status_code == 200
    body = r.json()
    kinds = {a["assignment"]["probe_kind"] for a in body["plan"]["actions"]
             if a["action"] == "DeployProbe"}
    assert kinds == {"latency-probe", "throughput-probe", "resource-probe"}
    assert all(o["status"] == "Done" for o in body["report"]["outcomes"])
    # Identical selection: empty plan.
    r2 = _put_selection(client, "tech", ["Performance"])
    assert r2.status_code == 200
    assert r2.json()["plan"]["actions"] == []


def test_selection_validation_errors(client):
    assert _put_selection(client, "a", ["NoSuchNode"]).status_code == 404
    assert _put_selection(client, "a", ["Responsiveness"]).status_code == 422
    r = client.put("/api/v1/actors/a/selection",
                   json={"node_ids": ["Performance"], "service_ids": ["ghost"]})
    assert r.status_code == 404


def test_stale_revision_conflict(client):
    _put_selection(client, "a", ["Performance"])
    r = client.put("/api/v1/actors/a/selection",
                   json={"node_ids": ["Reliability"], "service_ids": ["S1"],
                         "revision": 0})
    assert r.status_code == 409


def test_multi_actor_union_and_reference_counting(client, state):
    _put_selection(client, "manager", ["Performance"])
    _put_selection(client, "tech", ["Availability"])
    active_kinds = {a.probe_kind for a in state.active.values()}
    assert active_kinds == {"latency-probe", "throughput-probe", "resource-probe",
                            "heartbeat"}
    # Probe set equals resolve over the union of all actors' needs.
    assert {a.assignment_id for a in state.desired_assignments()} == \
        set(state.env.active_assignment_ids())
    # Dropping one actor's selection removes only un-referenced probes.
    r = _put_selection(client, "manager", [])
    assert r.status_code == 200
    remaining = {a.probe_kind for a in state.active.values()}
    assert remaining == {"heartbeat"}


def test_overlapping_actors_share_probes(client, state):
    _put_selection(client, "a", ["TimeBehaviour"])
    before = set(state.env.active_assignment_ids())
    r = _put_selection(client, "b", ["TimeBehaviour"])
    assert r.json()["plan"]["actions"] == []  # fully shared, no churn
    _put_selection(client, "a", [])
    assert set(state.env.active_assignment_ids()) == before  # b still needs them


def test_health_requires_selection(client):
    assert client.get("/api/v1/actors/nobody/health").status_code == 404


def test_health_snapshot_per_actor(client, state):
    _put_selection(client, "manager", ["Performance"])
    _put_selection(client, "tech", ["Availability"])
    client.post("/api/v1/sim/advance", params={"dt_ms": 30_000})
    mgr = client.get("/api/v1/actors/manager/health",
                     params={"window": "0,30000"}).json()
    tech = client.get("/api/v1/actors/tech/health",
                      params={"window": "0,30000"}).json()
    assert "Performance" in mgr["scores"]
    assert "Availability" not in mgr["scores"]
    assert "Availability" in tech["scores"]
    assert tech["scores"]["Availability"]["state"] == "Healthy"


def test_drill_down_after_latency_fault(tmp_path):
    state = _state(tmp_path, faults=[FaultEvent("S1", FaultKind.LATENCY_SPIKE,
                                                1000, 59_000, magnitude=20.0)])
    client = TestClient(create_app(state))
    _put_selection(client, "op", ["Performance"])
    client.post("/api/v1/sim/advance", params={"dt_ms": 60_000})
    node = client.get("/api/v1/health/node/Performance",
                      params={"actor": "op", "window": "0,60000"}).json()
    assert node["state"] == "Degraded"
    by_id = {c["node_id"]: c for c in node["children"]}
    worst = min(by_id.values(), key=lambda c: c["score"])
    assert worst["node_id"] == "TimeBehaviour"
    assert by_id["TimeBehaviour"]["score"] < 0.5


def test_kpis_endpoint(client, state):
    _put_selection(client, "op", ["TimeBehaviour"])
    client.post("/api/v1/sim/advance", params={"dt_ms": 60_000})
    r = client.get("/api/v1/kpis", params={"metric": "latency", "service": "S1",
                                           "from": 0, "to": 60_000})
    body = r.json()
    assert body["stats"]["count"] > 0
    assert all(v == 40.0 for _, v in body["samples"])


def test_ingest_wire_format(client, state):
    state.collector.register_probe("ext-1")
    ok_line = json.dumps({"probe_id": "ext-1", "service_id": "S9",
                          "metric_id": "latency", "ts": 1234, "value": 5.0,
                          "unit": "ms"})
    r = client.post("/ingest", content=ok_line + "\n")
    assert r.status_code == 204
    bad = ok_line + "\n" + json.dumps({"probe_id": "ext-1", "service_id": "S9",
                                       "metric_id": "latency", "ts": 2000,
                                       "value": 5.0, "unit": "s"})
    r = client.post("/ingest", content=bad)
    assert r.status_code == 400
    errs = r.json()["errors"]
    assert len(errs) == 1 and errs[0]["line"] == 2


def test_gets_do_not_change_deployment_state(client, state):
    _put_selection(client, "op", ["Performance"])
    client.post("/api/v1/sim/advance", params={"dt_ms": 10_000})
    before = set(state.env.active_assignment_ids())
    for _ in range(3):
        client.get("/api/v1/actors/op/health", params={"window": "0,10000"})
        client.get("/api/v1/health/node/Performance",
                   params={"actor": "op", "window": "0,10000"})
        client.get("/api/v1/model")
        client.get("/api/v1/kpis", params={"metric": "latency", "service": "S1",
                                           "from": 0, "to": 10_000})
    assert set(state.env.active_assignment_ids()) == before


def test_model_extend_endpoint(client):
    patch = {"nodes": [
        {"id": "Security", "kind": "Goal", "children": ["SecProp"]},
        {"id": "SecProp", "kind": "Property", "children": ["sec_alerts"]},
        {"id": "sec_alerts", "kind": "Metric"}]}
    r = client.post("/api/v1/model/extend", json=patch)
    # Metric node without a matching metric definition is invalid.
    assert r.status_code == 422
    patch["metrics"] = [{"id": "sec_alerts", "unit": "count",
                         "direction": "LowerIsBetter", "target": 0, "critical": 10,
                         "probe_kind": "siem"}]
    r = client.post("/api/v1/model/extend", json=patch)
    assert r.status_code == 200
    assert r.json()["version"] == 2


def test_extend_invalidates_stale_selection(client):
    _put_selection(client, "op", ["Performance"])
    client.post("/api/v1/model/extend", json={})
    r = client.get("/api/v1/actors/op/health")
    assert r.status_code == 409  # version mismatch: re-resolve required


def test_event_stream(client, state):
    state.events.publish("fault-detected", {"service_id": "S1"})
    with client.stream("GET", "/api/v1/events", params={"limit": 1}) as r:
        text = "".join(r.iter_text())
    assert "event: fault-detected" in text
    assert '"service_id": "S1"' in text


def test_fault_hook_publishes_event(client, state):
    state.env.inject_fault(FaultEvent("S1", FaultKind.OUTAGE, 5000, 1000))
    client.post("/api/v1/sim/advance", params={"dt_ms": 10_000})
    assert any(e == "fault-detected" for e, _ in state.events.history)


def test_state_persistence_round_trip(tmp_path):
    state = _state(tmp_path)
    client = TestClient(create_app(state))
    _put_selection(client, "op", ["Performance"], services=("S1", "S2"))
    client.put("/api/v1/actors/op/layout", json={"theme": "dark"})

    fresh = _state(tmp_path)
    fresh.restore()
    actor = fresh.actors["op"]
    assert actor.selection.node_ids == frozenset({"Performance"})
    assert actor.selection.service_ids == frozenset({"S1", "S2"})
    assert actor.layout == {"theme": "dark"}
