import json

import pytest

from cloudhealth import Collector, default_model, derive_failure_stats
from cloudhealth.errors import InvalidScenario, OverlapError, PastEvent
from cloudhealth.resolver import (Layer, Mode, ProbeAssignment, ServiceDescriptor,
                                  ServiceState)
from cloudhealth.simenv import (BehaviorProfile, FaultEvent, FaultKind, ScenarioSpec,
                                SimEnv, load_scenario)

ALL_MODES = frozenset(Mode)


def _spec(faults=(), profile=None, workload=None, seed=7, duration=60_000):
    svc = ServiceDescriptor("S1", Layer.VM, state=ServiceState.RUNNING)
    return ScenarioSpec(
        seed=seed, duration_ms=duration,
        services=((svc, profile or BehaviorProfile(base_latency_ms=40, jitter_ms=0)),),
        faults=tuple(faults),
        workload=workload or {},
    )


def _assignment(kind, metrics, interval=1000, sid="S1"):
    return ProbeAssignment(
        assignment_id=f"{kind}@{sid}", probe_kind=kind, metric_ids=frozenset(metrics),
        service_id=sid, layer=Layer.VM, modes=ALL_MODES, interval_ms=interval)


def _env(spec):
    collector = Collector(default_model())
    return SimEnv(spec, collector), collector


def test_same_seed_same_samples():
    def run():
        env, col = _env(_spec(
            profile=BehaviorProfile(base_latency_ms=40, jitter_ms=15, noise=2.0),
            workload={"S1": [(0, 20.0)]}))
        env.activate_probe(_assignment("latency-probe", {"latency", "response_time"}))
        env.activate_probe(_assignment("resource-probe", {"cpu_utilization"}))
        env.advance(30_000)
        lat = col.query("latency", "S1", 0, 31_000)
        cpu = col.query("cpu_utilization", "S1", 0, 31_000)
        return lat.samples, cpu.samples

    assert run() == run()


def test_fault_referencing_unknown_service_is_invalid():
    svc = ServiceDescriptor("S1", Layer.VM, state=ServiceState.RUNNING)
    spec = ScenarioSpec(seed=1, duration_ms=1000,
                        services=((svc, BehaviorProfile()),),
                        faults=(FaultEvent("ghost", FaultKind.OUTAGE, 10, 10),))
    with pytest.raises(InvalidScenario):
        SimEnv(spec, Collector(default_model()))


def test_empty_scenario_advance_is_noop():
    spec = ScenarioSpec(seed=1, duration_ms=1000, services=())
    env, col = _env(spec)
    env.advance(1000)
    assert env.clock_ms == 1000
    assert col.service_ids() == set()


def test_heartbeat_zero_during_outage():
    env, col = _env(_spec(faults=[FaultEvent("S1", FaultKind.OUTAGE, 10_000, 3000)]))
    env.activate_probe(_assignment("heartbeat", {"failure_count"}))
    env.advance(20_000)
    beats = col.query("heartbeat", "S1", 0, 21_000)
    dead = [ts for ts, v in beats.samples if v == 0.0]
    assert dead == [10_000, 11_000, 12_000]


def test_latency_spike_arithmetic():
    env, col = _env(_spec(faults=[FaultEvent("S1", FaultKind.LATENCY_SPIKE,
                                             5000, 5000, magnitude=5.0)]))
    env.activate_probe(_assignment("latency-probe", {"latency"}))
    env.advance(15_000)
    # Base 40 ms, jitter 0: 200 ms during the x5 spike, 40 ms otherwise.
    for ts, v in col.query("latency", "S1", 0, 16_000).samples:
        assert v == (200.0 if 5000 <= ts < 10_000 else 40.0)


def test_cpu_follows_offered_load():
    env, col = _env(_spec(
        profile=BehaviorProfile(cpu_base=5.0, cpu_per_req=0.5, jitter_ms=0),
        workload={"S1": [(0, 10.0)]}))
    env.activate_probe(_assignment("resource-probe", {"cpu_utilization"}))
    env.advance(10_000)
    samples = col.query("cpu_utilization", "S1", 0, 11_000).samples
    assert samples and all(v == 10.0 for _, v in samples)


def test_throughput_probe_measures_served_rate():
    env, col = _env(_spec(workload={"S1": [(0, 50.0)]}))
    env.activate_probe(_assignment("throughput-probe", {"throughput"},
                                   interval=2000))
    env.advance(20_000)
    samples = col.query("throughput", "S1", 4000, 21_000).samples
    assert samples
    for _, v in samples:
        assert v == pytest.approx(50.0, abs=1.0)


def test_inject_fault_then_failure_stats():
    env, col = _env(_spec())
    env.activate_probe(_assignment("heartbeat", {"failure_count"}))
    env.inject_fault(FaultEvent("S1", FaultKind.OUTAGE, 10_000, 3000))
    env.advance(30_000)
    stats = derive_failure_stats(col.query("heartbeat", "S1", 0, 31_000), 1000)
    assert stats.num_failures == 1
    assert stats.total_downtime_ms == 3000
    assert stats.recovery_times_ms == (4000,)


def test_inject_past_event_rejected():
    env, _ = _env(_spec())
    env.advance(5000)
    with pytest.raises(PastEvent):
        env.inject_fault(FaultEvent("S1", FaultKind.OUTAGE, 5000, 1000))


def test_overlapping_fault_rejected():
    env, _ = _env(_spec(faults=[FaultEvent("S1", FaultKind.OUTAGE, 10_000, 5000)]))
    with pytest.raises(OverlapError):
        env.inject_fault(FaultEvent("S1", FaultKind.LATENCY_SPIKE, 12_000, 1000))


def test_probe_sampling_cadence():
    for interval, span in ((1000, 60_000), (700, 10_000), (3000, 50_000)):
        env, col = _env(_spec())
        env.activate_probe(_assignment("heartbeat", {"failure_count"},
                                       interval=interval))
        env.advance(span)
        n = col.sample_count("heartbeat", "S1")
        assert n in (span // interval, -(-span // interval))


def test_request_conservation_with_outage():
    env, _ = _env(_spec(faults=[FaultEvent("S1", FaultKind.OUTAGE, 10_000, 3000)],
                        workload={"S1": [(0, 50.0)]}))
    env.advance(60_000)
    rt = env.services["S1"]
    assert rt.sent == rt.served + rt.refused
    assert rt.refused == 150  # 3 s at 50 req/s refused by the outage


def test_piecewise_workload_schedule():
    env, _ = _env(_spec(workload={"S1": [(0, 10.0), (10_000, 0.0), (20_000, 40.0)]},
                        duration=30_000))
    env.advance(30_000)
    rt = env.services["S1"]
    # 10 s at 10 req/s + 10 s idle + 10 s at 40 req/s.
    assert rt.sent == pytest.approx(100 + 400, abs=2)


def test_scenario_json_round_trip():
    doc = {
        "seed": 3, "duration_ms": 5000,
        "services": [{"service_id": "S1", "layer": "VM", "state": "Running",
                      "profile": {"base_latency_ms": 25, "jitter_ms": 5},
                      "workload": [{"start_ms": 0, "rate": 10}]}],
        "faults": [{"service_id": "S1", "kind": "Outage",
                    "start_ms": 1000, "duration_ms": 500}],
    }
    spec = load_scenario(json.dumps(doc))
    assert spec.seed == 3
    assert spec.services[0][1].base_latency_ms == 25
    assert spec.faults[0].kind is FaultKind.OUTAGE
    with pytest.raises(InvalidScenario):
        load_scenario("{bad json")
    with pytest.raises(InvalidScenario):
        load_scenario(json.dumps({**doc, "duration_ms": -1}))
