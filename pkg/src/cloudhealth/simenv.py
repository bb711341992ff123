"""Deterministic simulated cloud environment.

A virtual clock drives request arrivals, fault windows, and probe sampling.
Identical scenario specs (same seed) produce bit-identical sample streams.
Requests are generated evenly spaced at the offered rate, routed through a
per-service load balancer to the active instance, and either served (with
the profile's latency) or refused while an Outage is active.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .collector import Collector, HEARTBEAT_STREAM, KpiSample
from .errors import (AccessDenied, EnvError, InvalidScenario, OverlapError,
                     PastEvent, SpawnFailed)
from .resolver import Layer, ProbeAssignment, ServiceDescriptor, ServiceState


class FaultKind(str, Enum):
    OUTAGE = "Outage"
    LATENCY_SPIKE = "LatencySpike"
    THROUGHPUT_DROP = "ThroughputDrop"


@dataclass(frozen=True)
class BehaviorProfile:
    base_latency_ms: float = 40.0
    jitter_ms: float = 0.0
    max_throughput: float = 100.0
    cpu_base: float = 5.0
    mem_base: float = 30.0
    cpu_per_req: float = 0.5
    noise: float = 0.0

    def validate(self) -> list[str]:
        problems = []
        for name in ("base_latency_ms", "jitter_ms", "cpu_base", "mem_base",
                     "cpu_per_req", "noise"):
            if getattr(self, name) < 0:
                problems.append(f"profile field {name} must be non-negative")
        if self.max_throughput <= 0:
            problems.append("max_throughput must be positive")
        return problems


@dataclass(frozen=True)
class FaultEvent:
    service_id: str
    kind: FaultKind
    start_ms: int
    duration_ms: int
    magnitude: float = 1.0

    @property
    def end_ms(self) -> int:
        return self.start_ms + self.duration_ms

    def active_at(self, ts: int) -> bool:
        return self.start_ms <= ts < self.end_ms

    def to_dict(self) -> dict:
        return {"service_id": self.service_id, "kind": self.kind.value,
                "start_ms": self.start_ms, "duration_ms": self.duration_ms,
                "magnitude": self.magnitude}


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    duration_ms: int
    services: tuple[tuple[ServiceDescriptor, BehaviorProfile], ...]
    faults: tuple[FaultEvent, ...] = ()
    workload: dict = field(default_factory=dict)  # service_id -> [(start_ms, rate)]
    max_instances: int = 16
    guest_access: bool = True

    def validate(self) -> list[str]:
        problems = []
        if self.duration_ms <= 0:
            problems.append("duration_ms must be positive")
        ids = [d.service_id for d, _ in self.services]
        if len(set(ids)) != len(ids):
            problems.append("service ids must be unique")
        for _, profile in self.services:
            problems.extend(profile.validate())
        for f in self.faults:
            if f.service_id not in ids:
                problems.append(f"fault references unknown service {f.service_id!r}")
            if f.duration_ms <= 0:
                problems.append("fault duration must be positive")
        by_service: dict[str, list[FaultEvent]] = {}
        for f in self.faults:
            by_service.setdefault(f.service_id, []).append(f)
        for sid, events in by_service.items():
            events.sort(key=lambda e: e.start_ms)
            for a, b in zip(events, events[1:]):
                if b.start_ms < a.end_ms:
                    problems.append(f"overlapping faults on service {sid!r}")
        for sid in self.workload:
            if sid not in ids:
                problems.append(f"workload references unknown service {sid!r}")
        return problems


def load_scenario(text: str) -> ScenarioSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidScenario(f"scenario is not valid JSON: {exc}") from exc
    try:
        services = []
        workload = {}
        for rec in doc.get("services", []):
            desc = ServiceDescriptor(
                service_id=rec["service_id"],
                layer=Layer(rec.get("layer", "VM")),
                endpoint=rec.get("endpoint", "sim:0"),
                state=ServiceState(rec.get("state", "Running")),
            )
            profile = BehaviorProfile(**rec.get("profile", {}))
            services.append((desc, profile))
            if "workload" in rec:
                workload[desc.service_id] = [
                    (int(seg["start_ms"]), float(seg["rate"])) for seg in rec["workload"]]
        faults = tuple(
            FaultEvent(service_id=rec["service_id"], kind=FaultKind(rec["kind"]),
                       start_ms=int(rec["start_ms"]), duration_ms=int(rec["duration_ms"]),
                       magnitude=float(rec.get("magnitude", 1.0)))
            for rec in doc.get("faults", []))
        spec = ScenarioSpec(
            seed=int(doc.get("seed", 0)),
            duration_ms=int(doc["duration_ms"]),
            services=tuple(services),
            faults=faults,
            workload=workload,
            max_instances=int(doc.get("max_instances", 16)),
            guest_access=bool(doc.get("guest_access", True)),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidScenario(f"bad scenario document: {exc}") from exc
    problems = spec.validate()
    if problems:
        raise InvalidScenario("; ".join(problems))
    return spec


@dataclass
class Instance:
    instance_id: str
    spawned_at: int
    completions: list[int] = field(default_factory=list)  # pending completion ts


@dataclass
class _ServiceRuntime:
    descriptor: ServiceDescriptor
    profile: BehaviorProfile
    workload: list[tuple[int, float]]
    instances: dict[str, Instance] = field(default_factory=dict)
    lb_target: Optional[str] = None
    sent: int = 0
    served: int = 0
    refused: int = 0
    next_arrival: Optional[float] = None


@dataclass
class _ProbeRuntime:
    assignment: ProbeAssignment
    instance_id: Optional[str]
    next_sample: int
    activated_at: int
    last_served: int = 0
    last_sent: int = 0


class SimEnv:
    """Virtual-clock environment; `advance` is the only way time passes."""

    def __init__(self, spec: ScenarioSpec, collector: Collector):
        problems = spec.validate()
        if problems:
            raise InvalidScenario("; ".join(problems))
        self.spec = spec
        self.collector = collector
        self.clock_ms = 0
        self.rng = random.Random(spec.seed)
        self.guest_access = spec.guest_access
        self.max_instances = spec.max_instances
        self.fail_next_spawn = False
        self.services: dict[str, _ServiceRuntime] = {}
        self.probes: dict[str, _ProbeRuntime] = {}
        self.faults: list[FaultEvent] = sorted(spec.faults,
                                               key=lambda f: (f.start_ms, f.service_id))
        self.fault_hooks: list[Callable[[FaultEvent], None]] = []
        self._fired_faults: set[FaultEvent] = set()
        self._instance_seq = 0
        for desc, profile in spec.services:
            rt = _ServiceRuntime(descriptor=desc, profile=profile,
                                 workload=spec.workload.get(desc.service_id, []))
            self.services[desc.service_id] = rt
            if desc.state is ServiceState.RUNNING:
                iid = self._new_instance_id(desc.service_id)
                rt.instances[iid] = Instance(iid, 0)
                rt.lb_target = iid
                desc.instance_ids = [iid]
                rt.next_arrival = self._first_arrival(rt, 0)

    # -- scenario mechanics -------------------------------------------------

    def _new_instance_id(self, service_id: str) -> str:
        self._instance_seq += 1
        return f"{service_id}-i{self._instance_seq}"

    def _rate_at(self, rt: _ServiceRuntime, ts: float) -> float:
        rate = 0.0
        for start, r in rt.workload:
            if ts >= start:
                rate = r
        return rate

    def _first_arrival(self, rt: _ServiceRuntime, ts: float) -> Optional[float]:
        rate = self._rate_at(rt, ts)
        if rate > 0:
            return ts + 1000.0 / rate
        # Jump to the next workload segment with a positive rate.
        for start, r in rt.workload:
            if start > ts and r > 0:
                return start + 1000.0 / r
        return None

    def _fault_at(self, service_id: str, ts: int, kind: FaultKind) -> Optional[FaultEvent]:
        for f in self.faults:
            if f.service_id == service_id and f.kind is kind and f.active_at(ts):
                return f
        return None

    def latency_ms(self, service_id: str, ts: int) -> float:
        rt = self.services[service_id]
        value = rt.profile.base_latency_ms
        if rt.profile.jitter_ms:
            value += self.rng.uniform(-rt.profile.jitter_ms, rt.profile.jitter_ms)
        spike = self._fault_at(service_id, ts, FaultKind.LATENCY_SPIKE)
        if spike:
            value *= spike.magnitude
        return max(value, 0.0)

    def inject_fault(self, event: FaultEvent) -> None:
        if event.service_id not in self.services:
            raise InvalidScenario(f"fault references unknown service {event.service_id!r}")
        if event.start_ms <= self.clock_ms:
            raise PastEvent(f"fault starts at {event.start_ms}, clock is {self.clock_ms}")
        if event.duration_ms <= 0:
            raise InvalidScenario("fault duration must be positive")
        for f in self.faults:
            if f.service_id == event.service_id and not (
                    event.end_ms <= f.start_ms or event.start_ms >= f.end_ms):
                raise OverlapError(
                    f"fault overlaps an existing event on {event.service_id!r}")
        self.faults.append(event)
        self.faults.sort(key=lambda f: (f.start_ms, f.service_id))

    # -- deployment surface (used by the deployer) --------------------------

    def live_instance_count(self) -> int:
        return sum(len(rt.instances) for rt in self.services.values())

    def spawn_instance(self, service_id: str) -> str:
        rt = self.services[service_id]
        if self.fail_next_spawn:
            self.fail_next_spawn = False
            raise SpawnFailed(f"simulated spawn failure for {service_id!r}")
        if self.live_instance_count() >= self.max_instances:
            raise EnvError("environment at instance capacity")
        iid = self._new_instance_id(service_id)
        rt.instances[iid] = Instance(iid, self.clock_ms)
        rt.descriptor.instance_ids = list(rt.instances)
        if rt.descriptor.state is ServiceState.NOT_DEPLOYED:
            rt.descriptor.state = ServiceState.RUNNING
            rt.lb_target = iid
            rt.next_arrival = self._first_arrival(rt, self.clock_ms)
        return iid

    def migrate_load(self, service_id: str, to_instance: str) -> None:
        rt = self.services[service_id]
        assert to_instance in rt.instances
        rt.lb_target = to_instance

    def in_flight(self, service_id: str, instance_id: str) -> int:
        inst = self.services[service_id].instances[instance_id]
        inst.completions = [c for c in inst.completions if c > self.clock_ms]
        return len(inst.completions)

    def retire_instance(self, service_id: str, instance_id: str) -> None:
        rt = self.services[service_id]
        rt.instances.pop(instance_id, None)
        rt.descriptor.instance_ids = list(rt.instances)
        # Re-home probes so their sample streams continue without a gap.
        for pr in self.probes.values():
            if pr.assignment.service_id == service_id and pr.instance_id == instance_id:
                pr.instance_id = rt.lb_target

    def activate_probe(self, assignment: ProbeAssignment,
                       instance_id: Optional[str] = None) -> None:
        if assignment.assignment_id in self.probes:
            return
        rt = self.services[assignment.service_id]
        pr = _ProbeRuntime(
            assignment=assignment,
            instance_id=instance_id or rt.lb_target,
            next_sample=self.clock_ms + assignment.interval_ms,
            activated_at=self.clock_ms,
            last_served=rt.served,
            last_sent=rt.sent,
        )
        self.collector.register_probe(assignment.assignment_id)
        self.probes[assignment.assignment_id] = pr

    def deactivate_probe(self, assignment_id: str) -> bool:
        return self.probes.pop(assignment_id, None) is not None

    def active_assignment_ids(self) -> set[str]:
        return set(self.probes)

    # -- time ----------------------------------------------------------------

    def advance(self, dt_ms: int) -> None:
        assert dt_ms > 0, "advance requires a positive duration"
        end = self.clock_ms + dt_ms
        while True:
            # Next arrival across services, next sample across probes.
            next_arrival = None
            for sid in sorted(self.services):
                rt = self.services[sid]
                if rt.next_arrival is not None and rt.descriptor.state is ServiceState.RUNNING:
                    cand = (rt.next_arrival, sid)
                    if next_arrival is None or cand < next_arrival:
                        next_arrival = cand
            next_probe = None
            for pid in sorted(self.probes):
                cand = (self.probes[pid].next_sample, pid)
                if next_probe is None or cand < next_probe:
                    next_probe = cand

            candidates = []
            if next_arrival is not None and next_arrival[0] <= end:
                candidates.append((next_arrival[0], 0, next_arrival[1]))
            if next_probe is not None and next_probe[0] <= end:
                candidates.append((next_probe[0], 1, next_probe[1]))
            if not candidates:
                break
            ts, kind, ident = min(candidates)
            if kind == 0:
                self._process_arrival(ident)
            else:
                self.clock_ms = int(ts)
                self._emit_probe_sample(ident)
        self.clock_ms = end
        for f in self.faults:
            if f not in self._fired_faults and f.start_ms <= end:
                self._fired_faults.add(f)
                for hook in self.fault_hooks:
                    hook(f)

    def _process_arrival(self, service_id: str) -> None:
        rt = self.services[service_id]
        ts = rt.next_arrival
        self.clock_ms = max(self.clock_ms, int(ts))
        t = int(ts)
        rt.sent += 1
        refused = self._fault_at(service_id, t, FaultKind.OUTAGE) is not None
        drop = self._fault_at(service_id, t, FaultKind.THROUGHPUT_DROP)
        if not refused and drop is not None:
            refused = self.rng.random() < drop.magnitude
        if refused:
            rt.refused += 1
        else:
            rt.served += 1
            target = rt.instances.get(rt.lb_target)
            if target is not None:
                target.completions.append(t + int(round(self.latency_ms(service_id, t))))
        rate = self._rate_at(rt, ts)
        rt.next_arrival = ts + 1000.0 / rate if rate > 0 else self._first_arrival(rt, ts)

    def _emit_probe_sample(self, assignment_id: str) -> None:
        pr = self.probes[assignment_id]
        a = pr.assignment
        ts = pr.next_sample
        pr.next_sample = ts + a.interval_ms
        rt = self.services[a.service_id]
        interval_s = a.interval_ms / 1000.0
        samples: list[tuple[str, float, str]] = []

        if a.probe_kind == "heartbeat":
            alive = (rt.descriptor.state is ServiceState.RUNNING and
                     self._fault_at(a.service_id, ts, FaultKind.OUTAGE) is None)
            samples.append((HEARTBEAT_STREAM, 1.0 if alive else 0.0, "bool"))
        elif a.probe_kind == "latency-probe":
            if self._fault_at(a.service_id, ts, FaultKind.OUTAGE) is None:
                value = self.latency_ms(a.service_id, ts)
                for mid in sorted(a.metric_ids):
                    samples.append((mid, value, "ms"))
        elif a.probe_kind == "resource-probe":
            load = self._rate_at(rt, ts)
            cpu = rt.profile.cpu_base + rt.profile.cpu_per_req * load
            mem = rt.profile.mem_base
            if rt.profile.noise:
                cpu += self.rng.uniform(-rt.profile.noise, rt.profile.noise)
                mem += self.rng.uniform(-rt.profile.noise, rt.profile.noise)
            if "cpu_utilization" in a.metric_ids:
                samples.append(("cpu_utilization", min(max(cpu, 0.0), 100.0), "percent"))
            if "memory_utilization" in a.metric_ids:
                samples.append(("memory_utilization", min(max(mem, 0.0), 100.0), "percent"))
        elif a.probe_kind == "throughput-probe":
            served_delta = rt.served - pr.last_served
            sent_delta = rt.sent - pr.last_sent
            pr.last_served = rt.served
            pr.last_sent = rt.sent
            if "throughput" in a.metric_ids:
                samples.append(("throughput", served_delta / interval_s, "req/s"))
            if "workload_size" in a.metric_ids:
                samples.append(("workload_size", sent_delta / interval_s, "req/s"))
        else:
            # Unknown probe kinds emit a neutral reading per covered metric.
            for mid in sorted(a.metric_ids):
                unit = self.collector.known_units(mid) or "count"
                samples.append((mid, 0.0, unit))

        for metric_id, value, unit in samples:
            self.collector.ingest(KpiSample(
                probe_id=a.assignment_id, service_id=a.service_id,
                metric_id=metric_id, ts=ts, value=value, unit=unit))


def start_scenario(spec: ScenarioSpec, collector: Collector) -> SimEnv:
    return SimEnv(spec, collector)
