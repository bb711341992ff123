"""Map metric sets onto concrete probe assignments and diff deployment plans.

Resolution is layer-aware: a probe spec is eligible for a service only if
it supports the service's architecture layer. Ties between eligible specs
are broken by coverage (most requested metrics), then by probe kind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .errors import NoProbeForMetric, ParseError, ValidationError
from .model import MonitoringModel


class Layer(str, Enum):
    VM = "VM"
    CONTAINER = "Container"
    PAAS = "PaaS"
    PROCESS = "Process"


class Mode(str, Enum):
    CO_DEPLOY = "CoDeploy"
    BLUE_GREEN_ATTACH = "BlueGreenAttach"
    IN_GUEST_INJECT = "InGuestInject"


class ServiceState(str, Enum):
    NOT_DEPLOYED = "NotDeployed"
    RUNNING = "Running"


class AssignmentStatus(str, Enum):
    PLANNED = "Planned"
    DEPLOYING = "Deploying"
    ACTIVE = "Active"
    RETIRING = "Retiring"
    REMOVED = "Removed"


@dataclass(frozen=True)
class ProbeSpec:
    probe_kind: str
    provides: frozenset[str]
    layers: frozenset[Layer]
    modes: frozenset[Mode]
    default_interval_ms: int = 1000
    params: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        problems = []
        if not self.provides:
            problems.append(f"probe {self.probe_kind!r}: provides is empty")
        if not self.layers:
            problems.append(f"probe {self.probe_kind!r}: layers is empty")
        if not self.modes:
            problems.append(f"probe {self.probe_kind!r}: modes is empty")
        if problems:
            raise ValidationError(problems)


@dataclass
class ServiceDescriptor:
    service_id: str
    layer: Layer
    endpoint: str = "localhost:0"
    state: ServiceState = ServiceState.NOT_DEPLOYED
    instance_ids: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ProbeAssignment:
    assignment_id: str
    probe_kind: str
    metric_ids: frozenset[str]
    service_id: str
    layer: Layer
    modes: frozenset[Mode]
    interval_ms: int
    status: AssignmentStatus = AssignmentStatus.PLANNED

    def key(self) -> tuple:
        """Identity used when diffing plans: what is measured, where, by what."""
        return (self.probe_kind, self.service_id, self.metric_ids)

    def to_dict(self) -> dict:
        return {
            "assignment_id": self.assignment_id,
            "probe_kind": self.probe_kind,
            "metric_ids": sorted(self.metric_ids),
            "service_id": self.service_id,
            "layer": self.layer.value,
            "modes": sorted(m.value for m in self.modes),
            "interval_ms": self.interval_ms,
            "status": self.status.value,
        }


# Deployment plan actions.

@dataclass(frozen=True)
class DeployProbe:
    assignment: ProbeAssignment

    def to_dict(self) -> dict:
        return {"action": "DeployProbe", "assignment": self.assignment.to_dict()}


@dataclass(frozen=True)
class UndeployProbe:
    assignment_id: str
    service_id: str

    def to_dict(self) -> dict:
        return {"action": "UndeployProbe", "assignment_id": self.assignment_id,
                "service_id": self.service_id}


@dataclass(frozen=True)
class SpawnInstance:
    service_id: str
    probe_kinds: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"action": "SpawnInstance", "service_id": self.service_id,
                "probe_kinds": list(self.probe_kinds)}


@dataclass(frozen=True)
class MigrateLoad:
    service_id: str
    from_instance: str
    to_instance: str

    def to_dict(self) -> dict:
        return {"action": "MigrateLoad", "service_id": self.service_id,
                "from": self.from_instance, "to": self.to_instance}


@dataclass(frozen=True)
class RetireInstance:
    service_id: str
    instance_id: str

    def to_dict(self) -> dict:
        return {"action": "RetireInstance", "service_id": self.service_id,
                "instance_id": self.instance_id}


PlanAction = object


@dataclass(frozen=True)
class DeploymentPlan:
    actions: tuple = ()

    def is_empty(self) -> bool:
        return not self.actions

    def to_dict(self) -> dict:
        return {"actions": [a.to_dict() for a in self.actions]}


def load_catalog(text: str) -> list[ProbeSpec]:
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"probe catalog is not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise ParseError("probe catalog must be a JSON list")
    specs = []
    for rec in records:
        try:
            specs.append(ProbeSpec(
                probe_kind=rec["probe_kind"],
                provides=frozenset(rec["provides"]),
                layers=frozenset(Layer(x) for x in rec["layers"]),
                modes=frozenset(Mode(x) for x in rec["modes"]),
                default_interval_ms=int(rec.get("default_interval_ms", 1000)),
                params=dict(rec.get("params", {})),
            ))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"bad probe spec {rec!r}: {exc}") from exc
    kinds = [s.probe_kind for s in specs]
    if len(set(kinds)) != len(kinds):
        raise ValidationError(["duplicate probe_kind in catalog"])
    return specs


def catalog_to_document(catalog: Iterable[ProbeSpec]) -> list[dict]:
    return [
        {
            "probe_kind": s.probe_kind,
            "provides": sorted(s.provides),
            "layers": sorted(l.value for l in s.layers),
            "modes": sorted(m.value for m in s.modes),
            "default_interval_ms": s.default_interval_ms,
            "params": dict(s.params),
        }
        for s in catalog
    ]


ALL_MODES = frozenset(Mode)


def default_catalog() -> list[ProbeSpec]:
    return [
        ProbeSpec("heartbeat",
                  frozenset({"failure_count", "failure_duration", "recovery_time"}),
                  frozenset({Layer.VM, Layer.CONTAINER, Layer.PROCESS}),
                  ALL_MODES, default_interval_ms=1000),
        ProbeSpec("latency-probe",
                  frozenset({"response_time", "latency"}),
                  frozenset(Layer), ALL_MODES, default_interval_ms=1000),
        ProbeSpec("throughput-probe",
                  frozenset({"throughput", "workload_size"}),
                  frozenset(Layer), ALL_MODES, default_interval_ms=1000),
        ProbeSpec("resource-probe",
                  frozenset({"cpu_utilization", "memory_utilization"}),
                  frozenset({Layer.VM, Layer.CONTAINER}),
                  frozenset({Mode.CO_DEPLOY, Mode.IN_GUEST_INJECT}),
                  default_interval_ms=1000),
    ]


def resolve_for_service(metrics: frozenset[str], service: ServiceDescriptor,
                        catalog: Sequence[ProbeSpec],
                        model: Optional[MonitoringModel] = None) -> set[ProbeAssignment]:
    """Cover the requested metrics on one service, merging per probe kind."""
    remaining = set(metrics)
    assignments: set[ProbeAssignment] = set()
    eligible = [s for s in catalog if service.layer in s.layers]
    while remaining:
        best = None
        for spec in eligible:
            covered = spec.provides & remaining
            if not covered:
                continue
            rank = (-len(covered), spec.probe_kind)
            if best is None or rank < best[0]:
                best = (rank, spec, covered)
        if best is None:
            metric = min(remaining)
            raise NoProbeForMetric(metric, service.service_id, service.layer.value)
        _, spec, covered = best
        # The covered metric set is part of the identity so plans that change
        # a probe's coverage deploy/undeploy distinct assignment ids.
        suffix = "+".join(sorted(covered))
        interval = spec.default_interval_ms
        if model is not None:
            windows = [model.metrics[m].window_ms for m in covered if m in model.metrics]
            if windows:
                interval = max(spec.default_interval_ms, min(windows) // 6)
        assignments.add(ProbeAssignment(
            assignment_id=f"{spec.probe_kind}@{service.service_id}#{suffix}",
            probe_kind=spec.probe_kind,
            metric_ids=frozenset(covered),
            service_id=service.service_id,
            layer=service.layer,
            modes=spec.modes,
            interval_ms=interval,
        ))
        remaining -= covered
    return assignments


def resolve_probes(metrics: Iterable[str], services: Iterable[ServiceDescriptor],
                   catalog: Sequence[ProbeSpec],
                   model: Optional[MonitoringModel] = None) -> set[ProbeAssignment]:
    """One assignment set covering every requested metric on every service."""
    wanted = frozenset(metrics)
    out: set[ProbeAssignment] = set()
    for service in sorted(services, key=lambda s: s.service_id):
        out |= resolve_for_service(wanted, service, catalog, model)
    return out


def plan_diff(current: Iterable[ProbeAssignment],
              desired: Iterable[ProbeAssignment]) -> DeploymentPlan:
    """Deploy what's newly desired, undeploy what's no longer needed.

    Assignments are matched by (probe_kind, service, metric set); deploys are
    ordered before undeploys so shared-metric coverage never drops.
    """
    cur = {a.key(): a for a in current}
    des = {a.key(): a for a in desired}
    deploys = [DeployProbe(des[k]) for k in sorted(des.keys() - cur.keys(),
                                                   key=lambda k: (k[1], k[0]))]
    undeploys = [UndeployProbe(cur[k].assignment_id, cur[k].service_id)
                 for k in sorted(cur.keys() - des.keys(), key=lambda k: (k[1], k[0]))]
    return DeploymentPlan(actions=tuple(deploys + undeploys))
