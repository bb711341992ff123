"""The hierarchical monitoring model: goals, subgoals, properties, metric leaves.

The model is a forest of trees rooted at Goal nodes. Selecting any node
resolves, by a downward tree visit, to the metric leaves that must be
collected to score it. Models are immutable; extension publishes a new
version.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional

from .errors import ConflictError, ParseError, UnknownNode, UnresolvedStub, ValidationError


class NodeKind(str, Enum):
    GOAL = "Goal"
    SUBGOAL = "Subgoal"
    PROPERTY = "Property"
    METRIC = "Metric"


_KIND_RANK = {NodeKind.GOAL: 0, NodeKind.SUBGOAL: 1, NodeKind.PROPERTY: 2, NodeKind.METRIC: 3}


class Direction(str, Enum):
    LOWER_IS_BETTER = "LowerIsBetter"
    HIGHER_IS_BETTER = "HigherIsBetter"


class Statistic(str, Enum):
    MEAN = "Mean"
    MAX = "Max"
    MIN = "Min"
    SUM = "Sum"
    COUNT = "Count"


class Fold(str, Enum):
    """How a node combines its children's scores."""

    WEIGHTED_MEAN = "weighted_mean"
    MIN = "min"


@dataclass(frozen=True)
class ModelNode:
    id: str
    name: str
    kind: NodeKind
    description: str = ""
    children: tuple[str, ...] = ()
    weight: float = 1.0
    fold: Fold = Fold.WEIGHTED_MEAN


@dataclass(frozen=True)
class MetricDef:
    id: str
    unit: str
    direction: Direction
    target: float
    critical: float
    probe_kind: str
    window_ms: int = 60_000
    statistic: Statistic = Statistic.MEAN


@dataclass(frozen=True)
class MonitoringModel:
    nodes: Mapping[str, ModelNode]
    metrics: Mapping[str, MetricDef]
    stubs: frozenset[str] = frozenset()
    version: int = 1

    def roots(self) -> list[str]:
        non_roots = {c for n in self.nodes.values() for c in n.children}
        return [nid for nid, n in self.nodes.items() if nid not in non_roots]

    def parent_of(self, node_id: str) -> Optional[str]:
        for nid, n in self.nodes.items():
            if node_id in n.children:
                return nid
        return None


@dataclass(frozen=True)
class GoalSelection:
    actor_id: str
    node_ids: frozenset[str]
    service_ids: frozenset[str]
    created_at: int = 0  # epoch ms
    model_version: Optional[int] = None


def validate(nodes: Mapping[str, ModelNode], metrics: Mapping[str, MetricDef],
             stubs: frozenset[str]) -> list[str]:
    """Return all structural violations (empty list means valid)."""
    violations: list[str] = []

    for nid, node in nodes.items():
        if nid != node.id:
            violations.append(f"node key {nid!r} does not match node id {node.id!r}")
        for child in node.children:
            if child not in nodes:
                violations.append(f"dangling child {child!r} of node {nid!r}")

    # Every node has at most one parent; roots are Goal nodes.
    parents: dict[str, str] = {}
    for nid, node in nodes.items():
        for child in node.children:
            if child in parents:
                violations.append(f"node {child!r} has multiple parents ({parents[child]!r}, {nid!r})")
            parents[child] = nid
    for nid, node in nodes.items():
        if nid not in parents and node.kind is not NodeKind.GOAL:
            violations.append(f"root node {nid!r} has kind {node.kind.value}, expected Goal")

    # Cycle detection over the child relation.
    WHITE, GRAY, BLACK = 0, 1, 2
    color = dict.fromkeys(nodes, WHITE)

    def visit(nid: str) -> None:
        color[nid] = GRAY
        for child in nodes[nid].children:
            if child not in nodes:
                continue
            if color[child] == GRAY:
                violations.append(f"cycle through node {child!r}")
            elif color[child] == WHITE:
                visit(child)
        color[nid] = BLACK

    for nid in nodes:
        if color[nid] == WHITE:
            visit(nid)

    # Kind ordering: abstraction strictly increases down every edge,
    # except Subgoal under Subgoal (nested refinement levels).
    for nid, node in nodes.items():
        for child in node.children:
            if child not in nodes:
                continue
            ck = nodes[child].kind
            ok = _KIND_RANK[ck] > _KIND_RANK[node.kind] or (
                node.kind is NodeKind.SUBGOAL and ck is NodeKind.SUBGOAL)
            if not ok:
                violations.append(
                    f"kind-order violation: {node.kind.value} node {nid!r} "
                    f"has {ck.value} child {child!r}")

    # Leaf rule: Metric nodes are leaves; anything else needs children
    # unless it is a flagged stub.
    for nid, node in nodes.items():
        if node.kind is NodeKind.METRIC:
            if node.children:
                violations.append(f"metric node {nid!r} must be a leaf")
        elif not node.children and nid not in stubs:
            violations.append(f"non-metric node {nid!r} has no children and is not a flagged stub")

    for sid in stubs:
        if sid not in nodes:
            violations.append(f"stub id {sid!r} is not a node")
        elif nodes[sid].kind in (NodeKind.PROPERTY, NodeKind.METRIC):
            violations.append(f"stub {sid!r} must be a Goal or Subgoal")

    # Metric <-> MetricDef bijection.
    for nid, node in nodes.items():
        if node.kind is NodeKind.METRIC and nid not in metrics:
            violations.append(f"metric node {nid!r} has no metric definition")
    for mid, mdef in metrics.items():
        if mid != mdef.id:
            violations.append(f"metric key {mid!r} does not match def id {mdef.id!r}")
        if mid not in nodes or nodes[mid].kind is not NodeKind.METRIC:
            violations.append(f"metric definition {mid!r} does not reference a Metric node")
        if not mdef.unit:
            violations.append(f"metric {mid!r} has empty unit")
        if mdef.window_ms <= 0:
            violations.append(f"metric {mid!r} has non-positive window")
        if mdef.direction is Direction.LOWER_IS_BETTER and not mdef.target < mdef.critical:
            violations.append(f"metric {mid!r}: LowerIsBetter requires target < critical")
        if mdef.direction is Direction.HIGHER_IS_BETTER and not mdef.target > mdef.critical:
            violations.append(f"metric {mid!r}: HigherIsBetter requires target > critical")
        if nodes.get(mid) is not None and nodes[mid].weight < 0:
            violations.append(f"metric {mid!r} has negative weight")

    for nid, node in nodes.items():
        if node.weight < 0:
            violations.append(f"node {nid!r} has negative weight")

    return violations


def _node_from_doc(rec: dict) -> ModelNode:
    try:
        return ModelNode(
            id=rec["id"],
            name=rec.get("name", rec["id"]),
            kind=NodeKind(rec["kind"]),
            description=rec.get("description", ""),
            children=tuple(rec.get("children", [])),
            weight=float(rec.get("weight", 1.0)),
            fold=Fold(rec.get("aggregation", "weighted_mean")),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad node record {rec!r}: {exc}") from exc


def _metric_from_doc(rec: dict) -> MetricDef:
    try:
        return MetricDef(
            id=rec["id"],
            unit=rec["unit"],
            direction=Direction(rec["direction"]),
            target=float(rec["target"]),
            critical=float(rec["critical"]),
            probe_kind=rec["probe_kind"],
            window_ms=int(round(float(rec.get("window_s", 60)) * 1000)),
            statistic=Statistic(rec.get("statistic", "Mean")),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad metric record {rec!r}: {exc}") from exc


def load_model(text: str) -> MonitoringModel:
    """Parse and validate a JSON model document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise ParseError("model document must be an object with a 'nodes' list")
    return model_from_document(doc)


def model_from_document(doc: dict) -> MonitoringModel:
    nodes_list = [_node_from_doc(r) for r in doc.get("nodes", [])]
    metrics_list = [_metric_from_doc(r) for r in doc.get("metrics", [])]
    violations = []
    nodes: dict[str, ModelNode] = {}
    for n in nodes_list:
        if n.id in nodes:
            violations.append(f"duplicate node id {n.id!r}")
        nodes[n.id] = n
    metrics: dict[str, MetricDef] = {}
    for m in metrics_list:
        if m.id in metrics:
            violations.append(f"duplicate metric id {m.id!r}")
        metrics[m.id] = m
    stubs = frozenset(doc.get("stubs", []))
    violations.extend(validate(nodes, metrics, stubs))
    if violations:
        raise ValidationError(violations)
    return MonitoringModel(nodes=nodes, metrics=metrics, stubs=stubs,
                           version=int(doc.get("version", 1)))


def model_to_document(model: MonitoringModel) -> dict:
    nodes = []
    for n in model.nodes.values():
        rec = {
            "id": n.id, "name": n.name, "kind": n.kind.value,
            "description": n.description, "weight": n.weight,
            "children": list(n.children),
        }
        if n.fold is not Fold.WEIGHTED_MEAN:
            rec["aggregation"] = n.fold.value
        nodes.append(rec)
    metrics = [
        {
            "id": m.id, "unit": m.unit, "direction": m.direction.value,
            "target": m.target, "critical": m.critical, "probe_kind": m.probe_kind,
            "window_s": m.window_ms / 1000, "statistic": m.statistic.value,
        }
        for m in model.metrics.values()
    ]
    return {"version": model.version, "nodes": nodes, "metrics": metrics,
            "stubs": sorted(model.stubs)}


def serialize(model: MonitoringModel) -> str:
    return json.dumps(model_to_document(model), indent=2, sort_keys=True)


def subtree_metrics(model: MonitoringModel, node_ids: Iterable[str]) -> frozenset[str]:
    """Metric leaves reachable from the selected nodes (downward tree visit)."""
    result: set[str] = set()
    for start in node_ids:
        if start not in model.nodes:
            raise UnknownNode(f"unknown node {start!r}")
        found_metric = False
        stack = [start]
        seen: set[str] = set()
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            node = model.nodes[nid]
            if node.kind is NodeKind.METRIC:
                result.add(nid)
                found_metric = True
            else:
                stack.extend(node.children)
        if not found_metric:
            raise UnresolvedStub(
                f"node {start!r} resolves to no metrics (unresolved stub subtree)")
    return frozenset(result)


def extend_model(model: MonitoringModel, patch: dict,
                 active_node_ids: frozenset[str] = frozenset()) -> MonitoringModel:
    """Apply a patch (add/replace/remove nodes and metric defs); returns a new version.

    Removal of a node referenced by an active selection raises ConflictError.
    """
    if not isinstance(patch, dict):
        raise ParseError("model patch must be a JSON object")
    nodes = dict(model.nodes)
    metrics = dict(model.metrics)
    stubs = set(model.stubs)

    for nid in patch.get("remove", []):
        if nid in active_node_ids:
            raise ConflictError(f"node {nid!r} is referenced by an active selection")
        nodes.pop(nid, None)
        metrics.pop(nid, None)
        stubs.discard(nid)
        # Drop dangling child references left by the removal.
        for pid, pnode in list(nodes.items()):
            if nid in pnode.children:
                nodes[pid] = replace(pnode, children=tuple(c for c in pnode.children if c != nid))

    violations = []
    for rec in patch.get("nodes", []):
        node = _node_from_doc(rec)
        nodes[node.id] = node
    new_metric_ids = set()
    for rec in patch.get("metrics", []):
        mdef = _metric_from_doc(rec)
        if mdef.id in new_metric_ids:
            violations.append(f"duplicate metric id {mdef.id!r} in patch")
        new_metric_ids.add(mdef.id)
        metrics[mdef.id] = mdef
    stubs.update(patch.get("stubs", []))
    stubs.difference_update(patch.get("unstub", []))
    # Nodes that gained children are no longer stubs.
    stubs = {s for s in stubs if s in nodes and not nodes[s].children}

    violations.extend(validate(nodes, metrics, frozenset(stubs)))
    if violations:
        raise ValidationError(violations)
    return MonitoringModel(nodes=nodes, metrics=metrics, stubs=frozenset(stubs),
                           version=model.version + 1)


def _metric(mid: str, unit: str, direction: Direction, target: float, critical: float,
            probe_kind: str, window_s: float = 60, statistic: Statistic = Statistic.MEAN) -> MetricDef:
    return MetricDef(mid, unit, direction, target, critical, probe_kind,
                     window_ms=int(window_s * 1000), statistic=statistic)


def default_model() -> MonitoringModel:
    """The built-in model: seven goal roots, with Reliability and Performance resolved."""
    L = Direction.LOWER_IS_BETTER
    H = Direction.HIGHER_IS_BETTER
    n = ModelNode
    K = NodeKind
    nodes = [
        n("Reliability", "Reliability", K.GOAL,
          "Degree to which services provide their outcomes consistently and stably",
          children=("Continuity", "Recoverability", "Availability")),
        n("Continuity", "Continuity", K.SUBGOAL,
          "Service provision without interruption"),
        n("Recoverability", "Recoverability", K.SUBGOAL,
          "Ability to recover the service after a failure",
          children=("RecoveryTime", "ReplicaConsistency")),
        n("RecoveryTime", "Recovery Time", K.PROPERTY,
          "Time required to recover the service in case of failure",
          children=("recovery_time",)),
        n("recovery_time", "Recovery Time", K.METRIC, "Mean time to recover from an outage"),
        n("ReplicaConsistency", "Replica Consistency", K.PROPERTY,
          "Consistency of service replicas in terms of data and functions",
          children=("replica_consistency",)),
        n("replica_consistency", "Replica Consistency", K.METRIC,
          "Fraction of replicas in agreement"),
        n("Availability", "Availability", K.SUBGOAL,
          "Readiness of the service to serve requests",
          children=("FailureBehavior",)),
        n("FailureBehavior", "Failure Behavior", K.PROPERTY,
          "Occurrence and duration of service failures",
          children=("failure_count", "failure_duration")),
        n("failure_count", "Failure Count", K.METRIC, "Number of failure occurrences"),
        n("failure_duration", "Failure Duration", K.METRIC, "Total duration of failures"),

        n("Performance", "Performance", K.GOAL,
          "Degree to which the service performs its functions within stated limits",
          children=("TimeBehaviour", "ResourceUtilization", "Capacity")),
        n("TimeBehaviour", "Time Behaviour", K.SUBGOAL,
          "Response and processing times of the service",
          children=("response_time", "latency", "throughput")),
        n("response_time", "Response Time", K.METRIC, "End-to-end request response time"),
        n("latency", "Latency", K.METRIC, "Network round-trip latency"),
        n("throughput", "Throughput", K.METRIC,
          "Rate of successfully processed requests per unit time"),
        n("ResourceUtilization", "Resource Utilization", K.SUBGOAL,
          "Consumption of compute resources",
          children=("cpu_utilization", "memory_utilization")),
        n("cpu_utilization", "CPU Utilization", K.METRIC, "CPU utilization at the VM level"),
        n("memory_utilization", "Memory Utilization", K.METRIC,
          "Memory utilization at the VM level"),
        n("Capacity", "Capacity", K.SUBGOAL,
          "Maximum limits the service can sustain", children=("workload_size",)),
        n("workload_size", "Size of the Workload", K.METRIC, "Offered workload handled"),

        n("Responsiveness", "Responsiveness", K.GOAL,
          "Degree to which the service promptly and timely responds"),
        n("Adaptability", "Adaptability", K.GOAL,
          "Degree to which the service adapts to changing conditions"),
        n("Effectiveness", "Effectiveness", K.GOAL,
          "Degree to which goals are achieved with accuracy and completeness"),
        n("Efficiency", "Efficiency", K.GOAL,
          "Resources expended in relation to results achieved"),
        n("Compatibility", "Compatibility", K.GOAL,
          "Degree to which the service coexists and interoperates with others"),
    ]
    # Short windows on heartbeat-derived metrics keep the heartbeat cadence at 1 s.
    metrics = [
        _metric("recovery_time", "s", L, 1, 30, "heartbeat", window_s=6),
        _metric("replica_consistency", "percent", H, 100, 90, "consistency-probe"),
        _metric("failure_count", "count", L, 0, 1, "heartbeat", window_s=6,
                statistic=Statistic.COUNT),
        _metric("failure_duration", "s", L, 0, 2, "heartbeat", window_s=6,
                statistic=Statistic.SUM),
        _metric("response_time", "ms", L, 100, 500, "latency-probe"),
        _metric("latency", "ms", L, 50, 250, "latency-probe"),
        _metric("throughput", "req/s", H, 50, 0, "throughput-probe"),
        _metric("cpu_utilization", "percent", L, 60, 95, "resource-probe"),
        _metric("memory_utilization", "percent", L, 70, 95, "resource-probe"),
        _metric("workload_size", "req/s", H, 50, 0, "throughput-probe"),
    ]
    stubs = frozenset({"Continuity", "Responsiveness", "Adaptability", "Effectiveness",
                       "Efficiency", "Compatibility"})
    model = MonitoringModel(
        nodes={x.id: x for x in nodes},
        metrics={m.id: m for m in metrics},
        stubs=stubs,
        version=1,
    )
    violations = validate(model.nodes, model.metrics, model.stubs)
    assert not violations, violations
    return model
