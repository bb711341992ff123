"""Bottom-up health scoring: metric statistics -> normalized scores -> goal scores.

Metric statistics are normalized linearly between a target (score 1) and a
critical threshold (score 0). Scores fold upward through the model with
weight renormalization over defined children, so missing data propagates as
Unknown instead of dragging scores to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .collector import Collector, HEARTBEAT_STREAM, derive_failure_stats
from .errors import UnknownSelection, VersionMismatch
from .model import (Direction, Fold, GoalSelection, MetricDef, MonitoringModel,
                    NodeKind)

# Score-to-state classification edges (lower edge inclusive).
DEFAULT_THRESHOLDS = {"healthy": 0.8, "degraded": 0.5}

HEALTHY = "Healthy"
DEGRADED = "Degraded"
UNHEALTHY = "Unhealthy"
UNKNOWN = "Unknown"

# Metrics derived from the raw heartbeat stream rather than their own series.
HEARTBEAT_DERIVED = {"failure_count", "failure_duration", "recovery_time"}


def normalize_metric(stat_value: float, mdef: MetricDef) -> float:
    """Linear score in [0,1]: 1 at/beyond target, 0 at/beyond critical."""
    if mdef.direction is Direction.LOWER_IS_BETTER:
        raw = (mdef.critical - stat_value) / (mdef.critical - mdef.target)
    else:
        raw = (stat_value - mdef.critical) / (mdef.target - mdef.critical)
    return min(1.0, max(0.0, raw))


def score_node(child_scores: Sequence[tuple[Optional[float], float]],
               fold: Fold = Fold.WEIGHTED_MEAN) -> Optional[float]:
    """Combine child (score, weight) pairs; None means Undefined and is skipped."""
    defined = [(s, w) for s, w in child_scores if s is not None]
    if not defined:
        return None
    if fold is Fold.MIN:
        return min(s for s, _ in defined)
    total_w = sum(w for _, w in defined)
    if total_w == 0:
        return None
    return sum(s * w for s, w in defined) / total_w


def classify(score: Optional[float],
             thresholds: Mapping[str, float] = DEFAULT_THRESHOLDS) -> str:
    if score is None:
        return UNKNOWN
    if score >= thresholds["healthy"]:
        return HEALTHY
    if score >= thresholds["degraded"]:
        return DEGRADED
    return UNHEALTHY


@dataclass(frozen=True)
class NodeScore:
    node_id: str
    score: Optional[float]
    state: str
    contributing_children: tuple[tuple[str, Optional[float], float], ...]
    window: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "score": self.score,
            "state": self.state,
            "contributing_children": [
                {"node_id": c, "score": s, "weight": w}
                for c, s, w in self.contributing_children
            ],
            "window": {"from": self.window[0], "to": self.window[1]},
        }


@dataclass(frozen=True)
class HealthSnapshot:
    model_version: int
    actor_id: str
    node_ids: frozenset[str]
    service_ids: frozenset[str]
    window: tuple[int, int]
    scores: Mapping[str, NodeScore]
    metric_values: Mapping[tuple[str, str], Optional[float]]

    def to_dict(self) -> dict:
        return {
            "model_version": self.model_version,
            "selection": {
                "actor_id": self.actor_id,
                "node_ids": sorted(self.node_ids),
                "service_ids": sorted(self.service_ids),
            },
            "window": {"from": self.window[0], "to": self.window[1]},
            "scores": {nid: ns.to_dict() for nid, ns in sorted(self.scores.items())},
            "metric_values": [
                {"metric_id": m, "service_id": s, "value": v}
                for (m, s), v in sorted(self.metric_values.items())
            ],
        }


def _metric_stat(collector: Collector, metric_id: str, service_id: str,
                 mdef: MetricDef, window: tuple[int, int],
                 beat_interval_ms: int) -> Optional[float]:
    """Windowed statistic for one metric on one service; None when no data."""
    from_ts, to_ts = window
    if metric_id in HEARTBEAT_DERIVED:
        beats = collector.query(HEARTBEAT_STREAM, service_id, from_ts, to_ts)
        if not beats.samples:
            return None
        stats = derive_failure_stats(beats, beat_interval_ms)
        if metric_id == "failure_count":
            return float(stats.num_failures)
        if metric_id == "failure_duration":
            return stats.total_downtime_ms / 1000.0
        # recovery_time: mean time to recover; no closed outage means instant.
        return stats.mttr_ms / 1000.0
    series = collector.query(metric_id, service_id, from_ts, to_ts)
    return series.statistic(mdef.statistic)


def snapshot(model: MonitoringModel, selection: GoalSelection,
             window: tuple[int, int], collector: Collector,
             beat_intervals_ms: Optional[Mapping[str, int]] = None,
             thresholds: Mapping[str, float] = DEFAULT_THRESHOLDS) -> HealthSnapshot:
    """Score every node of the selected sub-forest over the window."""
    if selection.model_version is not None and selection.model_version != model.version:
        raise VersionMismatch(
            f"selection targets model version {selection.model_version}, "
            f"current is {model.version}")
    unknown = [n for n in selection.node_ids if n not in model.nodes]
    if unknown:
        raise UnknownSelection(f"selection references unknown nodes {sorted(unknown)}")
    beat_intervals_ms = beat_intervals_ms or {}

    metric_values: dict[tuple[str, str], Optional[float]] = {}
    scores: dict[str, NodeScore] = {}

    def node_score(nid: str) -> Optional[float]:
        if nid in scores:
            return scores[nid].score
        node = model.nodes[nid]
        if node.kind is NodeKind.METRIC:
            mdef = model.metrics[nid]
            per_service = []
            for sid in sorted(selection.service_ids):
                stat = _metric_stat(collector, nid, sid, mdef, window,
                                    beat_intervals_ms.get(sid, 1000))
                metric_values[(nid, sid)] = stat
                if stat is not None:
                    per_service.append(stat)
            # Unweighted mean across services before normalization.
            if per_service:
                score = normalize_metric(sum(per_service) / len(per_service), mdef)
            else:
                score = None
            children: tuple = ()
        else:
            child_pairs = []
            children_meta = []
            for cid in node.children:
                cs = node_score(cid)
                cw = model.nodes[cid].weight
                child_pairs.append((cs, cw))
                children_meta.append((cid, cs, cw))
            score = score_node(child_pairs, node.fold) if child_pairs else None
            children = tuple(children_meta)
        scores[nid] = NodeScore(nid, score, classify(score, thresholds), children, window)
        return score

    for nid in sorted(selection.node_ids):
        node_score(nid)

    return HealthSnapshot(
        model_version=model.version,
        actor_id=selection.actor_id,
        node_ids=selection.node_ids,
        service_ids=selection.service_ids,
        window=window,
        scores=scores,
        metric_values=metric_values,
    )
