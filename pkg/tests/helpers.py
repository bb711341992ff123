"""Shared test fixtures: random model generation and independent score oracles.

The oracle code here deliberately re-derives scoring from first principles
(plain recursion over the document tree) instead of calling the library's
aggregation path, so the two can disagree when one is wrong.
"""

from __future__ import annotations

import random
from typing import Optional

from cloudhealth.model import (Direction, Fold, MetricDef, ModelNode, MonitoringModel,
                               NodeKind, Statistic)

GOAL_NAMES = ["G_alpha", "G_beta", "G_gamma", "G_delta"]


def random_model(rng: random.Random, max_nodes: int = 20) -> MonitoringModel:
    """A small random valid model: one or two goal roots, random shape/weights."""
    nodes: dict[str, ModelNode] = {}
    metrics: dict[str, MetricDef] = {}
    counter = {"n": 0}

    def fresh(prefix: str) -> str:
        counter["n"] += 1
        return f"{prefix}{counter['n']}"

    def budget() -> int:
        return max_nodes - len(nodes)

    def make_metric() -> str:
        mid = fresh("m")
        lower = rng.random() < 0.5
        a, b = sorted((rng.uniform(0, 50), rng.uniform(51, 200)))
        if lower:
            target, critical = a, b
            direction = Direction.LOWER_IS_BETTER
        else:
            target, critical = b, a
            direction = Direction.HIGHER_IS_BETTER
        nodes[mid] = ModelNode(mid, mid, NodeKind.METRIC,
                               weight=rng.choice([0.5, 1.0, 2.0, 3.0]))
        metrics[mid] = MetricDef(mid, "unit", direction, target, critical,
                                 probe_kind="synthetic", window_ms=60_000,
                                 statistic=Statistic.MEAN)
        return mid

    def make_property() -> str:
        pid = fresh("p")
        kids = [make_metric() for _ in range(rng.randint(1, min(3, max(1, budget() - 1))))]
        nodes[pid] = ModelNode(pid, pid, NodeKind.PROPERTY, children=tuple(kids),
                               weight=rng.choice([0.5, 1.0, 2.0]),
                               fold=rng.choice([Fold.WEIGHTED_MEAN, Fold.WEIGHTED_MEAN,
                                                Fold.MIN]))
        return pid

    def make_subgoal(depth: int) -> str:
        sid = fresh("s")
        kids = []
        for _ in range(rng.randint(1, 2)):
            if budget() < 4:
                kids.append(make_metric())
            elif depth < 2 and rng.random() < 0.3:
                kids.append(make_subgoal(depth + 1))
            elif rng.random() < 0.5:
                kids.append(make_property())
            else:
                kids.append(make_metric())
        nodes[sid] = ModelNode(sid, sid, NodeKind.SUBGOAL, children=tuple(kids),
                               weight=rng.choice([0.5, 1.0, 2.0]))
        return sid

    for gname in GOAL_NAMES[:rng.randint(1, 2)]:
        kids = []
        for _ in range(rng.randint(1, 3)):
            if budget() < 3:
                break
            kids.append(make_subgoal(0) if rng.random() < 0.6 else make_property())
        if not kids:
            kids.append(make_metric())
        nodes[gname] = ModelNode(gname, gname, NodeKind.GOAL, children=tuple(kids))

    return MonitoringModel(nodes=nodes, metrics=metrics, stubs=frozenset(), version=1)


def oracle_normalize(value: float, mdef: MetricDef) -> float:
    """Independent re-statement of the linear threshold score."""
    if mdef.direction is Direction.LOWER_IS_BETTER:
        span = mdef.critical - mdef.target
        raw = (mdef.critical - value) / span
    else:
        span = mdef.target - mdef.critical
        raw = (value - mdef.critical) / span
    if raw < 0:
        return 0.0
    if raw > 1:
        return 1.0
    return raw


def oracle_score(model: MonitoringModel, node_id: str,
                 metric_stats: dict[str, Optional[float]]) -> Optional[float]:
    """Brute-force recursive fold over the tree, given per-metric statistics."""
    node = model.nodes[node_id]
    if node.kind is NodeKind.METRIC:
        stat = metric_stats.get(node_id)
        if stat is None:
            return None
        return oracle_normalize(stat, model.metrics[node_id])
    child_scores = [(oracle_score(model, c, metric_stats), model.nodes[c].weight)
                    for c in node.children]
    defined = [(s, w) for s, w in child_scores if s is not None]
    if not defined:
        return None
    if node.fold is Fold.MIN:
        return min(s for s, _ in defined)
    return sum(s * w for s, w in defined) / sum(w for _, w in defined)


def leaf_metrics(model: MonitoringModel, node_id: str) -> set[str]:
    """Independent subtree-leaf enumeration (plain recursion, no library call)."""
    node = model.nodes[node_id]
    if node.kind is NodeKind.METRIC:
        return {node_id}
    out: set[str] = set()
    for c in node.children:
        out |= leaf_metrics(model, c)
    return out
