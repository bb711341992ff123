"""Model-driven cloud health monitoring.

Turns high-level monitoring goals into deployed probes on (simulated) cloud
services, collects the resulting KPI streams, and rolls them up into
per-goal health scores served over an HTTP API.
"""

from .aggregator import HealthSnapshot, NodeScore, classify, normalize_metric, score_node, snapshot
from .collector import Collector, FailureStats, KpiSample, SeriesWindow, derive_failure_stats
from .model import (GoalSelection, MetricDef, ModelNode, MonitoringModel, default_model,
                    extend_model, load_model, serialize, subtree_metrics)
from .resolver import (DeploymentPlan, ProbeAssignment, ProbeSpec, ServiceDescriptor,
                       default_catalog, load_catalog, plan_diff, resolve_probes)
from .simenv import BehaviorProfile, FaultEvent, ScenarioSpec, SimEnv, load_scenario, start_scenario

__version__ = "0.1.0"

__all__ = [
    "BehaviorProfile", "Collector", "DeploymentPlan", "FailureStats", "FaultEvent",
    "GoalSelection", "HealthSnapshot", "KpiSample", "MetricDef", "ModelNode",
    "MonitoringModel", "NodeScore", "ProbeAssignment", "ProbeSpec", "ScenarioSpec",
    "SeriesWindow", "ServiceDescriptor", "SimEnv", "classify", "default_catalog",
    "default_model", "derive_failure_stats", "extend_model", "load_catalog",
    "load_model", "load_scenario", "normalize_metric", "plan_diff", "resolve_probes",
    "score_node", "serialize", "snapshot", "start_scenario", "subtree_metrics",
]
