/** Wire types mirroring the /api/v1 JSON documents. */

export type NodeKind = "Goal" | "Subgoal" | "Property" | "Metric";
export type HealthState = "Healthy" | "Degraded" | "Unhealthy" | "Unknown";

export interface ModelNodeDoc {
  id: string;
  name: string;
  kind: NodeKind;
  description: string;
  weight: number;
  children: string[];
  aggregation?: string;
}

export interface MetricDoc {
  id: string;
  unit: string;
  direction: string;
  target: number;
  critical: number;
  probe_kind: string;
  window_s: number;
  statistic: string;
}

export interface ModelDoc {
  version: number;
  nodes: ModelNodeDoc[];
  metrics: MetricDoc[];
  stubs: string[];
}

export interface ChildContribution {
  node_id: string;
  score: number | null;
  weight: number;
}

export interface NodeScoreDoc {
  node_id: string;
  score: number | null;
  state: HealthState;
  contributing_children: ChildContribution[];
  window: { from: number; to: number };
  children?: NodeScoreDoc[]; // present on the drill-down endpoint
}

export interface SnapshotDoc {
  model_version: number;
  selection: { actor_id: string; node_ids: string[]; service_ids: string[] };
  window: { from: number; to: number };
  scores: Record<string, NodeScoreDoc>;
  metric_values: { metric_id: string; service_id: string; value: number | null }[];
}

export interface PlanActionDoc {
  action: string;
  assignment?: { assignment_id: string; probe_kind: string; service_id: string };
  assignment_id?: string;
  service_id?: string;
}

export interface PlanDoc {
  plan_id: string;
  actions: PlanActionDoc[];
}

export interface ReportDoc {
  plan_id: string;
  outcomes: { status: string; detail?: string }[];
  monitoring_gap_ms: Record<string, number>;
}

export interface SelectionResult {
  selection: { node_ids: string[]; service_ids: string[] } | null;
  revision: number;
  plan: PlanDoc;
  report: ReportDoc;
}

export interface ActorDoc {
  actor_id: string;
  display_name: string;
  role: string;
  selection: { node_ids: string[]; service_ids: string[] } | null;
  revision: number;
  layout: unknown;
}

export interface SeriesWindowDoc {
  metric_id: string;
  service_id: string;
  from: number;
  to: number;
  samples: [number, number][];
  stats: { count: number; mean: number | null; min: number | null; max: number | null; sum: number };
}
