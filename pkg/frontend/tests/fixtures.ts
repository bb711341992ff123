/** Fixed API documents used by the component tests. */

import type { ModelDoc, SnapshotDoc } from "../src/types.js";

export const MODEL_FIXTURE: ModelDoc = {
  version: 1,
  nodes: [
    { id: "Performance", name: "Performance", kind: "Goal", description: "",
      weight: 1, children: ["TimeBehaviour"] },
    { id: "TimeBehaviour", name: "Time Behaviour", kind: "Property", description: "",
      weight: 1, children: ["latency", "throughput"] },
    { id: "latency", name: "Latency", kind: "Metric", description: "",
      weight: 1, children: [] },
    { id: "throughput", name: "Throughput", kind: "Metric", description: "",
      weight: 1, children: [] },
    { id: "Adaptability", name: "Adaptability", kind: "Goal", description: "",
      weight: 1, children: [] },
  ],
  metrics: [
    { id: "latency", unit: "ms", direction: "LowerIsBetter", target: 50,
      critical: 250, probe_kind: "latency-probe", window_s: 60, statistic: "Mean" },
    { id: "throughput", unit: "req/s", direction: "HigherIsBetter", target: 50,
      critical: 0, probe_kind: "throughput-probe", window_s: 60, statistic: "Mean" },
  ],
  stubs: ["Adaptability"],
};

const WINDOW = { from: 0, to: 60000 };

export const SNAPSHOT_FIXTURE: SnapshotDoc = {
  model_version: 1,
  selection: { actor_id: "op", node_ids: ["Performance"], service_ids: ["S1"] },
  window: WINDOW,
  scores: {
    Performance: {
      node_id: "Performance", score: 0.5, state: "Degraded", window: WINDOW,
      contributing_children: [{ node_id: "TimeBehaviour", score: 0.5, weight: 1 }],
    },
    TimeBehaviour: {
      node_id: "TimeBehaviour", score: 0.5, state: "Degraded", window: WINDOW,
      contributing_children: [
        { node_id: "latency", score: 0, weight: 1 },
        { node_id: "throughput", score: null, weight: 1 },
      ],
    },
    latency: {
      node_id: "latency", score: 0, state: "Unhealthy", window: WINDOW,
      contributing_children: [],
    },
    throughput: {
      node_id: "throughput", score: null, state: "Unknown", window: WINDOW,
      contributing_children: [],
    },
  },
  metric_values: [
    { metric_id: "latency", service_id: "S1", value: 260 },
    { metric_id: "throughput", service_id: "S1", value: null },
  ],
};

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

/** Install a fetch stub; returns the request log. */
export function stubFetch(
  handler: (url: string, init?: RequestInit) => unknown,
): RecordedRequest[] {
  const log: RecordedRequest[] = [];
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    log.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    });
    const payload = handler(url, init);
    return new Response(JSON.stringify(payload), {
      status: 200,
      headers: { "content-type": "application/json" },
    });
  }) as typeof fetch;
  return log;
}
