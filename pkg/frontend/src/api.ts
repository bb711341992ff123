/** Thin typed client for the /api/v1 HTTP interface. */

import type {
  ActorDoc, ModelDoc, SelectionResult, SeriesWindowDoc, SnapshotDoc, NodeScoreDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!res.ok) {
    let code = "http_error";
    let message = `${res.status} ${res.statusText}`;
    try {
      const body = await res.json();
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      /* non-JSON error body; keep the status text */
    }
    throw new ApiError(res.status, code, message);
  }
  return res.json() as Promise<T>;
}

export class ApiClient {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return `${this.base}/api/v1${path}`;
  }

  getModel(): Promise<ModelDoc> {
    return request(this.url("/model"));
  }

  getActors(): Promise<ActorDoc[]> {
    return request(this.url("/actors"));
  }

  getActor(actorId: string): Promise<ActorDoc> {
    return request(this.url(`/actors/${encodeURIComponent(actorId)}`));
  }

  putSelection(
    actorId: string, nodeIds: string[], serviceIds: string[], revision?: number,
  ): Promise<SelectionResult> {
    const body: Record<string, unknown> = { node_ids: nodeIds, service_ids: serviceIds };
    if (revision !== undefined) body.revision = revision;
    return request(this.url(`/actors/${encodeURIComponent(actorId)}/selection`), {
      method: "PUT",
      body: JSON.stringify(body),
    });
  }

  getHealth(actorId: string, window?: string): Promise<SnapshotDoc> {
    const q = window ? `?window=${encodeURIComponent(window)}` : "";
    return request(this.url(`/actors/${encodeURIComponent(actorId)}/health${q}`));
  }

  getNodeHealth(nodeId: string, actorId: string, window?: string): Promise<NodeScoreDoc> {
    const params = new URLSearchParams({ actor: actorId });
    if (window) params.set("window", window);
    return request(this.url(`/health/node/${encodeURIComponent(nodeId)}?${params}`));
  }

  getKpis(metric: string, service: string, from?: number, to?: number): Promise<SeriesWindowDoc> {
    const params = new URLSearchParams({ metric, service });
    if (from !== undefined) params.set("from", String(from));
    if (to !== undefined) params.set("to", String(to));
    return request(this.url(`/kpis?${params}`));
  }

  eventsUrl(): string {
    return this.url("/events");
  }
}
