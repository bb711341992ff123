/** Renders a health snapshot as an expandable tree with state colors.
 *
 * The rendered node set is exactly the snapshot's scores: nothing invented,
 * nothing dropped. Unknown scores render as a dash with a distinct class,
 * never as 0. Expanding a node fetches the drill-down endpoint; metric
 * leaves open a KPI sample table.
 */

import type { ApiClient } from "./api.js";
import type { NodeScoreDoc, SnapshotDoc } from "./types.js";

const STATE_CLASS: Record<string, string> = {
  Healthy: "state-healthy",
  Degraded: "state-degraded",
  Unhealthy: "state-unhealthy",
  Unknown: "state-unknown",
};

export function formatScore(score: number | null): string {
  return score === null ? "—" : score.toFixed(2);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class HealthTree {
  private expanded = new Set<string>();

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    private actorId: string,
    private windowSpec?: string,
  ) {}

  setActor(actorId: string): void {
    this.actorId = actorId;
    this.expanded.clear();
  }

  render(snapshot: SnapshotDoc): void {
    this.root.replaceChildren();
    // Roots of the sub-forest: scored nodes that no other scored node claims.
    const claimed = new Set<string>();
    for (const ns of Object.values(snapshot.scores)) {
      for (const c of ns.contributing_children) {
        if (c.node_id in snapshot.scores) claimed.add(c.node_id);
      }
    }
    const tree = el("ul", "health-tree");
    for (const id of Object.keys(snapshot.scores).sort()) {
      if (!claimed.has(id)) tree.appendChild(this.renderNode(snapshot.scores[id], snapshot));
    }
    this.root.appendChild(tree);
  }

  private renderNode(ns: NodeScoreDoc, snapshot: SnapshotDoc): HTMLLIElement {
    const li = el("li", `health-node ${STATE_CLASS[ns.state] ?? "state-unknown"}`);
    li.dataset.nodeId = ns.node_id;

    const row = el("div", "node-row");
    row.append(
      el("span", "node-id", ns.node_id),
      el("span", "node-score", formatScore(ns.score)),
      el("span", "node-state", ns.state),
    );
    const hasChildren = ns.contributing_children.length > 0;
    if (hasChildren) {
      const toggle = el("button", "expand-toggle",
        this.expanded.has(ns.node_id) ? "▼" : "▶");
      toggle.addEventListener("click", () => void this.toggle(ns.node_id, li));
      row.prepend(toggle);
    } else {
      const metricBtn = el("button", "kpi-toggle", "KPIs");
      metricBtn.addEventListener("click", () => void this.showKpis(ns.node_id, li, snapshot));
      row.appendChild(metricBtn);
    }
    li.appendChild(row);

    if (this.expanded.has(ns.node_id)) {
      const ul = el("ul");
      for (const c of ns.contributing_children) {
        const child = snapshot.scores[c.node_id];
        if (child) ul.appendChild(this.renderNode(child, snapshot));
      }
      li.appendChild(ul);
    }
    return li;
  }

  private async toggle(nodeId: string, li: HTMLLIElement): Promise<void> {
    if (this.expanded.has(nodeId)) {
      this.expanded.delete(nodeId);
      li.querySelector(":scope > ul")?.remove();
      const btn = li.querySelector<HTMLButtonElement>(":scope .expand-toggle");
      if (btn) btn.textContent = "▶";
      return;
    }
    this.expanded.add(nodeId);
    const node = await this.client.getNodeHealth(nodeId, this.actorId, this.windowSpec);
    const ul = el("ul");
    for (const child of node.children ?? []) {
      const childLi = el("li", `health-node ${STATE_CLASS[child.state] ?? "state-unknown"}`);
      childLi.dataset.nodeId = child.node_id;
      const row = el("div", "node-row");
      row.append(
        el("span", "node-id", child.node_id),
        el("span", "node-score", formatScore(child.score)),
        el("span", "node-state", child.state),
      );
      childLi.appendChild(row);
      ul.appendChild(childLi);
    }
    li.appendChild(ul);
    const btn = li.querySelector<HTMLButtonElement>(":scope .expand-toggle");
    if (btn) btn.textContent = "▼";
  }

  private async showKpis(
    metricId: string, li: HTMLLIElement, snapshot: SnapshotDoc,
  ): Promise<void> {
    li.querySelector(":scope > .kpi-table")?.remove();
    const services = snapshot.selection.service_ids;
    const table = el("table", "kpi-table");
    for (const sid of services) {
      const win = await this.client.getKpis(
        metricId, sid, snapshot.window.from, snapshot.window.to);
      for (const [ts, value] of win.samples) {
        const tr = el("tr", "kpi-sample");
        tr.append(el("td", "", sid), el("td", "", String(ts)), el("td", "", String(value)));
        table.appendChild(tr);
      }
    }
    li.appendChild(table);
  }
}
