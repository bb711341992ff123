/** Checkbox tree over the monitoring model; submit applies the selection. */

import type { ApiClient } from "./api.js";
import type { ModelDoc, ModelNodeDoc, PlanDoc, ReportDoc } from "./types.js";

export interface GoalPickerOptions {
  actorId: string;
  serviceIds: string[];
  onApplied?: (plan: PlanDoc, report: ReportDoc) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class GoalPicker {
  private checked = new Set<string>();
  private container: HTMLElement;
  private planPanel: HTMLElement;

  constructor(
    root: HTMLElement,
    private client: ApiClient,
    private opts: GoalPickerOptions,
  ) {
    this.container = el("div", "goal-picker");
    this.planPanel = el("div", "plan-panel");
    root.append(this.container, this.planPanel);
  }

  get selection(): string[] {
    return [...this.checked].sort();
  }

  setChecked(nodeIds: string[]): void {
    this.checked = new Set(nodeIds);
  }

  render(model: ModelDoc): void {
    this.container.replaceChildren();
    const byId = new Map(model.nodes.map((n) => [n.id, n]));
    const hasParent = new Set(model.nodes.flatMap((n) => n.children));
    const roots = model.nodes.filter((n) => !hasParent.has(n.id));
    const stubs = new Set(model.stubs);

    const tree = el("ul", "goal-tree");
    for (const rootNode of roots) tree.appendChild(this.renderNode(rootNode, byId, stubs));
    this.container.appendChild(tree);

    const submit = el("button", "submit-selection", "Apply selection");
    submit.addEventListener("click", () => void this.submit());
    this.container.appendChild(submit);
  }

  private renderNode(
    node: ModelNodeDoc, byId: Map<string, ModelNodeDoc>, stubs: Set<string>,
  ): HTMLLIElement {
    const li = el("li", `picker-node kind-${node.kind.toLowerCase()}`);
    li.dataset.nodeId = node.id;

    const label = el("label");
    const box = el("input");
    box.type = "checkbox";
    box.checked = this.checked.has(node.id);
    box.disabled = stubs.has(node.id); // unrefined goals are not selectable
    box.addEventListener("change", () => {
      if (box.checked) this.checked.add(node.id);
      else this.checked.delete(node.id);
    });
    label.append(box, el("span", "node-name", node.name));
    if (stubs.has(node.id)) label.appendChild(el("span", "stub-badge", "unrefined"));
    li.appendChild(label);

    if (node.children.length > 0) {
      const ul = el("ul");
      for (const cid of node.children) {
        const child = byId.get(cid);
        if (child) ul.appendChild(this.renderNode(child, byId, stubs));
      }
      li.appendChild(ul);
    }
    return li;
  }

  /** One PUT per submission; the returned plan and report are rendered verbatim. */
  async submit(): Promise<void> {
    this.planPanel.replaceChildren();
    if (this.checked.size === 0) {
      const note = el("div", "empty-selection-note",
        "Selection is empty: applying will undeploy this actor's probes.");
      const confirm = el("button", "confirm-empty", "Apply empty selection");
      confirm.addEventListener("click", () => void this.apply());
      this.planPanel.append(note, confirm);
      return;
    }
    await this.apply();
  }

  private async apply(): Promise<void> {
    const result = await this.client.putSelection(
      this.opts.actorId, this.selection, this.opts.serviceIds);
    this.renderPlan(result.plan, result.report);
    this.opts.onApplied?.(result.plan, result.report);
  }

  private renderPlan(plan: PlanDoc, report: ReportDoc): void {
    this.planPanel.replaceChildren();
    const title = el("h3", "plan-title",
      plan.actions.length === 0 ? "No deployment changes" : `Plan ${plan.plan_id}`);
    this.planPanel.appendChild(title);
    const list = el("ul", "plan-actions");
    plan.actions.forEach((action, i) => {
      const id = action.assignment?.assignment_id ?? action.assignment_id ?? "";
      const item = el("li", `plan-action action-${action.action.toLowerCase()}`,
        `${action.action} ${id}`);
      const outcome = report.outcomes[i];
      if (outcome) item.appendChild(el("span", `outcome-${outcome.status.toLowerCase()}`,
        outcome.status));
      list.appendChild(item);
    });
    this.planPanel.appendChild(list);
  }
}
