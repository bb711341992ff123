/** Entry point: wires the actor switcher, goal picker, health tree and
 * live-follow against a running backend at the same origin (or ?api=<base>).
 */

import { ApiClient } from "./api.js";
import { ActorSwitcher } from "./actorSwitcher.js";
import { GoalPicker } from "./goalPicker.js";
import { HealthTree } from "./healthTree.js";
import { startLive } from "./live.js";
import type { ActorDoc } from "./types.js";

export interface ViewState {
  actorId: string;
  window?: string;
  liveFollow: boolean;
}

export async function mountApp(root: HTMLElement, base = ""): Promise<void> {
  const client = new ApiClient(base);
  const state: ViewState = { actorId: "", liveFollow: true };

  const header = document.createElement("header");
  const pickerPane = document.createElement("aside");
  const treePane = document.createElement("main");
  const emptyPrompt = document.createElement("div");
  emptyPrompt.className = "empty-state";
  emptyPrompt.textContent = "Select an actor and monitoring goals to begin.";
  root.append(header, pickerPane, treePane, emptyPrompt);

  const model = await client.getModel();
  const tree = new HealthTree(treePane, client, state.actorId);

  const refresh = async () => {
    if (!state.actorId) return;
    try {
      const snap = await client.getHealth(state.actorId, state.window);
      emptyPrompt.hidden = true;
      tree.render(snap);
    } catch {
      emptyPrompt.hidden = false;
      treePane.replaceChildren();
    }
  };

  const switcher = new ActorSwitcher(header, client, (actor: ActorDoc | null) => {
    state.actorId = actor?.actor_id ?? "";
    tree.setActor(state.actorId);
    const picker = new GoalPicker(pickerPane, client, {
      actorId: state.actorId,
      serviceIds: actor?.selection?.service_ids ?? [],
      onApplied: () => void refresh(),
    });
    picker.setChecked(actor?.selection?.node_ids ?? []);
    pickerPane.replaceChildren();
    picker.render(model);
    void refresh();
  });
  await switcher.refresh();

  if (state.liveFollow) {
    startLive(client.eventsUrl(), () => void refresh());
  }
}
