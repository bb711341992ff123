/** Per-actor views: switching actor swaps selection, snapshot, and layout. */

import type { ApiClient } from "./api.js";
import type { ActorDoc } from "./types.js";

export class ActorSwitcher {
  private select: HTMLSelectElement;

  constructor(
    root: HTMLElement,
    private client: ApiClient,
    private onSwitch: (actor: ActorDoc | null) => void,
  ) {
    this.select = document.createElement("select");
    this.select.className = "actor-switcher";
    this.select.addEventListener("change", () => void this.activate(this.select.value));
    root.appendChild(this.select);
  }

  async refresh(): Promise<void> {
    const actors = await this.client.getActors();
    this.select.replaceChildren();
    for (const actor of actors) {
      const opt = document.createElement("option");
      opt.value = actor.actor_id;
      opt.textContent = `${actor.display_name} (${actor.role})`;
      this.select.appendChild(opt);
    }
  }

  async activate(actorId: string): Promise<void> {
    try {
      const actor = await this.client.getActor(actorId);
      this.onSwitch(actor);
    } catch {
      // Unknown actor: empty-state prompt rather than a broken view.
      this.onSwitch(null);
    }
  }
}
