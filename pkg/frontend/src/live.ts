/** Live-follow: server-sent events with a 2 s polling fallback.
 *
 * If the event stream cannot be opened (no EventSource in the runtime, or
 * the connection errors), the subscription degrades to polling the provided
 * refresh callback every 2 seconds. Exactly one stream per subscription.
 */

export const POLL_INTERVAL_MS = 2000;

export interface LiveHandle {
  mode: () => "sse" | "poll";
  stop: () => void;
}

export function startLive(
  eventsUrl: string,
  onEvent: (event: string, data: unknown) => void,
): LiveHandle {
  let timer: ReturnType<typeof setInterval> | null = null;
  let source: EventSource | null = null;
  let mode: "sse" | "poll" = "poll";

  const startPolling = () => {
    if (timer !== null) return;
    mode = "poll";
    timer = setInterval(() => onEvent("poll-tick", {}), POLL_INTERVAL_MS);
  };

  const EventSourceCtor = (globalThis as { EventSource?: typeof EventSource }).EventSource;
  if (EventSourceCtor) {
    try {
      source = new EventSourceCtor(eventsUrl);
      mode = "sse";
      for (const name of ["snapshot-updated", "plan-applied", "fault-detected"]) {
        source.addEventListener(name, (e) => {
          onEvent(name, JSON.parse((e as MessageEvent).data));
        });
      }
      source.onerror = () => {
        source?.close();
        source = null;
        startPolling();
      };
    } catch {
      startPolling();
    }
  } else {
    startPolling();
  }

  return {
    mode: () => mode,
    stop: () => {
      source?.close();
      if (timer !== null) clearInterval(timer);
      timer = null;
    },
  };
}
