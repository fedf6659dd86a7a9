/**
 * Orchestrator API client plus the live status-stream subscription with
 * automatic reconnect and a stale-data flag.
 */

import type { MetricsReport, RunListEntry, Snapshot } from "./types.js";

export async function createRun(config: unknown): Promise<string> {
  const resp = await fetch("/api/runs", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(config),
  });
  const body = await resp.json();
  if (!resp.ok) throw new Error(body.detail ?? `server rejected run (${resp.status})`);
  return body.run_id;
}

export async function listRuns(): Promise<RunListEntry[]> {
  const resp = await fetch("/api/runs");
  return resp.json();
}

export async function fetchStatus(runId: string): Promise<Snapshot> {
  const resp = await fetch(`/api/runs/${runId}`);
  if (!resp.ok) throw new Error(`unknown run ${runId}`);
  return resp.json();
}

export async function fetchMetrics(runId: string): Promise<MetricsReport | null> {
  const resp = await fetch(`/api/runs/${runId}/metrics`);
  if (resp.status === 409) return null; // not finished yet
  if (!resp.ok) throw new Error(`unknown run ${runId}`);
  return resp.json();
}

export async function stopRun(runId: string): Promise<void> {
  await fetch(`/api/runs/${runId}/stop`, { method: "POST" });
}

export interface StreamHandlers {
  onSnapshot: (snap: Snapshot) => void;
  onStale: (stale: boolean) => void;
}

export interface StreamHandle {
  close(): void;
}

/**
 * Subscribe to /api/runs/{id}/stream. On stream drop the handler gets a
 * stale indication and the subscription retries with backoff until the
 * caller closes it.
 */
export function subscribeStatus(
  runId: string,
  handlers: StreamHandlers,
  makeSource: (url: string) => EventSource = (url) => new EventSource(url),
): StreamHandle {
  let source: EventSource | null = null;
  let closed = false;
  let retryMs = 500;
  let retryTimer: ReturnType<typeof setTimeout> | null = null;

  function open() {
    if (closed) return;
    source = makeSource(`/api/runs/${runId}/stream`);
    source.onopen = () => {
      retryMs = 500;
      handlers.onStale(false);
    };
    source.onmessage = (ev) => {
      handlers.onStale(false);
      handlers.onSnapshot(JSON.parse(ev.data));
    };
    source.onerror = () => {
      source?.close();
      source = null;
      if (closed) return;
      handlers.onStale(true);
      retryTimer = setTimeout(open, retryMs);
      retryMs = Math.min(retryMs * 2, 10_000);
    };
  }

  open();
  return {
    close() {
      closed = true;
      if (retryTimer !== null) clearTimeout(retryTimer);
      source?.close();
    },
  };
}
