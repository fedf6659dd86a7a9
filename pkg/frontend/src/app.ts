/**
 * Page assembly: a "new run" form with the topology editor, the live
 * grid of node tiles, and the metrics view with run comparison.
 */

import { createRun, fetchMetrics, listRuns, stopRun, subscribeStatus } from "./api.js";
import type { StreamHandle } from "./api.js";
import { renderMetrics } from "./charts.js";
import { currentEdges, parseEdgeList, renderPreview, topologyBody, violationsFor } from "./editor.js";
import type { EditorState } from "./editor.js";
import { renderGrid } from "./tiles.js";

export function mountApp(root: HTMLElement): void {
  root.innerHTML = `
    <header><h1>blockbox control panel</h1></header>
    <main>
      <section id="editor-panel">
        <h2>new run</h2>
        <form id="run-form">
          <label>name <input name="name" value="experiment"/></label>
          <label>topology
            <select name="kind">
              <option>ring</option><option>star</option><option>grid</option><option>custom</option>
            </select>
          </label>
          <label>nodes <input name="n" type="number" value="9" min="1" max="64"/></label>
          <label class="custom-only hidden">edges (a-b ...)
            <textarea name="edges" rows="2" placeholder="0-1 1-2 2-0"></textarea>
          </label>
          <label>difficulty <input name="difficulty" value="auto"/></label>
          <label>target interval ms <input name="target_ms" type="number" value="500"/></label>
          <label>stop height <input name="stop_height" type="number" value="60"/></label>
          <label>seed <input name="seed" type="number" value="1"/></label>
          <label>latency base ms <input name="base_ms" type="number" value="10"/></label>
          <label>latency jitter ms <input name="jitter_ms" type="number" value="20"/></label>
          <label>hashrate/node <input name="hashrate" type="number" value="2000"/></label>
          <label>pace (sim ms per wall ms) <input name="pace" value="1"/></label>
          <button type="submit" id="launch">launch</button>
        </form>
        <div id="violations" class="violations"></div>
        <svg id="topo-preview" viewBox="0 0 260 260"></svg>
      </section>
      <section id="live-panel">
        <h2>live network</h2>
        <div id="run-picker"></div>
        <button id="stop-btn" class="hidden">stop run</button>
        <div id="grid-root"><em>launch or pick a run to watch</em></div>
      </section>
      <section id="metrics-panel">
        <h2>metrics</h2>
        <div id="metrics-root"><em>finished runs render here; select several to compare</em></div>
      </section>
    </main>`;

  const form = root.querySelector<HTMLFormElement>("#run-form")!;
  const violationsBox = root.querySelector<HTMLElement>("#violations")!;
  const preview = root.querySelector<SVGSVGElement>("#topo-preview")!;
  const gridRoot = root.querySelector<HTMLElement>("#grid-root")!;
  const metricsRoot = root.querySelector<HTMLElement>("#metrics-root")!;
  const picker = root.querySelector<HTMLElement>("#run-picker")!;
  const stopBtn = root.querySelector<HTMLButtonElement>("#stop-btn")!;

  let stream: StreamHandle | null = null;
  let watching: string | null = null;
  let lastSnapshot: import("./types.js").Snapshot | null = null;
  let stale = false;
  const selected = new Set<string>();

  function editorState(): EditorState {
    const data = new FormData(form);
    const kind = String(data.get("kind"));
    const n = Number(data.get("n"));
    let customEdges: [number, number][] = [];
    if (kind === "custom") {
      try {
        customEdges = parseEdgeList(String(data.get("edges") ?? ""));
      } catch (err) {
        violationsBox.textContent = String(err);
      }
    }
    return { kind, n, customEdges };
  }

  function refreshEditor(): void {
    const state = editorState();
    form.querySelector<HTMLElement>(".custom-only")!.classList.toggle("hidden", state.kind !== "custom");
    const problems = violationsFor(state);
    violationsBox.replaceChildren(
      ...problems.map((p) => {
        const div = document.createElement("div");
        div.className = "violation";
        div.textContent = p;
        return div;
      }),
    );
    form.querySelector<HTMLButtonElement>("#launch")!.disabled =
      problems.length > 0 || currentEdges(state).length === 0 && state.n > 1;
    renderPreview(preview, state);
  }

  form.addEventListener("input", refreshEditor);
  refreshEditor();

  function watch(runId: string): void {
    stream?.close();
    watching = runId;
    stopBtn.classList.remove("hidden");
    stream = subscribeStatus(runId, {
      onSnapshot: (snap) => {
        lastSnapshot = snap;
        renderGrid(gridRoot, snap, stale);
        if (snap.status !== "running") {
          stream?.close();
          stopBtn.classList.add("hidden");
          void refreshRuns();
          void showMetrics();
        }
      },
      onStale: (s) => {
        stale = s;
        if (lastSnapshot) renderGrid(gridRoot, lastSnapshot, stale);
      },
    });
  }

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const state = editorState();
    const data = new FormData(form);
    const difficulty = String(data.get("difficulty"));
    const pace = String(data.get("pace"));
    const body = {
      name: String(data.get("name")),
      n: state.n,
      topology: topologyBody(state),
      genesis: { chain_id: 1, difficulty: difficulty === "auto" ? "auto" : Number(difficulty) },
      target_interval_ms: Number(data.get("target_ms")),
      stop: { height: Number(data.get("stop_height")) },
      seed: Number(data.get("seed")),
      latency: { base_ms: Number(data.get("base_ms")), jitter_ms: Number(data.get("jitter_ms")) },
      hashrate: Number(data.get("hashrate")),
      pace: pace === "" ? null : Number(pace),
    };
    createRun(body)
      .then((runId) => {
        void refreshRuns();
        watch(runId);
      })
      .catch((err) => {
        // server rejection surfaces inline next to the form
        violationsBox.replaceChildren();
        const div = document.createElement("div");
        div.className = "violation server-rejection";
        div.textContent = String(err.message ?? err);
        violationsBox.appendChild(div);
      });
  });

  stopBtn.addEventListener("click", () => {
    if (watching) void stopRun(watching);
  });

  async function refreshRuns(): Promise<void> {
    const runs = await listRuns();
    picker.replaceChildren(
      ...runs.map((r) => {
        const row = document.createElement("div");
        row.className = "run-row";
        const watchBtn = document.createElement("button");
        watchBtn.textContent = `watch ${r.run_id}`;
        watchBtn.addEventListener("click", () => watch(r.run_id));
        const compareBox = document.createElement("input");
        compareBox.type = "checkbox";
        compareBox.checked = selected.has(r.run_id);
        compareBox.addEventListener("change", () => {
          compareBox.checked ? selected.add(r.run_id) : selected.delete(r.run_id);
          void showMetrics();
        });
        const label = document.createElement("span");
        label.textContent = ` ${r.name} (${r.status}, ${r.n} nodes)`;
        row.append(compareBox, watchBtn, label);
        return row;
      }),
    );
  }

  async function showMetrics(): Promise<void> {
    const ids = [...selected];
    if (watching && !ids.includes(watching)) ids.push(watching);
    const reports = await Promise.all(
      ids.map(async (id) => ({ label: id, report: await fetchMetrics(id) })),
    );
    renderMetrics(metricsRoot, reports);
  }

  void refreshRuns();
}
