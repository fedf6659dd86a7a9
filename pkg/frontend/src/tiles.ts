/**
 * The live node grid: one tile per node showing its last two blocks as
 * color bands, mirroring the per-device screens of the physical build.
 *
 * Renders exclusively what the server sent — no chain state is derived
 * client-side.
 */

import { textColorFor } from "./color.js";
import type { Snapshot } from "./types.js";

export function renderGrid(root: HTMLElement, snap: Snapshot, stale: boolean): void {
  root.replaceChildren();

  const badge = document.createElement("div");
  badge.className = "consensus-badge " + (snap.consensus ? "in-consensus" : "diverged");
  badge.dataset.consensus = String(snap.consensus);
  badge.textContent = snap.consensus ? "in consensus" : "diverged";
  root.appendChild(badge);

  if (stale) {
    const warn = document.createElement("div");
    warn.className = "stale-indicator";
    warn.textContent = "stream lost: showing stale data, reconnecting...";
    root.appendChild(warn);
  }

  const meta = document.createElement("div");
  meta.className = "run-meta";
  meta.textContent = `run ${snap.run_id} | ${snap.status} | t=${snap.t_ms} ms`;
  root.appendChild(meta);

  const grid = document.createElement("div");
  grid.className = "node-grid";
  root.appendChild(grid);

  for (const node of snap.nodes) {
    const tile = document.createElement("div");
    tile.className = "node-tile";
    tile.dataset.nodeId = node.node_id;
    tile.dataset.headHash = node.head_hash ?? "";

    const name = document.createElement("div");
    name.className = "tile-title";
    name.textContent = `${node.node_id} · h${node.head_number} · ${node.sync_state}`;
    tile.appendChild(name);

    // newest block on top, like the physical screens
    for (const block of [...node.last_two].reverse()) {
      const band = document.createElement("div");
      band.className = "block-band";
      band.style.background = block.color;
      band.style.color = textColorFor(block.hash);
      band.dataset.hash = block.hash;
      band.dataset.color = block.color;
      band.textContent = `#${block.number} ${block.hash.slice(0, 8)}`;
      tile.appendChild(band);
    }

    const peers = document.createElement("div");
    peers.className = "tile-peers";
    peers.textContent = `${node.peer_count} peers`;
    tile.appendChild(peers);

    grid.appendChild(tile);
  }
}
