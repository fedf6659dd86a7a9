/**
 * Topology editor: ring/star/grid presets or a custom edge list, with an
 * SVG preview and inline validation mirroring the server's checks.
 */

import { layout, presetEdges, validateTopology } from "./topology.js";
import type { Edge } from "./types.js";

export interface EditorState {
  kind: string;
  n: number;
  customEdges: Edge[];
}

export function currentEdges(state: EditorState): Edge[] {
  return state.kind === "custom" ? state.customEdges : presetEdges(state.kind, state.n);
}

export function parseEdgeList(text: string): Edge[] {
  // "0-1, 1-2 2-3" or newline separated
  const edges: Edge[] = [];
  for (const token of text.split(/[\s,;]+/)) {
    if (!token) continue;
    const m = token.match(/^(\d+)-(\d+)$/);
    if (!m) throw new Error(`cannot parse edge ${JSON.stringify(token)}; use "a-b"`);
    edges.push([Number(m[1]), Number(m[2])]);
  }
  return edges;
}

export function violationsFor(state: EditorState): string[] {
  return validateTopology(state.kind, state.n, currentEdges(state));
}

export function topologyBody(state: EditorState): Record<string, unknown> {
  if (state.kind === "custom") {
    return { kind: "custom", n: state.n, edges: currentEdges(state) };
  }
  if (state.kind === "grid") {
    const side = Math.round(Math.sqrt(state.n));
    return { kind: "grid", n: state.n, rows: side, cols: Math.ceil(state.n / side) };
  }
  return { kind: state.kind, n: state.n };
}

export function renderPreview(svg: SVGSVGElement, state: EditorState): void {
  svg.replaceChildren();
  const ns = "http://www.w3.org/2000/svg";
  const pts = layout(state.kind, state.n);
  const size = 260;
  for (const [a, b] of currentEdges(state)) {
    if (a >= pts.length || b >= pts.length) continue;
    const line = document.createElementNS(ns, "line");
    line.setAttribute("x1", String(pts[a].x * size));
    line.setAttribute("y1", String(pts[a].y * size));
    line.setAttribute("x2", String(pts[b].x * size));
    line.setAttribute("y2", String(pts[b].y * size));
    line.setAttribute("class", "topo-edge");
    svg.appendChild(line);
  }
  pts.forEach((p, i) => {
    const circle = document.createElementNS(ns, "circle");
    circle.setAttribute("cx", String(p.x * size));
    circle.setAttribute("cy", String(p.y * size));
    circle.setAttribute("r", "11");
    circle.setAttribute("class", "topo-node");
    svg.appendChild(circle);
    const label = document.createElementNS(ns, "text");
    label.setAttribute("x", String(p.x * size));
    label.setAttribute("y", String(p.y * size + 4));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "topo-label");
    label.textContent = String(i);
    svg.appendChild(label);
  });
}
