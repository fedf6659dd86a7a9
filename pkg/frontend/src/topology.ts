/**
 * Topology presets and client-side validation mirroring the server's
 * rules, so mistakes surface before a config is submitted.
 */

import type { Edge } from "./types.js";

export function normEdge(a: number, b: number): Edge {
  return a < b ? [a, b] : [b, a];
}

export function ringEdges(n: number): Edge[] {
  const edges: Edge[] = [];
  for (let i = 0; i < n; i++) edges.push(normEdge(i, (i + 1) % n));
  return edges.sort(cmpEdge);
}

export function starEdges(n: number, hub = 0): Edge[] {
  const edges: Edge[] = [];
  for (let i = 0; i < n; i++) if (i !== hub) edges.push(normEdge(hub, i));
  return edges.sort(cmpEdge);
}

export function gridEdges(rows: number, cols: number): Edge[] {
  const edges: Edge[] = [];
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const i = r * cols + c;
      if (c + 1 < cols) edges.push(normEdge(i, i + 1));
      if (r + 1 < rows) edges.push(normEdge(i, i + cols));
    }
  }
  return edges.sort(cmpEdge);
}

function cmpEdge(a: Edge, b: Edge): number {
  return a[0] - b[0] || a[1] - b[1];
}

export function presetEdges(kind: string, n: number): Edge[] {
  if (kind === "ring") return ringEdges(n);
  if (kind === "star") return starEdges(n);
  if (kind === "grid") {
    const side = Math.round(Math.sqrt(n));
    return gridEdges(side, Math.ceil(n / side));
  }
  return [];
}

/** Mirror of the server-side validate(): returns human-readable violations. */
export function validateTopology(kind: string, n: number, edges: Edge[]): string[] {
  const problems: string[] = [];
  const seen = new Set<string>();
  for (const [a, b] of edges) {
    if (a === b) problems.push(`self-loop at node ${a}`);
    if (a < 0 || a >= n || b < 0 || b >= n) {
      problems.push(`edge (${a}, ${b}) references a node outside 0..${n - 1}`);
    }
    const key = a < b ? `${a}-${b}` : `${b}-${a}`;
    if (seen.has(key)) problems.push(`duplicate edge (${key})`);
    seen.add(key);
  }
  if (problems.length) return problems;

  if (n > 1 && !connected(n, edges)) problems.push("graph is disconnected");

  const degree = new Array(n).fill(0);
  for (const [a, b] of edges) {
    degree[a]++;
    degree[b]++;
  }
  if (kind === "ring") {
    if (n < 3) problems.push("ring needs n >= 3");
    const bad = degree.map((d, i) => [d, i]).filter(([d]) => d !== 2);
    if (bad.length) problems.push(`ring nodes without degree 2: ${bad.map(([, i]) => i)}`);
  } else if (kind === "star") {
    const hubs = degree.map((d, i) => [d, i]).filter(([d]) => d === n - 1);
    if (n > 2 && hubs.length !== 1) problems.push(`star needs exactly one hub of degree ${n - 1}`);
  }
  return problems;
}

function connected(n: number, edges: Edge[]): boolean {
  const adj: number[][] = Array.from({ length: n }, () => []);
  for (const [a, b] of edges) {
    adj[a].push(b);
    adj[b].push(a);
  }
  const seen = new Set([0]);
  const stack = [0];
  while (stack.length) {
    for (const peer of adj[stack.pop()!]) {
      if (!seen.has(peer)) {
        seen.add(peer);
        stack.push(peer);
      }
    }
  }
  return seen.size === n;
}

/** Node coordinates for the preview drawing, in a unit box. */
export function layout(kind: string, n: number): Array<{ x: number; y: number }> {
  if (kind === "grid") {
    const side = Math.round(Math.sqrt(n));
    const cols = Math.ceil(n / side);
    return Array.from({ length: n }, (_, i) => ({
      x: (i % cols + 0.5) / cols,
      y: (Math.floor(i / cols) + 0.5) / side,
    }));
  }
  if (kind === "star") {
    return Array.from({ length: n }, (_, i) =>
      i === 0
        ? { x: 0.5, y: 0.5 }
        : {
            x: 0.5 + 0.42 * Math.cos((2 * Math.PI * (i - 1)) / (n - 1)),
            y: 0.5 + 0.42 * Math.sin((2 * Math.PI * (i - 1)) / (n - 1)),
          },
    );
  }
  // ring and custom: circle layout
  return Array.from({ length: n }, (_, i) => ({
    x: 0.5 + 0.42 * Math.cos((2 * Math.PI * i) / n - Math.PI / 2),
    y: 0.5 + 0.42 * Math.sin((2 * Math.PI * i) / n - Math.PI / 2),
  }));
}
