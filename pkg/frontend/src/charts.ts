/**
 * SVG charts for the consensus-quality metrics. Multiple reports render
 * side by side for cross-run (e.g. cross-topology) comparison.
 */

import type { MetricsReport } from "./types.js";

const BAR_COLORS = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2"];

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS("http://www.w3.org/2000/svg", tag);
}

export function renderMetrics(
  root: HTMLElement,
  reports: Array<{ label: string; report: MetricsReport | null }>,
): void {
  root.replaceChildren();
  const ready = reports.filter((r) => r.report !== null) as Array<{
    label: string;
    report: MetricsReport;
  }>;
  for (const { label, report } of reports) {
    if (report === null) {
      const placeholder = document.createElement("div");
      placeholder.className = "metrics-placeholder";
      placeholder.textContent = `${label}: run not finished - no metrics yet`;
      root.appendChild(placeholder);
    }
  }
  if (!ready.length) return;

  root.appendChild(gaugeRow(ready));
  root.appendChild(barSection("contribution ratio (ideal: 1/n each)", ready, contributionBars));
  root.appendChild(barSection("initial consensus (mainchain height of first influence)", ready, initialBars));
}

function gaugeRow(reports: Array<{ label: string; report: MetricsReport }>): HTMLElement {
  const row = document.createElement("div");
  row.className = "gauge-row";
  for (const { label, report } of reports) {
    const box = document.createElement("div");
    box.className = "gauge-box";
    const mu = report.mainchain_rate;
    const f = report.branching_ratio;
    box.innerHTML =
      `<h3>${label}</h3>` +
      `<div class="gauge" data-metric="mu">mu = ${mu.num}/${mu.den} = ${mu.value.toFixed(3)}</div>` +
      `<div class="gauge" data-metric="F">F = ${f.num}/${f.den} = ${f.value.toFixed(3)}</div>` +
      `<div class="gauge-counts">${report.counts.mainchain_blocks}/${report.counts.total_blocks} blocks canonical` +
      (report.counts.detached_blocks ? `, ${report.counts.detached_blocks} detached` : "") +
      `</div>`;
    row.appendChild(box);
  }
  return row;
}

function barSection(
  title: string,
  reports: Array<{ label: string; report: MetricsReport }>,
  build: (svg: SVGSVGElement, reports: Array<{ label: string; report: MetricsReport }>) => void,
): HTMLElement {
  const section = document.createElement("section");
  const h = document.createElement("h3");
  h.textContent = title;
  section.appendChild(h);
  const svg = svgEl("svg");
  svg.setAttribute("viewBox", "0 0 640 220");
  svg.setAttribute("class", "metric-chart");
  build(svg, reports);
  section.appendChild(svg);
  return section;
}

function contributionBars(
  svg: SVGSVGElement,
  reports: Array<{ label: string; report: MetricsReport }>,
): void {
  const nodes = Object.keys(reports[0].report.contribution_ratio).sort();
  const groupW = 600 / nodes.length;
  const barW = Math.min(24, (groupW - 8) / reports.length);
  const maxV = Math.max(
    0.2,
    ...reports.flatMap(({ report }) => Object.values(report.contribution_ratio).map((f) => f.value)),
  );
  nodes.forEach((node, i) => {
    reports.forEach(({ report }, j) => {
      const v = report.contribution_ratio[node]?.value ?? 0;
      const h = (v / maxV) * 170;
      const rect = svgEl("rect");
      rect.setAttribute("x", String(24 + i * groupW + j * barW));
      rect.setAttribute("y", String(190 - h));
      rect.setAttribute("width", String(barW - 2));
      rect.setAttribute("height", String(h));
      rect.setAttribute("fill", BAR_COLORS[j % BAR_COLORS.length]);
      rect.dataset.node = node;
      rect.dataset.value = v.toFixed(4);
      svg.appendChild(rect);
    });
    const label = svgEl("text");
    label.setAttribute("x", String(24 + i * groupW + (reports.length * barW) / 2));
    label.setAttribute("y", "208");
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "axis-label");
    label.textContent = node;
    svg.appendChild(label);
  });
}

function initialBars(
  svg: SVGSVGElement,
  reports: Array<{ label: string; report: MetricsReport }>,
): void {
  const nodes = Object.keys(reports[0].report.initial_consensus).sort();
  const groupW = 600 / nodes.length;
  const barW = Math.min(24, (groupW - 8) / reports.length);
  const values = reports.flatMap(({ report }) =>
    Object.values(report.initial_consensus).filter((v): v is number => v !== "not-achieved"),
  );
  const maxV = Math.max(5, ...values);
  nodes.forEach((node, i) => {
    reports.forEach(({ report }, j) => {
      const raw = report.initial_consensus[node];
      const x = 24 + i * groupW + j * barW;
      if (raw === "not-achieved" || raw === undefined) {
        // distinct category, never silently dropped
        const mark = svgEl("text");
        mark.setAttribute("x", String(x + barW / 2));
        mark.setAttribute("y", "185");
        mark.setAttribute("text-anchor", "middle");
        mark.setAttribute("class", "not-achieved");
        mark.dataset.node = node;
        mark.textContent = "✕";
        svg.appendChild(mark);
        return;
      }
      const h = (raw / maxV) * 170;
      const rect = svgEl("rect");
      rect.setAttribute("x", String(x));
      rect.setAttribute("y", String(190 - h));
      rect.setAttribute("width", String(barW - 2));
      rect.setAttribute("height", String(h));
      rect.setAttribute("fill", BAR_COLORS[j % BAR_COLORS.length]);
      rect.dataset.node = node;
      rect.dataset.value = String(raw);
      svg.appendChild(rect);
    });
    const label = svgEl("text");
    label.setAttribute("x", String(24 + i * groupW + (reports.length * barW) / 2));
    label.setAttribute("y", "208");
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "axis-label");
    label.textContent = node;
    svg.appendChild(label);
  });
}
