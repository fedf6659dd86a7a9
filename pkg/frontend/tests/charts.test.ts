import { describe, expect, it } from "vitest";

import { renderMetrics } from "../src/charts.js";
import type { MetricsReport } from "../src/types.js";
import ringReport from "../fixtures/metrics-ring.json";
import notAchievedReport from "../fixtures/metrics-notachieved.json";

const ring = ringReport as unknown as MetricsReport;
const partial = notAchievedReport as unknown as MetricsReport;

describe("metrics view", () => {
  it("renders gauges and one contribution bar per node summing to 1", () => {
    const root = document.createElement("div");
    renderMetrics(root, [{ label: "ring", report: ring }]);
    expect(root.textContent).toContain("mu =");
    expect(root.textContent).toContain("F =");
    const bars = root.querySelectorAll<SVGRectElement>("section:nth-of-type(1) rect");
    expect(bars.length).toBe(Object.keys(ring.contribution_ratio).length);
    const total = [...bars].reduce((acc, r) => acc + Number(r.dataset.value), 0);
    expect(total).toBeCloseTo(1.0, 3);
  });

  it("shows not-achieved initial consensus as a distinct mark, not dropped", () => {
    const root = document.createElement("div");
    renderMetrics(root, [{ label: "partial", report: partial }]);
    const marks = root.querySelectorAll<SVGTextElement>(".not-achieved");
    expect(marks.length).toBe(1);
    expect(marks[0].dataset.node).toBe("b");
  });

  it("renders side-by-side bars for a two-run comparison", () => {
    const root = document.createElement("div");
    renderMetrics(root, [
      { label: "ring", report: ring },
      { label: "ring-again", report: ring },
    ]);
    const nodes = Object.keys(ring.contribution_ratio).length;
    const bars = root.querySelectorAll("section:nth-of-type(1) rect");
    expect(bars.length).toBe(2 * nodes);
    expect(root.querySelectorAll(".gauge-box").length).toBe(2);
  });

  it("shows a placeholder for unfinished runs", () => {
    const root = document.createElement("div");
    renderMetrics(root, [{ label: "pending", report: null }]);
    expect(root.querySelector(".metrics-placeholder")!.textContent).toContain("not finished");
  });
});
