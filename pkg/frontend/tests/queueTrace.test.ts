import { describe, expect, it } from "vitest";
import { fileURLToPath } from "url";

import { readTable } from "../src/csv.js";
import { fitLine, loadTraceSeries, renderQueueTrace, slopeLabel } from "../src/queueTrace.js";

const fixture = (name: string) => fileURLToPath(new URL(`fixtures/${name}`, import.meta.url));

const bothCases = () => [readTable(fixture("trace_caseA.csv")), readTable(fixture("trace_caseB.csv"))];

describe("fitLine", () => {
  it("recovers an exact linear trend", () => {
    const pts = [0, 10, 20, 30, 40].map((slot) => ({ slot, total: 3 + 0.5 * slot }));
    const { slope, intercept } = fitLine(pts);
    expect(slope).toBeCloseTo(0.5, 12);
    expect(intercept).toBeCloseTo(3, 12);
  });

  it("gives zero slope on constant traces", () => {
    const pts = [1, 2, 3, 4].map((slot) => ({ slot, total: 4 }));
    expect(fitLine(pts).slope).toBe(0);
    expect(slopeLabel(0)).toBe("0");
  });
});

describe("loadTraceSeries", () => {
  it("builds one series per config and seed, sorted", () => {
    const series = loadTraceSeries(bothCases());
    expect(series.map((s) => `${s.config}/${s.seed}`)).toEqual([
      "caseA/7",
      "caseA/8",
      "caseB/7",
      "caseB/8",
    ]);
    for (const s of series) expect(s.points.length).toBe(200);
  });

  it("separates growing from bounded backlogs", () => {
    const series = loadTraceSeries(bothCases());
    const slopeOf = (config: string) =>
      fitLine(series.filter((s) => s.config === config).flatMap((s) => s.points)).slope;
    expect(slopeOf("caseA")).toBeGreaterThan(0.1);
    expect(slopeOf("caseB")).toBeLessThan(0.005);
  });
});

describe("renderQueueTrace", () => {
  it("overlays per-seed traces with one trend line per config", () => {
    const svg = renderQueueTrace(bothCases());
    expect((svg.match(/class="trace"/g) ?? []).length).toBe(4);
    expect((svg.match(/class="trend"/g) ?? []).length).toBe(2);
    expect(svg).toContain("caseA (trend ");
    expect(svg).toContain("caseB (trend ");
    expect(svg).toContain("total queue length");
  });

  it("is deterministic for identical input", () => {
    expect(renderQueueTrace(bothCases())).toBe(renderQueueTrace(bothCases()));
  });

  it("draws a flat synthetic trace as a horizontal trend", () => {
    const svg = renderQueueTrace([readTable(fixture("trace_flat.csv"))]);
    const trend = svg.match(/<line [^/]*class="trend"[^/]*\/>/)?.[0];
    expect(trend).toBeDefined();
    const y1 = trend!.match(/ y1="([^"]+)"/)![1];
    const y2 = trend!.match(/ y2="([^"]+)"/)![1];
    expect(y1).toBe(y2);
    expect(svg).toContain("flat (trend 0 jobs/slot)");
  });
});
