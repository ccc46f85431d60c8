import { describe, expect, it } from "vitest";
import { fileURLToPath } from "url";

import { DataError, readTable } from "../src/csv.js";
import { loadCostSeries, renderCostVsQ } from "../src/costVsQ.js";

const fixture = (name: string) => fileURLToPath(new URL(`fixtures/${name}`, import.meta.url));

const count = (svg: string, re: RegExp) => (svg.match(re) ?? []).length;

describe("loadCostSeries", () => {
  it("groups into one series per policy and arrival config", () => {
    const series = loadCostSeries([readTable(fixture("fig4.csv"))]);
    expect(series.map((s) => s.key)).toEqual([
      "phi1 / high",
      "phi1 / low",
      "phibar1 / high",
      "phibar1 / low",
    ]);
    for (const s of series) {
      expect(s.points.length).toBe(9);
      const qs = s.points.map((p) => p.q);
      expect(qs).toEqual([...qs].sort((a, b) => a - b));
    }
  });
});

describe("renderCostVsQ", () => {
  it("draws four CI-banded curves with a legend", () => {
    const svg = renderCostVsQ([readTable(fixture("fig4.csv"))]);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(count(svg, /class="line"/g)).toBe(4);
    expect(count(svg, /class="band"/g)).toBe(4);
    expect(svg).toContain("phi1 / high");
    expect(svg).toContain("phibar1 / low");
    expect(svg).toContain("total average cost");
  });

  it("is deterministic for identical input", () => {
    const t = () => [readTable(fixture("fig4.csv"))];
    expect(renderCostVsQ(t())).toBe(renderCostVsQ(t()));
  });

  it("escapes the title", () => {
    const svg = renderCostVsQ([readTable(fixture("fig4.csv"))], { title: "A & <B>" });
    expect(svg).toContain("A &amp; &lt;B&gt;");
  });

  it("renders a single-row file as a lone marker", () => {
    const svg = renderCostVsQ([readTable(fixture("fig4_single.csv"))]);
    expect(count(svg, /class="line"/g)).toBe(0);
    expect(count(svg, /<circle /g)).toBe(1);
  });

  it("fails hard on NaN cost cells, naming the row", () => {
    const t = readTable(fixture("fig4_nan.csv"));
    expect(() => renderCostVsQ([t])).toThrow(DataError);
    expect(() => renderCostVsQ([t])).toThrow(/row 2/);
  });

  it("rejects input missing the fig4 columns", () => {
    const t = readTable(fixture("verify.csv"));
    expect(() => renderCostVsQ([t])).toThrow(/missing required column/);
  });
});
