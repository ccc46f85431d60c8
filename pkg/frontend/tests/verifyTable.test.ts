import { describe, expect, it } from "vitest";
import { fileURLToPath } from "url";

import { readTable } from "../src/csv.js";
import { renderVerifyTable } from "../src/verifyTable.js";

const fixture = (name: string) => fileURLToPath(new URL(`fixtures/${name}`, import.meta.url));

describe("renderVerifyTable", () => {
  it("renders one row per verification case with colored status", () => {
    const t = readTable(fixture("verify.csv"));
    const svg = renderVerifyTable([t]);
    expect(svg).toContain("rand-single-fast");
    expect(svg).toContain(">pass</text>");
    expect(svg).toContain("#2ca02c");
    expect(svg).toContain(">info</text>");
    expect(svg).toContain("#7f7f7f");
  });

  it("is deterministic for identical input", () => {
    const render = () => renderVerifyTable([readTable(fixture("verify.csv"))]);
    expect(render()).toBe(render());
  });

  it("rejects input missing the verify columns", () => {
    const t = readTable(fixture("fig4.csv"));
    expect(() => renderVerifyTable([t])).toThrow(/missing required column/);
  });
});
