import { describe, expect, it } from "vitest";

import { curvePoints, parseCurveCsv, toSvgPath } from "../src/curve";

const CSV = [
  "iteration,labeled_count,precision,recall,f1",
  "1,10,0.500000,0.400000,0.444444",
  "2,20,0.600000,0.500000,0.545455",
  "3,30,,,",
  "4,40,0.700000,0.650000,0.674074",
].join("\n");

describe("parseCurveCsv", () => {
  it("parses exactly the server rows", () => {
    const rows = parseCurveCsv(CSV);
    expect(rows).toHaveLength(4);
    expect(rows[0]).toEqual({
      iteration: 1,
      labeled_count: 10,
      precision: 0.5,
      recall: 0.4,
      f1: 0.444444,
    });
  });

  it("keeps metric-less rows as nulls", () => {
    const rows = parseCurveCsv(CSV);
    expect(rows[2].f1).toBeNull();
    expect(rows[2].labeled_count).toBe(30);
  });

  it("rejects unrelated text", () => {
    expect(parseCurveCsv("hello")).toEqual([]);
    expect(parseCurveCsv("")).toEqual([]);
  });
});

describe("curvePoints", () => {
  it("plots one point per row with metrics", () => {
    const points = curvePoints(parseCurveCsv(CSV), 100, 100);
    expect(points).toHaveLength(3);
    expect(points.map((p) => p.row.labeled_count)).toEqual([10, 20, 40]);
  });

  it("scales x to labeled counts and y to f1", () => {
    const points = curvePoints(parseCurveCsv(CSV), 300, 100);
    expect(points[0].x).toBe(0);
    expect(points[2].x).toBe(300);
    expect(points[0].y).toBeCloseTo(100 - 44.4444, 3);
  });

  it("empty when nothing plottable", () => {
    const rows = parseCurveCsv("iteration,labeled_count,precision,recall,f1\n1,10,,,\n");
    expect(curvePoints(rows, 100, 100)).toEqual([]);
  });
});

describe("toSvgPath", () => {
  it("emits a move-then-line path", () => {
    const points = curvePoints(parseCurveCsv(CSV), 100, 100);
    const path = toSvgPath(points);
    expect(path.startsWith("M")).toBe(true);
    expect(path.split("L")).toHaveLength(3);
  });
});
