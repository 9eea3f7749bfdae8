/** Learning-curve parsing and plotting. The chart plots exactly the CSV
 * rows the server exposes; rows without metrics (no gold labels) are kept
 * for the x axis but draw no point. */

export interface CurveRow {
  iteration: number;
  labeled_count: number;
  precision: number | null;
  recall: number | null;
  f1: number | null;
}

export function parseCurveCsv(csv: string): CurveRow[] {
  const lines = csv.trim().split("\n");
  if (lines.length === 0 || !lines[0].startsWith("iteration,")) {
    return [];
  }
  const rows: CurveRow[] = [];
  for (const line of lines.slice(1)) {
    if (!line.trim()) continue;
    const [iteration, labeled, precision, recall, f1] = line.split(",");
    rows.push({
      iteration: Number(iteration),
      labeled_count: Number(labeled),
      precision: precision === "" ? null : Number(precision),
      recall: recall === "" ? null : Number(recall),
      f1: f1 === "" ? null : Number(f1),
    });
  }
  return rows;
}

export interface Point {
  x: number;
  y: number;
  row: CurveRow;
}

/** Scale f1-over-labeled-count into a width x height viewbox. */
export function curvePoints(rows: CurveRow[], width: number, height: number): Point[] {
  const plotted = rows.filter((r) => r.f1 !== null);
  if (plotted.length === 0) return [];
  const xs = plotted.map((r) => r.labeled_count);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const span = xMax - xMin || 1;
  return plotted.map((row) => ({
    x: ((row.labeled_count - xMin) / span) * width,
    y: height - (row.f1 as number) * height,
    row,
  }));
}

export function toSvgPath(points: Point[]): string {
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${p.x.toFixed(1)},${p.y.toFixed(1)}`)
    .join(" ");
}
