/** Token highlight computation from server-provided byte spans and weights.
 *
 * The UI never tokenizes: every highlight is derived from the explanation
 * payload's token indices and the byte spans the server computed, so the
 * rendered highlight set always equals the payload exactly.
 */

import type { ExplanationPayload } from "./types";

export type Hue = "positive" | "negative";

export interface Segment {
  kind: "plain" | "token";
  text: string;
  /** Token position in the server's token list (token segments only). */
  tokenIndex?: number;
  weight?: number;
  /** |weight| / max|weight|, in [0, 1]; monotone in |weight|. */
  intensity?: number;
  hue?: Hue;
}

/** Convert byte offsets (into the UTF-8 text) to character offsets. */
export function byteToCharOffsets(text: string): Map<number, number> {
  const encoder = new TextEncoder();
  const map = new Map<number, number>();
  let byte = 0;
  for (let ch = 0; ch < text.length; ) {
    const codePoint = text.codePointAt(ch)!;
    const charLen = codePoint > 0xffff ? 2 : 1;
    map.set(byte, ch);
    byte += encoder.encode(text.slice(ch, ch + charLen)).length;
    ch += charLen;
  }
  map.set(byte, text.length);
  return map;
}

export function maxAbsWeight(payload: ExplanationPayload): number {
  let max = 0;
  for (const entry of payload.weights) {
    max = Math.max(max, Math.abs(entry.weight));
  }
  return max;
}

export function weightHue(weight: number): Hue {
  return weight >= 0 ? "positive" : "negative";
}

/** Split the document text into plain and highlighted segments. */
export function explanationSegments(text: string, payload: ExplanationPayload): Segment[] {
  const byWeight = new Map<number, number>();
  for (const entry of payload.weights) {
    for (const occurrence of entry.occurrences) {
      byWeight.set(occurrence, entry.weight);
    }
  }
  const charAt = byteToCharOffsets(text);
  const max = maxAbsWeight(payload);
  const segments: Segment[] = [];
  let cursor = 0;
  payload.spans.forEach(([startByte, endByte], tokenIndex) => {
    if (!byWeight.has(tokenIndex)) return;
    const start = charAt.get(startByte);
    const end = charAt.get(endByte);
    if (start === undefined || end === undefined || start < cursor) return;
    if (start > cursor) {
      segments.push({ kind: "plain", text: text.slice(cursor, start) });
    }
    const weight = byWeight.get(tokenIndex)!;
    segments.push({
      kind: "token",
      text: text.slice(start, end),
      tokenIndex,
      weight,
      intensity: max > 0 ? Math.abs(weight) / max : 0,
      hue: weightHue(weight),
    });
    cursor = end;
  });
  if (cursor < text.length) {
    segments.push({ kind: "plain", text: text.slice(cursor) });
  }
  return segments;
}

/** Token indices the segments highlight (for parity checks with the API). */
export function highlightedIndices(segments: Segment[]): number[] {
  return segments
    .filter((s) => s.kind === "token")
    .map((s) => s.tokenIndex!)
    .sort((a, b) => a - b);
}

/** Background CSS for a highlight; intensity maps to alpha. */
export function highlightCss(hue: Hue, intensity: number): string {
  const alpha = (0.15 + 0.85 * Math.min(1, Math.max(0, intensity))).toFixed(3);
  return hue === "positive"
    ? `background-color: rgba(220, 53, 69, ${alpha})`
    : `background-color: rgba(13, 110, 253, ${alpha})`;
}
