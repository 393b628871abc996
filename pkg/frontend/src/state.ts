/**
 * Pure view-state helpers: importance normalization for the tint scale
 * and candidate ordering. No classification math happens here — inputs
 * are server numbers, outputs are presentation order and colors.
 */

import type { CandidateEntry, ImportanceEntry } from "./api.js";

/** Min-max normalize importance scores to [0, 1] per document. */
export function normalizeImportance(scores: ImportanceEntry[]): Map<number, number> {
  const out = new Map<number, number>();
  if (scores.length === 0) return out;
  const values = scores.map((s) => s.score);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo;
  for (const entry of scores) {
    out.set(entry.index, span === 0 ? 0 : (entry.score - lo) / span);
  }
  return out;
}

/** Sequential single-hue scale: higher importance, stronger tint. */
export function tintFor(normalized: number): string {
  const alpha = 0.08 + 0.72 * Math.max(0, Math.min(1, normalized));
  return `rgba(220, 38, 38, ${alpha.toFixed(3)})`;
}

/** Most obfuscating first: ascending projected o_y. */
export function sortCandidates(rows: CandidateEntry[]): CandidateEntry[] {
  return [...rows].sort((a, b) => a.o_y_after - b.o_y_after);
}

/** Direction of the probability move for the protected label. */
export function deltaDirection(
  currentProbability: number,
  projectedProbability: number,
): "down" | "up" | "flat" {
  if (projectedProbability < currentProbability) return "down";
  if (projectedProbability > currentProbability) return "up";
  return "flat";
}

export function formatProbability(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}
