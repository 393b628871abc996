import { describe, expect, it } from "vitest";

import type { CandidateEntry, ImportanceEntry } from "../src/api.js";
import {
  deltaDirection,
  formatProbability,
  normalizeImportance,
  sortCandidates,
  tintFor,
} from "../src/state.js";

function entry(index: number, score: number): ImportanceEntry {
  return { index, token: `t${index}`, score, pre_label: "b", post_label: "b" };
}

describe("normalizeImportance", () => {
  it("maps min to 0 and max to 1", () => {
    const out = normalizeImportance([entry(0, 2), entry(1, 4), entry(2, 8)]);
    expect(out.get(0)).toBe(0);
    expect(out.get(2)).toBe(1);
    expect(out.get(1)).toBeCloseTo(1 / 3, 12);
  });

  it("constant scores normalize to 0", () => {
    const out = normalizeImportance([entry(0, 5), entry(1, 5)]);
    expect(out.get(0)).toBe(0);
    expect(out.get(1)).toBe(0);
  });

  it("empty input yields empty map", () => {
    expect(normalizeImportance([]).size).toBe(0);
  });

  it("preserves score ordering", () => {
    const scores = [entry(0, 0.3), entry(1, 0.9), entry(2, 0.1), entry(3, 0.5)];
    const out = normalizeImportance(scores);
    const byScore = [...scores].sort((a, b) => b.score - a.score).map((s) => s.index);
    const byTint = [...out.entries()].sort((a, b) => b[1] - a[1]).map(([i]) => i);
    expect(byTint).toEqual(byScore);
  });
});

describe("tintFor", () => {
  it("is monotone in the normalized score", () => {
    const alpha = (value: string) => Number(value.match(/, ([\d.]+)\)$/)![1]);
    expect(alpha(tintFor(0))).toBeLessThan(alpha(tintFor(0.5)));
    expect(alpha(tintFor(0.5))).toBeLessThan(alpha(tintFor(1)));
  });

  it("clamps out-of-range input", () => {
    expect(tintFor(-3)).toBe(tintFor(0));
    expect(tintFor(7)).toBe(tintFor(1));
  });
});

describe("sortCandidates", () => {
  const row = (token: string, oY: number): CandidateEntry => ({
    token,
    score: 1,
    generator: "synonym",
    o_y_after: oY,
    probability_after: 0.5,
    prediction_after: "a",
    logits_after: {},
  });

  it("orders by projected o_y ascending (most obfuscating first)", () => {
    const sorted = sortCandidates([row("mid", 0.5), row("best", -1), row("worst", 2)]);
    expect(sorted.map((r) => r.token)).toEqual(["best", "mid", "worst"]);
  });

  it("does not mutate its input", () => {
    const input = [row("x", 1), row("y", 0)];
    sortCandidates(input);
    expect(input.map((r) => r.token)).toEqual(["x", "y"]);
  });
});

describe("deltaDirection / formatProbability", () => {
  it("labels probability moves", () => {
    expect(deltaDirection(0.8, 0.2)).toBe("down");
    expect(deltaDirection(0.2, 0.8)).toBe("up");
    expect(deltaDirection(0.5, 0.5)).toBe("flat");
  });

  it("formats percentages", () => {
    expect(formatProbability(0.876)).toBe("87.6%");
    expect(formatProbability(0)).toBe("0.0%");
  });
});
