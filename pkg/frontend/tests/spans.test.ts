import { describe, expect, it } from "vitest";

import type { Span } from "../src/api.js";
import {
  SpanError,
  SpanOverlapError,
  assertNoOverlaps,
  checkBounds,
  coalesce,
  findOverlaps,
  insertSpan,
  spanAt,
} from "../src/spans.js";

const span = (start: number, end: number, category = "turn"): Span => ({
  start_frame: start,
  end_frame: end,
  category,
});

describe("checkBounds", () => {
  it("accepts a whole-video span", () => {
    expect(() => checkBounds(0, 99, 100)).not.toThrow();
  });

  it("rejects inverted, negative, overflowing, and fractional spans", () => {
    expect(() => checkBounds(5, 4, 100)).toThrow(SpanError);
    expect(() => checkBounds(-1, 4, 100)).toThrow(SpanError);
    expect(() => checkBounds(0, 100, 100)).toThrow(SpanError);
    expect(() => checkBounds(0.5, 4, 100)).toThrow(SpanError);
  });
});

describe("findOverlaps", () => {
  const existing = [span(0, 4), span(10, 14, "lane_change")];

  it("treats bounds as inclusive", () => {
    expect(findOverlaps(existing, 4, 6)).toHaveLength(1);
    expect(findOverlaps(existing, 5, 9)).toHaveLength(0);
    expect(findOverlaps(existing, 14, 20)).toHaveLength(1);
  });

  it("reports every intersecting span", () => {
    expect(findOverlaps(existing, 2, 12)).toHaveLength(2);
  });
});

describe("insertSpan abort mode", () => {
  it("appends into empty space and keeps spans sorted", () => {
    let spans: Span[] = [];
    spans = insertSpan(spans, span(10, 14), 100);
    spans = insertSpan(spans, span(0, 4), 100);
    expect(spans.map((s) => s.start_frame)).toEqual([0, 10]);
  });

  it("throws SpanOverlapError listing the collisions", () => {
    const spans = [span(0, 4), span(10, 14)];
    try {
      insertSpan(spans, span(3, 11, "u_turn"), 100);
      expect.unreachable("overlap must throw");
    } catch (err) {
      expect(err).toBeInstanceOf(SpanOverlapError);
      expect((err as SpanOverlapError).overlapping).toHaveLength(2);
    }
    // The input array is untouched on abort.
    expect(spans).toHaveLength(2);
  });
});

describe("insertSpan replace mode", () => {
  it("trims a partially covered span", () => {
    const spans = [span(0, 10, "turn")];
    const out = insertSpan(spans, span(5, 20, "lane_change"), 100, "replace");
    expect(out).toEqual([span(0, 4, "turn"), span(5, 20, "lane_change")]);
  });

  it("splits a span that fully contains the new one", () => {
    const spans = [span(0, 20, "turn")];
    const out = insertSpan(spans, span(8, 12, "lane_change"), 100, "replace");
    expect(out).toEqual([
      span(0, 7, "turn"),
      span(8, 12, "lane_change"),
      span(13, 20, "turn"),
    ]);
  });

  it("drops spans swallowed whole", () => {
    const spans = [span(2, 3), span(5, 6), span(9, 9)];
    const out = insertSpan(spans, span(0, 9, "reverse"), 100, "replace");
    expect(out).toEqual([span(0, 9, "reverse")]);
  });

  it("merges with an adjacent span of the same category", () => {
    const spans = [span(0, 4, "turn")];
    const out = insertSpan(spans, span(5, 9, "turn"), 100, "replace");
    expect(out).toEqual([span(0, 9, "turn")]);
  });
});

describe("coalesce", () => {
  it("joins touching equal-category spans and leaves others alone", () => {
    const out = coalesce([span(0, 2, "a"), span(3, 5, "a"), span(7, 8, "a"), span(9, 9, "b")]);
    expect(out).toEqual([span(0, 5, "a"), span(7, 8, "a"), span(9, 9, "b")]);
  });
});

describe("spanAt", () => {
  it("finds the covering span or null", () => {
    const spans = [span(2, 6, "turn")];
    expect(spanAt(spans, 2)?.category).toBe("turn");
    expect(spanAt(spans, 6)?.category).toBe("turn");
    expect(spanAt(spans, 7)).toBeNull();
  });
});

describe("no-overlap invariant", () => {
  it("holds after arbitrary replace-mode insertions", () => {
    // Deterministic LCG so the sequence is reproducible.
    let seed = 123456789;
    const next = (bound: number) => {
      seed = (1103515245 * seed + 12345) % 2147483648;
      return seed % bound;
    };
    let spans: Span[] = [];
    for (let i = 0; i < 500; i++) {
      const a = next(200);
      const b = next(200);
      const s = Math.min(a, b);
      const e = Math.max(a, b);
      const cat = ["turn", "lane_change", "u_turn"][next(3)]!;
      spans = insertSpan(spans, span(s, e, cat), 200, "replace");
      expect(() => assertNoOverlaps(spans, "fuzz")).not.toThrow();
      const sorted = [...spans].sort((x, y) => x.start_frame - y.start_frame);
      expect(spans).toEqual(sorted);
    }
  });
});
