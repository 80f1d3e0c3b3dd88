// Interval arithmetic over annotation spans. Spans use inclusive frame
// bounds, matching the document schema. All operations return new
// arrays sorted by start frame with no overlaps.

import type { Span } from "./api.js";

export class SpanError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SpanError";
  }
}

export class SpanOverlapError extends SpanError {
  constructor(readonly overlapping: Span[]) {
    super(
      `span overlaps ${overlapping.length} existing span(s), first at ` +
        `[${overlapping[0]!.start_frame}, ${overlapping[0]!.end_frame}]`,
    );
    this.name = "SpanOverlapError";
  }
}

export function checkBounds(start: number, end: number, nFrames: number): void {
  if (!Number.isInteger(start) || !Number.isInteger(end)) {
    throw new SpanError(`span bounds must be integers, got [${start}, ${end}]`);
  }
  if (start > end) {
    throw new SpanError(`span start ${start} after end ${end}`);
  }
  if (start < 0 || end >= nFrames) {
    throw new SpanError(`span [${start}, ${end}] outside video of ${nFrames} frames`);
  }
}

export function overlaps(a: Span, start: number, end: number): boolean {
  return a.start_frame <= end && start <= a.end_frame;
}

export function findOverlaps(spans: Span[], start: number, end: number): Span[] {
  return spans.filter((s) => overlaps(s, start, end));
}

/** The span covering a frame, or null. Assumes a non-overlapping set. */
export function spanAt(spans: Span[], frame: number): Span | null {
  for (const s of spans) {
    if (s.start_frame <= frame && frame <= s.end_frame) return s;
  }
  return null;
}

function sortSpans(spans: Span[]): Span[] {
  return [...spans].sort((a, b) => a.start_frame - b.start_frame);
}

/** Merge touching or adjacent spans of equal category. */
export function coalesce(spans: Span[]): Span[] {
  const sorted = sortSpans(spans);
  const out: Span[] = [];
  for (const s of sorted) {
    const last = out[out.length - 1];
    if (last && last.category === s.category && s.start_frame <= last.end_frame + 1) {
      last.end_frame = Math.max(last.end_frame, s.end_frame);
    } else {
      out.push({ ...s });
    }
  }
  return out;
}

/**
 * Remove coverage of [start, end] from a span set. Spans fully inside
 * the range disappear; spans straddling a boundary keep their outside
 * part (a span containing the whole range splits in two).
 */
export function clearRange(spans: Span[], start: number, end: number): Span[] {
  const out: Span[] = [];
  for (const s of spans) {
    if (!overlaps(s, start, end)) {
      out.push({ ...s });
      continue;
    }
    if (s.start_frame < start) {
      out.push({ start_frame: s.start_frame, end_frame: start - 1, category: s.category });
    }
    if (s.end_frame > end) {
      out.push({ start_frame: end + 1, end_frame: s.end_frame, category: s.category });
    }
  }
  return sortSpans(out);
}

export type InsertMode = "abort" | "replace";

/**
 * Insert a span into a non-overlapping set.
 *
 * mode "abort" throws SpanOverlapError when anything overlaps, leaving
 * the caller to prompt. mode "replace" clears the overlapped range
 * first, so the new span wins and partially covered neighbours are
 * trimmed. The result is sorted, overlap-free, and coalesced.
 */
export function insertSpan(
  spans: Span[],
  span: Span,
  nFrames: number,
  mode: InsertMode = "abort",
): Span[] {
  checkBounds(span.start_frame, span.end_frame, nFrames);
  const clashing = findOverlaps(spans, span.start_frame, span.end_frame);
  if (clashing.length > 0 && mode === "abort") {
    throw new SpanOverlapError(clashing);
  }
  const cleared = clearRange(spans, span.start_frame, span.end_frame);
  cleared.push({ ...span });
  return coalesce(cleared);
}

export function assertNoOverlaps(spans: Span[], label: string): void {
  const sorted = sortSpans(spans);
  for (let i = 1; i < sorted.length; i++) {
    if (sorted[i]!.start_frame <= sorted[i - 1]!.end_frame) {
      throw new SpanError(`${label} spans overlap at frame ${sorted[i]!.start_frame}`);
    }
  }
}
