// Local annotation draft. Edits accumulate in memory; an explicit save
// sends the whole document with the revision it was based on. A
// rejected save never mutates the draft.

import {
  AnnotationApi,
  type AnnotationDoc,
  type ContextEvent,
  type Span,
} from "./api.js";
import { checkBounds, insertSpan, clearRange, type InsertMode } from "./spans.js";

export const LONGITUDINAL_CATEGORIES = ["SpeedUp", "SlowDown", "Maintain", "Stopped"] as const;
export const LATERAL_CLASSES = ["turn", "lane_change", "u_turn", "reverse"] as const;
export const INTERSECTION_TYPES = [
  "signalized",
  "unsignalized",
  "roundabout",
  "highway_ramp",
] as const;
export const PRIORITY_CLASSES = ["right_of_way", "yield"] as const;

export class DraftError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "DraftError";
  }
}

function deepCopy<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

export class AnnotationDraft {
  private doc: AnnotationDoc;
  private isDirty = false;

  constructor(doc: AnnotationDoc) {
    this.doc = deepCopy(doc);
  }

  get videoId(): string {
    return this.doc.video_id;
  }

  get revision(): number {
    return this.doc.revision;
  }

  get nFrames(): number {
    return this.doc.n_frames;
  }

  get dirty(): boolean {
    return this.isDirty;
  }

  /** Independent copy of the current document state. */
  snapshot(): AnnotationDoc {
    return deepCopy(this.doc);
  }

  labelLateral(start: number, end: number, cls: string, mode: InsertMode = "abort"): void {
    if (!(LATERAL_CLASSES as readonly string[]).includes(cls)) {
      throw new DraftError(`unknown lateral class '${cls}'`);
    }
    this.doc.lateral = insertSpan(
      this.doc.lateral,
      { start_frame: start, end_frame: end, category: cls },
      this.doc.n_frames,
      mode,
    );
    this.isDirty = true;
  }

  labelLongitudinal(start: number, end: number, category: string, mode: InsertMode = "abort"): void {
    if (!(LONGITUDINAL_CATEGORIES as readonly string[]).includes(category)) {
      throw new DraftError(`unknown longitudinal category '${category}'`);
    }
    this.doc.longitudinal = insertSpan(
      this.doc.longitudinal,
      { start_frame: start, end_frame: end, category },
      this.doc.n_frames,
      mode,
    );
    this.isDirty = true;
  }

  clearLateral(start: number, end: number): void {
    checkBounds(start, end, this.doc.n_frames);
    this.doc.lateral = clearRange(this.doc.lateral, start, end);
    this.isDirty = true;
  }

  /** Adopt one machine-suggested longitudinal span, replacing overlaps. */
  acceptSuggestion(span: Span): void {
    this.labelLongitudinal(span.start_frame, span.end_frame, span.category, "replace");
  }

  confirmContext(event: ContextEvent): void {
    if (!(INTERSECTION_TYPES as readonly string[]).includes(event.intersection_type)) {
      throw new DraftError(`unknown intersection type '${event.intersection_type}'`);
    }
    if (event.priority !== null && !(PRIORITY_CLASSES as readonly string[]).includes(event.priority)) {
      throw new DraftError(`unknown priority '${event.priority}'`);
    }
    if (event.crossing_frame < 0 || event.crossing_frame >= this.doc.n_frames) {
      throw new DraftError(`crossing frame ${event.crossing_frame} outside video`);
    }
    if (event.yield_onset_frame !== null) {
      if (event.yield_onset_frame > event.crossing_frame) {
        throw new DraftError(
          `yield onset ${event.yield_onset_frame} after crossing ${event.crossing_frame}`,
        );
      }
      if (event.yield_onset_frame < 0) {
        throw new DraftError(`yield onset ${event.yield_onset_frame} before video start`);
      }
    }
    // one event per crossing frame; confirming again replaces it
    this.doc.context_events = this.doc.context_events
      .filter((e) => e.crossing_frame !== event.crossing_frame)
      .concat([deepCopy(event)])
      .sort((a, b) => a.crossing_frame - b.crossing_frame);
    this.isDirty = true;
  }

  removeContext(crossingFrame: number): void {
    const before = this.doc.context_events.length;
    this.doc.context_events = this.doc.context_events.filter(
      (e) => e.crossing_frame !== crossingFrame,
    );
    if (this.doc.context_events.length !== before) this.isDirty = true;
  }

  /**
   * Push the draft to the server. On success the draft adopts the new
   * revision and becomes clean. On any failure, including a revision
   * conflict, the draft is left exactly as it was.
   */
  async save(api: AnnotationApi): Promise<number> {
    const revision = await api.putAnnotations(this.snapshot());
    this.doc.revision = revision;
    this.isDirty = false;
    return revision;
  }

  /** Replace the draft's contents with a freshly fetched document. */
  resetTo(doc: AnnotationDoc): void {
    this.doc = deepCopy(doc);
    this.isDirty = false;
  }
}
