// Render model for the timeline. Pure functions from documents to
// track cells so the view can be rebuilt, compared, and tested without
// a DOM.

import type { AnnotationDoc, ContextEvent, Span, Suggestions } from "./api.js";

export interface TimelineCell {
  start_frame: number;
  end_frame: number;
  action: string;
}

export interface ContextMarker {
  frame: number;
  intersection_type: string;
  priority: string | null;
  yield_onset_frame: number | null;
}

export interface TimelineView {
  video_id: string;
  n_frames: number;
  current_frame: number;
  action_track: TimelineCell[];
  context_track: ContextMarker[];
  suggestion_track: TimelineCell[];
}

export const ACTION_COLORS: Record<string, string> = {
  SpeedUp: "#2e7d32",
  SlowDown: "#c62828",
  Lateral: "#f9a825",
  LatLon: "#ef6c00",
  Maintain: "#1565c0",
  Stopped: "#6a1b9a",
  Excluded: "#616161",
  unlabeled: "#263238",
};

/**
 * Display fusion of one frame's longitudinal category and lateral
 * class. Mirrors how the audit pipeline reports actions; the client
 * never persists a fused label, only renders it.
 */
export function fuseFrame(lon: string | null, lat: string | null): string {
  if (lat === "u_turn" || lat === "reverse") return "Excluded";
  if (lon === null) return "unlabeled";
  if (lon === "Stopped") return "Stopped";
  if (lat === "turn" || lat === "lane_change") {
    return lon === "Maintain" ? "Lateral" : "LatLon";
  }
  return lon;
}

function expand(spans: Span[], nFrames: number): (string | null)[] {
  const track: (string | null)[] = new Array(nFrames).fill(null);
  for (const s of spans) {
    for (let f = s.start_frame; f <= s.end_frame && f < nFrames; f++) {
      if (f >= 0) track[f] = s.category;
    }
  }
  return track;
}

function compress(perFrame: string[]): TimelineCell[] {
  const cells: TimelineCell[] = [];
  for (let f = 0; f < perFrame.length; f++) {
    const last = cells[cells.length - 1];
    if (last && last.action === perFrame[f] && last.end_frame === f - 1) {
      last.end_frame = f;
    } else {
      cells.push({ start_frame: f, end_frame: f, action: perFrame[f]! });
    }
  }
  return cells;
}

function toMarkers(events: ContextEvent[]): ContextMarker[] {
  return events
    .map((e) => ({
      frame: e.crossing_frame,
      intersection_type: e.intersection_type,
      priority: e.priority,
      yield_onset_frame: e.yield_onset_frame,
    }))
    .sort((a, b) => a.frame - b.frame);
}

export function buildTimeline(
  doc: AnnotationDoc,
  suggestions: Suggestions | null,
  currentFrame: number,
): TimelineView {
  const lon = expand(doc.longitudinal, doc.n_frames);
  const lat = expand(doc.lateral, doc.n_frames);
  const fused: string[] = [];
  for (let f = 0; f < doc.n_frames; f++) {
    fused.push(fuseFrame(lon[f] ?? null, lat[f] ?? null));
  }
  const suggested = suggestions
    ? compress(expand(suggestions.longitudinal, doc.n_frames).map((c) => c ?? "unlabeled"))
    : [];
  return {
    video_id: doc.video_id,
    n_frames: doc.n_frames,
    current_frame: currentFrame,
    action_track: compress(fused),
    context_track: toMarkers(doc.context_events),
    suggestion_track: suggested,
  };
}
