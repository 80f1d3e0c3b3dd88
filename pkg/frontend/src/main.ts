// Browser entry point. Wires the API client, the annotation draft,
// and the timeline render model into a keyboard-first labeling UI.
// All mutation goes through AnnotationDraft; this file only paints.

import { AnnotationApi, RevisionConflictError } from "./api.js";
import type { AnnotationDoc, Suggestions, VideoMeta } from "./api.js";
import { AnnotationDraft, LATERAL_CLASSES, LONGITUDINAL_CATEGORIES } from "./draft.js";
import { SpanOverlapError } from "./spans.js";
import { ACTION_COLORS, buildTimeline } from "./timeline.js";

const PREFETCH_RADIUS = 25;

interface AppState {
  api: AnnotationApi;
  videos: VideoMeta[];
  readOnly: boolean;
  meta: VideoMeta | null;
  draft: AnnotationDraft | null;
  suggestions: Suggestions | null;
  frame: number;
  markFrame: number | null;
  pendingClass: string | null;
  prefetched: Map<number, HTMLImageElement>;
}

const state: AppState = {
  api: new AnnotationApi(""),
  videos: [],
  readOnly: false,
  meta: null,
  draft: null,
  suggestions: null,
  frame: 0,
  markFrame: null,
  pendingClass: null,
  prefetched: new Map(),
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function statusLine(msg: string, kind: "info" | "error" | "conflict" = "info"): void {
  const bar = document.getElementById("status");
  if (!bar) return;
  bar.textContent = msg;
  bar.dataset["kind"] = kind;
}

function prefetchAround(frame: number): void {
  const meta = state.meta;
  if (!meta || !meta.has_frames || meta.n_frames === null) return;
  const lo = Math.max(0, frame - PREFETCH_RADIUS);
  const hi = Math.min(meta.n_frames - 1, frame + PREFETCH_RADIUS);
  for (let f = lo; f <= hi; f++) {
    if (state.prefetched.has(f)) continue;
    const img = new Image();
    img.src = state.api.frameUrl(meta.id, f);
    state.prefetched.set(f, img);
  }
  // Drop cache entries far outside the window so memory stays bounded.
  for (const key of state.prefetched.keys()) {
    if (key < lo - PREFETCH_RADIUS || key > hi + PREFETCH_RADIUS) {
      state.prefetched.delete(key);
    }
  }
}

function paintFrame(): void {
  const img = document.getElementById("frame") as HTMLImageElement | null;
  const meta = state.meta;
  if (!img || !meta) return;
  if (meta.has_frames) {
    img.src = state.api.frameUrl(meta.id, state.frame);
    img.alt = `${meta.id} frame ${state.frame}`;
  } else {
    img.removeAttribute("src");
    img.alt = "no frames on disk for this video";
  }
  const counter = document.getElementById("frame-counter");
  const last = meta.n_frames === null ? "?" : String(meta.n_frames - 1);
  if (counter) counter.textContent = `${state.frame} / ${last}`;
  prefetchAround(state.frame);
}

function paintTimeline(): void {
  const host = document.getElementById("timeline");
  const draft = state.draft;
  if (!host || !draft) return;
  host.textContent = "";
  const view = buildTimeline(draft.snapshot(), state.suggestions, state.frame);
  const width = (cell: { start_frame: number; end_frame: number }) =>
    `${((cell.end_frame - cell.start_frame + 1) / view.n_frames) * 100}%`;

  const actionRow = el("div", "track action-track");
  for (const cell of view.action_track) {
    const seg = el("div", "cell", cell.action);
    seg.style.width = width(cell);
    seg.style.background = ACTION_COLORS[cell.action] ?? "#000";
    seg.title = `${cell.action} [${cell.start_frame}, ${cell.end_frame}]`;
    actionRow.appendChild(seg);
  }
  host.appendChild(actionRow);

  const ctxRow = el("div", "track context-track");
  for (const marker of view.context_track) {
    const pin = el("div", "marker", "▾");
    pin.style.left = `${(marker.frame / view.n_frames) * 100}%`;
    pin.title =
      `${marker.intersection_type} @ ${marker.frame}` +
      (marker.priority ? ` (${marker.priority})` : "") +
      (marker.yield_onset_frame !== null ? ` yield from ${marker.yield_onset_frame}` : "");
    ctxRow.appendChild(pin);
  }
  host.appendChild(ctxRow);

  const sugRow = el("div", "track suggestion-track");
  for (const cell of view.suggestion_track) {
    if (cell.action === "unlabeled") continue;
    const seg = el("div", "cell suggested", cell.action);
    seg.style.width = width(cell);
    seg.style.left = `${(cell.start_frame / view.n_frames) * 100}%`;
    seg.title = `suggested ${cell.action} [${cell.start_frame}, ${cell.end_frame}]`;
    sugRow.appendChild(seg);
  }
  host.appendChild(sugRow);

  const cursor = el("div", "cursor");
  cursor.style.left = `${(state.frame / view.n_frames) * 100}%`;
  host.appendChild(cursor);

  const dirtyBadge = document.getElementById("dirty");
  if (dirtyBadge) dirtyBadge.hidden = !draft.dirty;
}

function paintAll(): void {
  paintFrame();
  paintTimeline();
}

async function loadVideo(id: string): Promise<void> {
  state.meta = await state.api.videoMeta(id);
  const doc = await state.api.getAnnotations(id);
  state.draft = new AnnotationDraft(doc);
  state.frame = 0;
  state.markFrame = null;
  state.pendingClass = null;
  state.prefetched.clear();
  try {
    state.suggestions = await state.api.getSuggestions(id);
  } catch {
    state.suggestions = null;
  }
  statusLine(`loaded ${id} at revision ${doc.revision}`);
  paintAll();
}

function step(delta: number): void {
  const meta = state.meta;
  if (!meta) return;
  const maxFrame = (meta.n_frames ?? Number.MAX_SAFE_INTEGER) - 1;
  state.frame = Math.min(maxFrame, Math.max(0, state.frame + delta));
  paintAll();
}

function applySpan(cls: string, replace: boolean): void {
  const draft = state.draft;
  if (!draft || state.markFrame === null) {
    statusLine("press m to mark a span start first", "error");
    return;
  }
  if (state.readOnly) {
    statusLine("dataset is read only", "error");
    return;
  }
  const start = Math.min(state.markFrame, state.frame);
  const end = Math.max(state.markFrame, state.frame);
  const isLateral = (LATERAL_CLASSES as readonly string[]).includes(cls);
  try {
    if (isLateral) {
      draft.labelLateral(start, end, cls, replace ? "replace" : "abort");
    } else {
      draft.labelLongitudinal(start, end, cls, replace ? "replace" : "abort");
    }
    state.markFrame = null;
    state.pendingClass = null;
    statusLine(`labeled [${start}, ${end}] as ${cls}`);
  } catch (err) {
    if (err instanceof SpanOverlapError) {
      // Keep the pending class so r confirms the replacement.
      state.pendingClass = cls;
      statusLine(`${err.message}; press r to replace or Escape to abort`, "conflict");
    } else {
      statusLine(String(err), "error");
    }
  }
  paintTimeline();
}

async function save(): Promise<void> {
  const draft = state.draft;
  if (!draft) return;
  if (state.readOnly) {
    statusLine("dataset is read only", "error");
    return;
  }
  try {
    const revision = await draft.save(state.api);
    statusLine(`saved revision ${revision}`);
  } catch (err) {
    if (err instanceof RevisionConflictError) {
      // The draft object is untouched; offer a reload that discards it.
      statusLine(
        `save rejected: server is at revision ${err.currentRevision}, ` +
          `your draft started from ${draft.revision}. ` +
          `Your edits are kept locally; press R to reload and discard them.`,
        "conflict",
      );
    } else {
      statusLine(`save failed: ${String(err)}`, "error");
    }
  }
  paintTimeline();
}

async function reloadFromServer(): Promise<void> {
  const meta = state.meta;
  if (!meta) return;
  const doc = await state.api.getAnnotations(meta.id);
  state.draft = new AnnotationDraft(doc);
  statusLine(`reloaded ${meta.id} at revision ${doc.revision}; local draft discarded`);
  paintAll();
}

function promptContext(): void {
  const draft = state.draft;
  if (!draft || state.readOnly) return;
  const type = window.prompt("intersection type (signalized/unsignalized/roundabout/highway_ramp)");
  if (!type) return;
  const priority = window.prompt("priority (right_of_way/yield, empty for unknown)") || null;
  let onset: number | null = null;
  if (priority === "yield") {
    const raw = window.prompt(`yield onset frame (must be <= ${state.frame}, empty to skip)`);
    if (raw) onset = Number(raw);
  }
  try {
    draft.confirmContext({
      crossing_frame: state.frame,
      intersection_type: type,
      priority,
      yield_onset_frame: onset,
    });
    statusLine(`context event confirmed at frame ${state.frame}`);
  } catch (err) {
    statusLine(String(err), "error");
  }
  paintTimeline();
}

function onKey(ev: KeyboardEvent): void {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement) return;
  const hotkeys: Record<string, string> = {
    "1": "SpeedUp",
    "2": "SlowDown",
    "3": "Maintain",
    "4": "Stopped",
    t: "turn",
    l: "lane_change",
    u: "u_turn",
    v: "reverse",
  };
  switch (ev.key) {
    case "ArrowRight":
      step(ev.shiftKey ? 10 : 1);
      break;
    case "ArrowLeft":
      step(ev.shiftKey ? -10 : -1);
      break;
    case "m":
      state.markFrame = state.frame;
      statusLine(`span start marked at ${state.frame}`);
      break;
    case "Escape":
      state.markFrame = null;
      state.pendingClass = null;
      statusLine("span mark cleared");
      break;
    case "r":
      if (state.pendingClass) applySpan(state.pendingClass, true);
      break;
    case "R":
      void reloadFromServer();
      break;
    case "c":
      promptContext();
      break;
    case "s":
      void save();
      break;
    default:
      if (ev.key in hotkeys) applySpan(hotkeys[ev.key]!, false);
      return;
  }
  ev.preventDefault();
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  root.textContent = "";

  const header = el("div", "header");
  const picker = el("select");
  picker.id = "video-picker";
  header.appendChild(picker);
  header.appendChild(el("span", "counter"));
  const counter = header.lastElementChild as HTMLElement;
  counter.id = "frame-counter";
  const dirty = el("span", "dirty-badge", "unsaved");
  dirty.id = "dirty";
  dirty.hidden = true;
  header.appendChild(dirty);
  root.appendChild(header);

  const img = el("img", "frame-view");
  img.id = "frame";
  root.appendChild(img);

  const timeline = el("div", "timeline");
  timeline.id = "timeline";
  root.appendChild(timeline);

  const status = el("div", "status");
  status.id = "status";
  root.appendChild(status);

  root.appendChild(
    el(
      "div",
      "help",
      "arrows: step (shift = 10) | m: mark span | 1-4: SpeedUp/SlowDown/Maintain/Stopped | " +
        "t/l/u/v: turn/lane_change/u_turn/reverse | r: confirm replace | c: context event | " +
        "s: save | R: reload from server | Esc: cancel",
    ),
  );

  const listing = await state.api.listVideos();
  state.videos = listing.videos;
  state.readOnly = listing.read_only;
  for (const v of state.videos) {
    const opt = el("option", undefined, v.id);
    opt.value = v.id;
    picker.appendChild(opt);
  }
  picker.addEventListener("change", () => void loadVideo(picker.value));
  document.addEventListener("keydown", onKey);

  if (state.videos.length > 0) {
    await loadVideo(state.videos[0]!.id);
  } else {
    statusLine("dataset has no videos", "error");
  }
  if (state.readOnly) statusLine("dataset is read only; labeling disabled");
}

void boot();

export type { AnnotationDoc };
