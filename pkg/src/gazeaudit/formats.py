"""On-disk interchange formats.

Readers validate structure eagerly and report offending lines or fields
by name.  Writers are atomic: content goes to a temporary file in the
target directory which is then renamed over the destination.
"""
from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image

from .errors import AnnotationError, FormatError, ManifestError
from .model import (
    GAZE_EVENTS,
    POSITIONAL_EVENTS,
    AnnotationDoc,
    ContextEvent,
    DatasetManifest,
    GazeSample,
    SaliencyMap,
    Span,
    TelemetrySample,
    VideoEntry,
)

TELEMETRY_COLUMNS = ("frame", "t_sec", "speed_kmh", "lat", "lon", "heading_deg")
GAZE_COLUMNS = ("frame", "x_px", "y_px", "event")

SMAP_MAGIC = b"SMAP"
_SMAP_HEADER = struct.Struct("<4sIII")
# Caps width*height; a larger header is treated as corrupt rather than
# allocated.
_MAX_MAP_PIXELS = 1 << 28


def write_bytes_atomic(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path: Path, text: str) -> None:
    write_bytes_atomic(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# dataset manifest


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ManifestError(f"{where}: missing required field {key!r}")
    return mapping[key]


def load_manifest(path) -> DatasetManifest:
    """Load a dataset manifest and resolve its relative paths.

    Every referenced file or directory must exist.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ManifestError("manifest root must be an object")
    root = path.parent.resolve()
    dataset_id = _require(raw, "dataset_id", "manifest")
    videos_raw = _require(raw, "videos", "manifest")
    if not isinstance(videos_raw, list):
        raise ManifestError("manifest field 'videos' must be a list")

    videos: list[VideoEntry] = []
    seen: set[str] = set()
    for i, v in enumerate(videos_raw):
        where = f"videos[{i}]"
        if not isinstance(v, dict):
            raise ManifestError(f"{where}: must be an object")
        vid = _require(v, "id", where)
        if not isinstance(vid, str) or not vid:
            raise ManifestError(f"{where}: field 'id' must be a non-empty string")
        if vid in seen:
            raise ManifestError(f"{where}: duplicate video id {vid!r}")
        seen.add(vid)
        fps = _require(v, "fps", where)
        width = _require(v, "width", where)
        height = _require(v, "height", where)
        if not isinstance(fps, (int, float)) or fps <= 0:
            raise ManifestError(f"{where}: field 'fps' must be a positive number")
        for name, val in (("width", width), ("height", height)):
            if not isinstance(val, int) or val <= 0:
                raise ManifestError(f"{where}: field {name!r} must be a positive integer")
        n_frames = v.get("n_frames")
        if n_frames is not None and (not isinstance(n_frames, int) or n_frames < 0):
            raise ManifestError(f"{where}: field 'n_frames' must be a non-negative integer")

        paths: dict[str, Optional[Path]] = {}
        for name in ("telemetry", "gaze", "frames", "annotations", "predictions"):
            rel = v.get(name)
            if rel is None:
                paths[name] = None
                continue
            if not isinstance(rel, str):
                raise ManifestError(f"{where}: field {name!r} must be a string path")
            p = (root / rel).resolve()
            # Annotation files may legitimately not exist yet; every other
            # reference must resolve.
            if name != "annotations" and not p.exists():
                raise ManifestError(f"{where}: field {name!r} references missing path {p}")
            paths[name] = p

        videos.append(VideoEntry(
            id=vid, fps=float(fps), width=width, height=height, n_frames=n_frames,
            **paths,
        ))
    return DatasetManifest(dataset_id=str(dataset_id), videos=tuple(videos), root=root)


def write_manifest(path, manifest: DatasetManifest) -> None:
    path = Path(path)
    root = path.parent.resolve()

    def rel(p: Optional[Path]) -> Optional[str]:
        return None if p is None else os.path.relpath(p, root)

    doc = {
        "dataset_id": manifest.dataset_id,
        "videos": [
            {
                "id": v.id, "fps": v.fps, "width": v.width, "height": v.height,
                "n_frames": v.n_frames,
                "telemetry": rel(v.telemetry), "gaze": rel(v.gaze),
                "frames": rel(v.frames), "annotations": rel(v.annotations),
                "predictions": rel(v.predictions),
            }
            for v in manifest.videos
        ],
    }
    write_text_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# telemetry and gaze CSV


def _open_csv(path: Path, required: Sequence[str], kind: str) -> tuple[list[dict], list[int]]:
    if not path.is_file():
        raise FormatError(f"{kind} file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty {kind} file, header row required")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise FormatError(f"{path}: missing required column(s) {', '.join(missing)}")
        rows = []
        lines = []
        for lineno, row in enumerate(reader, start=2):
            rows.append(row)
            lines.append(lineno)
    return rows, lines


def _parse_float(row: dict, col: str, path: Path, lineno: int, allow_empty: bool = False) -> float:
    raw = (row.get(col) or "").strip()
    if raw == "":
        if allow_empty:
            return float("nan")
        raise FormatError(f"{path}:{lineno}: empty value in column {col!r}")
    try:
        return float(raw)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: cannot parse {col!r} value {raw!r}") from None


def _parse_int(row: dict, col: str, path: Path, lineno: int) -> int:
    raw = (row.get(col) or "").strip()
    try:
        return int(raw)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: cannot parse {col!r} value {raw!r}") from None


def read_telemetry_csv(path) -> list[TelemetrySample]:
    """Read telemetry rows; frames must be strictly increasing."""
    path = Path(path)
    rows, lines = _open_csv(path, TELEMETRY_COLUMNS, "telemetry")
    samples: list[TelemetrySample] = []
    prev_frame = None
    for row, lineno in zip(rows, lines):
        frame = _parse_int(row, "frame", path, lineno)
        if prev_frame is not None and frame <= prev_frame:
            raise FormatError(
                f"{path}:{lineno}: frame index {frame} not strictly increasing "
                f"(previous {prev_frame})")
        prev_frame = frame
        t = _parse_float(row, "t_sec", path, lineno)
        speed = _parse_float(row, "speed_kmh", path, lineno)
        lat = _parse_float(row, "lat", path, lineno)
        lon = _parse_float(row, "lon", path, lineno)
        heading = _parse_float(row, "heading_deg", path, lineno)
        if not -90.0 <= lat <= 90.0:
            raise FormatError(f"{path}:{lineno}: latitude {lat} out of range")
        if not -180.0 <= lon <= 180.0:
            raise FormatError(f"{path}:{lineno}: longitude {lon} out of range")
        if not np.isfinite(heading):
            raise FormatError(f"{path}:{lineno}: non-finite heading")
        samples.append(TelemetrySample(
            frame=frame, t=t, speed_kmh=speed, lat=lat, lon=lon,
            heading_deg=heading % 360.0,
        ))
    return samples


def write_telemetry_csv(path, samples: Iterable[TelemetrySample]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TELEMETRY_COLUMNS)
    for s in samples:
        w.writerow([s.frame, _fmt(s.t), _fmt(s.speed_kmh), _fmt(s.lat), _fmt(s.lon), _fmt(s.heading_deg)])
    write_text_atomic(Path(path), buf.getvalue())


def read_gaze_csv(path) -> list[GazeSample]:
    """Read gaze samples.  Position columns may be empty for events that
    carry no usable location (blink, saccade)."""
    path = Path(path)
    rows, lines = _open_csv(path, GAZE_COLUMNS, "gaze")
    samples: list[GazeSample] = []
    for row, lineno in zip(rows, lines):
        frame = _parse_int(row, "frame", path, lineno)
        event = (row.get("event") or "").strip()
        if event not in GAZE_EVENTS:
            raise FormatError(f"{path}:{lineno}: unknown gaze event {event!r}")
        allow_empty = event not in POSITIONAL_EVENTS
        x = _parse_float(row, "x_px", path, lineno, allow_empty=allow_empty)
        y = _parse_float(row, "y_px", path, lineno, allow_empty=allow_empty)
        if event in POSITIONAL_EVENTS and not (np.isfinite(x) and np.isfinite(y)):
            raise FormatError(f"{path}:{lineno}: event {event!r} requires finite coordinates")
        samples.append(GazeSample(frame=frame, x=x, y=y, event=event))
    samples.sort(key=lambda s: s.frame)
    return samples


def write_gaze_csv(path, samples: Iterable[GazeSample]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAZE_COLUMNS)
    for s in samples:
        x = "" if not np.isfinite(s.x) else _fmt(s.x)
        y = "" if not np.isfinite(s.y) else _fmt(s.y)
        w.writerow([s.frame, x, y, s.event])
    write_text_atomic(Path(path), buf.getvalue())


def _fmt(x: float) -> str:
    # Stable shortest-repr float formatting keeps outputs byte-identical
    # across runs.
    return repr(float(x))


# ---------------------------------------------------------------------------
# saliency maps


def write_saliency_map(path, smap: SaliencyMap) -> None:
    """Write the binary map format: magic, u32 width/height/reserved,
    then float32 LE values in row-major order."""
    values = np.ascontiguousarray(smap.values, dtype="<f4")
    header = _SMAP_HEADER.pack(SMAP_MAGIC, smap.width, smap.height, 0)
    write_bytes_atomic(Path(path), header + values.tobytes())


def read_saliency_map(path) -> SaliencyMap:
    """Read a saliency map from the binary format or from a grayscale PNG.

    PNG values are rescaled to [0, 1] by the image maximum; an all-zero
    image stays all-zero.
    """
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"saliency map not found: {path}")
    if path.suffix.lower() == ".png":
        return _read_png_map(path)
    data = path.read_bytes()
    if len(data) < _SMAP_HEADER.size:
        raise FormatError(f"{path}: truncated saliency map header")
    magic, width, height, reserved = _SMAP_HEADER.unpack_from(data)
    if magic != SMAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved header field must be zero, got {reserved}")
    if width == 0 or height == 0:
        raise FormatError(f"{path}: zero-size map ({width}x{height})")
    if width * height > _MAX_MAP_PIXELS:
        raise FormatError(f"{path}: declared size {width}x{height} exceeds limit")
    expected = _SMAP_HEADER.size + 4 * width * height
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload size mismatch, expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_SMAP_HEADER.size).reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: map contains non-finite values")
    if np.any(values < 0):
        raise FormatError(f"{path}: map contains negative values")
    return SaliencyMap(values.astype(np.float64))


def _read_png_map(path: Path) -> SaliencyMap:
    try:
        img = Image.open(path)
        img.load()
    except Exception as e:
        raise FormatError(f"{path}: cannot decode PNG: {e}") from e
    if img.mode not in ("L", "I", "I;16"):
        raise FormatError(f"{path}: PNG import requires 8- or 16-bit grayscale, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise FormatError(f"{path}: zero-size image")
    peak = arr.max()
    if peak > 0:
        arr = arr / peak
    return SaliencyMap(arr)


# ---------------------------------------------------------------------------
# annotation documents


def annotation_doc_to_dict(doc: AnnotationDoc) -> dict:
    return {
        "video_id": doc.video_id,
        "revision": doc.revision,
        "n_frames": doc.n_frames,
        "longitudinal": [
            {"start_frame": s.start_frame, "end_frame": s.end_frame, "category": s.category}
            for s in doc.longitudinal
        ],
        "lateral": [
            {"start_frame": s.start_frame, "end_frame": s.end_frame, "category": s.category}
            for s in doc.lateral
        ],
        "context_events": [
            {
                "crossing_frame": e.crossing_frame,
                "intersection_type": e.intersection_type,
                "priority": e.priority,
                "yield_onset_frame": e.yield_onset_frame,
            }
            for e in doc.context_events
        ],
    }


def annotation_doc_from_dict(raw: dict) -> AnnotationDoc:
    if not isinstance(raw, dict):
        raise AnnotationError("annotation document must be an object")
    try:
        video_id = raw["video_id"]
        revision = raw["revision"]
        n_frames = raw["n_frames"]
    except KeyError as e:
        raise AnnotationError(f"annotation document missing field {e.args[0]!r}") from None
    if not isinstance(revision, int) or not isinstance(n_frames, int):
        raise AnnotationError("revision and n_frames must be integers")

    def spans(key: str) -> tuple[Span, ...]:
        out = []
        for i, s in enumerate(raw.get(key) or []):
            if not isinstance(s, dict):
                raise AnnotationError(f"{key}[{i}] must be an object")
            try:
                out.append(Span(int(s["start_frame"]), int(s["end_frame"]), str(s["category"])))
            except (KeyError, TypeError, ValueError) as e:
                raise AnnotationError(f"{key}[{i}] is malformed: {e}") from None
        return tuple(sorted(out, key=lambda s: s.start_frame))

    events = []
    for i, e in enumerate(raw.get("context_events") or []):
        if not isinstance(e, dict):
            raise AnnotationError(f"context_events[{i}] must be an object")
        try:
            events.append(ContextEvent(
                crossing_frame=int(e["crossing_frame"]),
                intersection_type=str(e["intersection_type"]),
                priority=e.get("priority"),
                yield_onset_frame=e.get("yield_onset_frame"),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(f"context_events[{i}] is malformed: {exc}") from None
    try:
        return AnnotationDoc(
            video_id=str(video_id), revision=revision, n_frames=n_frames,
            longitudinal=spans("longitudinal"), lateral=spans("lateral"),
            context_events=tuple(sorted(events, key=lambda e: e.crossing_frame)),
        )
    except ValueError as e:
        raise AnnotationError(str(e)) from None


def dump_annotation_doc(doc: AnnotationDoc) -> str:
    """Canonical serialization; byte-stable for identical documents."""
    return json.dumps(annotation_doc_to_dict(doc), indent=2, sort_keys=True) + "\n"


def read_annotation_doc(path) -> AnnotationDoc:
    path = Path(path)
    if not path.is_file():
        raise AnnotationError(f"annotation file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise AnnotationError(f"{path}: not valid JSON: {e}") from e
    return annotation_doc_from_dict(raw)


def write_annotation_doc(path, doc: AnnotationDoc) -> None:
    write_text_atomic(Path(path), dump_annotation_doc(doc))
