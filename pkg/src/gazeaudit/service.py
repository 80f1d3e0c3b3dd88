"""HTTP service for browsing a dataset and editing annotations.

Endpoints live under /api and speak JSON.  Annotation writes are
optimistic: the client sends the full document carrying the revision it
edited from, and the service rejects the write with 409 and the current
revision when someone else got there first.  Documents are persisted
atomically before the write is acknowledged.
"""
from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from . import formats
from .errors import AnnotationError, GazeAuditError
from .model import (
    AnnotationDoc,
    DatasetManifest,
    SegmentationConfig,
    VideoEntry,
    frames_to_spans,
)


@dataclass
class ServiceConfig:
    manifest_path: Path
    read_only: bool = False
    token: Optional[str] = None
    frontend_dir: Optional[Path] = None
    osm_path: Optional[Path] = None
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)

    def resolved_token(self) -> Optional[str]:
        if self.token is not None:
            return self.token
        return os.environ.get("GAZEAUDIT_TOKEN") or None


def _skeleton_doc(entry: VideoEntry) -> AnnotationDoc:
    return AnnotationDoc(
        video_id=entry.id, revision=0,
        n_frames=entry.n_frames if entry.n_frames is not None else 0,
        longitudinal=(), lateral=(), context_events=(),
    )


class AnnotationStore:
    """Per-video annotation documents with revision-checked writes."""

    def __init__(self, manifest: DatasetManifest):
        self._manifest = manifest
        self._locks = {v.id: threading.Lock() for v in manifest.videos}

    def _path(self, entry: VideoEntry) -> Path:
        if entry.annotations is not None:
            return entry.annotations
        return self._manifest.root / "annotations" / f"{entry.id}.json"

    def load(self, entry: VideoEntry) -> AnnotationDoc:
        path = self._path(entry)
        if path.exists():
            return formats.read_annotation_doc(path)
        return _skeleton_doc(entry)

    def save(self, entry: VideoEntry, payload: dict) -> tuple[Optional[AnnotationDoc], int]:
        """Returns (doc, new_revision) or (None, current_revision) on a
        stale base revision."""
        with self._locks[entry.id]:
            current = self.load(entry)
            doc = formats.annotation_doc_from_dict(payload)
            if doc.video_id != entry.id:
                raise AnnotationError(
                    f"document video_id {doc.video_id!r} does not match {entry.id!r}")
            if entry.n_frames is not None and doc.n_frames != entry.n_frames:
                raise AnnotationError(
                    f"document n_frames {doc.n_frames} does not match video "
                    f"n_frames {entry.n_frames}")
            if doc.revision != current.revision:
                return None, current.revision
            accepted = AnnotationDoc(
                video_id=doc.video_id, revision=current.revision + 1,
                n_frames=doc.n_frames, longitudinal=doc.longitudinal,
                lateral=doc.lateral, context_events=doc.context_events,
            )
            formats.write_annotation_doc(self._path(entry), accepted)
            return accepted, accepted.revision


def _entry_meta(entry: VideoEntry) -> dict:
    return {
        "id": entry.id,
        "fps": entry.fps,
        "width": entry.width,
        "height": entry.height,
        "n_frames": entry.n_frames,
        "has_telemetry": entry.telemetry is not None,
        "has_gaze": entry.gaze is not None,
        "has_frames": entry.frames is not None,
    }


def create_app(config: ServiceConfig) -> FastAPI:
    manifest = formats.load_manifest(config.manifest_path)
    store = AnnotationStore(manifest)
    token = config.resolved_token()

    def require_auth(request: Request) -> None:
        if token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    app = FastAPI(title="gazeaudit", docs_url=None, redoc_url=None)
    auth = [Depends(require_auth)]

    def get_entry(video_id: str) -> VideoEntry:
        try:
            return manifest.video(video_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown video {video_id!r}")

    @app.get("/api/videos", dependencies=auth)
    def list_videos() -> dict:
        return {
            "dataset_id": manifest.dataset_id,
            "read_only": config.read_only,
            "videos": [_entry_meta(v) for v in manifest.videos],
        }

    @app.get("/api/videos/{video_id}", dependencies=auth)
    def video_meta(video_id: str) -> dict:
        return _entry_meta(get_entry(video_id))

    @app.get("/api/videos/{video_id}/frames/{frame}", dependencies=auth)
    def frame_image(video_id: str, frame: int) -> FileResponse:
        entry = get_entry(video_id)
        if entry.frames is None:
            raise HTTPException(status_code=404, detail=f"video {video_id!r} has no frames")
        path = entry.frames / f"{frame:06d}.png"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no frame {frame} for {video_id!r}")
        return FileResponse(path, media_type="image/png")

    @app.get("/api/videos/{video_id}/telemetry", dependencies=auth)
    def telemetry(video_id: str) -> dict:
        entry = get_entry(video_id)
        if entry.telemetry is None:
            raise HTTPException(status_code=404, detail=f"video {video_id!r} has no telemetry")
        samples = formats.read_telemetry_csv(entry.telemetry)
        return {
            "video_id": video_id,
            "samples": [
                {"frame": s.frame, "t_sec": s.t, "speed_kmh": s.speed_kmh,
                 "lat": s.lat, "lon": s.lon, "heading_deg": s.heading_deg}
                for s in samples
            ],
        }

    @app.get("/api/videos/{video_id}/annotations", dependencies=auth)
    def get_annotations(video_id: str) -> dict:
        entry = get_entry(video_id)
        return formats.annotation_doc_to_dict(store.load(entry))

    @app.put("/api/videos/{video_id}/annotations", dependencies=auth)
    def put_annotations(video_id: str, payload: dict) -> dict:
        entry = get_entry(video_id)
        if config.read_only:
            raise HTTPException(status_code=403, detail="service is read-only")
        try:
            doc, revision = store.save(entry, payload)
        except AnnotationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if doc is None:
            raise HTTPException(
                status_code=409,
                detail={"message": "stale revision", "current_revision": revision},
            )
        return {"video_id": video_id, "revision": revision}

    @app.get("/api/videos/{video_id}/suggestions", dependencies=auth)
    def suggestions(video_id: str) -> dict:
        entry = get_entry(video_id)
        out: dict = {"video_id": video_id, "longitudinal": [], "context": [], "notes": []}
        if entry.telemetry is not None:
            from . import segmentation as seg

            try:
                samples = formats.read_telemetry_csv(entry.telemetry)
                series = seg.speed_series_from_telemetry(samples, entry.fps, config.segmentation)
                segments = seg.segment_speed(series, config.segmentation)
                labels: list[str] = []
                for s in segments:
                    labels.extend([s.longitudinal] * s.n_frames)
                first = int(series.frames[0])
                out["longitudinal"] = [
                    {"start_frame": sp.start_frame + first,
                     "end_frame": sp.end_frame + first,
                     "category": sp.category}
                    for sp in frames_to_spans(labels)
                ]
            except GazeAuditError as exc:
                out["notes"].append(f"segmentation unavailable: {exc}")
        if config.osm_path is not None and entry.telemetry is not None:
            from . import context as ctx

            try:
                track = formats.read_telemetry_csv(entry.telemetry)
                graph = ctx.parse_osm_extract(config.osm_path)
                events = ctx.suggest_context_events(track, graph)
                out["context"] = [
                    {"crossing_frame": e.crossing_frame,
                     "intersection_type": e.intersection_type,
                     "priority": e.priority,
                     "yield_onset_frame": e.yield_onset_frame}
                    for e in events
                ]
            except GazeAuditError as exc:
                out["notes"].append(f"context suggestions unavailable: {exc}")
        return out

    if config.frontend_dir is not None and Path(config.frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.frontend_dir, html=True), name="frontend")

    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
