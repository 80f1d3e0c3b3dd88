"""Core domain types shared across the toolkit.

All types are immutable after construction.  Array-backed values mark
their buffers read-only so instances can be shared across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import AnnotationError, ZeroMassError

GAZE_EVENTS = ("fixation", "saccade", "blink", "in_vehicle", "offscreen")

# Events that carry a usable gaze position.
POSITIONAL_EVENTS = frozenset({"fixation", "in_vehicle", "offscreen"})

ACTION_CATEGORIES = (
    "SpeedUp",
    "SlowDown",
    "Lateral",
    "LatLon",
    "Maintain",
    "Stopped",
    "Excluded",
)

LONGITUDINAL_CATEGORIES = ("SpeedUp", "SlowDown", "Maintain", "Stopped")

LATERAL_CLASSES = ("none", "turn", "lane_change", "u_turn", "reverse")

INTERSECTION_TYPES = ("signalized", "unsignalized", "roundabout", "highway_ramp")

PRIORITY_CLASSES = ("right_of_way", "yield")

KMH_PER_MPS = 3.6


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class VideoEntry:
    """One video of a dataset plus the files that describe it.

    Paths are absolute after manifest loading.  Optional paths are None
    when the dataset does not ship that modality.
    """

    id: str
    fps: float
    width: int
    height: int
    n_frames: Optional[int] = None
    telemetry: Optional[Path] = None
    gaze: Optional[Path] = None
    frames: Optional[Path] = None
    annotations: Optional[Path] = None
    predictions: Optional[Path] = None


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    videos: tuple[VideoEntry, ...]
    root: Path

    def video(self, video_id: str) -> VideoEntry:
        for v in self.videos:
            if v.id == video_id:
                return v
        raise KeyError(f"unknown video id {video_id!r}")


@dataclass(frozen=True)
class TelemetrySample:
    """One row of synchronized vehicle telemetry.

    speed is stored in km/h as found in the interchange files; use
    speed_mps for physics.  heading is degrees in [0, 360).
    """

    frame: int
    t: float
    speed_kmh: float
    lat: float
    lon: float
    heading_deg: float

    @property
    def speed_mps(self) -> float:
        return self.speed_kmh / KMH_PER_MPS


@dataclass(frozen=True)
class GazeSample:
    frame: int
    x: float
    y: float
    event: str


@dataclass(frozen=True)
class Fixation:
    """A stable gaze point assigned to a video frame."""

    frame: int
    x: float
    y: float
    duration_ms: Optional[float] = None


@dataclass(frozen=True)
class SaliencyMap:
    """Dense non-negative attention map, row-major, shape (height, width)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
            raise ValueError(f"saliency map must be 2-D and non-empty, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("saliency map contains non-finite values")
        if np.any(v < 0):
            raise ValueError("saliency map contains negative values")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def sum(self) -> float:
        return float(self.values.sum())

    def normalize(self) -> "SaliencyMap":
        """Rescale to unit total mass.  All-zero maps cannot be normalized."""
        total = self.values.sum()
        if total <= 0.0:
            raise ZeroMassError("cannot normalize a zero-mass saliency map")
        return SaliencyMap(self.values / total)


@dataclass(frozen=True)
class SpeedSeries:
    """Cleaned per-frame speed in m/s over a contiguous frame range."""

    frames: np.ndarray
    v: np.ndarray
    fps: float

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.float64)
        if frames.ndim != 1 or v.ndim != 1 or len(frames) != len(v):
            raise ValueError("frames and v must be 1-D and equally long")
        if len(frames) > 0 and not np.array_equal(frames, np.arange(frames[0], frames[0] + len(frames))):
            raise ValueError("speed series must cover a contiguous frame range")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("speeds must be finite and non-negative")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "frames", _readonly(frames))
        object.__setattr__(self, "v", _readonly(v))

    def __len__(self) -> int:
        return len(self.v)


@dataclass(frozen=True)
class SegmentationConfig:
    """Tunables for speed cleaning and action segmentation.

    penalty=None selects the automatic split penalty 3*ln(n)*sigma^2
    with sigma estimated robustly from first differences.
    stop_min_run=None uses one second of frames (round(fps)).
    """

    median_window: int = 20
    accel_threshold: float = 0.4
    stop_threshold_kmh: float = 1.0
    penalty: Optional[float] = None
    stop_min_run: Optional[int] = None

    @property
    def stop_threshold_mps(self) -> float:
        return self.stop_threshold_kmh / KMH_PER_MPS


@dataclass(frozen=True)
class Segment:
    """Contiguous frame range with one longitudinal driving state.

    Frame bounds are inclusive.  mean_accel is the endpoint slope
    (v_end - v_start) / dt in m/s^2 over the segment extent.
    """

    start_frame: int
    end_frame: int
    mean_accel: float
    longitudinal: str

    def __post_init__(self) -> None:
        if self.end_frame < self.start_frame:
            raise ValueError("segment end before start")
        if self.longitudinal not in LONGITUDINAL_CATEGORIES:
            raise ValueError(f"unknown longitudinal category {self.longitudinal!r}")

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class ContextEvent:
    """A labeled intersection passage.

    priority is None while the event is an unconfirmed suggestion.
    yield_onset_frame marks where yielding behaviour starts, when known.
    """

    crossing_frame: int
    intersection_type: str
    priority: Optional[str] = None
    yield_onset_frame: Optional[int] = None

    def __post_init__(self) -> None:
        if self.intersection_type not in INTERSECTION_TYPES:
            raise ValueError(f"unknown intersection type {self.intersection_type!r}")
        if self.priority is not None and self.priority not in PRIORITY_CLASSES:
            raise ValueError(f"unknown priority {self.priority!r}")
        if self.yield_onset_frame is not None and self.yield_onset_frame > self.crossing_frame:
            raise ValueError("yield onset must not come after the crossing frame")


@dataclass(frozen=True)
class ScenarioWindow:
    """Evaluation frame window around one context event, bounds inclusive."""

    video_id: str
    start_frame: int
    end_frame: int
    priority: str
    intersection_type: str
    clipped: bool = False

    def __post_init__(self) -> None:
        if self.end_frame < self.start_frame:
            raise ValueError("window end before start")

    def contains(self, frame: int) -> bool:
        return self.start_frame <= frame <= self.end_frame


@dataclass(frozen=True)
class Span:
    """Inclusive frame range carrying one category label."""

    start_frame: int
    end_frame: int
    category: str

    def __post_init__(self) -> None:
        if self.end_frame < self.start_frame:
            raise ValueError("span end before start")


@dataclass(frozen=True)
class AnnotationDoc:
    """Per-video annotation document: longitudinal and lateral label
    tracks plus intersection context events.

    The document is the unit of persistence; revision is a monotonically
    increasing integer managed by the annotation service.
    """

    video_id: str
    revision: int
    n_frames: int
    longitudinal: tuple[Span, ...] = field(default_factory=tuple)
    lateral: tuple[Span, ...] = field(default_factory=tuple)
    context_events: tuple[ContextEvent, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.revision < 0:
            raise AnnotationError("revision must be non-negative")
        if self.n_frames < 0:
            raise AnnotationError("n_frames must be non-negative")
        for track_name, spans, allowed in (
            ("longitudinal", self.longitudinal, LONGITUDINAL_CATEGORIES),
            ("lateral", self.lateral, LATERAL_CLASSES),
        ):
            last_end = -1
            for s in sorted(spans, key=lambda s: s.start_frame):
                if s.category not in allowed:
                    raise AnnotationError(
                        f"{track_name} span has unknown category {s.category!r}")
                if s.start_frame < 0 or s.end_frame >= self.n_frames:
                    raise AnnotationError(
                        f"{track_name} span [{s.start_frame}, {s.end_frame}] outside "
                        f"frame range [0, {self.n_frames - 1}]")
                if s.start_frame <= last_end:
                    raise AnnotationError(f"{track_name} spans overlap at frame {s.start_frame}")
                last_end = s.end_frame
        for ev in self.context_events:
            if not (0 <= ev.crossing_frame < self.n_frames):
                raise AnnotationError(
                    f"context event crossing_frame {ev.crossing_frame} outside "
                    f"frame range [0, {self.n_frames - 1}]")
            if ev.yield_onset_frame is not None and ev.yield_onset_frame < 0:
                raise AnnotationError("yield_onset_frame must be non-negative")


def spans_to_frames(spans, n_frames: int, fill=None) -> list:
    """Expand label spans to a per-frame list of categories.

    Frames not covered by any span get `fill`.
    """
    out = [fill] * n_frames
    for s in spans:
        if s.start_frame < 0 or s.end_frame >= n_frames:
            raise AnnotationError(
                f"span [{s.start_frame}, {s.end_frame}] outside frame range [0, {n_frames - 1}]")
        for i in range(s.start_frame, s.end_frame + 1):
            out[i] = s.category
    return out


def frames_to_spans(labels, skip=None) -> list[Span]:
    """Compress a per-frame label list into maximal constant-label spans.

    Frames whose label equals `skip` (None by default) produce no span.
    """
    spans: list[Span] = []
    start = None
    current = None
    for i, lab in enumerate(labels):
        if lab != current:
            if current is not None and current != skip and start is not None:
                spans.append(Span(start, i - 1, current))
            start = i
            current = lab
    if current is not None and current != skip and start is not None:
        spans.append(Span(start, len(labels) - 1, current))
    return [s for s in spans if s.category != skip]
