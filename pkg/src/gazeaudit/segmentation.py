"""Speed-signal cleaning, change-point detection, and action labeling.

The labeling pipeline runs in four stages: robust outlier removal plus
median smoothing, penalized least-squares change-point detection over
the cleaned speed, endpoint-slope classification of the resulting
segments, and fusion with manually annotated lateral maneuvers into a
six-way action vocabulary.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import SegmentationError
from .model import (
    KMH_PER_MPS,
    LATERAL_CLASSES,
    LONGITUDINAL_CATEGORIES,
    AnnotationDoc,
    Segment,
    SegmentationConfig,
    SpeedSeries,
    TelemetrySample,
    spans_to_frames,
)

# Consistency factor relating MAD to the standard deviation of a normal
# distribution.
MAD_SCALE = 1.4826

# Absolute outlier floor in m/s; keeps the rule from firing on flat
# noise-free stretches where the MAD collapses to zero.
OUTLIER_FLOOR_MPS = 5.0

STAT_CATEGORIES = ("SpeedUp", "SlowDown", "Lateral", "LatLon", "Maintain", "Stopped")


def _window_bounds(i: int, n: int, w: int) -> tuple[int, int]:
    # Centered window of w samples, shrunk at the edges.
    lo = max(0, i - w // 2)
    hi = min(n, lo + w)
    lo = max(0, hi - w)
    return lo, hi


def _windowed_median_mad(x: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    n = len(x)
    med = np.empty(n)
    mad = np.empty(n)
    for i in range(n):
        lo, hi = _window_bounds(i, n, w)
        win = x[lo:hi]
        m = np.median(win)
        med[i] = m
        mad[i] = np.median(np.abs(win - m))
    return med, mad


def _windowed_median(x: np.ndarray, w: int) -> np.ndarray:
    n = len(x)
    if n == 0:
        return x.copy()
    out = np.empty(n)
    lo0 = w // 2
    hi0 = n - (w - w // 2)
    if hi0 > lo0 and w <= n:
        sw = np.lib.stride_tricks.sliding_window_view(x, w)
        out[lo0:lo0 + len(sw)] = np.median(sw, axis=1)
        edge = list(range(lo0)) + list(range(lo0 + len(sw), n))
    else:
        edge = list(range(n))
    for i in edge:
        lo, hi = _window_bounds(i, n, w)
        out[i] = np.median(x[lo:hi])
    return out


def clean_speed(
    raw_kmh: Sequence[float],
    fps: float,
    cfg: SegmentationConfig = SegmentationConfig(),
    frames: Optional[Sequence[int]] = None,
) -> SpeedSeries:
    """Convert raw km/h samples to a cleaned m/s series.

    A sample is an outlier when it deviates from its local window median
    by more than max(3 * 1.4826 * MAD, 5 m/s); outliers are replaced by
    that median before the final centered moving-median pass.  Output
    length equals input length and speeds are clamped to be
    non-negative.
    """
    v = np.asarray(raw_kmh, dtype=np.float64) / KMH_PER_MPS
    if v.ndim != 1 or len(v) == 0:
        raise SegmentationError("speed cleaning requires a non-empty 1-D sample sequence")
    if not np.all(np.isfinite(v)):
        raise SegmentationError("speed samples must be finite")
    w = max(1, int(cfg.median_window))
    med, mad = _windowed_median_mad(v, w)
    threshold = np.maximum(3.0 * MAD_SCALE * mad, OUTLIER_FLOOR_MPS)
    replaced = np.where(np.abs(v - med) > threshold, med, v)
    smoothed = _windowed_median(replaced, w)
    smoothed = np.maximum(smoothed, 0.0)
    if frames is None:
        frames = np.arange(len(v))
    return SpeedSeries(frames=np.asarray(frames), v=smoothed, fps=float(fps))


def speed_series_from_telemetry(
    samples: Sequence[TelemetrySample],
    fps: float,
    cfg: SegmentationConfig = SegmentationConfig(),
) -> SpeedSeries:
    if not samples:
        raise SegmentationError("no telemetry samples")
    frames = [s.frame for s in samples]
    if frames != list(range(frames[0], frames[0] + len(frames))):
        raise SegmentationError("telemetry frames must be contiguous for segmentation")
    return clean_speed([s.speed_kmh for s in samples], fps=fps, cfg=cfg, frames=frames)


def default_penalty(v: np.ndarray) -> float:
    """Split penalty 3 * ln(n) * sigma^2 with sigma estimated from the
    MAD of first differences (a difference of two iid noise terms has
    variance 2 sigma^2, hence the sqrt(2))."""
    n = len(v)
    if n < 2:
        return 1e-8
    d = np.diff(v)
    mad = np.median(np.abs(d - np.median(d)))
    sigma = MAD_SCALE * mad / math.sqrt(2.0)
    return max(3.0 * math.log(n) * sigma * sigma, 1e-8)


def detect_change_points(series: SpeedSeries, penalty: Optional[float] = None) -> list[int]:
    """Minimize total within-segment squared deviation plus a per-split
    penalty, exact over all partitions.

    Returns segment start indices, strictly increasing and exclusive of
    0 and len(series).  Pruned dynamic programming; candidates are only
    discarded when strictly worse than the incumbent by a safety margin,
    which preserves exact agreement with the unpruned program including
    tie-breaks (smallest last change point wins).
    """
    v = np.asarray(series.v, dtype=np.float64)
    n = len(v)
    if n < 2:
        raise SegmentationError("change-point detection requires at least 2 samples")
    beta = default_penalty(v) if penalty is None else float(penalty)
    if not beta > 0:
        raise SegmentationError("penalty must be positive")

    cs = np.concatenate(([0.0], np.cumsum(v)))
    cs2 = np.concatenate(([0.0], np.cumsum(v * v)))

    F = np.empty(n + 1)
    F[0] = -beta
    prev = np.zeros(n + 1, dtype=np.int64)
    cands = np.array([0], dtype=np.int64)
    for t in range(1, n + 1):
        length = t - cands
        s = cs[t] - cs[cands]
        cost = (cs2[t] - cs2[cands]) - s * s / length
        total = F[cands] + cost
        j = int(np.argmin(total))
        F[t] = total[j] + beta
        prev[t] = cands[j]
        margin = 1e-8 * (1.0 + abs(F[t]))
        keep = total <= F[t] + margin
        cands = np.append(cands[keep], t)

    bounds = []
    t = n
    while t > 0:
        bounds.append(int(prev[t]))
        t = int(prev[t])
    cps = sorted(b for b in bounds if b != 0)
    return cps


def segment_cost(v: np.ndarray, a: int, b: int) -> float:
    """Within-segment sum of squared deviations over v[a:b]."""
    seg = np.asarray(v[a:b], dtype=np.float64)
    s = seg.sum()
    return float((seg * seg).sum() - s * s / len(seg))


def classify_segments(
    series: SpeedSeries,
    change_points: Sequence[int],
    cfg: SegmentationConfig = SegmentationConfig(),
) -> list[Segment]:
    """Label each segment by its endpoint slope and carve out stopped
    stretches.

    mean_accel = (v_end - v_start) / dt with dt from the segment's frame
    extent.  Accelerations at or above the threshold give SpeedUp, at or
    below the negative threshold SlowDown, otherwise Maintain.  Frame
    runs where v stays at or below the stop threshold for at least
    stop_min_run frames override their labels to Stopped and split the
    enclosing segments.
    """
    v = series.v
    n = len(v)
    fps = series.fps
    bounds = [0, *sorted(int(c) for c in change_points), n]
    for a, b in zip(bounds, bounds[1:]):
        if not 0 <= a < b <= n:
            raise SegmentationError(f"invalid change point sequence {list(change_points)}")

    labels: list[Optional[str]] = [None] * n
    for a, b in zip(bounds, bounds[1:]):
        start, end = a, b - 1
        if end == start:
            raise SegmentationError(
                f"zero-duration segment at frame {start}; lower the split penalty resolution")
        dt = (end - start) / fps
        accel = (v[end] - v[start]) / dt
        if accel >= cfg.accel_threshold:
            lab = "SpeedUp"
        elif accel <= -cfg.accel_threshold:
            lab = "SlowDown"
        else:
            lab = "Maintain"
        for i in range(start, end + 1):
            labels[i] = lab

    min_run = cfg.stop_min_run if cfg.stop_min_run is not None else int(round(fps))
    min_run = max(1, min_run)
    stop_mask = v <= cfg.stop_threshold_mps
    i = 0
    while i < n:
        if stop_mask[i]:
            j = i
            while j < n and stop_mask[j]:
                j += 1
            if j - i >= min_run:
                for k in range(i, j):
                    labels[k] = "Stopped"
            i = j
        else:
            i += 1

    segments: list[Segment] = []
    start = 0
    for i in range(1, n + 1):
        if i == n or labels[i] != labels[start]:
            end = i - 1
            dt = (end - start) / fps
            accel = (v[end] - v[start]) / dt if dt > 0 else 0.0
            segments.append(Segment(
                start_frame=int(series.frames[start]),
                end_frame=int(series.frames[end]),
                mean_accel=float(accel),
                longitudinal=labels[start],
            ))
            start = i
    return segments


def segment_speed(
    series: SpeedSeries,
    cfg: SegmentationConfig = SegmentationConfig(),
) -> list[Segment]:
    """Convenience wrapper: change points then classification."""
    cps = detect_change_points(series, penalty=cfg.penalty)
    return classify_segments(series, cps, cfg)


def fuse_actions(segments: Sequence[Segment], lateral: Sequence[str]) -> list[str]:
    """Fuse longitudinal segments with per-frame lateral annotations into
    the six-way action vocabulary.

    Precedence per frame: u_turn or reverse excludes the frame, a
    stopped vehicle dominates any lateral annotation, a lateral maneuver
    combines with the longitudinal state (Lateral while maintaining,
    LatLon while accelerating or braking), otherwise the longitudinal
    label carries over.
    """
    if not segments:
        raise SegmentationError("no segments to fuse")
    segs = sorted(segments, key=lambda s: s.start_frame)
    first = segs[0].start_frame
    last = segs[-1].end_frame
    n = last - first + 1
    expected = first
    for s in segs:
        if s.start_frame != expected:
            raise SegmentationError(f"segments do not partition the frame range at {s.start_frame}")
        expected = s.end_frame + 1
    if len(lateral) != n:
        raise SegmentationError(
            f"lateral annotation length {len(lateral)} does not match frame range {n}")
    for lat in lateral:
        if lat not in LATERAL_CLASSES:
            raise SegmentationError(f"unknown lateral class {lat!r}")

    lon = [""] * n
    for s in segs:
        for i in range(s.start_frame - first, s.end_frame - first + 1):
            lon[i] = s.longitudinal
    return fuse_label_tracks(lon, lateral)


def fuse_label_tracks(longitudinal: Sequence[str], lateral: Sequence[str]) -> list[str]:
    """Per-frame fusion of a longitudinal label track with a lateral one.

    Same precedence as fuse_actions; accepts plain label sequences, which
    is what annotation documents expand to.
    """
    if len(longitudinal) != len(lateral):
        raise SegmentationError(
            f"longitudinal track length {len(longitudinal)} does not match "
            f"lateral track length {len(lateral)}")
    out = []
    for lon, lat in zip(longitudinal, lateral):
        if lon not in LONGITUDINAL_CATEGORIES:
            raise SegmentationError(f"unknown longitudinal category {lon!r}")
        if lat not in LATERAL_CLASSES:
            raise SegmentationError(f"unknown lateral class {lat!r}")
        if lat in ("u_turn", "reverse"):
            out.append("Excluded")
        elif lon == "Stopped":
            out.append("Stopped")
        elif lat in ("turn", "lane_change"):
            out.append("Lateral" if lon == "Maintain" else "LatLon")
        else:
            out.append(lon)
    return out


def fuse_annotation_doc(doc: AnnotationDoc) -> list[str]:
    """Expand an annotation document into its per-frame action labels.

    The longitudinal track must cover every frame; lateral gaps mean no
    maneuver.
    """
    lon = spans_to_frames(doc.longitudinal, doc.n_frames)
    for i, lab in enumerate(lon):
        if lab is None:
            raise SegmentationError(
                f"longitudinal annotation for {doc.video_id!r} leaves frame {i} unlabeled")
    lat = spans_to_frames(doc.lateral, doc.n_frames, fill="none")
    return fuse_label_tracks(lon, lat)


@dataclass(frozen=True)
class ActionStats:
    """Frame counts and percentages per action category.

    Percentages are over included frames only; excluded frames are
    reported separately.
    """

    counts: Mapping[str, int]
    percentages: Mapping[str, float]
    n_included: int
    n_excluded: int

    def rows(self) -> list[tuple[str, int, float]]:
        return [(c, self.counts[c], self.percentages[c]) for c in STAT_CATEGORIES]


def action_statistics(labels_per_video: Mapping[str, Sequence[str]]) -> ActionStats:
    """Aggregate per-frame action labels across videos into a percentage
    table.  Invariant under permutations of frames and videos."""
    counts: Counter = Counter()
    excluded = 0
    for vid, labels in labels_per_video.items():
        for lab in labels:
            if lab == "Excluded":
                excluded += 1
            elif lab in STAT_CATEGORIES:
                counts[lab] += 1
            else:
                raise SegmentationError(f"video {vid!r}: unknown action label {lab!r}")
    total = sum(counts.values())
    if total == 0:
        raise SegmentationError("no included frames; cannot compute action statistics")
    pct = {c: 100.0 * counts.get(c, 0) / total for c in STAT_CATEGORIES}
    return ActionStats(
        counts={c: counts.get(c, 0) for c in STAT_CATEGORIES},
        percentages=pct,
        n_included=total,
        n_excluded=excluded,
    )
