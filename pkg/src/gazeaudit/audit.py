"""Dataset completeness and quality audits.

Quantifies missing frames and their distribution over action
categories, flags exposure problems in video frames, sanity-checks
telemetry sampling, and summarizes gaze event composition.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from PIL import Image

from .errors import AuditError
from .model import GAZE_EVENTS, GazeSample, TelemetrySample


@dataclass(frozen=True)
class FrameGapReport:
    """Present/missing accounting over a declared frame span.

    segments are the maximal runs of consecutively present frames,
    inclusive bounds.  missing_fraction = missing / span, computed from
    the missing count directly so simple ratios come out exact.
    """

    first_frame: int
    last_frame: int
    n_present: int
    missing_fraction: float
    segments: tuple[tuple[int, int], ...]

    @property
    def span(self) -> int:
        return self.last_frame - self.first_frame + 1

    @property
    def segment_lengths(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in self.segments)

    @property
    def missing_frames(self) -> tuple[int, ...]:
        present = set()
        for a, b in self.segments:
            present.update(range(a, b + 1))
        return tuple(f for f in range(self.first_frame, self.last_frame + 1) if f not in present)


def detect_frame_gaps(frame_indices: Sequence[int]) -> FrameGapReport:
    """Account for missing frames between the first and last present
    index.  Input must be strictly increasing."""
    idx = np.asarray(frame_indices, dtype=np.int64)
    if idx.ndim != 1 or len(idx) == 0:
        raise AuditError("frame index list is empty")
    if len(idx) > 1 and np.any(np.diff(idx) <= 0):
        raise AuditError("frame indices must be strictly increasing and unique")
    first, last = int(idx[0]), int(idx[-1])
    span = last - first + 1
    segments = []
    start = int(idx[0])
    prev = start
    for f in idx[1:]:
        f = int(f)
        if f != prev + 1:
            segments.append((start, prev))
            start = f
        prev = f
    segments.append((start, prev))
    return FrameGapReport(
        first_frame=first,
        last_frame=last,
        n_present=len(idx),
        missing_fraction=(span - len(idx)) / span,
        segments=tuple(segments),
    )


def per_action_gap_fractions(
    report: FrameGapReport,
    labels: Sequence[Optional[str]],
) -> dict[str, float]:
    """Missing-frame fraction per action category.

    labels covers the declared span [first_frame, last_frame]; entries
    may be None at missing frames, in which case the nearest labeled
    frame's category is used, splitting boundary gaps at their midpoint
    (ties go to the earlier side).
    """
    span = report.span
    if len(labels) != span:
        raise AuditError(f"labels length {len(labels)} does not cover the span {span}")
    filled = _fill_nearest(list(labels))
    present = np.zeros(span, dtype=bool)
    for a, b in report.segments:
        present[a - report.first_frame:b - report.first_frame + 1] = True
    totals: Counter = Counter()
    missing: Counter = Counter()
    for i, lab in enumerate(filled):
        totals[lab] += 1
        if not present[i]:
            missing[lab] += 1
    return {lab: missing.get(lab, 0) / totals[lab] for lab in sorted(totals)}


def _fill_nearest(labels: list) -> list:
    n = len(labels)
    prev_known = [-1] * n
    next_known = [-1] * n
    last = -1
    for i in range(n):
        if labels[i] is not None:
            last = i
        prev_known[i] = last
    last = -1
    for i in range(n - 1, -1, -1):
        if labels[i] is not None:
            last = i
        next_known[i] = last
    out = []
    for i in range(n):
        p, q = prev_known[i], next_known[i]
        if p < 0 and q < 0:
            raise AuditError("labels are entirely unknown; nothing to interpolate from")
        if p < 0:
            out.append(labels[q])
        elif q < 0:
            out.append(labels[p])
        else:
            # Nearest labeled frame; the earlier side wins a tie, which
            # splits a two-sided gap at its midpoint.
            out.append(labels[p] if i - p <= q - i else labels[q])
    return out


@dataclass(frozen=True)
class ExposureThresholds:
    """A frame is overexposed when at least over_pixel_fraction of its
    pixels reach over_luma, or its mean reaches over_mean; underexposed
    when its mean is at most under_mean.  Luminance is 8-bit."""

    over_luma: float = 250.0
    over_pixel_fraction: float = 0.5
    over_mean: float = 240.0
    under_mean: float = 15.0


@dataclass(frozen=True)
class ExposureReport:
    n_frames: int
    overexposed: tuple[int, ...]
    underexposed: tuple[int, ...]
    unreadable: tuple[int, ...]

    @property
    def overexposed_fraction(self) -> float:
        return len(self.overexposed) / self.n_frames if self.n_frames else 0.0

    @property
    def underexposed_fraction(self) -> float:
        return len(self.underexposed) / self.n_frames if self.n_frames else 0.0


def _luminance(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        return arr.astype(np.float64)
    if arr.ndim == 3 and arr.shape[2] >= 3:
        rgb = arr[..., :3].astype(np.float64)
        return rgb @ np.array([0.299, 0.587, 0.114])
    raise AuditError(f"unsupported image shape {arr.shape}")


def exposure_audit(
    frames: Iterable[tuple[int, Union[np.ndarray, str, Path]]],
    thresholds: ExposureThresholds = ExposureThresholds(),
) -> ExposureReport:
    """Classify frames as overexposed or underexposed.

    frames yields (frame_index, image) where image is an array or a
    path.  Unreadable files are reported, not fatal.
    """
    over, under, bad = [], [], []
    n = 0
    for idx, image in frames:
        n += 1
        if isinstance(image, (str, Path)):
            try:
                with Image.open(image) as img:
                    arr = np.asarray(img)
            except Exception:
                bad.append(idx)
                continue
        else:
            arr = np.asarray(image)
        luma = _luminance(arr)
        mean = float(luma.mean())
        bright = float((luma >= thresholds.over_luma).mean())
        if bright >= thresholds.over_pixel_fraction or mean >= thresholds.over_mean:
            over.append(idx)
        elif mean <= thresholds.under_mean:
            under.append(idx)
    if n == 0:
        raise AuditError("no frames to audit")
    return ExposureReport(
        n_frames=n,
        overexposed=tuple(over),
        underexposed=tuple(under),
        unreadable=tuple(bad),
    )


@dataclass(frozen=True)
class TelemetryRateReport:
    """Observed sampling rate versus the declared one.

    rate_hz is the median of inverse timestamp deltas.  gaps lists
    (frame_before, frame_after, dt) where dt exceeded twice the declared
    interval.  low_confidence marks estimates from fewer than 3 samples.
    """

    rate_hz: float
    declared_rate_hz: float
    gaps: tuple[tuple[int, int, float], ...]
    low_confidence: bool


def validate_telemetry(
    samples: Sequence[TelemetrySample],
    declared_rate_hz: float,
) -> TelemetryRateReport:
    if len(samples) < 2:
        raise AuditError("telemetry rate estimation requires at least 2 samples")
    if declared_rate_hz <= 0:
        raise AuditError("declared rate must be positive")
    ts = np.asarray([s.t for s in samples], dtype=np.float64)
    dt = np.diff(ts)
    if np.any(dt <= 0):
        raise AuditError("telemetry timestamps must be strictly increasing")
    rate = float(np.median(1.0 / dt))
    limit = 2.0 / declared_rate_hz
    gaps = tuple(
        (samples[i].frame, samples[i + 1].frame, float(d))
        for i, d in enumerate(dt)
        if d > limit
    )
    return TelemetryRateReport(
        rate_hz=rate,
        declared_rate_hz=declared_rate_hz,
        gaps=gaps,
        low_confidence=len(samples) == 2,
    )


def gaze_composition(samples: Sequence[GazeSample]) -> dict[str, float]:
    """Fraction of samples per gaze event class; fractions sum to 1."""
    if not samples:
        raise AuditError("no gaze samples")
    counts = Counter(s.event for s in samples)
    total = len(samples)
    return {ev: counts.get(ev, 0) / total for ev in GAZE_EVENTS}
