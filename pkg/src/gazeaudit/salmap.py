"""Ground-truth saliency map synthesis.

Three recipes cover the conventions found across driver-attention
datasets: multi-observer temporal smoothing (sum-combined, unit mass),
temporal-window remapping (max-combined, unit peak), and a single wide
Gaussian per frame (unit mass).  All recipes build on truncated
isotropic Gaussians evaluated on the pixel grid.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ZeroMassError
from .homography import Homography, project_point
from .model import GAZE_EVENTS, POSITIONAL_EVENTS, Fixation, GazeSample, SaliencyMap

# Gaussian support is truncated at this many standard deviations; the
# tail beyond it is below 3.4e-4 of the peak.
TRUNC_SIGMAS = 4.0

DEFAULT_DROP_EVENTS = frozenset({"saccade", "blink", "in_vehicle"})


def filter_gaze(
    samples: Sequence[GazeSample],
    drop: frozenset = DEFAULT_DROP_EVENTS,
) -> tuple[list[Fixation], dict[str, float]]:
    """Keep fixation-type samples whose event class is not dropped.

    Only events that carry a stable position (fixation, in_vehicle,
    offscreen) can become fixations; saccades and blinks never do.
    Returns the retained fixations plus the per-class composition of the
    full input stream.
    """
    unknown = set(drop) - set(GAZE_EVENTS)
    if unknown:
        raise ValueError(f"unknown gaze event class(es) in drop set: {sorted(unknown)}")
    counts = Counter(s.event for s in samples)
    total = sum(counts.values())
    composition = {ev: (counts.get(ev, 0) / total if total else 0.0) for ev in GAZE_EVENTS}
    fixations = [
        Fixation(frame=s.frame, x=s.x, y=s.y)
        for s in samples
        if s.event in POSITIONAL_EVENTS and s.event not in drop
    ]
    return fixations, composition


def detect_fixations_idt(
    t_sec: Sequence[float],
    x: Sequence[float],
    y: Sequence[float],
    dispersion_threshold_px: float,
    min_duration_ms: float,
    fps: float,
) -> list[Fixation]:
    """Dispersion-threshold fixation detection on raw gaze points.

    A window is a fixation when (max-min x) + (max-min y) stays at or
    below the threshold for at least min_duration_ms; it is then grown
    maximally and reduced to its centroid.  The fixation frame is the
    video frame nearest the window's temporal midpoint.
    """
    t = np.asarray(t_sec, dtype=np.float64)
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if not (len(t) == len(xs) == len(ys)):
        raise ValueError("t, x, y must be equally long")
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    if dispersion_threshold_px < 0 or min_duration_ms <= 0 or fps <= 0:
        raise ValueError("thresholds and fps must be positive")

    min_dur = min_duration_ms / 1000.0
    out: list[Fixation] = []
    n = len(t)
    i = 0
    while i < n:
        # Smallest window starting at i that spans the minimum duration.
        j = i
        while j < n and t[j] - t[i] < min_dur:
            j += 1
        if j >= n:
            break
        window = slice(i, j + 1)
        if _dispersion(xs[window], ys[window]) <= dispersion_threshold_px:
            while j + 1 < n and _dispersion(xs[i:j + 2], ys[i:j + 2]) <= dispersion_threshold_px:
                j += 1
            mid = (t[i] + t[j]) / 2.0
            out.append(Fixation(
                frame=int(round(mid * fps)),
                x=float(xs[i:j + 1].mean()),
                y=float(ys[i:j + 1].mean()),
                duration_ms=float((t[j] - t[i]) * 1000.0),
            ))
            i = j + 1
        else:
            i += 1
    return out


def _dispersion(xs: np.ndarray, ys: np.ndarray) -> float:
    return float((xs.max() - xs.min()) + (ys.max() - ys.min()))


def _splat(
    acc: np.ndarray,
    fx: float,
    fy: float,
    sigma: float,
    weight: float = 1.0,
    combine: str = "sum",
) -> None:
    """Add (or max-combine) one truncated Gaussian into the accumulator."""
    h, w = acc.shape
    r = TRUNC_SIGMAS * sigma
    x0 = max(0, int(math.ceil(fx - r)))
    x1 = min(w - 1, int(math.floor(fx + r)))
    y0 = max(0, int(math.ceil(fy - r)))
    y1 = min(h - 1, int(math.floor(fy + r)))
    if x1 < x0 or y1 < y0:
        return
    gx = np.arange(x0, x1 + 1, dtype=np.float64) - fx
    gy = np.arange(y0, y1 + 1, dtype=np.float64) - fy
    patch = weight * np.exp(-(gx[None, :] ** 2 + gy[:, None] ** 2) / (2.0 * sigma * sigma))
    if combine == "sum":
        acc[y0:y1 + 1, x0:x1 + 1] += patch
    else:
        np.maximum(acc[y0:y1 + 1, x0:x1 + 1], patch, out=acc[y0:y1 + 1, x0:x1 + 1])


def spatial_gaussian_map(
    fixations: Sequence[Fixation],
    sigma: float,
    size: tuple[int, int],
) -> SaliencyMap:
    """Superpose isotropic Gaussians at the fixation positions and
    normalize to unit mass.  size is (width, height)."""
    if not fixations:
        raise ZeroMassError("no fixations to place")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    w, h = size
    acc = np.zeros((h, w))
    for f in fixations:
        _splat(acc, f.x, f.y, sigma)
    total = acc.sum()
    if total <= 0.0:
        raise ZeroMassError("all fixations fall outside the frame")
    return SaliencyMap(acc / total)


def multi_observer_maps(
    fixations: Sequence[Fixation],
    n_frames: int,
    size: tuple[int, int],
    sigma_px: float = 25.0,
    sigma_frames: float = 4.0,
    normalize: bool = True,
    on_empty: str = "error",
) -> list[Optional[SaliencyMap]]:
    """Per-frame attention maps from pooled multi-observer fixations.

    Every fixation at frame f contributes to frame m with temporal
    weight exp(-(f-m)^2 / (2 sigma_frames^2)); contributions are
    sum-combined spatially with sigma_px and each frame is normalized to
    unit mass.  With normalize=False the raw superposition is returned,
    which exposes the temporal weighting directly.

    on_empty: "error" raises on frames with zero total mass, "skip"
    returns None for them.
    """
    if n_frames <= 0:
        raise ValueError("n_frames must be positive")
    if sigma_px <= 0 or sigma_frames <= 0:
        raise ValueError("sigmas must be positive")
    if on_empty not in ("error", "skip"):
        raise ValueError(f"unknown on_empty policy {on_empty!r}")
    w, h = size
    reach = int(math.ceil(TRUNC_SIGMAS * sigma_frames))
    by_frame: dict[int, list[Fixation]] = {}
    for f in fixations:
        by_frame.setdefault(f.frame, []).append(f)

    maps: list[Optional[SaliencyMap]] = []
    empty_frames = []
    for m in range(n_frames):
        acc = np.zeros((h, w))
        for f_frame in range(m - reach, m + reach + 1):
            group = by_frame.get(f_frame)
            if not group:
                continue
            d = f_frame - m
            weight = math.exp(-(d * d) / (2.0 * sigma_frames * sigma_frames))
            for fx in group:
                _splat(acc, fx.x, fx.y, sigma_px, weight=weight)
        total = acc.sum()
        if total <= 0.0:
            empty_frames.append(m)
            maps.append(None)
            continue
        maps.append(SaliencyMap(acc / total if normalize else acc))
    if empty_frames and on_empty == "error":
        raise ZeroMassError(
            f"{len(empty_frames)} frame(s) with zero attention mass, first at {empty_frames[0]}")
    return maps


def temporal_window_map(
    fixations: Sequence[Fixation],
    size: tuple[int, int],
    sigma: float,
    homographies: Optional[Mapping[int, Homography]] = None,
) -> SaliencyMap:
    """Max-combined map over fixations remapped into the key frame.

    Each fixation is moved by the homography registered for its source
    frame (identity when absent), splatted as a Gaussian, and the map is
    the pixelwise maximum of all splats, normalized to unit peak.
    """
    if not fixations:
        raise ZeroMassError("empty fixation window")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    w, h = size
    acc = np.zeros((h, w))
    for f in fixations:
        hg = (homographies or {}).get(f.frame)
        if hg is None:
            fx, fy = f.x, f.y
        else:
            fx, fy = project_point(hg, (f.x, f.y))
        _splat(acc, fx, fy, sigma, combine="max")
    peak = acc.max()
    if peak <= 0.0:
        raise ZeroMassError("all remapped fixations fall outside the frame")
    return SaliencyMap(acc / peak)


def single_fixation_map(
    fixation: Fixation,
    size: tuple[int, int],
    sigma: float = 60.0,
    off_frame: str = "clamp",
) -> SaliencyMap:
    """One wide Gaussian at the fixation, normalized to unit mass.

    Off-frame fixations are clamped to the nearest edge pixel by
    default; pass off_frame="reject" to raise instead.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if off_frame not in ("clamp", "reject"):
        raise ValueError(f"unknown off-frame policy {off_frame!r}")
    w, h = size
    fx, fy = fixation.x, fixation.y
    outside = not (0 <= fx <= w - 1 and 0 <= fy <= h - 1)
    if outside:
        if off_frame == "reject":
            raise ZeroMassError(f"fixation ({fx}, {fy}) outside {w}x{h} frame")
        fx = min(max(fx, 0.0), float(w - 1))
        fy = min(max(fy, 0.0), float(h - 1))
    acc = np.zeros((h, w))
    _splat(acc, fx, fy, sigma)
    total = acc.sum()
    if total <= 0.0:
        raise ZeroMassError("fixation mass vanished after truncation")
    return SaliencyMap(acc / total)
