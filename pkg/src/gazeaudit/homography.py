"""Planar projective estimation and gaze-projection error protocols.

Homographies map driver-view pixels to scene-view pixels.  Estimation
uses the normalized direct linear transform; the robust variant wraps
it in a seeded RANSAC loop.  The error protocols quantify how much the
estimated mappings scatter projected fixations, either between
synchronized view pairs or across a temporal frame window.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateGeometryError, ProjectionError, RobustFitError
from .model import _readonly

# Below this |w| a projected point is treated as at infinity.
W_EPS = 1e-12


@dataclass(frozen=True)
class Homography:
    """3x3 invertible plane-projective map in canonical scale.

    Canonical scale: h33 = 1 when |h33| is meaningful, otherwise unit
    Frobenius norm with a deterministic sign.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"homography matrix must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DegenerateGeometryError("homography matrix contains non-finite values")
        m = _canonical_scale(m)
        if abs(np.linalg.det(m)) < 1e-12:
            raise DegenerateGeometryError("homography matrix is singular")
        object.__setattr__(self, "matrix", _readonly(m))

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


def _canonical_scale(m: np.ndarray) -> np.ndarray:
    if abs(m[2, 2]) > 1e-12:
        return m / m[2, 2]
    m = m / np.linalg.norm(m)
    idx = np.unravel_index(int(np.argmax(np.abs(m))), m.shape)
    if m[idx] < 0:
        m = -m
    return m


def project_point(h: Homography, p: Sequence[float]) -> tuple[float, float]:
    x, y = float(p[0]), float(p[1])
    m = h.matrix
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) < W_EPS:
        raise ProjectionError(f"point ({x}, {y}) maps to infinity")
    u = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w
    v = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w
    return u, v


def project_points(h: Homography, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    m = h.matrix
    w = pts @ m[2, :2] + m[2, 2]
    if np.any(np.abs(w) < W_EPS):
        raise ProjectionError("point maps to infinity")
    u = (pts @ m[0, :2] + m[0, 2]) / w
    v = (pts @ m[1, :2] + m[1, 2]) / w
    return np.stack([u, v], axis=1)


def reprojection_errors(h: Homography, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Euclidean distances |H(src) - dst| with inf where src maps to
    infinity."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    m = h.matrix
    w = src @ m[2, :2] + m[2, 2]
    out = np.full(len(src), np.inf)
    ok = np.abs(w) >= W_EPS
    u = (src[ok] @ m[0, :2] + m[0, 2]) / w[ok]
    v = (src[ok] @ m[1, :2] + m[1, 2]) / w[ok]
    out[ok] = np.hypot(u - dst[ok, 0], v - dst[ok, 1])
    return out


def _check_correspondences(src, dst, min_n: int = 4) -> tuple[np.ndarray, np.ndarray]:
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 2 or src.shape != dst.shape:
        raise DegenerateGeometryError(
            f"correspondences must be matching (N, 2) arrays, got {src.shape} and {dst.shape}")
    if len(src) < min_n:
        raise DegenerateGeometryError(f"need at least {min_n} correspondences, got {len(src)}")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise DegenerateGeometryError("correspondences contain non-finite coordinates")
    return src, dst


def _normalize_points(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Hartley normalization: centroid at origin, mean distance sqrt(2).
    centroid = pts.mean(axis=0)
    shifted = pts - centroid
    mean_dist = np.sqrt((shifted ** 2).sum(axis=1)).mean()
    if mean_dist < 1e-12:
        raise DegenerateGeometryError("correspondence points are coincident")
    s = math.sqrt(2.0) / mean_dist
    T = np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    return shifted * s, T


def estimate_homography_dlt(src, dst) -> Homography:
    """Normalized direct linear transform from >= 4 correspondences.

    Raises DegenerateGeometryError when the configuration does not
    determine a homography (for example four collinear points).
    """
    src, dst = _check_correspondences(src, dst)
    sn, Ts = _normalize_points(src)
    dn, Td = _normalize_points(dst)
    n = len(sn)
    A = np.zeros((2 * n, 9))
    x, y = sn[:, 0], sn[:, 1]
    u, v = dn[:, 0], dn[:, 1]
    A[0::2, 0] = -x
    A[0::2, 1] = -y
    A[0::2, 2] = -1.0
    A[0::2, 6] = u * x
    A[0::2, 7] = u * y
    A[0::2, 8] = u
    A[1::2, 3] = -x
    A[1::2, 4] = -y
    A[1::2, 5] = -1.0
    A[1::2, 6] = v * x
    A[1::2, 7] = v * y
    A[1::2, 8] = v
    _, s, vt = np.linalg.svd(A)
    # A homography is determined only when A has rank 8 (a 1-D null
    # space); rank deficiency means a degenerate configuration.
    if s[7] <= s[0] * 1e-10:
        raise DegenerateGeometryError(
            f"degenerate point configuration: design matrix rank {int((s > s[0] * 1e-10).sum())} < 8")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    return Homography(H)


def estimate_homography_robust(
    src,
    dst,
    inlier_threshold: float = 3.0,
    max_iters: int = 1000,
    confidence: float = 0.999,
    seed: int = 0,
) -> tuple[Homography, np.ndarray]:
    """Seeded RANSAC around the 4-point DLT.

    Consensus is reprojection distance <= inlier_threshold.  The best
    model is re-fit on its consensus set and the returned mask is the
    consensus of that re-fit.  Fully deterministic for a given seed.
    """
    src, dst = _check_correspondences(src, dst)
    n = len(src)
    rng = np.random.default_rng(seed)
    best_mask: Optional[np.ndarray] = None
    best_count = -1
    best_err = math.inf
    needed = max_iters
    it = 0
    while it < needed:
        it += 1
        idx = rng.choice(n, size=4, replace=False)
        try:
            cand = estimate_homography_dlt(src[idx], dst[idx])
        except DegenerateGeometryError:
            continue
        err = reprojection_errors(cand, src, dst)
        mask = err <= inlier_threshold
        count = int(mask.sum())
        mean_err = float(err[mask].mean()) if count else math.inf
        if count > best_count or (count == best_count and mean_err < best_err):
            best_mask = mask
            best_count = count
            best_err = mean_err
            w = count / n
            if w >= 1.0:
                needed = it
            elif w > 0.0:
                denom = math.log(max(1.0 - w ** 4, 1e-300))
                required = math.ceil(math.log(max(1.0 - confidence, 1e-300)) / denom)
                needed = min(max_iters, max(required, 1))
    if best_mask is None or best_count < 4:
        raise RobustFitError(
            f"no consensus set with at least 4 inliers at threshold {inlier_threshold}")
    refit = estimate_homography_dlt(src[best_mask], dst[best_mask])
    final_err = reprojection_errors(refit, src, dst)
    final_mask = final_err <= inlier_threshold
    if int(final_mask.sum()) < 4:
        raise RobustFitError("re-fit model lost its consensus set")
    return refit, final_mask


# ---------------------------------------------------------------------------
# error protocols


@dataclass(frozen=True)
class FramePair:
    """One synchronized driver/scene frame pair with correspondences and
    a reference fixation in both views."""

    pair_id: str
    src_pts: np.ndarray
    dst_pts: np.ndarray
    ref_src: tuple[float, float]
    ref_dst: tuple[float, float]
    video_id: str = ""


@dataclass(frozen=True)
class TemporalPair:
    """Correspondences from frame key+offset back to the key frame plus
    a probe point in the offset frame."""

    key_id: str
    offset: int
    src_pts: np.ndarray
    dst_pts: np.ndarray
    probe: tuple[float, float]


@dataclass(frozen=True)
class ErrorReport:
    """Projection-error summary.

    errors holds every per-run distance that was measured; eccentricity
    bins are (lo, hi, median) over normalized horizontal offset of the
    reference fixation; per_offset_medians is present for the temporal
    protocol only.
    """

    errors: np.ndarray
    median_px: float
    frac_gt100: float
    frac_gt200: float
    ecc_bin_medians: Optional[tuple[tuple[float, float, Optional[float]], ...]] = None
    per_offset_medians: Optional[tuple[tuple[int, float], ...]] = None
    n_failed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "errors", _readonly(np.asarray(self.errors, dtype=np.float64)))

    def offset_median(self, offset: int) -> float:
        for off, med in self.per_offset_medians or ():
            if off == offset:
                return med
        raise KeyError(f"no errors recorded for offset {offset}")


def _pair_rng(seed: int, key: str) -> np.random.Generator:
    # Stable per-item stream regardless of evaluation order.
    return np.random.default_rng([seed, zlib.crc32(key.encode("utf-8"))])


def _subset_size(n: int) -> int:
    # Half the correspondences, never fewer than 8, capped at n.
    return min(n, max(8, n // 2))


def _run_errors_for_pair(
    pair: FramePair,
    runs: int,
    rng: np.random.Generator,
    method: str,
    inlier_threshold: float,
) -> tuple[list[float], int]:
    src, dst = _check_correspondences(pair.src_pts, pair.dst_pts)
    n = len(src)
    k = _subset_size(n)
    errors = []
    failed = 0
    for run in range(runs):
        idx = rng.choice(n, size=k, replace=False)
        try:
            if method == "ransac":
                h, _ = estimate_homography_robust(
                    src[idx], dst[idx], inlier_threshold=inlier_threshold,
                    seed=int(rng.integers(0, 2 ** 31)))
            else:
                h = estimate_homography_dlt(src[idx], dst[idx])
            u, v = project_point(h, pair.ref_src)
        except (DegenerateGeometryError, RobustFitError, ProjectionError):
            failed += 1
            continue
        errors.append(math.hypot(u - pair.ref_dst[0], v - pair.ref_dst[1]))
    return errors, failed


ECC_BIN_EDGES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def sd_error_protocol(
    frame_pairs: Sequence[FramePair],
    image_width: int,
    runs: int = 10,
    pairs_per_video: int = 1000,
    seed: int = 0,
    method: str = "dlt",
    inlier_threshold: float = 3.0,
) -> ErrorReport:
    """Scene/driver projection-error protocol.

    For every sampled pair the homography is re-estimated `runs` times
    on random half subsets of the correspondences and the reference
    fixation is projected; the error is the Euclidean pixel distance to
    the reference fixation in the destination view.  Reports the overall
    median, heavy-tail fractions above 100 and 200 px, and medians per
    horizontal-eccentricity bin.
    """
    if not frame_pairs:
        raise DegenerateGeometryError("no frame pairs supplied")
    if method not in ("dlt", "ransac"):
        raise ValueError(f"unknown estimation method {method!r}")
    if image_width <= 0:
        raise ValueError("image_width must be positive")

    by_video: dict[str, list[FramePair]] = {}
    for p in frame_pairs:
        by_video.setdefault(p.video_id, []).append(p)
    selected: list[FramePair] = []
    for vid in sorted(by_video):
        group = by_video[vid]
        if len(group) > pairs_per_video:
            rng = _pair_rng(seed, f"select|{vid}")
            keep = rng.choice(len(group), size=pairs_per_video, replace=False)
            group = [group[i] for i in sorted(keep)]
        selected.extend(group)

    all_errors: list[float] = []
    bin_errors: list[list[float]] = [[] for _ in range(len(ECC_BIN_EDGES) - 1)]
    failed = 0
    half_w = image_width / 2.0
    for pair in selected:
        rng = _pair_rng(seed, f"pair|{pair.video_id}|{pair.pair_id}")
        errs, nf = _run_errors_for_pair(pair, runs, rng, method, inlier_threshold)
        failed += nf
        if not errs:
            continue
        ecc = abs(pair.ref_dst[0] - half_w) / half_w
        b = min(int(ecc / 0.2), len(bin_errors) - 1) if ecc >= 0 else 0
        bin_errors[b].extend(errs)
        all_errors.extend(errs)
    if not all_errors:
        raise DegenerateGeometryError("every estimation run failed; no errors to report")

    e = np.asarray(all_errors)
    bins = tuple(
        (ECC_BIN_EDGES[i], ECC_BIN_EDGES[i + 1],
         float(np.median(bin_errors[i])) if bin_errors[i] else None)
        for i in range(len(bin_errors))
    )
    return ErrorReport(
        errors=e,
        median_px=float(np.median(e)),
        frac_gt100=float((e > 100.0).mean()),
        frac_gt200=float((e > 200.0).mean()),
        ecc_bin_medians=bins,
        n_failed=failed,
    )


def temporal_window_error(
    samples: Sequence[TemporalPair],
    runs: int = 10,
    seed: int = 0,
    method: str = "dlt",
    inlier_threshold: float = 3.0,
) -> ErrorReport:
    """Projection scatter across a temporal window.

    For each (key frame, offset) the probe point is projected `runs`
    times from re-estimated homographies; the reference is the mean of
    those projections and each run's error is its distance to that mean.
    Reports the median per offset plus the pooled summary.
    """
    if not samples:
        raise DegenerateGeometryError("no temporal samples supplied")
    if method not in ("dlt", "ransac"):
        raise ValueError(f"unknown estimation method {method!r}")

    per_offset: dict[int, list[float]] = {}
    all_errors: list[float] = []
    failed = 0
    for sample in samples:
        src, dst = _check_correspondences(sample.src_pts, sample.dst_pts)
        n = len(src)
        k = _subset_size(n)
        rng = _pair_rng(seed, f"temporal|{sample.key_id}|{sample.offset}")
        projections = []
        for run in range(runs):
            idx = rng.choice(n, size=k, replace=False)
            try:
                if method == "ransac":
                    h, _ = estimate_homography_robust(
                        src[idx], dst[idx], inlier_threshold=inlier_threshold,
                        seed=int(rng.integers(0, 2 ** 31)))
                else:
                    h = estimate_homography_dlt(src[idx], dst[idx])
                projections.append(project_point(h, sample.probe))
            except (DegenerateGeometryError, RobustFitError, ProjectionError):
                failed += 1
        if not projections:
            continue
        pts = np.asarray(projections)
        ref = pts.mean(axis=0)
        errs = np.hypot(pts[:, 0] - ref[0], pts[:, 1] - ref[1])
        per_offset.setdefault(sample.offset, []).extend(errs.tolist())
        all_errors.extend(errs.tolist())
    if not all_errors:
        raise DegenerateGeometryError("every estimation run failed; no errors to report")

    e = np.asarray(all_errors)
    offsets = tuple(
        (off, float(np.median(np.asarray(per_offset[off]))))
        for off in sorted(per_offset)
    )
    return ErrorReport(
        errors=e,
        median_px=float(np.median(e)),
        frac_gt100=float((e > 100.0).mean()),
        frac_gt200=float((e > 200.0).mean()),
        per_offset_medians=offsets,
        n_failed=failed,
    )
