"""Saliency evaluation metrics and stratified benchmarking.

The four frame-level metrics follow the conventions of the saliency
literature: distribution-based KLD, CC, and SIM plus the location-based
NSS.  The stratification layer groups per-frame values by action label
and by intersection scenario windows and reports category means with
best/worst markers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateMapError, MetricError, ZeroMassError
from .model import ContextEvent, SaliencyMap, ScenarioWindow
from .salmap import spatial_gaussian_map

EPS = 1e-7

METRIC_NAMES = ("kld", "cc", "sim", "nss")

# Lower is better only for KLD.
LOWER_IS_BETTER = frozenset({"kld"})

ACTION_ORDER = ("SpeedUp", "SlowDown", "Lateral", "LatLon", "Maintain", "Stopped")

_PRIORITY_SHORT = {"right_of_way": "RoW", "yield": "Yield"}

MapLike = Union[SaliencyMap, np.ndarray]


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    degenerate: bool = False


def _values(m: MapLike) -> np.ndarray:
    if isinstance(m, SaliencyMap):
        return np.asarray(m.values, dtype=np.float64)
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise MetricError(f"metric inputs must be 2-D maps, got shape {a.shape}")
    return a


def _pair(pred: MapLike, gt: MapLike) -> tuple[np.ndarray, np.ndarray]:
    p = _values(pred)
    q = _values(gt)
    if p.shape != q.shape:
        raise MetricError(f"map dimensions differ: {p.shape} vs {q.shape}")
    return p, q


def _unit_mass(a: np.ndarray, role: str) -> np.ndarray:
    total = a.sum()
    if total <= 0.0:
        raise ZeroMassError(f"{role} map has zero total mass")
    return a / total


def kld(pred: MapLike, gt: MapLike, eps: float = EPS) -> MetricValue:
    """Kullback-Leibler divergence of the prediction from the ground
    truth: sum over pixels of Q * ln(Q / (P + eps) + eps) after both maps
    are normalized to unit mass.

    The eps regularization gives the self-divergence a small negative
    floor on the order of -(n_pixels * eps).
    """
    p, q = _pair(pred, gt)
    p = _unit_mass(p, "prediction")
    q = _unit_mass(q, "ground-truth")
    mask = q > 0
    value = float(np.sum(q[mask] * np.log(q[mask] / (p[mask] + eps) + eps)))
    return MetricValue("kld", value)


def cc(pred: MapLike, gt: MapLike) -> MetricValue:
    """Pearson correlation over flattened pixels.

    Undefined on constant input; such frames raise and are excluded from
    aggregation.
    """
    p, q = _pair(pred, gt)
    # Constancy must be tested on the raw values: centering first leaves
    # rounding noise that masks a genuinely constant map.
    if p.max() == p.min() or q.max() == q.min():
        raise DegenerateMapError("correlation undefined on constant map")
    pc = p - p.mean()
    qc = q - q.mean()
    denom = math.sqrt(float((pc * pc).sum()) * float((qc * qc).sum()))
    if denom == 0.0:
        raise DegenerateMapError("correlation undefined on constant map")
    value = float((pc * qc).sum()) / denom
    return MetricValue("cc", min(1.0, max(-1.0, value)))


def sim(pred: MapLike, gt: MapLike) -> MetricValue:
    """Histogram intersection of the unit-mass maps: sum of pixelwise
    minima, in [0, 1], symmetric, 1 iff the normalized maps coincide."""
    p, q = _pair(pred, gt)
    p = _unit_mass(p, "prediction")
    q = _unit_mass(q, "ground-truth")
    return MetricValue("sim", float(np.minimum(p, q).sum()))


def nss(pred: MapLike, fixations: Iterable) -> MetricValue:
    """Mean standardized prediction value at the fixation pixels.

    The prediction is z-scored over all pixels (population std).  A
    constant prediction has no contrast and scores 0, flagged degenerate.
    Fixation coordinates are rounded to pixels; at least one must fall
    inside the frame.
    """
    p = _values(pred)
    h, w = p.shape
    pixels = []
    for f in fixations:
        x, y = (f.x, f.y) if hasattr(f, "x") else (f[0], f[1])
        xi, yi = int(round(float(x))), int(round(float(y)))
        if 0 <= xi < w and 0 <= yi < h:
            pixels.append((yi, xi))
    if not pixels:
        raise MetricError("NSS requires at least one in-frame fixation")
    if p.max() == p.min():
        return MetricValue("nss", 0.0, degenerate=True)
    std = float(p.std())
    if std == 0.0:
        return MetricValue("nss", 0.0, degenerate=True)
    z = (p - p.mean()) / std
    value = float(np.mean([z[yi, xi] for yi, xi in pixels]))
    return MetricValue("nss", value)


def aggregate_heatmap(fixations: Sequence, size: tuple[int, int], sigma: float) -> SaliencyMap:
    """Pool fixations from many frames into one unit-mass heatmap, for
    coarse comparisons between recording conditions or scenario groups."""
    return spatial_gaussian_map(list(fixations), sigma=sigma, size=size)


# ---------------------------------------------------------------------------
# scenario windows


def build_scenario_windows(
    events: Sequence[ContextEvent],
    fps: float,
    n_frames: int,
    video_id: str,
) -> list[ScenarioWindow]:
    """Frame windows for intersection scenarios.

    Right-of-way events span the second before the crossing,
    [crossing - round(fps), crossing].  Yield events start at the
    annotated yield onset when present and fall back to the same
    one-second rule.  Windows clipped at the start of the video are
    flagged.  Events without a priority label are skipped.
    """
    if fps <= 0:
        raise MetricError("fps must be positive")
    windows: list[ScenarioWindow] = []
    for ev in events:
        if ev.priority is None:
            continue
        if not (0 <= ev.crossing_frame < n_frames):
            raise MetricError(
                f"crossing frame {ev.crossing_frame} outside video range [0, {n_frames - 1}]")
        if ev.priority == "yield" and ev.yield_onset_frame is not None:
            start = ev.yield_onset_frame
        else:
            start = ev.crossing_frame - int(round(fps))
        clipped = start < 0
        windows.append(ScenarioWindow(
            video_id=video_id,
            start_frame=max(0, start),
            end_frame=ev.crossing_frame,
            priority=ev.priority,
            intersection_type=ev.intersection_type,
            clipped=clipped,
        ))
    windows.sort(key=lambda w: (w.start_frame, w.end_frame, w.priority, w.intersection_type))
    return windows


def window_category(window: ScenarioWindow) -> str:
    return f"{_PRIORITY_SHORT[window.priority]}:{window.intersection_type}"


# ---------------------------------------------------------------------------
# stratified evaluation


@dataclass(frozen=True)
class FrameResult:
    """Metric outcomes for one evaluated frame.

    values holds finite metric values; metrics that were undefined or
    degenerate for the frame are simply absent.  degenerate marks frames
    with a constant or zero-mass prediction.
    """

    video_id: str
    frame: int
    action: str
    context_categories: tuple[str, ...]
    values: Mapping[str, float]
    degenerate: bool = False


@dataclass
class CategoryRow:
    group: str
    category: str
    n_frames: int
    means: dict[str, Optional[float]]
    valid_n: dict[str, int]
    degenerate_frames: int
    best_flags: list[str] = field(default_factory=list)
    worst_flags: list[str] = field(default_factory=list)


@dataclass
class StratifiedReport:
    rows: list[CategoryRow]
    overall: CategoryRow
    metrics: tuple[str, ...]

    CSV_HEADER = (
        "group,category,n_frames,kld,cc,sim,nss,degenerate_frames,best_flags,worst_flags"
    )

    def to_csv(self) -> str:
        def fmt(row: CategoryRow) -> str:
            cells = [row.group, row.category, str(row.n_frames)]
            for m in METRIC_NAMES:
                v = row.means.get(m)
                cells.append("" if v is None else repr(float(v)))
            cells.append(str(row.degenerate_frames))
            cells.append("|".join(row.best_flags))
            cells.append("|".join(row.worst_flags))
            return ",".join(cells)

        lines = [self.CSV_HEADER]
        lines.extend(fmt(r) for r in self.rows)
        lines.append(fmt(self.overall))
        return "\n".join(lines) + "\n"

    def row(self, group: str, category: str) -> CategoryRow:
        for r in self.rows:
            if r.group == group and r.category == category:
                return r
        raise KeyError(f"no row for {group}/{category}")


def evaluate_frame(
    pred: MapLike,
    gt: MapLike,
    fixations: Optional[Sequence] = None,
    metrics: Sequence[str] = METRIC_NAMES,
) -> tuple[dict[str, float], bool]:
    """Compute the requested metrics for one frame.

    Returns (values, degenerate).  A zero-mass prediction invalidates
    all metrics; a constant prediction invalidates cc and nss.  Both
    cases flag the frame degenerate.  nss is skipped when no fixations
    are supplied.
    """
    values: dict[str, float] = {}
    degenerate = False
    for m in metrics:
        if m not in METRIC_NAMES:
            raise MetricError(f"unknown metric {m!r}")
        try:
            if m == "kld":
                values[m] = kld(pred, gt).value
            elif m == "cc":
                values[m] = cc(pred, gt).value
            elif m == "sim":
                values[m] = sim(pred, gt).value
            elif m == "nss":
                if fixations:
                    mv = nss(pred, fixations)
                    if mv.degenerate:
                        degenerate = True
                    else:
                        values[m] = mv.value
        except DegenerateMapError:
            degenerate = True
        except ZeroMassError as e:
            if "ground-truth" in str(e):
                raise
            degenerate = True
    return values, degenerate


def stratified_eval(
    frame_results: Sequence[FrameResult],
    metrics: Sequence[str] = METRIC_NAMES,
) -> StratifiedReport:
    """Group per-frame metric values by action category and by scenario
    class and aggregate them into a report.

    Category means are simple means over the frames valid for each
    metric; the action rows partition the evaluated frames, so their
    frame-count-weighted means reproduce the overall row.  Frames inside
    several scenario windows contribute to each matching context row.
    """
    for m in metrics:
        if m not in METRIC_NAMES:
            raise MetricError(f"unknown metric {m!r}")
    metrics = tuple(metrics)

    def new_row(group: str, category: str) -> CategoryRow:
        return CategoryRow(
            group=group, category=category, n_frames=0,
            means={m: 0.0 for m in metrics},
            valid_n={m: 0 for m in metrics},
            degenerate_frames=0,
        )

    action_rows = {c: new_row("action", c) for c in ACTION_ORDER}
    context_rows: dict[str, CategoryRow] = {}
    overall = new_row("overall", "all")

    def accumulate(row: CategoryRow, res: FrameResult) -> None:
        row.n_frames += 1
        if res.degenerate:
            row.degenerate_frames += 1
        for m in metrics:
            if m in res.values:
                row.means[m] += res.values[m]
                row.valid_n[m] += 1

    for res in frame_results:
        if res.action == "Excluded":
            continue
        if res.action not in action_rows:
            raise MetricError(f"unknown action category {res.action!r}")
        accumulate(action_rows[res.action], res)
        accumulate(overall, res)
        for cat in res.context_categories:
            if cat not in context_rows:
                context_rows[cat] = new_row("context", cat)
            accumulate(context_rows[cat], res)

    if overall.n_frames == 0:
        raise MetricError("no evaluable frames")

    rows = [action_rows[c] for c in ACTION_ORDER]
    rows.extend(context_rows[c] for c in sorted(context_rows))
    for row in rows + [overall]:
        for m in metrics:
            row.means[m] = row.means[m] / row.valid_n[m] if row.valid_n[m] else None

    for fam_rows in (list(action_rows.values()), list(context_rows.values())):
        for m in metrics:
            scored = [(r.means[m], r) for r in fam_rows if r.means[m] is not None]
            if not scored:
                continue
            best = min(scored, key=lambda t: t[0]) if m in LOWER_IS_BETTER else max(scored, key=lambda t: t[0])
            worst = max(scored, key=lambda t: t[0]) if m in LOWER_IS_BETTER else min(scored, key=lambda t: t[0])
            best[1].best_flags.append(m)
            worst[1].worst_flags.append(m)

    return StratifiedReport(rows=rows, overall=overall, metrics=metrics)


def check_weighted_consistency(report: StratifiedReport, tol: float = 1e-9) -> None:
    """Verify that valid-count-weighted action-category means reproduce
    the overall mean for every metric."""
    for m in report.metrics:
        total_n = 0
        total_sum = 0.0
        for r in report.rows:
            if r.group != "action" or r.means.get(m) is None:
                continue
            total_sum += r.means[m] * r.valid_n[m]
            total_n += r.valid_n[m]
        if total_n == 0:
            continue
        overall = report.overall.means.get(m)
        if overall is None:
            raise MetricError(f"overall mean missing for metric {m}")
        if abs(total_sum / total_n - overall) > tol * max(1.0, abs(overall)):
            raise MetricError(
                f"weighted category means diverge from overall for {m}: "
                f"{total_sum / total_n} vs {overall}")
