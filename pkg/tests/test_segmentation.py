import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazeaudit import fixtures
from gazeaudit import segmentation as seg
from gazeaudit.errors import SegmentationError
from gazeaudit.model import Segment, SegmentationConfig, Span, SpeedSeries, TelemetrySample


def dp_optimal_partition(v: np.ndarray, beta: float) -> tuple[float, list[int]]:
    """Reference optimal-partitioning solver, written independently of the
    library: plain O(n^2) dynamic program over all previous boundaries,
    ties broken toward the smallest boundary index."""
    n = len(v)
    cs = np.concatenate(([0.0], np.cumsum(v)))
    cs2 = np.concatenate(([0.0], np.cumsum(v * v)))

    def cost(a: int, b: int) -> float:
        m = b - a
        s = cs[b] - cs[a]
        return (cs2[b] - cs2[a]) - s * s / m

    F = [0.0] * (n + 1)
    F[0] = -beta
    prev = [0] * (n + 1)
    for t in range(1, n + 1):
        best = None
        arg = 0
        for tau in range(t):
            c = F[tau] + cost(tau, t) + beta
        # smallest tau wins ties, so strict improvement is required
            if best is None or c < best:
                best = c
                arg = tau
        F[t] = best
        prev[t] = arg
    bounds = []
    t = n
    while t > 0:
        bounds.append(prev[t])
        t = prev[t]
    bounds = sorted(b for b in bounds if b != 0)
    return F[n], bounds


def _series(v, fps=10.0):
    return SpeedSeries(frames=np.arange(len(v)), v=np.asarray(v, dtype=float), fps=fps)


def test_change_points_match_reference_dp_on_random_series():
    rng = np.random.default_rng(11)
    for trial in range(30):
        n = int(rng.integers(20, 120))
        v = np.abs(rng.normal(8.0, 3.0, size=n).cumsum() / 10.0)
        beta = float(rng.uniform(0.05, 5.0))
        _, expected = dp_optimal_partition(v, beta)
        got = seg.detect_change_points(_series(v), penalty=beta)
        assert got == expected, f"trial {trial}: {got} != {expected}"


def test_change_points_on_constant_series_is_empty():
    assert seg.detect_change_points(_series([5.0] * 50), penalty=0.1) == []


def test_change_points_single_jump():
    v = [2.0] * 30 + [9.0] * 30
    assert seg.detect_change_points(_series(v), penalty=1.0) == [30]


def test_change_points_huge_penalty_means_no_splits():
    rng = np.random.default_rng(0)
    v = np.abs(rng.normal(10, 4, size=80))
    assert seg.detect_change_points(_series(v), penalty=1e9) == []


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_split_count_never_increases_with_penalty(seed):
    rng = np.random.default_rng(seed)
    v = np.abs(rng.normal(8.0, 2.0, size=60))
    series = _series(v)
    counts = [
        len(seg.detect_change_points(series, penalty=b))
        for b in (0.01, 0.1, 1.0, 10.0)
    ]
    assert counts == sorted(counts, reverse=True)


def test_default_penalty_scales_with_noise():
    rng = np.random.default_rng(3)
    quiet = np.full(200, 10.0) + rng.normal(0, 0.05, 200)
    loud = np.full(200, 10.0) + rng.normal(0, 1.0, 200)
    assert seg.default_penalty(loud) > seg.default_penalty(quiet)
    assert seg.default_penalty(np.full(10, 3.0)) == pytest.approx(1e-8)


# ---------------------------------------------------------------------------
# cleaning


def test_clean_speed_replaces_isolated_spike():
    raw_kmh = [36.0] * 20
    raw_kmh[10] = 360.0
    cfg = SegmentationConfig(median_window=5)
    series = seg.clean_speed(raw_kmh, fps=10.0, cfg=cfg)
    np.testing.assert_allclose(series.v, 10.0)


def test_clean_speed_keeps_small_steps():
    # 4 m/s stays under the 5 m/s outlier floor on a flat signal
    raw_kmh = [36.0] * 10 + [36.0 + 4 * 3.6] * 10
    cfg = SegmentationConfig(median_window=3)
    series = seg.clean_speed(raw_kmh, fps=10.0, cfg=cfg)
    assert series.v.max() == pytest.approx(14.0)
    assert series.v.min() == pytest.approx(10.0)


def test_clean_speed_clamps_negative_values():
    series = seg.clean_speed([-3.6, -3.6, -3.6], fps=10.0,
                             cfg=SegmentationConfig(median_window=1))
    assert (series.v >= 0).all()


def test_clean_speed_matches_naive_windowed_median():
    rng = np.random.default_rng(7)
    raw = np.abs(rng.normal(30, 8, size=40))
    w = 7
    series = seg.clean_speed(raw, fps=10.0, cfg=SegmentationConfig(median_window=w))

    v = raw / 3.6
    med = []
    for i in range(len(v)):
        lo = max(0, i - w // 2)
        hi = min(len(v), lo + w)
        lo = max(0, hi - w)
        med.append(np.median(v[lo:hi]))
    med = np.array(med)
    mad = []
    for i in range(len(v)):
        lo = max(0, i - w // 2)
        hi = min(len(v), lo + w)
        lo = max(0, hi - w)
        mad.append(np.median(np.abs(v[lo:hi] - med[i])))
    thr = np.maximum(3 * 1.4826 * np.array(mad), 5.0)
    replaced = np.where(np.abs(v - med) > thr, med, v)
    smoothed = []
    for i in range(len(v)):
        lo = max(0, i - w // 2)
        hi = min(len(v), lo + w)
        lo = max(0, hi - w)
        smoothed.append(np.median(replaced[lo:hi]))
    expected = np.maximum(np.array(smoothed), 0.0)
    np.testing.assert_allclose(series.v, expected, rtol=0, atol=1e-12)


def test_clean_speed_rejects_non_finite():
    with pytest.raises(SegmentationError, match="finite"):
        seg.clean_speed([1.0, float("nan")], fps=10.0)


def test_speed_series_from_telemetry_requires_contiguous_frames():
    samples = [
        TelemetrySample(frame=0, t=0.0, speed_kmh=30, lat=45, lon=7, heading_deg=0),
        TelemetrySample(frame=2, t=0.2, speed_kmh=30, lat=45, lon=7, heading_deg=0),
    ]
    with pytest.raises(SegmentationError, match="contiguous"):
        seg.speed_series_from_telemetry(samples, fps=10.0)


# ---------------------------------------------------------------------------
# classification


def test_classify_labels_by_endpoint_slope():
    # 1.0 m/s^2 up, flat, 0.5 m/s^2 down at fps=10
    v = np.concatenate([
        np.linspace(5.0, 7.0, 21),        # +1.0 over 2 s
        np.full(30, 7.0),
        np.linspace(7.0, 5.5, 31)[1:],    # -0.5 over 3 s
    ])
    series = _series(v, fps=10.0)
    cps = [21, 51]
    segments = seg.classify_segments(series, cps, SegmentationConfig())
    labels = [s.longitudinal for s in segments]
    assert labels == ["SpeedUp", "Maintain", "SlowDown"]


def test_classify_below_threshold_is_maintain():
    # 0.3 m/s^2 stays under the 0.4 threshold
    v = np.linspace(5.0, 5.0 + 0.3 * 2, 21)
    segments = seg.classify_segments(_series(v, fps=10.0), [], SegmentationConfig())
    assert [s.longitudinal for s in segments] == ["Maintain"]


def test_classify_zero_duration_segment_is_an_error():
    v = np.arange(10, dtype=float)
    with pytest.raises(SegmentationError, match="zero-duration"):
        seg.classify_segments(_series(v), [4, 5], SegmentationConfig())


def test_stop_override_requires_minimum_run():
    fps = 10.0
    thr = 1.0 / 3.6
    v = np.concatenate([np.full(20, 5.0), np.full(9, 0.0), np.full(20, 5.0)])
    cfg = SegmentationConfig()
    # 9 frames < round(fps) = 10: not a stop
    segments = seg.classify_segments(_series(v, fps), [20, 29], cfg)
    assert "Stopped" not in [s.longitudinal for s in segments]

    v = np.concatenate([np.full(20, 5.0), np.full(10, thr * 0.99), np.full(20, 5.0)])
    segments = seg.classify_segments(_series(v, fps), [20, 30], cfg)
    assert [s.longitudinal for s in segments].count("Stopped") == 1
    stopped = [s for s in segments if s.longitudinal == "Stopped"][0]
    assert (stopped.start_frame, stopped.end_frame) == (20, 29)


def test_stop_override_splits_segment_with_recomputed_slopes():
    fps = 10.0
    # one detected segment whose tail sits below the stop threshold
    v = np.concatenate([np.linspace(3.0, 0.0, 16), np.full(15, 0.0)])
    segments = seg.classify_segments(_series(v, fps), [], SegmentationConfig())
    labels = [s.longitudinal for s in segments]
    assert labels[-1] == "Stopped"
    assert segments[-1].end_frame == 30
    starts = [s.start_frame for s in segments]
    ends = [s.end_frame for s in segments]
    assert starts[0] == 0 and ends[-1] == 30
    assert all(s2 == e1 + 1 for e1, s2 in zip(ends, starts[1:]))


# ---------------------------------------------------------------------------
# fusion


def test_fuse_label_tracks_precedence_table():
    lon = ["Maintain", "SpeedUp", "SlowDown", "Stopped", "Maintain", "SpeedUp"]
    lat = ["none", "turn", "lane_change", "turn", "u_turn", "reverse"]
    fused = seg.fuse_label_tracks(lon, lat)
    assert fused == ["Maintain", "LatLon", "LatLon", "Stopped", "Excluded", "Excluded"]
    assert seg.fuse_label_tracks(["Maintain"], ["turn"]) == ["Lateral"]


def test_fuse_label_tracks_rejects_unknown_labels():
    with pytest.raises(SegmentationError, match="longitudinal"):
        seg.fuse_label_tracks(["Cruise"], ["none"])
    with pytest.raises(SegmentationError, match="lateral"):
        seg.fuse_label_tracks(["Maintain"], ["drift"])
    with pytest.raises(SegmentationError, match="length"):
        seg.fuse_label_tracks(["Maintain"], ["none", "none"])


def test_fuse_actions_requires_partition():
    segments = [
        Segment(start_frame=0, end_frame=4, mean_accel=0.0, longitudinal="Maintain"),
        Segment(start_frame=6, end_frame=9, mean_accel=0.0, longitudinal="Maintain"),
    ]
    with pytest.raises(SegmentationError, match="partition"):
        seg.fuse_actions(segments, ["none"] * 10)


def test_fuse_annotation_doc_requires_full_longitudinal_cover(demo):
    from gazeaudit.model import AnnotationDoc

    doc = AnnotationDoc(
        video_id="x", revision=0, n_frames=10,
        longitudinal=(Span(0, 5, "Maintain"),), lateral=(), context_events=(),
    )
    with pytest.raises(SegmentationError, match="frame 6"):
        seg.fuse_annotation_doc(doc)


# ---------------------------------------------------------------------------
# statistics


def test_action_statistics_counts_and_percentages():
    labels = {
        "a": ["Maintain"] * 6 + ["SpeedUp"] * 3 + ["Excluded"],
        "b": ["Stopped"] * 1,
    }
    stats = seg.action_statistics(labels)
    assert stats.n_included == 10 and stats.n_excluded == 1
    assert stats.counts["Maintain"] == 6
    assert stats.percentages["Maintain"] == pytest.approx(60.0)
    assert stats.percentages["SpeedUp"] == pytest.approx(30.0)
    assert stats.percentages["Stopped"] == pytest.approx(10.0)
    assert sum(stats.percentages.values()) == pytest.approx(100.0)


def test_action_statistics_is_order_invariant():
    rng = np.random.default_rng(5)
    labs = list(rng.choice(seg.STAT_CATEGORIES, size=50))
    a = seg.action_statistics({"v": labs})
    b = seg.action_statistics({"v": labs[::-1]})
    assert a.counts == b.counts and a.percentages == b.percentages


def test_action_statistics_needs_included_frames():
    with pytest.raises(SegmentationError, match="no included frames"):
        seg.action_statistics({"v": ["Excluded", "Excluded"]})


# ---------------------------------------------------------------------------
# planted profiles end to end


@pytest.mark.parametrize("parts,spans", [
    (fixtures.ACTION_FIXTURE_PARTS, fixtures.ACTION_FIXTURE_LATERAL_SPANS),
    (fixtures.V2_PARTS, fixtures.V2_LATERAL_SPANS),
])
def test_planted_profile_recovered_exactly(parts, spans):
    fps = fixtures.ACTION_FIXTURE_FPS
    v, truth = fixtures.planted_speed_profile(parts, fps)
    cfg = SegmentationConfig(median_window=1, penalty=fixtures.PLANTED_PENALTY)
    series = seg.clean_speed(v * 3.6, fps=fps, cfg=cfg)
    labels = []
    for s in seg.segment_speed(series, cfg):
        labels.extend([s.longitudinal] * s.n_frames)
    assert labels == truth


def test_planted_profile_rejects_odd_ramp():
    with pytest.raises(ValueError, match="even"):
        fixtures.planted_speed_profile(
            (fixtures.ProfilePart("maintain", 10, 5.0),
             fixtures.ProfilePart("ramp", 7, 8.0),
             fixtures.ProfilePart("maintain", 10, 8.0)),
            fps=10.0,
        )
