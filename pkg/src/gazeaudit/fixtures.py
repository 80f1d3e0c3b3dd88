"""Deterministic synthetic fixtures.

Builds a small two-road demo dataset with planted speed profiles,
lateral maneuvers, gaze streams, context events, frame images,
predictions, and an OSM extract whose junctions lie on the recorded
GPS track.  Everything is seeded and reproducible byte for byte, and
every planted quantity is exposed so tests can count against ground
truth instead of against the pipeline under test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from . import formats
from .context import EARTH_RADIUS_M
from .model import (
    AnnotationDoc,
    ContextEvent,
    DatasetManifest,
    GazeSample,
    SaliencyMap,
    Span,
    TelemetrySample,
    VideoEntry,
    frames_to_spans,
)

# ---------------------------------------------------------------------------
# planted speed profiles


@dataclass(frozen=True)
class ProfilePart:
    """One building block of a planted speed profile.

    maintain emits n_frames at exactly target_mps.  ramp emits n_frames
    strictly between the previous level and target_mps (endpoints
    exclusive), so plateau junctions stay sharp; a ramp must be followed
    by a maintain at its target.  n_frames of a ramp must be even, which
    keeps the optimal least-squares partition of the ramp staircase on
    two-frame pieces with boundaries exactly at the junctions.
    """

    kind: str
    n_frames: int
    target_mps: float


def planted_speed_profile(
    parts: Sequence[ProfilePart],
    fps: float,
    stop_threshold_mps: float = 1.0 / 3.6,
    stop_min_run: Optional[int] = None,
) -> tuple[np.ndarray, list[str]]:
    """Expand profile parts into per-frame speeds and true labels.

    Labels are Maintain/SpeedUp/SlowDown by construction, then frame
    runs at or below the stop threshold lasting at least stop_min_run
    frames (default one second) become Stopped.
    """
    if not parts or parts[0].kind != "maintain":
        raise ValueError("profile must start with a maintain part")
    min_run = int(round(fps)) if stop_min_run is None else stop_min_run
    v: list[float] = []
    labels: list[str] = []
    cursor = parts[0].target_mps
    for i, part in enumerate(parts):
        if part.kind == "maintain":
            if abs(part.target_mps - cursor) > 0 and i > 0 and parts[i - 1].kind == "maintain":
                raise ValueError("consecutive maintain parts must share a level")
            v.extend([part.target_mps] * part.n_frames)
            labels.extend(["Maintain"] * part.n_frames)
            cursor = part.target_mps
        elif part.kind == "ramp":
            if part.n_frames % 2 != 0:
                raise ValueError("ramp n_frames must be even")
            if i + 1 >= len(parts) or parts[i + 1].kind != "maintain" \
                    or parts[i + 1].target_mps != part.target_mps:
                raise ValueError("a ramp must be followed by a maintain at its target")
            delta = (part.target_mps - cursor) / (part.n_frames + 1)
            lab = "SpeedUp" if delta > 0 else "SlowDown"
            for k in range(1, part.n_frames + 1):
                v.append(cursor + k * delta)
                labels.append(lab)
            cursor = part.target_mps
        else:
            raise ValueError(f"unknown part kind {part.kind!r}")
    arr = np.asarray(v)

    stop = arr <= stop_threshold_mps
    i = 0
    n = len(arr)
    while i < n:
        if stop[i]:
            j = i
            while j < n and stop[j]:
                j += 1
            if j - i >= min_run:
                for k in range(i, j):
                    labels[k] = "Stopped"
            i = j
        else:
            i += 1
    return arr, labels


def fuse_planted_labels(longitudinal: Sequence[str], lateral: Sequence[str]) -> list[str]:
    """Apply the documented fusion precedence to planted label tracks."""
    out = []
    for lon, lat in zip(longitudinal, lateral):
        if lat in ("u_turn", "reverse"):
            out.append("Excluded")
        elif lon == "Stopped":
            out.append("Stopped")
        elif lat in ("turn", "lane_change"):
            out.append("Lateral" if lon == "Maintain" else "LatLon")
        else:
            out.append(lon)
    return out


# A split penalty compatible with every planted ramp step (delta around
# 0.08 m/s per frame).  It must exceed delta^2/2 or single-frame
# segments appear inside ramps, and must stay below about 1.48*delta^2
# or the optimizer absorbs each ramp's edge frames into the neighboring
# plateaus to save one split.
PLANTED_PENALTY = 0.006

ACTION_FIXTURE_FPS = 25.0

ACTION_FIXTURE_PARTS = (
    ProfilePart("maintain", 100, 8.0),
    ProfilePart("ramp", 74, 14.0),
    ProfilePart("maintain", 100, 14.0),
    ProfilePart("ramp", 74, 8.0),
    ProfilePart("maintain", 50, 8.0),
    ProfilePart("ramp", 100, 0.0),
    ProfilePart("maintain", 60, 0.0),
    ProfilePart("ramp", 74, 6.0),
    ProfilePart("maintain", 68, 6.0),
)

ACTION_FIXTURE_LATERAL_SPANS = (
    Span(120, 139, "lane_change"),
    Span(200, 239, "turn"),
    Span(510, 529, "turn"),
    Span(650, 669, "u_turn"),
)

V2_PARTS = (
    ProfilePart("maintain", 150, 7.0),
    ProfilePart("ramp", 74, 13.0),
    ProfilePart("maintain", 100, 13.0),
    ProfilePart("ramp", 74, 7.0),
    ProfilePart("maintain", 102, 7.0),
)

V2_LATERAL_SPANS = (
    Span(350, 369, "turn"),
    Span(480, 489, "u_turn"),
)

V2_TELEMETRY_GAPS = ((60, 79), (180, 199))

V2_OVEREXPOSED_FRAMES = (10, 11, 12)
V2_UNDEREXPOSED_FRAMES = (20, 21)

V1_CONTEXT_EVENTS = (
    ContextEvent(crossing_frame=80, intersection_type="unsignalized", priority="right_of_way"),
    ContextEvent(crossing_frame=250, intersection_type="unsignalized", priority=None),
    ContextEvent(crossing_frame=330, intersection_type="unsignalized", priority="yield",
                 yield_onset_frame=310),
    ContextEvent(crossing_frame=450, intersection_type="signalized", priority="right_of_way"),
    ContextEvent(crossing_frame=610, intersection_type="roundabout", priority="yield",
                 yield_onset_frame=595),
)

V2_CONTEXT_EVENTS = (
    ContextEvent(crossing_frame=100, intersection_type="unsignalized", priority="right_of_way"),
    ContextEvent(crossing_frame=250, intersection_type="signalized", priority="right_of_way"),
    ContextEvent(crossing_frame=400, intersection_type="highway_ramp", priority="right_of_way"),
    ContextEvent(crossing_frame=470, intersection_type="unsignalized", priority="yield",
                 yield_onset_frame=455),
)

# Frames whose planted predictions are pathological: one zero-mass map
# and two constant maps.
V1_ZERO_PRED_FRAMES = (688,)
V1_CONSTANT_PRED_FRAMES = (690, 695)

# Junctions of the synthetic OSM extract, by the v1 track frame that
# passes exactly through the node.
OSM_JUNCTION_FRAMES = {
    "unsignalized": 135,
    "signalized": 300,
    "roundabout": 585,
    "highway_ramp": 660,
}

DEMO_SIZE = (96, 54)

_ORIGIN_LAT = 45.0700
_ORIGIN_LON = 7.6800


def _meters_to_dlon(m: float, lat: float) -> float:
    return math.degrees(m / (EARTH_RADIUS_M * math.cos(math.radians(lat))))


def _meters_to_dlat(m: float) -> float:
    return math.degrees(m / EARTH_RADIUS_M)


def _track_positions(v_mps: np.ndarray, fps: float) -> np.ndarray:
    """Cumulative eastward distance in meters at each frame."""
    steps = v_mps / fps
    s = np.concatenate(([0.0], np.cumsum(steps)))[:-1]
    return s


@dataclass(frozen=True)
class PlantedVideo:
    """Everything a test needs to know about one generated video."""

    entry: VideoEntry
    v_mps: np.ndarray
    longitudinal_truth: list[str]
    lateral_per_frame: list[str]
    fused_truth: list[str]
    telemetry_gaps: tuple[tuple[int, int], ...]
    gaze_counts: dict
    distances_m: Optional[np.ndarray] = None


@dataclass(frozen=True)
class DemoDataset:
    manifest_path: Path
    manifest: DatasetManifest
    videos: dict
    osm_path: Path


def _lateral_per_frame(spans: Sequence[Span], n: int) -> list[str]:
    out = ["none"] * n
    for s in spans:
        for i in range(s.start_frame, s.end_frame + 1):
            out[i] = s.category
    return out


def _gaze_path(frame: int, size: tuple[int, int]) -> tuple[float, float]:
    w, h = size
    cx = w / 2.0 + 18.0 * math.sin(2.0 * math.pi * frame / 260.0)
    cy = h / 2.0 + 9.0 * math.cos(2.0 * math.pi * frame / 340.0)
    return cx, cy


def _build_gaze(
    n_frames: int,
    size: tuple[int, int],
    slot1_counts: dict,
    rng: np.random.Generator,
) -> tuple[list[GazeSample], dict]:
    """Two samples per frame: slot 0 is always a fixation, slot 1 cycles
    through the planted event counts."""
    if sum(slot1_counts.values()) != n_frames:
        raise ValueError("slot-1 event counts must sum to n_frames")
    w, h = size
    events = []
    for ev in ("fixation", "saccade", "blink", "in_vehicle", "offscreen"):
        events.extend([ev] * slot1_counts.get(ev, 0))
    order = rng.permutation(len(events))
    samples: list[GazeSample] = []
    for f in range(n_frames):
        cx, cy = _gaze_path(f, size)
        jx, jy = rng.normal(0.0, 1.2, size=2)
        samples.append(GazeSample(frame=f, x=cx + jx, y=cy + jy, event="fixation"))
        ev = events[order[f]]
        if ev == "fixation":
            jx, jy = rng.normal(0.0, 1.2, size=2)
            samples.append(GazeSample(frame=f, x=cx + jx, y=cy + jy, event="fixation"))
        elif ev in ("saccade", "blink"):
            samples.append(GazeSample(frame=f, x=float("nan"), y=float("nan"), event=ev))
        elif ev == "in_vehicle":
            samples.append(GazeSample(
                frame=f, x=float(rng.uniform(20, w - 20)), y=float(rng.uniform(h - 5, h - 2)),
                event="in_vehicle"))
        else:
            samples.append(GazeSample(
                frame=f, x=-25.0 if f % 2 == 0 else w + 25.0, y=cy, event="offscreen"))
    counts = {"fixation": n_frames + slot1_counts.get("fixation", 0)}
    for ev in ("saccade", "blink", "in_vehicle", "offscreen"):
        counts[ev] = slot1_counts.get(ev, 0)
    return samples, counts


def _write_frames(
    frames_dir: Path,
    n_frames: int,
    size: tuple[int, int],
    overexposed: Sequence[int] = (),
    underexposed: Sequence[int] = (),
) -> None:
    frames_dir.mkdir(parents=True, exist_ok=True)
    w, h = size
    base = np.zeros((h, w), dtype=np.uint8)
    for x in range(w):
        base[:, x] = 60 + (x * 80) // w
    for f in range(n_frames):
        if f in overexposed:
            arr = np.full((h, w), 255, dtype=np.uint8)
        elif f in underexposed:
            arr = np.full((h, w), 3, dtype=np.uint8)
        else:
            arr = base.copy()
            arr[(f % h), :] = 140
        Image.fromarray(arr, mode="L").save(frames_dir / f"{f:06d}.png")


def _write_predictions(
    pred_dir: Path,
    n_frames: int,
    size: tuple[int, int],
    zero_frames: Sequence[int] = (),
    constant_frames: Sequence[int] = (),
) -> None:
    pred_dir.mkdir(parents=True, exist_ok=True)
    w, h = size
    ys, xs = np.mgrid[0:h, 0:w]
    for f in range(n_frames):
        if f in zero_frames:
            values = np.zeros((h, w))
        elif f in constant_frames:
            values = np.full((h, w), 0.37)
        else:
            cx, cy = _gaze_path(f, size)
            d2 = (xs - (cx + 4.0)) ** 2 + (ys - (cy + 3.0)) ** 2
            values = 0.0005 + np.exp(-d2 / (2.0 * 9.0 ** 2))
        formats.write_saliency_map(pred_dir / f"{f:06d}.smap", SaliencyMap(values))


def _telemetry_samples(
    v_mps: np.ndarray,
    fps: float,
    lat: np.ndarray,
    lon: np.ndarray,
    skip: Sequence[tuple[int, int]] = (),
) -> list[TelemetrySample]:
    out = []
    for f in range(len(v_mps)):
        if any(a <= f <= b for a, b in skip):
            continue
        out.append(TelemetrySample(
            frame=f, t=f / fps, speed_kmh=float(v_mps[f] * 3.6),
            lat=float(lat[f]), lon=float(lon[f]), heading_deg=90.0,
        ))
    return out


def write_demo_osm_extract(path: Path, junction_lons: dict) -> None:
    """A main east-west street with four junctions: a plain crossing, a
    signalized crossing, a roundabout entry, and a motorway-link merge.
    Junction longitudes are supplied so they coincide with the recorded
    track."""
    lat0 = _ORIGIN_LAT
    dlat = _meters_to_dlat(60.0)
    nodes = []
    ways = []
    nid = iter(range(1, 1000))

    def add_node(lat: float, lon: float, tags: str = "") -> int:
        i = next(nid)
        nodes.append(f'  <node id="{i}" lat="{lat!r}" lon="{lon!r}">{tags}</node>')
        return i

    main_ids = []
    main_ids.append(add_node(lat0, _ORIGIN_LON - _meters_to_dlon(40.0, lat0)))
    cross_specs = []
    j_plain = add_node(lat0, junction_lons["unsignalized"])
    main_ids.append(j_plain)
    cross_specs.append((j_plain, junction_lons["unsignalized"], "residential", ""))
    j_signal = add_node(lat0, junction_lons["signalized"],
                        '<tag k="highway" v="traffic_signals"/>')
    main_ids.append(j_signal)
    cross_specs.append((j_signal, junction_lons["signalized"], "secondary", ""))
    j_round = add_node(lat0, junction_lons["roundabout"])
    main_ids.append(j_round)
    j_ramp = add_node(lat0, junction_lons["highway_ramp"])
    main_ids.append(j_ramp)
    main_ids.append(add_node(lat0, junction_lons["highway_ramp"] + _meters_to_dlon(60.0, lat0)))

    way_id = iter(range(1001, 1100))
    refs = "".join(f'<nd ref="{i}"/>' for i in main_ids)
    ways.append(f'  <way id="{next(way_id)}">{refs}<tag k="highway" v="primary"/>'
                f'<tag k="name" v="East Street"/></way>')

    for node_id, lon, road_class, extra in cross_specs:
        n_top = add_node(lat0 + dlat, lon)
        n_bot = add_node(lat0 - dlat, lon)
        ways.append(
            f'  <way id="{next(way_id)}"><nd ref="{n_top}"/><nd ref="{node_id}"/>'
            f'<nd ref="{n_bot}"/><tag k="highway" v="{road_class}"/>{extra}</way>')

    # Roundabout circle tangent to the main street at its entry node,
    # centered just north of it.
    r_m = 14.0
    circle_ids = [j_round]
    for k in range(1, 8):
        ang = 2.0 * math.pi * k / 8.0
        circle_ids.append(add_node(
            lat0 + _meters_to_dlat(r_m - r_m * math.cos(ang)),
            junction_lons["roundabout"] + _meters_to_dlon(r_m * math.sin(ang), lat0),
        ))
    circle_ids.append(j_round)
    refs = "".join(f'<nd ref="{i}"/>' for i in circle_ids)
    ways.append(f'  <way id="{next(way_id)}">{refs}<tag k="highway" v="primary"/>'
                f'<tag k="junction" v="roundabout"/></way>')

    # Motorway link leaving the main street.
    link_end = add_node(lat0 + _meters_to_dlat(80.0),
                        junction_lons["highway_ramp"] + _meters_to_dlon(50.0, lat0))
    ways.append(f'  <way id="{next(way_id)}"><nd ref="{j_ramp}"/><nd ref="{link_end}"/>'
                f'<tag k="highway" v="motorway_link"/></way>')

    # A way with no highway tag must be ignored by the parser.
    b1 = add_node(lat0 + dlat * 2, _ORIGIN_LON)
    b2 = add_node(lat0 + dlat * 2, _ORIGIN_LON + _meters_to_dlon(30.0, lat0))
    ways.append(f'  <way id="{next(way_id)}"><nd ref="{b1}"/><nd ref="{b2}"/>'
                f'<tag k="building" v="yes"/></way>')

    xml = "<?xml version='1.0' encoding='UTF-8'?>\n<osm version=\"0.6\">\n"
    xml += "\n".join(nodes) + "\n" + "\n".join(ways) + "\n</osm>\n"
    formats.write_text_atomic(path, xml)


def build_demo_dataset(root: Path, seed: int = 7) -> DemoDataset:
    """Materialize the demo dataset under `root` and return its layout
    plus all planted ground truth."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    fps = ACTION_FIXTURE_FPS
    w, h = DEMO_SIZE

    # --- v1 -----------------------------------------------------------
    v1_speed, v1_lon_truth = planted_speed_profile(ACTION_FIXTURE_PARTS, fps)
    n1 = len(v1_speed)
    v1_lat = _lateral_per_frame(ACTION_FIXTURE_LATERAL_SPANS, n1)
    v1_fused = fuse_planted_labels(v1_lon_truth, v1_lat)

    s1 = _track_positions(v1_speed, fps)
    lon1 = np.asarray([_ORIGIN_LON + _meters_to_dlon(float(si), _ORIGIN_LAT) for si in s1])
    lat1 = np.full(n1, _ORIGIN_LAT)

    tele1 = _telemetry_samples(v1_speed, fps, lat1, lon1)
    formats.write_telemetry_csv(root / "telemetry" / "v1.csv", tele1)

    gaze1, gaze1_counts = _build_gaze(
        n1, DEMO_SIZE,
        {"fixation": 308, "saccade": 210, "blink": 126, "in_vehicle": 42, "offscreen": 14},
        rng,
    )
    formats.write_gaze_csv(root / "gaze" / "v1.csv", gaze1)

    _write_frames(root / "frames" / "v1", n1, DEMO_SIZE)
    _write_predictions(
        root / "predictions" / "v1", n1, DEMO_SIZE,
        zero_frames=V1_ZERO_PRED_FRAMES, constant_frames=V1_CONSTANT_PRED_FRAMES,
    )

    doc1 = AnnotationDoc(
        video_id="v1", revision=0, n_frames=n1,
        longitudinal=tuple(frames_to_spans(v1_lon_truth)),
        lateral=ACTION_FIXTURE_LATERAL_SPANS,
        context_events=V1_CONTEXT_EVENTS,
    )
    formats.write_annotation_doc(root / "annotations" / "v1.json", doc1)

    # --- v2 -----------------------------------------------------------
    v2_speed, v2_lon_truth = planted_speed_profile(V2_PARTS, fps)
    n2 = len(v2_speed)
    v2_lat = _lateral_per_frame(V2_LATERAL_SPANS, n2)
    v2_fused = fuse_planted_labels(v2_lon_truth, v2_lat)

    lat2 = np.full(n2, _ORIGIN_LAT + 0.02)
    lon2 = np.asarray([_ORIGIN_LON + 0.02 + _meters_to_dlon(7.0 * f / fps, _ORIGIN_LAT)
                       for f in range(n2)])
    tele2 = _telemetry_samples(v2_speed, fps, lat2, lon2, skip=V2_TELEMETRY_GAPS)
    formats.write_telemetry_csv(root / "telemetry" / "v2.csv", tele2)

    gaze2, gaze2_counts = _build_gaze(
        n2, DEMO_SIZE,
        {"fixation": 320, "saccade": 90, "blink": 60, "in_vehicle": 20, "offscreen": 10},
        rng,
    )
    formats.write_gaze_csv(root / "gaze" / "v2.csv", gaze2)

    _write_frames(root / "frames" / "v2", n2, DEMO_SIZE,
                  overexposed=V2_OVEREXPOSED_FRAMES, underexposed=V2_UNDEREXPOSED_FRAMES)

    doc2 = AnnotationDoc(
        video_id="v2", revision=0, n_frames=n2,
        longitudinal=tuple(frames_to_spans(v2_lon_truth)),
        lateral=V2_LATERAL_SPANS,
        context_events=V2_CONTEXT_EVENTS,
    )
    formats.write_annotation_doc(root / "annotations" / "v2.json", doc2)

    # --- v3: a tiny clip for annotation round-trips --------------------
    n3 = 10
    _write_frames(root / "frames" / "v3", n3, DEMO_SIZE)

    # --- OSM extract aligned with the v1 track -------------------------
    junction_lons = {
        name: float(lon1[frame]) for name, frame in OSM_JUNCTION_FRAMES.items()
    }
    osm_path = root / "extract.osm"
    write_demo_osm_extract(osm_path, junction_lons)

    entries = [
        VideoEntry(
            id="v1", fps=fps, width=w, height=h, n_frames=n1,
            telemetry=root / "telemetry" / "v1.csv", gaze=root / "gaze" / "v1.csv",
            frames=root / "frames" / "v1", annotations=root / "annotations" / "v1.json",
            predictions=root / "predictions" / "v1",
        ),
        VideoEntry(
            id="v2", fps=fps, width=w, height=h, n_frames=n2,
            telemetry=root / "telemetry" / "v2.csv", gaze=root / "gaze" / "v2.csv",
            frames=root / "frames" / "v2", annotations=root / "annotations" / "v2.json",
            predictions=None,
        ),
        VideoEntry(
            id="v3", fps=fps, width=w, height=h, n_frames=n3,
            telemetry=None, gaze=None, frames=root / "frames" / "v3",
            annotations=root / "annotations" / "v3.json", predictions=None,
        ),
    ]
    manifest = DatasetManifest(dataset_id="demo", videos=tuple(entries), root=root)
    manifest_path = root / "manifest.json"
    formats.write_manifest(manifest_path, manifest)

    videos = {
        "v1": PlantedVideo(
            entry=entries[0], v_mps=v1_speed, longitudinal_truth=v1_lon_truth,
            lateral_per_frame=v1_lat, fused_truth=v1_fused, telemetry_gaps=(),
            gaze_counts=gaze1_counts, distances_m=s1,
        ),
        "v2": PlantedVideo(
            entry=entries[1], v_mps=v2_speed, longitudinal_truth=v2_lon_truth,
            lateral_per_frame=v2_lat, fused_truth=v2_fused,
            telemetry_gaps=V2_TELEMETRY_GAPS, gaze_counts=gaze2_counts,
        ),
        "v3": PlantedVideo(
            entry=entries[2], v_mps=np.zeros(n3), longitudinal_truth=["Maintain"] * n3,
            lateral_per_frame=["none"] * n3, fused_truth=["Maintain"] * n3,
            telemetry_gaps=(), gaze_counts={},
        ),
    }
    return DemoDataset(
        manifest_path=manifest_path,
        manifest=formats.load_manifest(manifest_path),
        videos=videos,
        osm_path=osm_path,
    )


# ---------------------------------------------------------------------------
# projection-pair fixtures


def random_plane_homography(
    rng: np.random.Generator,
    width: int,
    height: int,
) -> np.ndarray:
    """A well-conditioned random homography over a width x height frame:
    a bounded affine part plus mild projective terms, rejected unless
    the projective denominator stays well away from zero over the whole
    frame."""
    while True:
        ang = rng.uniform(-0.3, 0.3)
        scale = rng.uniform(0.7, 1.4)
        shear = rng.uniform(-0.15, 0.15)
        c, s = math.cos(ang), math.sin(ang)
        A = scale * np.array([[c, -s], [s, c]]) @ np.array([[1.0, shear], [0.0, 1.0]])
        t = rng.uniform(-60.0, 60.0, size=2)
        p = rng.uniform(-1.0, 1.0, size=2) * 1e-4
        H = np.array([
            [A[0, 0], A[0, 1], t[0]],
            [A[1, 0], A[1, 1], t[1]],
            [p[0], p[1], 1.0],
        ])
        corners = np.array([[0, 0], [width, 0], [0, height], [width, height]], dtype=float)
        wvals = corners @ H[2, :2] + H[2, 2]
        if np.all(np.abs(wvals) > 0.5):
            return H


def build_projection_pairs_csv(
    pairs_path: Path,
    refs_path: Path,
    mode: str = "sd",
    n_pairs: int = 40,
    n_corr: int = 24,
    seed: int = 3,
    ref_noise_px: float = 8.0,
    width: int = 1920,
    height: int = 1080,
    offsets: Sequence[int] = tuple(range(-12, 13)),
    n_keys: int = 4,
) -> None:
    """Write correspondence and reference CSVs for the projection-error
    commands.

    sd mode: per pair, exact correspondences under a random homography
    and a reference fixation whose scene-view position carries isotropic
    Gaussian noise of ref_noise_px.

    temporal mode: per key and offset, correspondences whose scatter
    grows with |offset|, plus a probe point; pair ids are "key|offset".
    """
    rng = np.random.default_rng(seed)
    pair_rows = ["pair_id,src_x,src_y,dst_x,dst_y"]
    ref_rows = ["pair_id,offset,ref_src_x,ref_src_y,ref_dst_x,ref_dst_y"]

    def _r(x) -> str:
        return repr(float(x))

    def corr_rows(pair_id: str, H: np.ndarray, jitter: float) -> None:
        pts = rng.uniform([0.05 * width, 0.05 * height],
                          [0.95 * width, 0.95 * height], size=(n_corr, 2))
        wv = pts @ H[2, :2] + H[2, 2]
        dst = np.stack([(pts @ H[0, :2] + H[0, 2]) / wv,
                        (pts @ H[1, :2] + H[1, 2]) / wv], axis=1)
        if jitter > 0:
            dst = dst + rng.normal(0.0, jitter, size=dst.shape)
        for (sx, sy), (dx, dy) in zip(pts, dst):
            pair_rows.append(f"{pair_id},{_r(sx)},{_r(sy)},{_r(dx)},{_r(dy)}")

    if mode == "sd":
        for i in range(n_pairs):
            pair_id = f"p{i:04d}"
            H = random_plane_homography(rng, width, height)
            corr_rows(pair_id, H, jitter=0.0)
            ref_src = rng.uniform([0.1 * width, 0.1 * height],
                                  [0.9 * width, 0.9 * height])
            wv = ref_src @ H[2, :2] + H[2, 2]
            true_dst = np.array([(ref_src @ H[0, :2] + H[0, 2]) / wv,
                                 (ref_src @ H[1, :2] + H[1, 2]) / wv])
            noisy = true_dst + rng.normal(0.0, ref_noise_px, size=2)
            ref_rows.append(
                f"{pair_id},0,{_r(ref_src[0])},{_r(ref_src[1])},{_r(noisy[0])},{_r(noisy[1])}")
    elif mode == "temporal":
        for k in range(n_keys):
            for off in offsets:
                pair_id = f"k{k:02d}|{off}"
                H = np.eye(3) if off == 0 else random_plane_homography(rng, width, height)
                corr_rows(pair_id, H, jitter=0.0 if off == 0 else 0.4 * abs(off))
                probe = rng.uniform([0.2 * width, 0.2 * height],
                                    [0.8 * width, 0.8 * height])
                ref_rows.append(f"{pair_id},{off},{_r(probe[0])},{_r(probe[1])},0.0,0.0")
    else:
        raise ValueError(f"unknown mode {mode!r}")

    formats.write_text_atomic(Path(pairs_path), "\n".join(pair_rows) + "\n")
    formats.write_text_atomic(Path(refs_path), "\n".join(ref_rows) + "\n")
