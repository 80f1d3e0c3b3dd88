"""Command-line interface.

Every command reads explicit inputs and writes its results atomically,
so repeated runs over the same data produce byte-identical files.
Exit codes: 0 on success, 1 on a domain error, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import audit as auditmod
from . import context as contextmod
from . import formats
from . import homography as homo
from . import metrics as metricsmod
from . import salmap as salmapmod
from . import segmentation as seg
from .errors import FormatError, GazeAuditError
from .model import (
    DatasetManifest,
    Fixation,
    SegmentationConfig,
    VideoEntry,
)


def _fmt(x: float) -> str:
    return repr(float(x))


def _load_manifest(path: str) -> DatasetManifest:
    return formats.load_manifest(Path(path))


def _entry(manifest: DatasetManifest, video_id: str) -> VideoEntry:
    try:
        return manifest.video(video_id)
    except KeyError:
        raise FormatError(f"manifest has no video {video_id!r}")


def _segmentation_config(args: argparse.Namespace) -> SegmentationConfig:
    return SegmentationConfig(
        median_window=args.median_window,
        accel_threshold=args.accel_threshold,
        stop_threshold_kmh=args.stop_threshold_kmh,
        penalty=args.penalty,
    )


def _add_segmentation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--median-window", type=int, default=20,
                   help="window length of the median cleaning passes")
    p.add_argument("--accel-threshold", type=float, default=0.4,
                   help="mean-acceleration threshold in m/s^2")
    p.add_argument("--stop-threshold-kmh", type=float, default=1.0,
                   help="stopped-vehicle speed threshold in km/h")
    p.add_argument("--penalty", type=float, default=None,
                   help="change-point penalty; default estimates it from the signal")


# ---------------------------------------------------------------------------
# commands


def cmd_demo(args: argparse.Namespace) -> None:
    from . import fixtures

    ds = fixtures.build_demo_dataset(Path(args.out), seed=args.seed)
    print(ds.manifest_path)


def cmd_segment(args: argparse.Namespace) -> None:
    manifest = _load_manifest(args.manifest)
    entry = _entry(manifest, args.video)
    if entry.telemetry is None:
        raise FormatError(f"video {args.video!r} has no telemetry")
    cfg = _segmentation_config(args)
    samples = formats.read_telemetry_csv(entry.telemetry)
    series = seg.speed_series_from_telemetry(samples, entry.fps, cfg)
    segments = seg.segment_speed(series, cfg)

    lateral = ["none"] * len(series)
    if entry.annotations is not None and entry.annotations.exists():
        doc = formats.read_annotation_doc(entry.annotations)
        from .model import spans_to_frames

        track = spans_to_frames(doc.lateral, doc.n_frames, fill="none")
        first = int(series.frames[0])
        for i in range(len(series)):
            f = first + i
            if 0 <= f < len(track):
                lateral[i] = track[f]
    lon = []
    for s in segments:
        lon.extend([s.longitudinal] * s.n_frames)
    actions = seg.fuse_label_tracks(lon, lateral)

    lines = ["frame,speed_mps,longitudinal,action"]
    for i in range(len(series)):
        lines.append(
            f"{int(series.frames[i])},{_fmt(series.v[i])},{lon[i]},{actions[i]}")
    formats.write_text_atomic(Path(args.out), "\n".join(lines) + "\n")


def cmd_salmap(args: argparse.Namespace) -> None:
    manifest = _load_manifest(args.manifest)
    entry = _entry(manifest, args.video)
    if entry.gaze is None:
        raise FormatError(f"video {args.video!r} has no gaze data")
    if entry.n_frames is None:
        raise FormatError(f"video {args.video!r} has no frame count in the manifest")
    samples = formats.read_gaze_csv(entry.gaze)
    fixations, _ = salmapmod.filter_gaze(samples)
    maps = salmapmod.multi_observer_maps(
        fixations, entry.n_frames, (entry.width, entry.height),
        sigma_px=args.sigma_px, sigma_frames=args.sigma_frames, on_empty="skip",
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_written = 0
    for f, m in enumerate(maps):
        if m is None:
            continue
        formats.write_saliency_map(out_dir / f"{f:06d}.smap", m)
        n_written += 1
    print(f"wrote {n_written} maps to {out_dir}")


def cmd_eval(args: argparse.Namespace) -> None:
    manifest = _load_manifest(args.manifest)
    entry = _entry(manifest, args.video)
    if entry.n_frames is None:
        raise FormatError(f"video {args.video!r} has no frame count in the manifest")
    pred_dir = Path(args.pred_dir) if args.pred_dir else entry.predictions
    if pred_dir is None:
        raise FormatError(f"video {args.video!r} has no predictions directory")
    gt_dir = Path(args.gt_dir)

    if entry.annotations is None or not entry.annotations.exists():
        raise FormatError(f"video {args.video!r} has no annotations")
    doc = formats.read_annotation_doc(entry.annotations)
    actions = seg.fuse_annotation_doc(doc)

    windows = metricsmod.build_scenario_windows(
        doc.context_events, entry.fps, entry.n_frames, video_id=entry.id)

    per_frame_fix: dict[int, list[Fixation]] = defaultdict(list)
    if entry.gaze is not None:
        for s in formats.read_gaze_csv(entry.gaze):
            if s.event == "fixation":
                per_frame_fix[s.frame].append(Fixation(frame=s.frame, x=s.x, y=s.y))

    metric_names = tuple(args.metrics.split(","))
    results = []
    for f in range(entry.n_frames):
        pred_path = pred_dir / f"{f:06d}.smap"
        gt_path = gt_dir / f"{f:06d}.smap"
        if not pred_path.exists() or not gt_path.exists():
            continue
        pred = formats.read_saliency_map(pred_path)
        gt = formats.read_saliency_map(gt_path)
        values, degenerate = metricsmod.evaluate_frame(
            pred, gt, per_frame_fix.get(f, ()), metrics=metric_names)
        cats = tuple(metricsmod.window_category(w) for w in windows if w.contains(f))
        results.append(metricsmod.FrameResult(
            video_id=entry.id, frame=f, action=actions[f],
            context_categories=cats, values=values, degenerate=degenerate,
        ))

    report = metricsmod.stratified_eval(results, metrics=metric_names)
    metricsmod.check_weighted_consistency(report)
    formats.write_text_atomic(Path(args.out), report.to_csv())


def _read_pairs_csv(path: Path) -> dict[str, tuple[list, list]]:
    groups: dict[str, tuple[list, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"pair_id", "src_x", "src_y", "dst_x", "dst_y"}
        if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
            raise FormatError(f"{path}: expected columns {sorted(needed)}")
        for row in reader:
            src, dst = groups.setdefault(row["pair_id"], ([], []))
            try:
                src.append((float(row["src_x"]), float(row["src_y"])))
                dst.append((float(row["dst_x"]), float(row["dst_y"])))
            except ValueError as exc:
                raise FormatError(f"{path}: bad correspondence row: {exc}")
    if not groups:
        raise FormatError(f"{path}: no correspondences")
    return groups


def _read_refs_csv(path: Path) -> dict[str, tuple[int, tuple, tuple]]:
    refs: dict[str, tuple[int, tuple, tuple]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"pair_id", "offset", "ref_src_x", "ref_src_y", "ref_dst_x", "ref_dst_y"}
        if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
            raise FormatError(f"{path}: expected columns {sorted(needed)}")
        for row in reader:
            try:
                refs[row["pair_id"]] = (
                    int(row["offset"]),
                    (float(row["ref_src_x"]), float(row["ref_src_y"])),
                    (float(row["ref_dst_x"]), float(row["ref_dst_y"])),
                )
            except ValueError as exc:
                raise FormatError(f"{path}: bad reference row: {exc}")
    if not refs:
        raise FormatError(f"{path}: no reference points")
    return refs


def cmd_homaudit(args: argparse.Namespace) -> None:
    groups = _read_pairs_csv(Path(args.pairs))
    refs = _read_refs_csv(Path(args.refs))
    missing = sorted(set(groups) - set(refs))
    if missing:
        raise FormatError(f"no reference point for pair {missing[0]!r}")

    if args.mode == "sd":
        pairs = []
        for pid in sorted(groups):
            src, dst = groups[pid]
            _, ref_src, ref_dst = refs[pid]
            pairs.append(homo.FramePair(
                pair_id=pid, src_pts=np.asarray(src), dst_pts=np.asarray(dst),
                ref_src=ref_src, ref_dst=ref_dst,
            ))
        report = homo.sd_error_protocol(
            pairs, image_width=args.width, runs=args.runs,
            pairs_per_video=args.pairs_per_video, seed=args.seed,
            method=args.method, inlier_threshold=args.inlier_threshold,
        )
        lines = ["metric,value"]
        lines.append(f"n_pairs,{len(pairs)}")
        lines.append(f"n_failed,{report.n_failed}")
        lines.append(f"median_px,{_fmt(report.median_px)}")
        lines.append(f"frac_gt_100px,{_fmt(report.frac_gt100)}")
        lines.append(f"frac_gt_200px,{_fmt(report.frac_gt200)}")
        for lo, hi, med in report.ecc_bin_medians or ():
            value = "" if med is None else _fmt(med)
            lines.append(f"ecc_{lo:.1f}_{hi:.1f},{value}")
    else:
        samples = []
        for pid in sorted(groups):
            src, dst = groups[pid]
            offset, probe, _ = refs[pid]
            key = pid.split("|", 1)[0]
            samples.append(homo.TemporalPair(
                key_id=key, offset=offset, src_pts=np.asarray(src),
                dst_pts=np.asarray(dst), probe=probe,
            ))
        report = homo.temporal_window_error(
            samples, runs=args.runs, seed=args.seed,
            method=args.method, inlier_threshold=args.inlier_threshold,
        )
        lines = ["offset,median_px"]
        for off, med in report.per_offset_medians or ():
            lines.append(f"{off},{_fmt(med)}")
    formats.write_text_atomic(Path(args.out), "\n".join(lines) + "\n")


def cmd_context(args: argparse.Namespace) -> None:
    manifest = _load_manifest(args.manifest)
    entry = _entry(manifest, args.video)
    if entry.telemetry is None:
        raise FormatError(f"video {args.video!r} has no telemetry")
    track = formats.read_telemetry_csv(entry.telemetry)
    graph = contextmod.parse_osm_extract(Path(args.osm))
    matches = contextmod.find_route_intersections(track, graph, radius_m=args.radius)
    lines = ["crossing_frame,intersection_type,node_id,distance_m"]
    for m in matches:
        kind = contextmod.classify_intersection(m.candidate)
        lines.append(f"{m.frame},{kind},{m.candidate.node_id},{_fmt(m.distance_m)}")
    formats.write_text_atomic(Path(args.out), "\n".join(lines) + "\n")


_AUDIT_ACTIONS = seg.STAT_CATEGORIES + ("Excluded",)


def cmd_audit(args: argparse.Namespace) -> None:
    manifest = _load_manifest(args.manifest)
    header = (
        "video_id,n_present,span_first,span_last,missing_fraction,n_present_segments,"
        "rate_hz,n_rate_gaps,low_confidence,"
        "overexposed_fraction,underexposed_fraction,n_unreadable,"
        + ",".join(f"frac_{ev}" for ev in sorted(auditmod.GAZE_EVENTS))
        + "," + ",".join(f"missing_{a}" for a in _AUDIT_ACTIONS)
    )
    lines = [header]
    for entry in manifest.videos:
        cells: list[str] = [entry.id]
        gap_report = None
        if entry.telemetry is not None:
            samples = formats.read_telemetry_csv(entry.telemetry)
            gap_report = auditmod.detect_frame_gaps([s.frame for s in samples])
            rate = auditmod.validate_telemetry(samples, declared_rate_hz=entry.fps)
            cells += [
                str(gap_report.n_present), str(gap_report.first_frame),
                str(gap_report.last_frame), _fmt(gap_report.missing_fraction),
                str(len(gap_report.segments)), _fmt(rate.rate_hz),
                str(len(rate.gaps)), str(rate.low_confidence).lower(),
            ]
        else:
            cells += [""] * 8

        if entry.frames is not None:
            frame_paths = sorted(entry.frames.glob("*.png"))
            report = auditmod.exposure_audit(
                (int(p.stem), p) for p in frame_paths)
            cells += [
                _fmt(report.overexposed_fraction), _fmt(report.underexposed_fraction),
                str(len(report.unreadable)),
            ]
        else:
            cells += [""] * 3

        if entry.gaze is not None:
            comp = auditmod.gaze_composition(formats.read_gaze_csv(entry.gaze))
            cells += [_fmt(comp[ev]) for ev in sorted(auditmod.GAZE_EVENTS)]
        else:
            cells += [""] * len(auditmod.GAZE_EVENTS)

        per_action = {}
        if gap_report is not None and entry.annotations is not None \
                and entry.annotations.exists():
            doc = formats.read_annotation_doc(entry.annotations)
            labels = seg.fuse_annotation_doc(doc)
            span = labels[gap_report.first_frame:gap_report.last_frame + 1]
            per_action = auditmod.per_action_gap_fractions(gap_report, span)
        cells += [
            _fmt(per_action[a]) if a in per_action else "" for a in _AUDIT_ACTIONS
        ]
        lines.append(",".join(cells))
    formats.write_text_atomic(Path(args.out), "\n".join(lines) + "\n")


def cmd_stats(args: argparse.Namespace) -> None:
    manifest = _load_manifest(args.manifest)
    labels_per_video = {}
    events = []
    for entry in manifest.videos:
        if entry.annotations is None or not entry.annotations.exists():
            continue
        doc = formats.read_annotation_doc(entry.annotations)
        labels_per_video[entry.id] = seg.fuse_annotation_doc(doc)
        events.extend(doc.context_events)
    if not labels_per_video:
        raise FormatError("no annotated videos in the manifest")

    stats = seg.action_statistics(labels_per_video)
    lines = ["category,n_frames,percentage"]
    for cat, count, pct in stats.rows():
        lines.append(f"{cat},{count},{_fmt(pct)}")
    lines.append(f"Excluded,{stats.n_excluded},")
    formats.write_text_atomic(Path(args.actions_out), "\n".join(lines) + "\n")

    ctx = contextmod.context_statistics(events)
    lines = ["intersection_type,right_of_way,yield"]
    for kind in contextmod.INTERSECTION_TYPES:
        lines.append(
            f"{kind},{ctx.count(kind, 'right_of_way')},{ctx.count(kind, 'yield')}")
    lines.append(
        f"total,{ctx.priority_total('right_of_way')},{ctx.priority_total('yield')}")
    lines.append(f"unlabeled,{ctx.n_unlabeled},")
    formats.write_text_atomic(Path(args.context_out), "\n".join(lines) + "\n")


def cmd_serve(args: argparse.Namespace) -> None:
    from .service import ServiceConfig, serve

    cfg = ServiceConfig(
        manifest_path=Path(args.manifest),
        read_only=args.read_only,
        token=args.token,
        frontend_dir=Path(args.frontend) if args.frontend else None,
        osm_path=Path(args.osm) if args.osm else None,
        segmentation=_segmentation_config(args),
    )
    serve(cfg, host=args.host, port=args.port)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeaudit",
        description="Driver-attention dataset auditing and benchmarking tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="generate the bundled synthetic demo dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("segment", help="label per-frame driving actions from telemetry")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_segmentation_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("salmap", help="aggregate gaze into per-frame saliency maps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sigma-px", type=float, default=25.0)
    p.add_argument("--sigma-frames", type=float, default=4.0)
    p.set_defaults(func=cmd_salmap)

    p = sub.add_parser("eval", help="score predicted maps against ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--pred-dir", default=None,
                   help="defaults to the manifest predictions directory")
    p.add_argument("--metrics", default="kld,cc,sim,nss")
    p.add_argument("--out", required=True, help="stratified report CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("homaudit", help="projection-error protocols over frame pairs")
    p.add_argument("--pairs", required=True, help="correspondence CSV")
    p.add_argument("--refs", required=True, help="reference-point CSV")
    p.add_argument("--mode", choices=("sd", "temporal"), default="sd")
    p.add_argument("--width", type=int, default=1920, help="destination image width")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--pairs-per-video", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("dlt", "ransac"), default="dlt")
    p.add_argument("--inlier-threshold", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_homaudit)

    p = sub.add_parser("context", help="suggest intersection crossings from a map extract")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--osm", required=True, help="OSM XML extract")
    p.add_argument("--radius", type=float, default=25.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_context)

    p = sub.add_parser("audit", help="dataset integrity and exposure report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("stats", help="action and context composition tables")
    p.add_argument("--manifest", required=True)
    p.add_argument("--actions-out", required=True)
    p.add_argument("--context-out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--read-only", action="store_true")
    p.add_argument("--token", default=None,
                   help="bearer token; GAZEAUDIT_TOKEN is used when unset")
    p.add_argument("--frontend", default=None, help="static frontend directory")
    p.add_argument("--osm", default=None, help="OSM extract for context suggestions")
    _add_segmentation_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except GazeAuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
