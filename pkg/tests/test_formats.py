import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from PIL import Image

from gazeaudit import formats
from gazeaudit.errors import AnnotationError, FormatError, ManifestError
from gazeaudit.model import (
    AnnotationDoc,
    ContextEvent,
    GazeSample,
    SaliencyMap,
    Span,
    TelemetrySample,
)


def _telemetry(n=5, fps=10.0):
    return [
        TelemetrySample(frame=i, t=i / fps, speed_kmh=30.0 + i * 0.125,
                        lat=45.0 + i * 1e-5, lon=7.6 + i * 1e-5, heading_deg=90.0)
        for i in range(n)
    ]


def test_telemetry_round_trip_is_exact(tmp_path):
    path = tmp_path / "t.csv"
    samples = _telemetry()
    formats.write_telemetry_csv(path, samples)
    back = formats.read_telemetry_csv(path)
    assert back == samples


def test_telemetry_rejects_non_increasing_frames(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "frame,t_sec,speed_kmh,lat,lon,heading_deg\n"
        "0,0.0,30.0,45.0,7.6,90.0\n"
        "0,0.1,30.0,45.0,7.6,90.0\n")
    with pytest.raises(FormatError, match="strictly increasing"):
        formats.read_telemetry_csv(path)


def test_telemetry_rejects_out_of_range_latitude(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "frame,t_sec,speed_kmh,lat,lon,heading_deg\n"
        "0,0.0,30.0,91.0,7.6,90.0\n")
    with pytest.raises(FormatError, match="latitude"):
        formats.read_telemetry_csv(path)


def test_telemetry_normalizes_heading(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "frame,t_sec,speed_kmh,lat,lon,heading_deg\n"
        "0,0.0,30.0,45.0,7.6,450.0\n")
    [s] = formats.read_telemetry_csv(path)
    assert s.heading_deg == 90.0


def test_telemetry_error_names_file_and_line(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "frame,t_sec,speed_kmh,lat,lon,heading_deg\n"
        "0,0.0,thirty,45.0,7.6,90.0\n")
    with pytest.raises(FormatError, match=r"t\.csv:2"):
        formats.read_telemetry_csv(path)


def test_telemetry_missing_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("frame,t_sec,speed_kmh,lat,lon\n0,0.0,30.0,45.0,7.6\n")
    with pytest.raises(FormatError, match="heading_deg"):
        formats.read_telemetry_csv(path)


def test_gaze_round_trip_with_positionless_events(tmp_path):
    path = tmp_path / "g.csv"
    samples = [
        GazeSample(frame=0, x=10.0, y=20.0, event="fixation"),
        GazeSample(frame=0, x=float("nan"), y=float("nan"), event="blink"),
        GazeSample(frame=1, x=-5.0, y=3.0, event="offscreen"),
        GazeSample(frame=2, x=float("nan"), y=float("nan"), event="saccade"),
    ]
    formats.write_gaze_csv(path, samples)
    back = formats.read_gaze_csv(path)
    assert [s.event for s in back] == ["fixation", "blink", "offscreen", "saccade"]
    assert back[0].x == 10.0 and back[2].x == -5.0
    assert np.isnan(back[1].x) and np.isnan(back[3].y)


def test_gaze_positional_event_rejects_empty_coordinates(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("frame,x_px,y_px,event\n0,,,fixation\n")
    with pytest.raises(FormatError, match="empty value"):
        formats.read_gaze_csv(path)


def test_gaze_positional_event_rejects_nan_coordinates(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("frame,x_px,y_px,event\n0,nan,nan,fixation\n")
    with pytest.raises(FormatError, match="requires finite coordinates"):
        formats.read_gaze_csv(path)


def test_gaze_rejects_unknown_event(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("frame,x_px,y_px,event\n0,1.0,2.0,glance\n")
    with pytest.raises(FormatError, match="glance"):
        formats.read_gaze_csv(path)


def test_gaze_reader_sorts_by_frame(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("frame,x_px,y_px,event\n5,1.0,2.0,fixation\n4,3.0,4.0,fixation\n")
    back = formats.read_gaze_csv(path)
    assert [s.frame for s in back] == [4, 5]


# ---------------------------------------------------------------------------
# saliency maps


def test_smap_round_trip_bit_exact(tmp_path):
    path = tmp_path / "m.smap"
    values = np.arange(12, dtype=np.float32).reshape(3, 4).astype(np.float64)
    formats.write_saliency_map(path, SaliencyMap(values))
    back = formats.read_saliency_map(path)
    assert back.values.dtype == np.float64
    np.testing.assert_array_equal(back.values, values)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(
    dtype=np.float32,
    shape=hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12),
    elements=st.floats(0.0, 1e6, width=32),
))
def test_smap_round_trip_property(tmp_path_factory, arr):
    path = tmp_path_factory.mktemp("smap") / "m.smap"
    formats.write_saliency_map(path, SaliencyMap(arr.astype(np.float64)))
    back = formats.read_saliency_map(path)
    np.testing.assert_array_equal(back.values, arr.astype(np.float64))


def test_smap_rejects_bad_magic(tmp_path):
    path = tmp_path / "m.smap"
    path.write_bytes(struct.pack("<4sIII", b"SMAQ", 1, 1, 0) + b"\x00" * 4)
    with pytest.raises(FormatError, match="magic"):
        formats.read_saliency_map(path)


def test_smap_rejects_nonzero_reserved(tmp_path):
    path = tmp_path / "m.smap"
    path.write_bytes(struct.pack("<4sIII", b"SMAP", 1, 1, 7) + b"\x00" * 4)
    with pytest.raises(FormatError, match="reserved"):
        formats.read_saliency_map(path)


def test_smap_rejects_truncated_payload(tmp_path):
    path = tmp_path / "m.smap"
    path.write_bytes(struct.pack("<4sIII", b"SMAP", 2, 2, 0) + b"\x00" * 8)
    with pytest.raises(FormatError, match="payload"):
        formats.read_saliency_map(path)


def test_smap_rejects_negative_values(tmp_path):
    path = tmp_path / "m.smap"
    payload = np.array([[-1.0]], dtype="<f4").tobytes()
    path.write_bytes(struct.pack("<4sIII", b"SMAP", 1, 1, 0) + payload)
    with pytest.raises(FormatError, match="negative"):
        formats.read_saliency_map(path)


def test_smap_rejects_oversized_declaration(tmp_path):
    path = tmp_path / "m.smap"
    path.write_bytes(struct.pack("<4sIII", b"SMAP", 1 << 16, 1 << 16, 0))
    with pytest.raises(FormatError, match="exceeds limit"):
        formats.read_saliency_map(path)


def test_png_import_rescales_by_max(tmp_path):
    path = tmp_path / "m.png"
    arr = np.array([[0, 128], [64, 255]], dtype=np.uint8)
    Image.fromarray(arr, mode="L").save(path)
    m = formats.read_saliency_map(path)
    assert m.values.max() == 1.0
    assert m.values[0, 0] == 0.0
    assert m.values[0, 1] == pytest.approx(128 / 255)


def test_png_import_keeps_all_zero(tmp_path):
    path = tmp_path / "m.png"
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(path)
    m = formats.read_saliency_map(path)
    assert m.values.sum() == 0.0


def test_png_import_rejects_rgb(tmp_path):
    path = tmp_path / "m.png"
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), mode="RGB").save(path)
    with pytest.raises(FormatError, match="grayscale"):
        formats.read_saliency_map(path)


# ---------------------------------------------------------------------------
# manifests


def test_manifest_round_trip(demo):
    manifest = formats.load_manifest(demo.manifest_path)
    assert manifest.dataset_id == "demo"
    assert [v.id for v in manifest.videos] == ["v1", "v2", "v3"]
    v1 = manifest.video("v1")
    assert v1.fps == 25.0 and v1.n_frames == 700
    assert v1.telemetry is not None and v1.telemetry.exists()
    # annotations may point at a not-yet-written file
    v3 = manifest.video("v3")
    assert v3.annotations is not None and not v3.annotations.exists()


def test_manifest_rejects_duplicate_ids(tmp_path):
    payload = {
        "dataset_id": "d",
        "videos": [
            {"id": "a", "fps": 25, "width": 10, "height": 10},
            {"id": "a", "fps": 25, "width": 10, "height": 10},
        ],
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ManifestError, match="duplicate"):
        formats.load_manifest(path)


def test_manifest_rejects_missing_referenced_file(tmp_path):
    payload = {
        "dataset_id": "d",
        "videos": [
            {"id": "a", "fps": 25, "width": 10, "height": 10, "telemetry": "nope.csv"},
        ],
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ManifestError, match="nope.csv"):
        formats.load_manifest(path)


def test_manifest_rejects_bad_fps(tmp_path):
    payload = {"dataset_id": "d",
               "videos": [{"id": "a", "fps": 0, "width": 10, "height": 10}]}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(payload))
    with pytest.raises(ManifestError, match="fps"):
        formats.load_manifest(path)


# ---------------------------------------------------------------------------
# annotation documents


def _doc():
    return AnnotationDoc(
        video_id="v", revision=3, n_frames=100,
        longitudinal=(Span(0, 49, "Maintain"), Span(50, 99, "SpeedUp")),
        lateral=(Span(10, 19, "turn"),),
        context_events=(
            ContextEvent(crossing_frame=30, intersection_type="signalized",
                         priority="yield", yield_onset_frame=20),
        ),
    )


def test_annotation_doc_round_trip(tmp_path):
    path = tmp_path / "a.json"
    formats.write_annotation_doc(path, _doc())
    assert formats.read_annotation_doc(path) == _doc()


def test_annotation_dump_is_canonical():
    a = formats.dump_annotation_doc(_doc())
    b = formats.dump_annotation_doc(_doc())
    assert a == b
    assert a.endswith("\n")
    parsed = json.loads(a)
    assert list(parsed) == sorted(parsed)


def test_annotation_doc_rejects_overlapping_spans():
    with pytest.raises(AnnotationError, match="overlap"):
        AnnotationDoc(
            video_id="v", revision=0, n_frames=10,
            longitudinal=(Span(0, 5, "Maintain"), Span(5, 9, "SpeedUp")),
            lateral=(), context_events=(),
        )


def test_annotation_doc_rejects_out_of_range_event():
    with pytest.raises(AnnotationError, match="crossing_frame"):
        AnnotationDoc(
            video_id="v", revision=0, n_frames=10,
            longitudinal=(), lateral=(),
            context_events=(
                ContextEvent(crossing_frame=10, intersection_type="signalized",
                             priority=None),
            ),
        )


def test_annotation_from_dict_names_bad_field():
    with pytest.raises(AnnotationError, match="revision"):
        formats.annotation_doc_from_dict({
            "video_id": "v", "revision": "x", "n_frames": 5,
            "longitudinal": [], "lateral": [], "context_events": [],
        })


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = tmp_path / "out.txt"
    formats.write_text_atomic(path, "hello\n")
    assert path.read_text() == "hello\n"
    leftovers = [p for p in tmp_path.iterdir() if p != path]
    assert leftovers == []
