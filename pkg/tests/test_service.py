import threading

import pytest
from fastapi.testclient import TestClient

from gazeaudit import fixtures
from gazeaudit.model import SegmentationConfig
from gazeaudit.service import ServiceConfig, create_app


@pytest.fixture()
def rw(tmp_path):
    """A private dataset copy so write tests cannot touch the shared one."""
    return fixtures.build_demo_dataset(tmp_path / "ds")


@pytest.fixture()
def client(rw):
    app = create_app(ServiceConfig(manifest_path=rw.manifest_path))
    with TestClient(app) as c:
        yield c


def _doc(client, video_id):
    r = client.get(f"/api/videos/{video_id}/annotations")
    assert r.status_code == 200
    return r.json()


def _span(a, b, cat):
    return {"start_frame": a, "end_frame": b, "category": cat}


# ---------------------------------------------------------------------------
# reads


def test_list_videos(client):
    r = client.get("/api/videos")
    assert r.status_code == 200
    body = r.json()
    assert body["dataset_id"] == "demo"
    assert not body["read_only"]
    meta = {v["id"]: v for v in body["videos"]}
    assert set(meta) == {"v1", "v2", "v3"}
    assert meta["v1"]["n_frames"] == 700
    assert meta["v1"]["has_telemetry"] and meta["v1"]["has_gaze"]
    assert not meta["v3"]["has_telemetry"]


def test_video_meta_and_404(client):
    assert client.get("/api/videos/v2").json()["n_frames"] == 500
    r = client.get("/api/videos/v9")
    assert r.status_code == 404
    assert "unknown video" in r.json()["detail"]


def test_frame_image_endpoint(client):
    r = client.get("/api/videos/v3/frames/0")
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    assert r.content[:8] == b"\x89PNG\r\n\x1a\n"
    assert client.get("/api/videos/v3/frames/99").status_code == 404


def test_telemetry_endpoint(client):
    body = client.get("/api/videos/v1/telemetry").json()
    assert len(body["samples"]) == 700
    first = body["samples"][0]
    assert set(first) == {"frame", "t_sec", "speed_kmh", "lat", "lon", "heading_deg"}
    assert client.get("/api/videos/v3/telemetry").status_code == 404


def test_annotations_skeleton_for_unwritten_video(client):
    doc = _doc(client, "v3")
    assert doc == {
        "video_id": "v3", "revision": 0, "n_frames": 10,
        "longitudinal": [], "lateral": [], "context_events": [],
    }


def test_annotations_existing_file(client):
    doc = _doc(client, "v1")
    assert doc["revision"] == 0
    assert doc["n_frames"] == 700
    assert doc["longitudinal"][0] == _span(0, 99, "Maintain")


# ---------------------------------------------------------------------------
# writes


def test_put_round_trip_bumps_revision(client, rw):
    doc = _doc(client, "v3")
    doc["longitudinal"] = [_span(0, 9, "Maintain")]
    doc["lateral"] = [_span(2, 4, "turn")]
    doc["context_events"] = [{
        "crossing_frame": 5, "intersection_type": "signalized",
        "priority": "yield", "yield_onset_frame": 3,
    }]
    r = client.put("/api/videos/v3/annotations", json=doc)
    assert r.status_code == 200
    assert r.json() == {"video_id": "v3", "revision": 1}

    stored = _doc(client, "v3")
    assert stored["revision"] == 1
    assert stored["longitudinal"] == [_span(0, 9, "Maintain")]
    assert stored["lateral"] == [_span(2, 4, "turn")]
    assert stored["context_events"][0]["yield_onset_frame"] == 3
    assert (rw.manifest.root / "annotations" / "v3.json").exists()


def test_put_with_stale_revision_conflicts(client):
    base = _doc(client, "v3")
    base["longitudinal"] = [_span(0, 9, "Maintain")]
    assert client.put("/api/videos/v3/annotations", json=base).status_code == 200

    stale = dict(base)
    stale["longitudinal"] = [_span(0, 9, "Stopped")]
    r = client.put("/api/videos/v3/annotations", json=stale)
    assert r.status_code == 409
    assert r.json()["detail"] == {"message": "stale revision", "current_revision": 1}
    # the stored document is untouched by the losing write
    assert _doc(client, "v3")["longitudinal"] == [_span(0, 9, "Maintain")]


def test_put_validation_failures(client):
    doc = _doc(client, "v3")
    wrong_video = dict(doc, video_id="v1", n_frames=700)
    r = client.put("/api/videos/v3/annotations", json=wrong_video)
    assert r.status_code == 422
    assert "does not match" in r.json()["detail"]

    wrong_frames = dict(doc, n_frames=11)
    r = client.put("/api/videos/v3/annotations", json=wrong_frames)
    assert r.status_code == 422
    assert "n_frames" in r.json()["detail"]

    overlapping = dict(doc)
    overlapping["longitudinal"] = [_span(0, 5, "Maintain"), _span(5, 9, "Stopped")]
    r = client.put("/api/videos/v3/annotations", json=overlapping)
    assert r.status_code == 422


def test_concurrent_puts_only_one_wins(client):
    base = _doc(client, "v3")
    a = dict(base, longitudinal=[_span(0, 9, "Maintain")])
    b = dict(base, longitudinal=[_span(0, 9, "Stopped")])
    codes = []
    lock = threading.Lock()

    def put(payload):
        r = client.put("/api/videos/v3/annotations", json=payload)
        with lock:
            codes.append(r.status_code)

    threads = [threading.Thread(target=put, args=(p,)) for p in (a, b)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(codes) == [200, 409]
    assert _doc(client, "v3")["revision"] == 1


def test_read_only_service_rejects_writes(rw):
    app = create_app(ServiceConfig(manifest_path=rw.manifest_path, read_only=True))
    with TestClient(app) as client:
        doc = _doc(client, "v3")
        r = client.put("/api/videos/v3/annotations", json=doc)
        assert r.status_code == 403
        assert client.get("/api/videos").json()["read_only"]


# ---------------------------------------------------------------------------
# auth


def test_explicit_token_guards_every_route(rw):
    app = create_app(ServiceConfig(manifest_path=rw.manifest_path, token="s3cret"))
    with TestClient(app) as client:
        assert client.get("/api/videos").status_code == 401
        bad = {"Authorization": "Bearer nope"}
        assert client.get("/api/videos", headers=bad).status_code == 401
        good = {"Authorization": "Bearer s3cret"}
        assert client.get("/api/videos", headers=good).status_code == 200
        assert client.get("/api/videos/v1/annotations", headers=good).status_code == 200


def test_token_from_environment(rw, monkeypatch):
    monkeypatch.setenv("GAZEAUDIT_TOKEN", "envtoken")
    app = create_app(ServiceConfig(manifest_path=rw.manifest_path))
    with TestClient(app) as client:
        assert client.get("/api/videos").status_code == 401
        ok = {"Authorization": "Bearer envtoken"}
        assert client.get("/api/videos", headers=ok).status_code == 200


# ---------------------------------------------------------------------------
# suggestions


def test_suggestions_recover_planted_structure(demo):
    cfg = ServiceConfig(
        manifest_path=demo.manifest_path,
        osm_path=demo.osm_path,
        segmentation=SegmentationConfig(median_window=1, penalty=fixtures.PLANTED_PENALTY),
    )
    with TestClient(create_app(cfg)) as client:
        body = client.get("/api/videos/v1/suggestions").json()
    assert body["notes"] == []
    labels = []
    for sp in body["longitudinal"]:
        labels.extend([sp["category"]] * (sp["end_frame"] - sp["start_frame"] + 1))
    assert labels == list(demo.videos["v1"].longitudinal_truth)
    crossings = {c["intersection_type"]: c["crossing_frame"] for c in body["context"]}
    assert crossings == dict(fixtures.OSM_JUNCTION_FRAMES)
    assert all(c["priority"] is None for c in body["context"])


def test_suggestions_without_telemetry_are_empty(demo):
    cfg = ServiceConfig(manifest_path=demo.manifest_path, osm_path=demo.osm_path)
    with TestClient(create_app(cfg)) as client:
        body = client.get("/api/videos/v3/suggestions").json()
    assert body == {"video_id": "v3", "longitudinal": [], "context": [], "notes": []}


# ---------------------------------------------------------------------------
# static frontend


def test_frontend_mount_serves_index(rw, tmp_path):
    front = tmp_path / "front"
    front.mkdir()
    (front / "index.html").write_text("<!doctype html><title>annotator</title>")
    app = create_app(ServiceConfig(manifest_path=rw.manifest_path, frontend_dir=front))
    with TestClient(app) as client:
        r = client.get("/")
        assert r.status_code == 200
        assert "annotator" in r.text
        # API routes still take precedence over the static mount
        assert client.get("/api/videos").status_code == 200
