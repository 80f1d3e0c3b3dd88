"""Road-context ingestion from offline OpenStreetMap extracts.

Parses highway geometry out of an OSM XML extract, derives intersection
candidates from node connectivity and tags, matches them against a GPS
track, and suggests an intersection type for each passage.  Priority
labels stay a manual annotation decision; statistics treat unlabeled
events as pending.
"""
from __future__ import annotations

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import OsmError
from .model import INTERSECTION_TYPES, PRIORITY_CLASSES, ContextEvent, TelemetrySample

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6371008.8

DEFAULT_MATCH_RADIUS_M = 25.0


@dataclass(frozen=True)
class OsmNode:
    id: int
    lat: float
    lon: float
    tags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OsmWay:
    id: int
    node_ids: tuple[int, ...]
    tags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StreetGraph:
    """Nodes and highway-tagged ways from one extract."""

    nodes: dict
    ways: dict

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {}
        for way in self.ways.values():
            for a, b in zip(way.node_ids, way.node_ids[1:]):
                adj.setdefault(a, set()).add(b)
                adj.setdefault(b, set()).add(a)
        return adj


@dataclass(frozen=True)
class IntersectionCandidate:
    """A node where roads meet.

    degree counts distinct neighbor nodes across highway ways (arms of
    the junction).  ramp_pattern marks nodes where a link road joins a
    through road.
    """

    node_id: int
    lat: float
    lon: float
    degree: int
    signal_tagged: bool
    roundabout_tagged: bool
    ramp_pattern: bool


@dataclass(frozen=True)
class RouteMatch:
    candidate: IntersectionCandidate
    frame: int
    distance_m: float


def parse_osm_extract(path) -> StreetGraph:
    """Parse an OSM XML extract, keeping only highway-tagged ways.

    Every node referenced by a kept way must be present; a dangling
    reference is reported with the offending way id.
    """
    try:
        tree = ET.parse(path)
    except ET.ParseError as e:
        raise OsmError(f"{path}: malformed XML: {e}") from e
    except OSError as e:
        raise OsmError(f"cannot read OSM extract: {e}") from e
    root = tree.getroot()
    if root.tag != "osm":
        raise OsmError(f"{path}: root element is {root.tag!r}, expected 'osm'")

    nodes: dict[int, OsmNode] = {}
    ways: dict[int, OsmWay] = {}
    for el in root:
        if el.tag == "node":
            try:
                nid = int(el.attrib["id"])
                lat = float(el.attrib["lat"])
                lon = float(el.attrib["lon"])
            except (KeyError, ValueError) as e:
                raise OsmError(f"{path}: malformed node element: {e}") from None
            tags = {t.attrib.get("k"): t.attrib.get("v") for t in el.findall("tag")}
            nodes[nid] = OsmNode(id=nid, lat=lat, lon=lon, tags=tags)
        elif el.tag == "way":
            try:
                wid = int(el.attrib["id"])
            except (KeyError, ValueError) as e:
                raise OsmError(f"{path}: malformed way element: {e}") from None
            refs = []
            for nd in el.findall("nd"):
                try:
                    refs.append(int(nd.attrib["ref"]))
                except (KeyError, ValueError):
                    raise OsmError(f"{path}: way {wid} has a malformed nd reference") from None
            tags = {t.attrib.get("k"): t.attrib.get("v") for t in el.findall("tag")}
            if "highway" not in tags:
                continue
            ways[wid] = OsmWay(id=wid, node_ids=tuple(refs), tags=tags)
    if not nodes and not ways:
        raise OsmError(f"{path}: empty extract")
    for way in ways.values():
        for ref in way.node_ids:
            if ref not in nodes:
                raise OsmError(f"way {way.id} references missing node {ref}")
    return StreetGraph(nodes=nodes, ways=ways)


def _is_link(way: OsmWay) -> bool:
    return str(way.tags.get("highway", "")).endswith("_link")


def intersection_candidates(graph: StreetGraph) -> list[IntersectionCandidate]:
    """Nodes that are junction candidates: at least three arms, or a
    link road merging into a through road.  Sorted by node id."""
    adj = graph.adjacency()
    ways_at: dict[int, list[OsmWay]] = {}
    for way in graph.ways.values():
        for nid in way.node_ids:
            ways_at.setdefault(nid, []).append(way)

    out: list[IntersectionCandidate] = []
    for nid in sorted(adj):
        degree = len(adj[nid])
        at_node = ways_at.get(nid, [])
        has_link = any(_is_link(w) for w in at_node)
        has_road = any(not _is_link(w) for w in at_node)
        ramp = has_link and has_road
        if degree < 3 and not ramp:
            continue
        node = graph.nodes[nid]
        out.append(IntersectionCandidate(
            node_id=nid,
            lat=node.lat,
            lon=node.lon,
            degree=degree,
            signal_tagged=node.tags.get("highway") == "traffic_signals",
            roundabout_tagged=any(w.tags.get("junction") == "roundabout" for w in at_node),
            ramp_pattern=ramp,
        ))
    return out


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def _local_xy(lat: float, lon: float, lat0: float, lon0: float) -> tuple[float, float]:
    # Equirectangular projection around (lat0, lon0); adequate at the
    # tens-of-meters scale the matching radius works on.
    x = math.radians(lon - lon0) * math.cos(math.radians(lat0)) * EARTH_RADIUS_M
    y = math.radians(lat - lat0) * EARTH_RADIUS_M
    return x, y


def _point_segment_dist_m(
    cand: IntersectionCandidate,
    a: TelemetrySample,
    b: TelemetrySample,
) -> float:
    ax, ay = _local_xy(a.lat, a.lon, cand.lat, cand.lon)
    bx, by = _local_xy(b.lat, b.lon, cand.lat, cand.lon)
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(ax, ay)
    t = max(0.0, min(1.0, -(ax * dx + ay * dy) / seg2))
    return math.hypot(ax + t * dx, ay + t * dy)


def find_route_intersections(
    track: Sequence[TelemetrySample],
    graph: StreetGraph,
    radius_m: float = DEFAULT_MATCH_RADIUS_M,
) -> list[RouteMatch]:
    """Match intersection candidates against a GPS track.

    A candidate produces one match per contiguous passage of the track
    polyline within the radius, so a loop that revisits the same
    junction yields several matches.  The matched frame is the track
    sample nearest the junction node within the passage.  Matches are
    ordered by frame.
    """
    if not track:
        raise OsmError("empty GPS track")
    if radius_m <= 0:
        raise OsmError("match radius must be positive")
    candidates = intersection_candidates(graph)
    matches: list[RouteMatch] = []
    if candidates:
        lat_lo = min(s.lat for s in track)
        lat_hi = max(s.lat for s in track)
        lon_lo = min(s.lon for s in track)
        lon_hi = max(s.lon for s in track)
        pad = math.degrees(radius_m / EARTH_RADIUS_M) * 2.0
        in_bounds = any(
            lat_lo - pad <= c.lat <= lat_hi + pad and lon_lo - pad <= c.lon <= lon_hi + pad
            for c in candidates
        )
        if not in_bounds:
            log.warning("GPS track lies entirely outside the extract; no matches possible")

    for cand in candidates:
        if len(track) == 1:
            seg_d = [haversine_m(cand.lat, cand.lon, track[0].lat, track[0].lon)]
        else:
            seg_d = [
                _point_segment_dist_m(cand, track[i], track[i + 1])
                for i in range(len(track) - 1)
            ]
        i = 0
        while i < len(seg_d):
            if seg_d[i] > radius_m:
                i += 1
                continue
            j = i
            while j < len(seg_d) and seg_d[j] <= radius_m:
                j += 1
            # Samples touching segments [i, j): indices i .. j (inclusive).
            hi = min(j, len(track) - 1)
            best = min(
                range(i, hi + 1),
                key=lambda k: haversine_m(cand.lat, cand.lon, track[k].lat, track[k].lon),
            )
            matches.append(RouteMatch(
                candidate=cand,
                frame=track[best].frame,
                distance_m=haversine_m(cand.lat, cand.lon, track[best].lat, track[best].lon),
            ))
            i = j
    matches.sort(key=lambda m: (m.frame, m.candidate.node_id))
    return matches


def classify_intersection(
    candidate: IntersectionCandidate,
    confirmed: Optional[str] = None,
) -> str:
    """Suggest an intersection type from tags and topology.

    A confirmed label, when given, wins over the suggestion.  Priority
    is never inferred here; it requires review of the actual right of
    way.
    """
    if confirmed is not None:
        if confirmed not in INTERSECTION_TYPES:
            raise OsmError(f"unknown intersection type {confirmed!r}")
        return confirmed
    if candidate.signal_tagged:
        return "signalized"
    if candidate.roundabout_tagged:
        return "roundabout"
    if candidate.ramp_pattern:
        return "highway_ramp"
    return "unsignalized"


@dataclass(frozen=True)
class ContextStats:
    """Counts of labeled context events per (type, priority) cell plus
    the events still awaiting a priority label."""

    counts: dict
    n_unlabeled: int

    def count(self, intersection_type: str, priority: str) -> int:
        return self.counts[(intersection_type, priority)]

    def type_total(self, intersection_type: str) -> int:
        return sum(self.counts[(intersection_type, p)] for p in PRIORITY_CLASSES)

    def priority_total(self, priority: str) -> int:
        return sum(self.counts[(t, priority)] for t in INTERSECTION_TYPES)

    @property
    def n_labeled(self) -> int:
        return sum(self.counts.values())


def context_statistics(events: Sequence[ContextEvent]) -> ContextStats:
    """Tabulate events by intersection type and priority.  Events with
    no priority label are counted separately and excluded from the
    grid."""
    counts = {(t, p): 0 for t in INTERSECTION_TYPES for p in PRIORITY_CLASSES}
    unlabeled = 0
    for ev in events:
        if ev.priority is None:
            unlabeled += 1
            continue
        counts[(ev.intersection_type, ev.priority)] += 1
    return ContextStats(counts=counts, n_unlabeled=unlabeled)


def suggest_context_events(
    track: Sequence[TelemetrySample],
    graph: StreetGraph,
    radius_m: float = DEFAULT_MATCH_RADIUS_M,
) -> list[ContextEvent]:
    """End-to-end suggestion pass: match the track against the extract
    and emit unlabeled context events at the crossing frames."""
    return [
        ContextEvent(
            crossing_frame=m.frame,
            intersection_type=classify_intersection(m.candidate),
            priority=None,
            yield_onset_frame=None,
        )
        for m in find_route_intersections(track, graph, radius_m)
    ]
