"""AR trackables, overlay assets, and the site walk graph.

Resolution stays at the metadata level: markers and geofences map sensing
events to POIs, anchors are stored and served for clients to resolve
themselves, and navigation runs over an undirected waypoint graph.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Union

from .content import ContentStore
from .errors import (
    DuplicateMarkerError,
    UnknownMarkerError,
    UnknownPoiError,
    UnknownWaypointError,
    UnreachableError,
)

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on a spherical Earth."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class Marker:
    marker_code: str


@dataclass(frozen=True)
class Geofence:
    lat: float
    lon: float
    radius_m: float

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ValueError("geofence radius must be positive")
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise ValueError("geofence center out of range")


@dataclass(frozen=True)
class Anchor:
    """Site-local spatial anchor; never auto-resolved server-side."""

    x: float
    y: float
    z: float


TrackableKind = Union[Marker, Geofence, Anchor]


@dataclass(frozen=True)
class Trackable:
    id: str
    kind: TrackableKind
    poi_id: str
    overlay_refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class Transform:
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)  # w,x,y,z
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        norm = math.sqrt(sum(c * c for c in self.rotation))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"rotation quaternion norm {norm} not within 1e-6 of 1")
        if any(s <= 0 for s in self.scale):
            raise ValueError("scale components must be positive")


MEDIA_KINDS = ("model3d", "image", "audio", "text")


@dataclass(frozen=True)
class OverlayAsset:
    asset_id: str
    media_kind: str
    uri: str
    format_tag: str = ""
    transform: Transform = Transform()

    def __post_init__(self):
        if self.media_kind not in MEDIA_KINDS:
            raise ValueError(f"unknown media kind {self.media_kind!r}")


@dataclass
class SiteWalkGraph:
    """Undirected waypoint graph; POIs pin to waypoints via poi_anchor."""

    waypoints: dict[str, tuple[float, float]] = field(default_factory=dict)
    coords: str = "geo"  # "geo" (lat, lon) or "local" (x, y) meters
    edges: list[tuple[str, str, float]] = field(default_factory=list)
    poi_anchor: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for a, b, length in self.edges:
            if a not in self.waypoints or b not in self.waypoints:
                raise ValueError(f"edge ({a}, {b}) references unknown waypoint")
            if length <= 0:
                raise ValueError(f"edge ({a}, {b}) length must be positive")
        for poi_id, wp in self.poi_anchor.items():
            if wp not in self.waypoints:
                raise ValueError(f"poi {poi_id!r} anchored to unknown waypoint {wp!r}")

    def neighbors(self, waypoint: str) -> list[tuple[str, float]]:
        out = []
        for a, b, length in self.edges:
            if a == waypoint:
                out.append((b, length))
            elif b == waypoint:
                out.append((a, length))
        return out

    def straight_distance(self, p: tuple[float, float], waypoint: str) -> float:
        q = self.waypoints[waypoint]
        if self.coords == "geo":
            return haversine_m(p[0], p[1], q[0], q[1])
        return math.hypot(p[0] - q[0], p[1] - q[1])

    def nearest_waypoint(self, p: tuple[float, float]) -> str | None:
        if not self.waypoints:
            return None
        return min(self.waypoints, key=lambda w: (self.straight_distance(p, w), w))


def shortest_route(site: SiteWalkGraph, start: str, goal: str) -> tuple[list[str], float]:
    """Dijkstra; among equal-length routes returns the lexicographically
    smallest waypoint sequence."""
    if start not in site.waypoints:
        raise UnknownWaypointError(f"unknown waypoint {start!r}")
    if goal not in site.waypoints:
        raise UnknownWaypointError(f"unknown waypoint {goal!r}")
    if start == goal:
        return [start], 0.0
    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (start,))]
    done: set[str] = set()
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done.add(node)
        if node == goal:
            return list(path), dist
        for nxt, length in sorted(site.neighbors(node)):
            if nxt not in done:
                heapq.heappush(heap, (dist + length, path + (nxt,)))
    raise UnreachableError(f"no walk path from {start!r} to {goal!r}")


class ARRepository:
    """Read-mostly registry of trackables and assets, plus navigation."""

    def __init__(self, site: SiteWalkGraph | None = None, known_pois: set[str] | None = None):
        self.site = site or SiteWalkGraph()
        self.known_pois = known_pois if known_pois is not None else set()
        self.trackables: dict[str, Trackable] = {}
        self.assets: dict[str, OverlayAsset] = {}
        self._marker_index: dict[str, str] = {}

    def register_trackable(self, trackable: Trackable) -> None:
        if self.known_pois and trackable.poi_id not in self.known_pois:
            raise UnknownPoiError(f"trackable {trackable.id!r}: unknown poi {trackable.poi_id!r}")
        if isinstance(trackable.kind, Marker):
            code = trackable.kind.marker_code
            if code in self._marker_index and self._marker_index[code] != trackable.id:
                raise DuplicateMarkerError(f"marker code {code!r} already registered")
            self._marker_index[code] = trackable.id
        self.trackables[trackable.id] = trackable

    def register_asset(self, asset: OverlayAsset) -> None:
        self.assets[asset.asset_id] = asset

    def resolve_marker(self, marker_code: str) -> tuple[Trackable, str]:
        tid = self._marker_index.get(marker_code)
        if tid is None:
            raise UnknownMarkerError(f"unknown marker code {marker_code!r}")
        trackable = self.trackables[tid]
        return trackable, trackable.poi_id

    def resolve_position(self, lat: float, lon: float) -> list[tuple[Trackable, float]]:
        """Geofences containing the point, nearest center first; ties go to
        the smaller radius, then the trackable id."""
        hits = []
        for trackable in self.trackables.values():
            fence = trackable.kind
            if not isinstance(fence, Geofence):
                continue
            d = haversine_m(lat, lon, fence.lat, fence.lon)
            if d <= fence.radius_m:
                hits.append((trackable, d))
        hits.sort(key=lambda pair: (pair[1], pair[0].kind.radius_m, pair[0].id))
        return hits

    def nav_route(self, from_waypoint: str, to_poi: str) -> tuple[list[str], float]:
        anchor = self.site.poi_anchor.get(to_poi)
        if anchor is None:
            raise UnknownPoiError(f"poi {to_poi!r} is not anchored to the walk graph")
        return shortest_route(self.site, from_waypoint, anchor)

    def get_overlays(self, poi_id: str, content: ContentStore) -> list[tuple[OverlayAsset, str | None]]:
        """Assets for a POI joined with its latest published body (only
        published content is ever attached)."""
        if self.known_pois and poi_id not in self.known_pois:
            raise UnknownPoiError(f"unknown poi {poi_id!r}")
        version = content.fetch_published(poi_id)
        body = version.body if version else None
        out: list[tuple[OverlayAsset, str | None]] = []
        for trackable in sorted(self.trackables.values(), key=lambda t: t.id):
            if trackable.poi_id != poi_id:
                continue
            for ref in trackable.overlay_refs:
                asset = self.assets.get(ref)
                if asset is not None:
                    out.append((asset, body))
        return out


# --- JSON (de)serialization -------------------------------------------------

def trackable_to_dict(t: Trackable) -> dict:
    if isinstance(t.kind, Marker):
        kind = {"kind": "marker", "marker_code": t.kind.marker_code}
    elif isinstance(t.kind, Geofence):
        kind = {"kind": "geofence", "lat": t.kind.lat, "lon": t.kind.lon, "radius_m": t.kind.radius_m}
    else:
        kind = {"kind": "anchor", "x": t.kind.x, "y": t.kind.y, "z": t.kind.z}
    return {"id": t.id, "poi_id": t.poi_id, "overlay_refs": list(t.overlay_refs), **kind}


def trackable_from_dict(doc: dict) -> Trackable:
    kind_name = doc["kind"]
    if kind_name == "marker":
        kind: TrackableKind = Marker(marker_code=doc["marker_code"])
    elif kind_name == "geofence":
        kind = Geofence(lat=float(doc["lat"]), lon=float(doc["lon"]), radius_m=float(doc["radius_m"]))
    elif kind_name == "anchor":
        kind = Anchor(x=float(doc["x"]), y=float(doc["y"]), z=float(doc["z"]))
    else:
        raise ValueError(f"unknown trackable kind {kind_name!r}")
    return Trackable(
        id=doc["id"], kind=kind, poi_id=doc["poi_id"],
        overlay_refs=tuple(doc.get("overlay_refs", ())),
    )


def asset_to_dict(a: OverlayAsset) -> dict:
    return {
        "asset_id": a.asset_id,
        "media_kind": a.media_kind,
        "uri": a.uri,
        "format_tag": a.format_tag,
        "transform": {
            "position": list(a.transform.position),
            "rotation": list(a.transform.rotation),
            "scale": list(a.transform.scale),
        },
    }


def asset_from_dict(doc: dict) -> OverlayAsset:
    tf = doc.get("transform", {})
    transform = Transform(
        position=tuple(tf.get("position", (0.0, 0.0, 0.0))),
        rotation=tuple(tf.get("rotation", (1.0, 0.0, 0.0, 0.0))),
        scale=tuple(tf.get("scale", (1.0, 1.0, 1.0))),
    )
    return OverlayAsset(
        asset_id=doc["asset_id"],
        media_kind=doc["media_kind"],
        uri=doc["uri"],
        format_tag=doc.get("format_tag", ""),
        transform=transform,
    )


def walkgraph_to_dict(site: SiteWalkGraph) -> dict:
    return {
        "coords": site.coords,
        "waypoints": {w: list(c) for w, c in sorted(site.waypoints.items())},
        "edges": [[a, b, length] for a, b, length in site.edges],
        "poi_anchor": dict(sorted(site.poi_anchor.items())),
    }


def walkgraph_from_dict(doc: dict) -> SiteWalkGraph:
    return SiteWalkGraph(
        waypoints={w: (float(c[0]), float(c[1])) for w, c in doc.get("waypoints", {}).items()},
        coords=doc.get("coords", "geo"),
        edges=[(a, b, float(length)) for a, b, length in doc.get("edges", ())],
        poi_anchor=dict(doc.get("poi_anchor", {})),
    )
