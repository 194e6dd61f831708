"""Edge-tier track bookkeeping and movement feature extraction.

Tracks are keyed by ICAO address. Each holds a bounded FIFO of recent points
inside a configured airspace box; features are computed from the last two
points and shipped to the fog tier as a JSON :class:`FeatureMap`.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Deque, Iterable, NamedTuple, Optional

from . import kernels
from .codec import AdsbRecord

DEFAULT_WINDOW = 32
DEFAULT_TTL_S = 60.0
METERS_PER_NM = 1852.0


class TrackerError(ValueError):
    pass


class OutOfOrderRecord(TrackerError):
    pass


class OutOfBoxIgnored(TrackerError):
    pass


class InsufficientHistory(TrackerError):
    pass


@dataclass(frozen=True)
class AirspaceBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    @classmethod
    def world(cls) -> "AirspaceBox":
        return cls(-90.0, 90.0, -180.0, 180.0)


class TrackPoint(NamedTuple):
    timestamp: float
    lat: float
    lon: float
    altitude_ft: int
    ground_speed_kt: float
    track_deg: float


@dataclass
class Track:
    icao: str
    first_seen: float
    key: str
    window: int
    points: Deque[TrackPoint] = field(default_factory=deque)

    @property
    def last(self) -> TrackPoint:
        return self.points[-1]


@dataclass(frozen=True)
class TrackClosed:
    icao: str
    key: str
    reason: str  # "left_box" | "stale"
    at: float


@dataclass(frozen=True)
class FeatureVector:
    icao: str
    first_seen: float
    speed_delta_kt: float
    heading_delta_deg: float
    vertical_rate_fpm: float
    implied_speed_kt: float
    report_gap_s: float
    window_len: int
    # last reported state, needed by the fog tier for context and ratio rules
    ground_speed_kt: float
    lat_deg: float
    lon_deg: float
    timestamp: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if isinstance(value, float) and not math.isfinite(value):
                raise ValueError(f"{name} is not finite")


def wrap_heading_delta(previous_deg: float, current_deg: float) -> float:
    """Signed turn from ``previous_deg`` to ``current_deg`` in [-180, 180)."""
    return (current_deg - previous_deg + 180.0) % 360.0 - 180.0


def extract_features(track: Track) -> FeatureVector:
    if len(track.points) < 2:
        raise InsufficientHistory(f"{track.icao}: {len(track.points)} point(s)")
    prev, last = track.points[-2], track.points[-1]
    dt = last.timestamp - prev.timestamp
    dist_m = kernels.haversine_m(prev.lat, prev.lon, last.lat, last.lon)
    return FeatureVector(
        icao=track.icao,
        first_seen=track.first_seen,
        speed_delta_kt=last.ground_speed_kt - prev.ground_speed_kt,
        heading_delta_deg=wrap_heading_delta(prev.track_deg, last.track_deg),
        vertical_rate_fpm=(last.altitude_ft - prev.altitude_ft) * 60.0 / dt,
        implied_speed_kt=dist_m / METERS_PER_NM * 3600.0 / dt,
        report_gap_s=dt,
        window_len=len(track.points),
        ground_speed_kt=last.ground_speed_kt,
        lat_deg=last.lat,
        lon_deg=last.lon,
        timestamp=last.timestamp,
    )


def _first_seen_key(first_seen: float) -> str:
    return f"{first_seen:.3f}"


class TrackStore:
    """Per-ICAO track queues for one input stream.

    Single writer: ``update`` and ``evict_stale`` must be called from one
    thread. ``snapshot`` hands out independent copies for readers.
    """

    def __init__(self, box: Optional[AirspaceBox] = None, window: int = DEFAULT_WINDOW):
        if window < 2:
            raise ValueError("window must hold at least two points")
        self.box = box or AirspaceBox.world()
        self.window = window
        self.tracks: dict[str, Track] = {}
        self.closed: list[TrackClosed] = []
        self.points_evicted = 0
        self.records_rejected = 0
        self._used_keys: set[str] = set()

    def __len__(self) -> int:
        return len(self.tracks)

    @property
    def total_points(self) -> int:
        return sum(len(t.points) for t in self.tracks.values())

    def _new_key(self, icao: str, first_seen: float) -> str:
        key = _first_seen_key(first_seen)
        if key in self._used_keys:
            key = f"{key}-{icao}"
            n = 1
            base = key
            while key in self._used_keys:
                n += 1
                key = f"{base}-{n}"
        self._used_keys.add(key)
        return key

    def _close(self, icao: str, reason: str, at: float) -> TrackClosed:
        track = self.tracks.pop(icao)
        self.points_evicted += len(track.points)
        event = TrackClosed(icao, track.key, reason, at)
        self.closed.append(event)
        return event

    def update(self, record: AdsbRecord) -> Optional[Track]:
        """Append ``record`` to its track; returns the track or None if closed."""
        track = self.tracks.get(record.icao)
        if track is not None and record.timestamp <= track.last.timestamp:
            self.records_rejected += 1
            raise OutOfOrderRecord(
                f"{record.icao}: {record.timestamp} not after {track.last.timestamp}"
            )
        if not self.box.contains(record.lat_deg, record.lon_deg):
            self.records_rejected += 1
            if track is None:
                raise OutOfBoxIgnored(f"{record.icao} outside the airspace box")
            self._close(record.icao, "left_box", record.timestamp)
            return None
        if track is None:
            track = Track(
                icao=record.icao,
                first_seen=record.timestamp,
                key=self._new_key(record.icao, record.timestamp),
                window=self.window,
            )
            self.tracks[record.icao] = track
        track.points.append(
            TrackPoint(
                record.timestamp,
                record.lat_deg,
                record.lon_deg,
                record.altitude_ft,
                record.ground_speed_kt,
                record.track_deg,
            )
        )
        if len(track.points) > self.window:
            track.points.popleft()
            self.points_evicted += 1
        return track

    def evict_stale(self, now: float, ttl_s: float = DEFAULT_TTL_S) -> list[TrackClosed]:
        if ttl_s <= 0:
            raise ValueError("ttl_s must be positive")
        stale = [icao for icao, t in self.tracks.items() if now - t.last.timestamp > ttl_s]
        return [self._close(icao, "stale", now) for icao in stale]

    def features(self) -> "FeatureMap":
        fmap = FeatureMap()
        for track in self.tracks.values():
            if len(track.points) >= 2:
                fmap.entries[track.key] = extract_features(track)
        return fmap

    def snapshot(self) -> dict[str, Track]:
        return {
            icao: Track(t.icao, t.first_seen, t.key, t.window, deque(t.points))
            for icao, t in self.tracks.items()
        }


def update_track(store: TrackStore, record: AdsbRecord) -> TrackStore:
    store.update(record)
    return store


def evict_stale(store: TrackStore, now: float, ttl_s: float = DEFAULT_TTL_S) -> TrackStore:
    store.evict_stale(now, ttl_s)
    return store


# --------------------------------------------------------------------------
# Serialization

FEATURE_FIELDS = tuple(FeatureVector.__dataclass_fields__)


def _round(value):
    if isinstance(value, float):
        value = round(value, 6)
        return 0.0 if value == 0 else value
    return value


@dataclass
class FeatureMap:
    entries: dict[str, FeatureVector] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> str:
        return serialize_features(self).decode("utf-8")

    @classmethod
    def from_json(cls, text) -> "FeatureMap":
        return parse_features(text)


def serialize_features(fmap: FeatureMap) -> bytes:
    """Deterministic JSON: sorted keys, floats rounded to 6 fractional digits."""
    doc = {
        key: {name: _round(getattr(fv, name)) for name in FEATURE_FIELDS}
        for key, fv in fmap.entries.items()
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def feature_from_dict(data: dict) -> FeatureVector:
    if not isinstance(data, dict):
        raise ValueError("feature entry must be an object")
    missing = [f for f in FEATURE_FIELDS if f not in data]
    if missing:
        raise ValueError(f"feature entry missing {missing}")
    values = {}
    for name in FEATURE_FIELDS:
        raw = data[name]
        if name == "icao":
            if not isinstance(raw, str):
                raise ValueError("icao must be a string")
            values[name] = raw
        elif name == "window_len":
            if isinstance(raw, bool) or not isinstance(raw, int):
                raise ValueError("window_len must be an integer")
            values[name] = raw
        else:
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise ValueError(f"{name} must be a number")
            values[name] = float(raw)
    return FeatureVector(**values)


def parse_features(text) -> FeatureMap:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("feature map must be a JSON object")
    return FeatureMap({key: feature_from_dict(value) for key, value in doc.items()})


def track_records(store: TrackStore, records: Iterable[AdsbRecord]) -> int:
    """Feed records, swallowing per-record rejections; returns accepted count."""
    accepted = 0
    for rec in records:
        try:
            if store.update(rec) is not None:
                accepted += 1
        except TrackerError:
            continue
    return accepted
