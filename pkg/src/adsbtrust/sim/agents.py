"""Kinematic aircraft agents and the receiver model that observes them."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

from .. import kernels
from ..codec import AdsbRecord

KT_TO_MPS = 1852.0 / 3600.0
MAX_TURN_RATE_DPS = 3.0
CAPTURE_RADIUS_M = 1852.0
DEFAULT_EPOCH = 1_700_000_000.0


@dataclass(frozen=True)
class Normal:
    kind: str = "normal"


@dataclass(frozen=True)
class Spoofed:
    jump_km: float
    at_time: float
    bearing_deg: float = 90.0
    kind: str = "spoofed"


@dataclass(frozen=True)
class Replayed:
    delay_s: float
    at_time: float = 0.0
    kind: str = "replayed"


@dataclass(frozen=True)
class Silent:
    start: float
    end: float
    kind: str = "silent"


Behavior = Union[Normal, Spoofed, Replayed, Silent]


def behavior_from_dict(data: Optional[dict]) -> Behavior:
    if not data:
        return Normal()
    data = dict(data)
    kind = data.pop("kind", "normal")
    cls = {"normal": Normal, "spoofed": Spoofed, "replayed": Replayed, "silent": Silent}[kind]
    return cls(**data)


@dataclass(frozen=True)
class AgentState:
    lat: float
    lon: float
    altitude_ft: float
    ground_speed_kt: float
    track_deg: float
    vertical_rate_fpm: float = 0.0


@dataclass(frozen=True)
class AircraftAgent:
    icao: str
    state: AgentState
    waypoints: tuple = ()
    behavior: Behavior = field(default_factory=Normal)
    report_period_s: float = 1.0
    callsign: Optional[str] = None
    t: float = 0.0
    arrived: bool = False

    def to_dict(self) -> dict:
        return {
            "icao": self.icao,
            "callsign": self.callsign,
            "lat": self.state.lat,
            "lon": self.state.lon,
            "altitude_ft": self.state.altitude_ft,
            "ground_speed_kt": self.state.ground_speed_kt,
            "track_deg": self.state.track_deg,
            "vertical_rate_fpm": self.state.vertical_rate_fpm,
            "waypoints": [list(w) for w in self.waypoints],
            "behavior": {k: v for k, v in self.behavior.__dict__.items()},
            "report_period_s": self.report_period_s,
            "t": self.t,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AircraftAgent":
        state = AgentState(
            float(data["lat"]),
            float(data["lon"]),
            float(data.get("altitude_ft", 35000)),
            float(data.get("ground_speed_kt", 450)),
            float(data.get("track_deg", 0.0)) % 360.0,
            float(data.get("vertical_rate_fpm", 0.0)),
        )
        return cls(
            icao=str(data["icao"]).upper(),
            state=state,
            waypoints=tuple(tuple(map(float, w)) for w in data.get("waypoints", ())),
            behavior=behavior_from_dict(data.get("behavior")),
            report_period_s=float(data.get("report_period_s", 1.0)),
            callsign=data.get("callsign"),
            t=float(data.get("t", 0.0)),
        )


def _turn_toward(heading: float, target: float, max_turn: float) -> float:
    delta = (target - heading + 180.0) % 360.0 - 180.0
    delta = max(-max_turn, min(max_turn, delta))
    return (heading + delta) % 360.0


def step_agent(agent: AircraftAgent, dt_s: float) -> tuple[AircraftAgent, list]:
    """Advance ``agent`` by ``dt_s`` seconds; returns (agent, reached waypoints)."""
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    if agent.arrived:
        return replace(agent, t=agent.t + dt_s), []
    s = agent.state
    heading = s.track_deg
    waypoints = list(agent.waypoints)
    if waypoints:
        target = kernels.initial_bearing_deg(s.lat, s.lon, *waypoints[0])
        heading = _turn_toward(heading, target, MAX_TURN_RATE_DPS * dt_s)
    lat, lon = kernels.destination(s.lat, s.lon, heading, s.ground_speed_kt * KT_TO_MPS * dt_s)
    altitude = s.altitude_ft + s.vertical_rate_fpm * dt_s / 60.0
    reached = []
    arrived = False
    if waypoints:
        wlat, wlon = waypoints[0]
        dist = kernels.haversine_m(lat, lon, wlat, wlon)
        off = abs((kernels.initial_bearing_deg(lat, lon, wlat, wlon) - heading + 180.0) % 360.0 - 180.0)
        # capture radius, or already abeam and close: otherwise a wide turn orbits forever
        if dist <= CAPTURE_RADIUS_M or (off > 90.0 and dist <= 5 * CAPTURE_RADIUS_M):
            reached.append(waypoints.pop(0))
            arrived = not waypoints
    new_state = AgentState(lat, lon, altitude, s.ground_speed_kt, heading, s.vertical_rate_fpm)
    return replace(agent, state=new_state, waypoints=tuple(waypoints), t=agent.t + dt_s, arrived=arrived), reached


@dataclass(frozen=True)
class SensorModel:
    receiver_lat: float
    receiver_lon: float
    max_range_km: float = 370.0
    dropout_prob: float = 0.0
    pos_sigma_m: float = 0.0
    alt_sigma_ft: float = 0.0
    speed_sigma_kt: float = 0.0
    track_sigma_deg: float = 0.0
    vrate_sigma_fpm: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must be in [0, 1)")

    def in_range(self, lat: float, lon: float) -> bool:
        return kernels.haversine_m(self.receiver_lat, self.receiver_lon, lat, lon) <= self.max_range_km * 1000.0

    @classmethod
    def from_dict(cls, data: dict) -> "SensorModel":
        return cls(**data)


def _observe(agent: AircraftAgent, sensor: SensorModel, rng: random.Random, epoch: float) -> AdsbRecord:
    s = agent.state
    lat, lon = s.lat, s.lon
    if sensor.pos_sigma_m > 0:
        north, east = rng.gauss(0.0, sensor.pos_sigma_m), rng.gauss(0.0, sensor.pos_sigma_m)
        lat, lon = kernels.destination(lat, lon, math.degrees(math.atan2(east, north)) % 360.0, math.hypot(north, east))
    alt = s.altitude_ft + (rng.gauss(0.0, sensor.alt_sigma_ft) if sensor.alt_sigma_ft > 0 else 0.0)
    gs = s.ground_speed_kt + (rng.gauss(0.0, sensor.speed_sigma_kt) if sensor.speed_sigma_kt > 0 else 0.0)
    trk = s.track_deg + (rng.gauss(0.0, sensor.track_sigma_deg) if sensor.track_sigma_deg > 0 else 0.0)
    vr = s.vertical_rate_fpm + (rng.gauss(0.0, sensor.vrate_sigma_fpm) if sensor.vrate_sigma_fpm > 0 else 0.0)
    return AdsbRecord(
        icao=agent.icao,
        callsign=agent.callsign,
        lat_deg=lat,
        lon_deg=180.0 if lon == -180.0 else lon,
        altitude_ft=int(round(alt)),
        ground_speed_kt=max(0.0, gs),
        track_deg=trk % 360.0,
        vertical_rate_fpm=vr,
        timestamp=round(epoch + agent.t, 3),
    )


def observe(
    agent: AircraftAgent,
    sensor: SensorModel,
    rng: random.Random,
    history: Optional[Sequence[AdsbRecord]] = None,
    epoch: float = DEFAULT_EPOCH,
) -> tuple[Optional[AdsbRecord], Optional[AdsbRecord], str]:
    """Returns (emitted, genuine, outcome).

    ``genuine`` is the honest observation (kept by the engine for replay);
    ``outcome`` is one of emitted, out_of_range, dropout, silent.
    """
    s = agent.state
    if not sensor.in_range(s.lat, s.lon):
        return None, None, "out_of_range"
    if sensor.dropout_prob > 0 and rng.random() < sensor.dropout_prob:
        return None, None, "dropout"
    genuine = _observe(agent, sensor, rng, epoch)
    b = agent.behavior
    t = agent.t
    if isinstance(b, Silent) and b.start <= t < b.end:
        return None, genuine, "silent"
    if isinstance(b, Spoofed) and t >= b.at_time:
        lat, lon = kernels.destination(genuine.lat_deg, genuine.lon_deg, b.bearing_deg, b.jump_km * 1000.0)
        return replace(genuine, lat_deg=lat, lon_deg=lon), genuine, "emitted"
    if isinstance(b, Replayed) and t >= b.at_time and history:
        target = round(epoch + t - b.delay_s, 3)
        for old in reversed(history):
            if old.timestamp <= target + 1e-6:
                if target - old.timestamp <= agent.report_period_s:
                    return replace(old, timestamp=genuine.timestamp), genuine, "emitted"
                break
    return genuine, genuine, "emitted"


def emit_report(
    agent: AircraftAgent,
    sensor: SensorModel,
    rng: random.Random,
    history: Optional[Sequence[AdsbRecord]] = None,
    epoch: float = DEFAULT_EPOCH,
) -> Optional[AdsbRecord]:
    return observe(agent, sensor, rng, history, epoch)[0]
