"""Discrete-event engine driving agents, attacks and the feedback loop."""

from __future__ import annotations

import heapq
import json
import logging
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

from ..codec import AdsbRecord, records_to_csv
from .agents import (
    DEFAULT_EPOCH,
    AircraftAgent,
    AgentState,
    Replayed,
    SensorModel,
    Silent,
    Spoofed,
    observe,
    step_agent,
)

log = logging.getLogger(__name__)

EVENT_KINDS = ("emit_report", "waypoint_reached", "attack_trigger", "feedback_tick")
MAX_SCALE = 8


class SimError(Exception):
    pass


class ScheduleError(SimError):
    pass


class UnknownAgent(SimError, KeyError):
    pass


class BadParams(SimError, ValueError):
    pass


@dataclass(frozen=True)
class SimEvent:
    t: float
    seq: int
    kind: str
    subject: str
    data: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> str:
        doc = {"t": round(self.t, 6), "seq": self.seq, "kind": self.kind, "subject": self.subject, "data": self.data}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class FeedbackConfig:
    high_water: float
    low_water: float
    period_s: float = 10.0
    cap: int = MAX_SCALE

    def __post_init__(self):
        if not self.low_water < self.high_water:
            raise BadParams("low_water must be below high_water")
        if self.period_s <= 0:
            raise BadParams("feedback period must be positive")


class FeedbackController:
    """Doubles the report-period scale above high water, resets below low water.

    Between the two marks nothing changes. The suspicion threshold is not an
    input and is never touched.
    """

    def __init__(self, config: FeedbackConfig):
        self.config = config
        self.scale = 1

    def tick(self, metrics: dict) -> dict:
        queue = float(metrics.get("fog_queue_len", 0))
        if queue > self.config.high_water:
            self.scale = min(self.scale * 2, self.config.cap)
        elif queue < self.config.low_water:
            self.scale = 1
        return {"report_period_scale": self.scale, "threshold_unchanged": True}


def feedback_tick(controller: FeedbackController, metrics: dict) -> dict:
    return controller.tick(metrics)


@dataclass(frozen=True)
class DosFlood:
    rate: float
    duration_s: float
    start: float = 0.0
    icao: str = "DEAD00"


@dataclass(frozen=True)
class Scenario:
    agents: tuple = ()
    sensor: SensorModel = field(default_factory=lambda: SensorModel(0.0, 0.0))
    floods: tuple = ()
    feedback: Optional[FeedbackConfig] = None
    epoch: float = DEFAULT_EPOCH
    name: str = "scenario"

    def agent(self, icao: str) -> AircraftAgent:
        for a in self.agents:
            if a.icao == icao.upper():
                return a
        raise UnknownAgent(icao)

    # -- JSON --------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "epoch": self.epoch,
            "sensor": dict(self.sensor.__dict__),
            "agents": [a.to_dict() for a in self.agents],
            "attacks": [{"kind": "dos_flood", **f.__dict__} for f in self.floods],
            "feedback": None if self.feedback is None else dict(self.feedback.__dict__),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        sensor = SensorModel.from_dict(data.get("sensor", {"receiver_lat": 0.0, "receiver_lon": 0.0}))
        fb = data.get("feedback")
        scen = cls(
            agents=tuple(AircraftAgent.from_dict(a) for a in data.get("agents", ())),
            sensor=sensor,
            feedback=FeedbackConfig(**fb) if fb else None,
            epoch=float(data.get("epoch", DEFAULT_EPOCH)),
            name=data.get("name", "scenario"),
        )
        for attack in data.get("attacks", ()):
            attack = dict(attack)
            scen = inject_attack(scen, attack.pop("kind"), attack)
        return scen


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return Scenario.from_dict(json.load(fh))


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scenario.to_json())


def _positive(params: dict, name: str, default=None) -> float:
    value = params.get(name, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
        raise BadParams(f"{name} must be a positive number")
    return float(value)


def _non_negative(params: dict, name: str, default=0.0) -> float:
    value = params.get(name, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
        raise BadParams(f"{name} must be a non-negative number")
    return float(value)


def inject_attack(scenario: Scenario, kind: str, params: dict) -> Scenario:
    params = dict(params)
    if kind == "dos_flood":
        flood = DosFlood(
            rate=_positive(params, "rate"),
            duration_s=_positive(params, "duration_s"),
            start=_non_negative(params, "start"),
            icao=str(params.get("icao", "DEAD00")).upper(),
        )
        return replace(scenario, floods=scenario.floods + (flood,))
    if kind not in ("spoof", "replay", "silence"):
        raise BadParams(f"unknown attack kind {kind!r}")
    if "icao" not in params:
        raise BadParams("icao is required")
    target = scenario.agent(str(params["icao"]))
    if kind == "spoof":
        behavior = Spoofed(
            jump_km=_positive(params, "jump_km"),
            at_time=_non_negative(params, "at_time"),
            bearing_deg=float(params.get("bearing_deg", 90.0)) % 360.0,
        )
    elif kind == "replay":
        behavior = Replayed(delay_s=_positive(params, "delay_s"), at_time=_non_negative(params, "at_time"))
    else:
        start, end = _non_negative(params, "start"), _non_negative(params, "end")
        if end <= start:
            raise BadParams("silence end must follow start")
        behavior = Silent(start, end)
    agents = tuple(replace(a, behavior=behavior) if a.icao == target.icao else a for a in scenario.agents)
    return replace(scenario, agents=agents)


@dataclass
class Counters:
    scheduled_emits: int = 0
    emitted: int = 0
    range_drops: int = 0
    dropout_drops: int = 0
    silent_drops: int = 0
    flood_emits: int = 0


@dataclass
class SimResult:
    events: list
    records: list  # agent records, in emission order
    truth: list  # (timestamp, icao, AgentState) ground truth per emitted record
    flood_records: list
    counters: Counters
    final_agents: dict
    scales: list = field(default_factory=list)

    def log_bytes(self) -> bytes:
        return "".join(e.to_json() + "\n" for e in self.events).encode("utf-8")

    def write_log(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.log_bytes())

    def csv_text(self) -> str:
        return records_to_csv(self.records)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.csv_text())


MetricsFn = Callable[[float], dict]


class _Queue:
    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.now = 0.0

    def schedule(self, t: float, kind: str, subject: str, data: Optional[dict] = None) -> None:
        if t < self.now:
            raise ScheduleError(f"{kind} at {t} is before the clock ({self.now})")
        heapq.heappush(self._heap, (t, self._seq, kind, subject, data or {}))
        self._seq += 1

    def pop(self):
        t, seq, kind, subject, data = heapq.heappop(self._heap)
        self.now = t
        return SimEvent(t, seq, kind, subject, data)

    def peek_t(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None


def run(
    scenario: Scenario,
    seed: int,
    horizon_s: float,
    metrics_fn: Optional[MetricsFn] = None,
    on_record: Optional[Callable[[AdsbRecord], None]] = None,
) -> SimResult:
    """Run ``scenario`` until ``horizon_s`` simulated seconds.

    With no ``metrics_fn`` the feedback loop sees the number of records
    emitted since its previous tick as the fog queue length.
    """
    if horizon_s < 0:
        raise BadParams("horizon_s must be non-negative")
    rng = random.Random(seed)
    q = _Queue()
    agents = {a.icao: a for a in scenario.agents}
    history: dict[str, list] = {icao: [] for icao in agents}
    counters = Counters()
    events: list[SimEvent] = []
    records: list[AdsbRecord] = []
    truth: list = []
    flood_records: list[AdsbRecord] = []
    scales: list = []
    controller = FeedbackController(scenario.feedback) if scenario.feedback else None
    since_tick = 0

    for a in scenario.agents:
        q.schedule(a.t, "emit_report", a.icao)
        b = a.behavior
        at = getattr(b, "at_time", None)
        if isinstance(b, Silent):
            at = b.start
        if at is not None:
            q.schedule(at, "attack_trigger", a.icao, {"attack": b.kind})
    for i, flood in enumerate(scenario.floods):
        q.schedule(flood.start, "attack_trigger", flood.icao, {"attack": "dos_flood", "rate": flood.rate})
        n = int(round(flood.rate * flood.duration_s))
        for k in range(n):
            q.schedule(flood.start + k / flood.rate, "emit_report", flood.icao, {"attack": "dos_flood", "burst": i})
    if controller:
        q.schedule(scenario.feedback.period_s, "feedback_tick", "feedback")

    while q.peek_t() is not None and q.peek_t() <= horizon_s:
        ev = q.pop()
        if ev.kind == "emit_report" and ev.data.get("attack") == "dos_flood":
            rec = AdsbRecord(
                icao=ev.subject, callsign=None, lat_deg=scenario.sensor.receiver_lat,
                lon_deg=scenario.sensor.receiver_lon, altitude_ft=0, ground_speed_kt=0.0,
                track_deg=0.0, vertical_rate_fpm=0.0, timestamp=round(scenario.epoch + ev.t, 3),
            )
            flood_records.append(rec)
            counters.flood_emits += 1
            since_tick += 1
            events.append(ev)
            continue
        if ev.kind == "emit_report":
            agent = agents[ev.subject]
            if ev.t > agent.t:
                agent, reached = step_agent(agent, ev.t - agent.t)
                for wp in reached:
                    q.schedule(ev.t, "waypoint_reached", agent.icao, {"waypoint": list(wp)})
                agents[agent.icao] = agent
            counters.scheduled_emits += 1
            emitted, genuine, outcome = observe(agent, scenario.sensor, rng, history[agent.icao], scenario.epoch)
            if genuine is not None:
                history[agent.icao].append(genuine)
            data = {"outcome": outcome}
            if outcome == "emitted":
                counters.emitted += 1
                since_tick += 1
                records.append(emitted)
                truth.append((emitted.timestamp, agent.icao, agent.state))
                data["record"] = emitted.to_dict()
                if on_record is not None:
                    on_record(emitted)
            elif outcome == "out_of_range":
                counters.range_drops += 1
            elif outcome == "dropout":
                counters.dropout_drops += 1
            else:
                counters.silent_drops += 1
            events.append(SimEvent(ev.t, ev.seq, ev.kind, ev.subject, data))
            scale = controller.scale if controller else 1
            q.schedule(ev.t + agent.report_period_s * scale, "emit_report", agent.icao)
            continue
        if ev.kind == "feedback_tick":
            metrics = metrics_fn(ev.t) if metrics_fn else {"fog_queue_len": since_tick, "edge_cpu_proxy": 0.0}
            since_tick = 0
            tuning = controller.tick(metrics)
            scales.append((ev.t, tuning["report_period_scale"]))
            events.append(replace(ev, data={"metrics": metrics, **tuning}))
            q.schedule(ev.t + scenario.feedback.period_s, "feedback_tick", "feedback")
            continue
        events.append(ev)

    log.debug("simulation finished: %d events, %s", len(events), counters)
    return SimResult(events, records, truth, flood_records, counters, agents, scales)
