"""Latency, throughput and end-to-end detection experiments."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
import random
import statistics
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..codec import CodecError, FrameAssembler, encode_identification, encode_position, encode_velocity, parse_frame
from ..fusion import FogEngine, GridConfig, RuleSet
from ..gateway import DeploymentMode, Gateway, GatewayClient, bootstrap
from ..sim import DEFAULT_BOX, Scenario, Silent, run
from ..tracker import AirspaceBox, TrackerError, TrackStore, extract_features


class BenchError(RuntimeError):
    pass


class ServiceDown(BenchError):
    pass


class ChainStalled(BenchError):
    pass


class QueueOverflow(BenchError):
    def __init__(self, batch: int, detail: str = ""):
        super().__init__(f"batch {batch}: {detail}" if detail else f"batch {batch}")
        self.batch = batch


class ScenarioError(BenchError):
    pass


class IoError(BenchError):
    pass


# --------------------------------------------------------------------------
# Latency


@dataclass(frozen=True)
class ExperimentConfig:
    arch: str = "mono"
    ac: str = "off"
    n_requests: int = 1000
    link_delay_ms: float = 0.0
    seed: int = 0
    warmup_requests: int = 50
    frames_per_request: int = 2000

    def __post_init__(self):
        if self.arch not in ("micro", "mono"):
            raise ValueError(f"arch must be micro or mono, not {self.arch!r}")
        if self.ac not in ("off", "blendcac"):
            raise ValueError(f"ac must be off or blendcac, not {self.ac!r}")
        if not self.n_requests > self.warmup_requests >= 0:
            raise ValueError("need n_requests > warmup_requests >= 0")
        if self.link_delay_ms < 0 or self.frames_per_request < 0:
            raise ValueError("link delay and frames per request must be non-negative")

    @property
    def hops(self) -> int:
        if self.arch == "mono":
            return 0
        return 2 if self.ac == "blendcac" else 1


@dataclass(frozen=True)
class LatencySample:
    request_id: str
    total_ms: float
    transport_ms: float
    auth_ms: float
    access_ms: float
    service_ms: float

    @property
    def stage_sum_ms(self) -> float:
        return self.transport_ms + self.auth_ms + self.access_ms + self.service_ms


@dataclass
class LatencyResult:
    config: ExperimentConfig
    samples: list
    elapsed_s: float

    @property
    def totals(self) -> list:
        return [s.total_ms for s in self.samples]

    def summary(self) -> dict:
        totals = sorted(self.totals)
        out = {
            "n": len(totals),
            "mean": statistics.fmean(totals),
            "p50": _percentile(totals, 50),
            "p95": _percentile(totals, 95),
        }
        for stage in ("transport_ms", "auth_ms", "access_ms", "service_ms"):
            out[f"mean_{stage}"] = statistics.fmean(getattr(s, stage) for s in self.samples)
        return out

    def check(self) -> dict:
        """Per-run properties; the bench CLI exits non-zero if any is false."""
        checks = {
            "stage_sum": all(abs(s.stage_sum_ms - s.total_ms) <= 1.0 for s in self.samples),
            "sample_count": len(self.samples) == self.config.n_requests - self.config.warmup_requests,
        }
        if self.config.ac == "off":
            checks["ac_off_zero_stages"] = all(s.auth_ms == 0 and s.access_ms == 0 for s in self.samples)
        if self.config.arch == "micro" and self.config.link_delay_ms > 0:
            checks["hop_delay_floor"] = self.summary()["mean"] >= self.config.hops * self.config.link_delay_ms
        return checks


def _percentile(sorted_values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile."""
    if not sorted_values:
        return math.nan
    rank = max(1, math.ceil(q / 100.0 * len(sorted_values)))
    return sorted_values[rank - 1]


def synthetic_frames(n: int, seed: int = 0) -> list[str]:
    """Deterministic mix of identification, position and velocity frames."""
    rng = random.Random(seed)
    frames = []
    for i in range(n):
        icao = f"{rng.randrange(1 << 24):06X}"
        kind = i % 3
        if kind == 0:
            frames.append(encode_identification(icao, f"T{rng.randrange(10000):04d}"))
        elif kind == 1:
            lat, lon = rng.uniform(-80, 80), rng.uniform(-179, 179)
            frames.append(encode_position(icao, lat, lon, rng.randrange(1000, 40000, 25), rng.choice(("even", "odd"))))
        else:
            frames.append(encode_velocity(icao, rng.uniform(100, 550), rng.uniform(0, 359), rng.randrange(-3000, 3000, 64)))
    return frames


class _Rig:
    """One live deployment (ledger, gateway, client) for one configuration."""

    def __init__(self, config: ExperimentConfig, timeout_s: float):
        self.config = config
        self.fabric, tokens = bootstrap(n_clients=1, resources=("/features",), seed=f"bench-{config.seed}")
        self.vid = self.fabric.clients[0].vid
        self.token = tokens[self.vid]["/features"]
        self.fabric.start()
        self.gw = Gateway(
            self.fabric,
            DeploymentMode(config.arch, config.link_delay_ms),
            ac_enabled=config.ac == "blendcac",
            frame_store=synthetic_frames(max(config.frames_per_request, 1), config.seed),
        )
        self.client: Optional[GatewayClient] = None
        self.samples: list = []
        self.rng = random.Random(config.seed)
        try:
            if config.ac == "blendcac":
                start_height = self.fabric.height
                if not self.fabric.service.wait_for_height(start_height + 1, timeout=timeout_s):
                    raise ChainStalled(f"no block within {timeout_s} s")
            self.gw.start()
            self.client = GatewayClient(self.gw.url)
            if self.client.health().status != 200:
                raise ServiceDown(self.gw.url)
        except BaseException:
            self.close()
            raise

    def request(self, i: int) -> None:
        cfg = self.config
        request_id = f"{cfg.seed}-{i}-{uuid.UUID(int=self.rng.getrandbits(128)).hex[:12]}"
        try:
            resp = self.client.service(
                "features",
                vid=self.vid,
                token_id=self.token,
                resource=f"/features/R{i % 4}C{(i // 4) % 4}",
                args={"recent": cfg.frames_per_request},
                request_id=request_id,
            )
        except OSError as exc:
            raise ServiceDown(str(exc)) from exc
        if resp.status != 200:
            raise ServiceDown(f"request {i} answered {resp.status}: {resp.body}")
        if i < cfg.warmup_requests:
            return
        auth = resp.header_int("X-Auth-Us") / 1000.0
        access = resp.header_int("X-Access-Us") / 1000.0
        service = resp.header_int("X-Service-Us") / 1000.0
        total = resp.elapsed_ms
        self.samples.append(LatencySample(request_id, total, total - auth - access - service, auth, access, service))

    def close(self) -> None:
        if self.client is not None:
            self.client.close()
        self.gw.close()
        self.fabric.close()


def run_latency_suite(configs: Sequence[ExperimentConfig], timeout_s: float = 10.0) -> list[LatencyResult]:
    """Run several configurations at once, interleaving their requests.

    Every configuration keeps its own deployment, client and samples; request
    ``i`` is sent to each of them in a start order that rotates with ``i``, so
    slow drift of the host affects all configurations alike. Requests are
    still sequential: one is in flight at any time, and none are retried.
    """
    if not configs:
        raise ValueError("no configurations")
    n = configs[0].n_requests
    if any(c.n_requests != n for c in configs):
        raise ValueError("interleaved configurations need equal n_requests")
    rigs: list[_Rig] = []
    try:
        for cfg in configs:
            rigs.append(_Rig(cfg, timeout_s))
        t0 = time.perf_counter()
        for i in range(n):
            k = i % len(rigs)
            for rig in rigs[k:] + rigs[:k]:
                rig.request(i)
        elapsed = time.perf_counter() - t0
        return [LatencyResult(rig.config, rig.samples, elapsed) for rig in rigs]
    finally:
        for rig in rigs:
            rig.close()


def run_latency(config: ExperimentConfig, timeout_s: float = 10.0) -> LatencyResult:
    """Closed-loop sequential requests from one client; no retries are made."""
    return run_latency_suite([config], timeout_s)[0]


# --------------------------------------------------------------------------
# Throughput


@dataclass(frozen=True)
class BatchSample:
    batch: int
    messages: int
    processed: int
    records: int
    features: int
    alerts: int
    wall_ms: float
    cpu_ms: float
    utilization: float


@dataclass
class ThroughputResult:
    samples: list
    total_messages: int

    def check(self) -> dict:
        processed = sum(s.processed for s in self.samples)
        cores = os.cpu_count() or 1
        return {
            "zero_loss": all(s.processed == s.messages for s in self.samples),
            "conservation": processed == self.total_messages,
            "utilization_bounds": all(0.0 <= s.utilization <= cores for s in self.samples),
        }


def scenario_frames(scenario: Scenario, seed: int, n: int, horizon_s: float = 600.0) -> list[tuple[str, float]]:
    """Encode a simulated record stream as (hex frame, received_at) messages.

    Each record becomes a position frame (parity alternating per aircraft)
    and a velocity frame; the first ``n`` messages are returned.
    """
    result = run(scenario, seed, horizon_s)
    parity: dict[str, int] = {}
    out: list[tuple[str, float]] = []
    for rec in result.records:
        p = parity.get(rec.icao, 0)
        parity[rec.icao] = p ^ 1
        out.append((encode_position(rec.icao, rec.lat_deg, rec.lon_deg, rec.altitude_ft, ("even", "odd")[p]), rec.timestamp))
        out.append((encode_velocity(rec.icao, rec.ground_speed_kt, rec.track_deg, rec.vertical_rate_fpm), rec.timestamp))
        if len(out) >= n:
            break
    if len(out) < n:
        raise ScenarioError(f"scenario produced only {len(out)} messages, need {n}")
    return out[:n]


def run_throughput(
    scenario: Scenario,
    seed: int = 0,
    batches: int = 15,
    batch_size: int = 100,
    queue_capacity: Optional[int] = None,
    box: AirspaceBox = DEFAULT_BOX,
    rules: Optional[RuleSet] = None,
) -> ThroughputResult:
    """Push ``batches`` x ``batch_size`` frames through decode, track, features and fusion."""
    messages = scenario_frames(scenario, seed, batches * batch_size)
    capacity = batch_size if queue_capacity is None else queue_capacity
    assembler = FrameAssembler()
    store = TrackStore(box)
    fog = FogEngine(GridConfig(box), rules)
    samples = []
    for b in range(batches):
        batch = messages[b * batch_size : (b + 1) * batch_size]
        queue: deque = deque()
        # CPU window nested inside the wall window keeps the ratio honest
        w0 = time.perf_counter()
        c0 = time.process_time()
        for item in batch:
            if len(queue) >= capacity:
                raise QueueOverflow(b, f"capacity {capacity}")
            queue.append(item)
        processed = records = features = alerts = 0
        while queue:
            frame, received_at = queue.popleft()
            try:
                msg = parse_frame(frame, received_at)
            except CodecError:
                continue
            processed += 1
            record = assembler.feed(msg)
            if record is None:
                continue
            records += 1
            try:
                track = store.update(record)
            except TrackerError:
                continue
            if track is None or len(track.points) < 2:
                continue
            features += 1
            if fog.process(extract_features(track)) is not None:
                alerts += 1
        cpu = time.process_time() - c0
        wall = time.perf_counter() - w0
        samples.append(
            BatchSample(b, len(batch), processed, records, features, alerts, wall * 1000.0, cpu * 1000.0, cpu / wall if wall > 0 else 0.0)
        )
    return ThroughputResult(samples, len(messages))


# --------------------------------------------------------------------------
# End to end


@dataclass(frozen=True)
class AttackVerdict:
    icao: str
    kind: str
    at_time: float
    detected: bool
    latency_s: Optional[float]
    score: Optional[float]
    within_bound: bool


@dataclass
class E2EResult:
    attacks: list
    normal_alerts: dict
    report_period_s: float
    counters: dict = field(default_factory=dict)

    def check(self) -> dict:
        spoofs = [a for a in self.attacks if a.kind == "spoofed"]
        return {
            "spoofs_detected_in_time": all(a.detected and a.within_bound for a in spoofs),
            "normal_flights_silent": all(n == 0 for n in self.normal_alerts.values()),
        }


def run_scenario_e2e(
    scenario: Scenario,
    seed: int = 0,
    horizon_s: Optional[float] = None,
    box: AirspaceBox = DEFAULT_BOX,
    rules: Optional[RuleSet] = None,
    periods_bound: int = 2,
) -> E2EResult:
    """Simulate, track, score and check every attack and every normal flight."""
    attacked = {a.icao: a for a in scenario.agents if a.behavior.kind != "normal"}
    if not attacked and not scenario.floods:
        raise ScenarioError("scenario has no attacks")
    starts = {}
    for icao, a in attacked.items():
        b = a.behavior
        starts[icao] = b.start if isinstance(b, Silent) else b.at_time
    if horizon_s is None:
        horizon_s = max(list(starts.values()) + [0.0]) + 60.0
    store = TrackStore(box)
    fog = FogEngine(GridConfig(box), rules)

    def on_record(rec):
        try:
            track = store.update(rec)
        except TrackerError:
            return
        if track is not None and len(track.points) >= 2:
            fog.process(extract_features(track))

    result = run(scenario, seed, horizon_s, on_record=on_record)
    by_icao: dict[str, list] = {}
    for alert in fog.alerts:
        by_icao.setdefault(alert.icao, []).append(alert)
    verdicts = []
    for icao, agent in attacked.items():
        start = scenario.epoch + starts[icao]
        hits = [a for a in by_icao.get(icao, []) if a.decided_at >= start]
        first = hits[0] if hits else None
        latency = None if first is None else first.decided_at - start
        bound = periods_bound * agent.report_period_s
        verdicts.append(
            AttackVerdict(
                icao,
                agent.behavior.kind,
                starts[icao],
                first is not None,
                latency,
                None if first is None else first.score,
                latency is not None and latency <= bound + 1e-9,
            )
        )
    for flood in scenario.floods:
        verdicts.append(AttackVerdict(flood.icao, "dos_flood", flood.start, False, None, None, False))
    normal = {a.icao: len(by_icao.get(a.icao, [])) for a in scenario.agents if a.icao not in attacked}
    period = min((a.report_period_s for a in scenario.agents), default=1.0)
    return E2EResult(verdicts, normal, period, dict(result.counters.__dict__))


# --------------------------------------------------------------------------
# CSV reports


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def report_text(samples: Sequence) -> str:
    if not samples:
        raise ValueError("no samples to report")
    names = [f.name for f in dataclasses.fields(samples[0])]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(names)
    for s in samples:
        writer.writerow([_fmt(getattr(s, n)) for n in names])
    return out.getvalue()


def emit_report(samples: Sequence, path) -> Path:
    """Write one header row plus one row per sample; identical input, identical octets."""
    text = report_text(samples)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return path


def parse_report(path, cls):
    """Read a report written by :func:`emit_report` back into ``cls`` instances."""
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            values = {}
            for name, raw in row.items():
                t = types[name]
                if raw == "":
                    values[name] = None
                elif t in ("int", int):
                    values[name] = int(raw)
                elif t in ("float", float) or "float" in str(t):
                    values[name] = float(raw)
                elif t in ("bool", bool):
                    values[name] = raw == "True"
                else:
                    values[name] = raw
            out.append(cls(**values))
    return out
