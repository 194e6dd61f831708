"""Seeded scenario builders used by the tests and the bench."""

from __future__ import annotations

import random

from .. import kernels
from ..tracker import AirspaceBox
from .agents import AgentState, AircraftAgent, SensorModel
from .engine import FeedbackConfig, Scenario, inject_attack

DEFAULT_BOX = AirspaceBox(50.0, 54.0, 2.0, 8.0)
RECEIVER = (52.0, 5.0)


def _icao(i: int) -> str:
    return f"{0x400000 + i:06X}"


def nominal_flights(
    n: int,
    seed: int = 0,
    box: AirspaceBox = DEFAULT_BOX,
    margin_deg: float = 0.6,
    report_period_s: float = 1.0,
    noise: bool = True,
    dropout_prob: float = 0.02,
    feedback: FeedbackConfig | None = None,
) -> Scenario:
    """``n`` cruising aircraft flying between random waypoints inside ``box``."""
    rng = random.Random(seed)

    def point():
        return (
            rng.uniform(box.lat_min + margin_deg, box.lat_max - margin_deg),
            rng.uniform(box.lon_min + margin_deg, box.lon_max - margin_deg),
        )

    agents = []
    for i in range(n):
        lat, lon = point()
        waypoints = tuple(point() for _ in range(3))
        agents.append(
            AircraftAgent(
                icao=_icao(i),
                callsign=f"SIM{i:04d}",
                state=AgentState(
                    lat=lat,
                    lon=lon,
                    altitude_ft=float(rng.randrange(24000, 40000, 1000)),
                    ground_speed_kt=rng.uniform(380.0, 500.0),
                    track_deg=kernels.initial_bearing_deg(lat, lon, *waypoints[0]),
                    vertical_rate_fpm=0.0,
                ),
                waypoints=waypoints,
                report_period_s=report_period_s,
                # stagger the first reports so the log is not one big tie
                t=round(rng.uniform(0.0, report_period_s), 3),
            )
        )
    sensor = SensorModel(
        RECEIVER[0],
        RECEIVER[1],
        dropout_prob=dropout_prob,
        pos_sigma_m=8.0 if noise else 0.0,
        alt_sigma_ft=10.0 if noise else 0.0,
        speed_sigma_kt=1.0 if noise else 0.0,
        track_sigma_deg=0.5 if noise else 0.0,
        vrate_sigma_fpm=20.0 if noise else 0.0,
    )
    return Scenario(agents=tuple(agents), sensor=sensor, feedback=feedback, name=f"nominal-{n}")


def spoof_scenario(
    n: int = 10,
    seed: int = 0,
    jump_km: float = 100.0,
    at_time: float = 60.0,
    report_period_s: float = 1.0,
) -> Scenario:
    """Nominal traffic with one aircraft jumping ``jump_km`` east at ``at_time``.

    The victim starts in the western part of the box so the jumped position
    stays inside it.
    """
    scen = nominal_flights(n, seed, report_period_s=report_period_s)
    victim = scen.agents[0]
    rng = random.Random(seed + 1)
    lat = rng.uniform(51.0, 53.0)
    lon = rng.uniform(2.8, 3.5)
    wp = (lat, lon + 1.5)
    victim = AircraftAgent(
        icao=victim.icao,
        callsign=victim.callsign,
        state=AgentState(lat, lon, 35000.0, 450.0, kernels.initial_bearing_deg(lat, lon, *wp)),
        waypoints=(wp,),
        report_period_s=report_period_s,
        t=victim.t,
    )
    scen = Scenario(
        agents=(victim,) + scen.agents[1:], sensor=scen.sensor, epoch=scen.epoch, name=f"spoof-{jump_km:g}km"
    )
    return inject_attack(scen, "spoof", {"icao": victim.icao, "jump_km": jump_km, "at_time": at_time})
