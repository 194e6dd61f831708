import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsbtrust.codec import ingest_csv
from adsbtrust.sim import (
    AgentState,
    AircraftAgent,
    BadParams,
    FeedbackConfig,
    FeedbackController,
    Scenario,
    ScheduleError,
    SensorModel,
    UnknownAgent,
    emit_report,
    feedback_tick,
    inject_attack,
    load_scenario,
    nominal_flights,
    run,
    save_scenario,
    spoof_scenario,
    step_agent,
)
from adsbtrust.sim.cli import main as sim_main
from adsbtrust.sim.engine import _Queue

from oracles import great_circle_m

RX = (52.0, 5.0)
QUIET = SensorModel(*RX)


def agent(**kw):
    state = kw.pop("state", AgentState(52.0, 5.0, 30000.0, 450.0, 90.0, 0.0))
    return AircraftAgent(icao=kw.pop("icao", "ABC123"), state=state, **kw)


# kinematics

def test_600_kt_for_a_minute_is_10_nm():
    a = agent(state=AgentState(0.0, 0.0, 30000.0, 600.0, 90.0))
    b, _ = step_agent(a, 60.0)
    assert great_circle_m(0, 0, b.state.lat, b.state.lon) == pytest.approx(10 * 1852.0, rel=1e-3)
    assert b.state.lon > 0 and abs(b.state.lat) < 1e-9


def test_descent_integrates():
    a = agent(state=AgentState(52.0, 5.0, 30000.0, 450.0, 90.0, -832.0))
    b, _ = step_agent(a, 60.0)
    assert b.state.altitude_ft == pytest.approx(30000.0 - 832.0)


def test_arrived_agent_only_ages():
    a = agent(waypoints=((52.0, 5.001),))
    a, reached = step_agent(a, 0.5)
    assert reached and a.arrived and a.waypoints == ()
    b, reached = step_agent(a, 10.0)
    assert b.state == a.state and b.t == a.t + 10.0 and reached == []


def test_turn_rate_capped():
    a = agent(state=AgentState(52.0, 5.0, 30000.0, 450.0, 0.0), waypoints=((51.0, 5.0),))
    b, _ = step_agent(a, 2.0)
    assert abs((b.state.track_deg - 0.0 + 180) % 360 - 180) == pytest.approx(6.0)


def test_waypoint_captured_eventually():
    a = agent(state=AgentState(52.0, 4.0, 30000.0, 450.0, 0.0), waypoints=((52.5, 5.0), (52.0, 6.0)))
    reached = []
    for _ in range(3000):
        a, r = step_agent(a, 1.0)
        reached += r
        if a.arrived:
            break
    assert reached == [(52.5, 5.0), (52.0, 6.0)]


def test_step_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        step_agent(agent(), 0.0)


# sensor

def test_out_of_range_is_dropped():
    far = agent(state=AgentState(52.0, 5.0 + 400 / (111.32 * 0.6157), 30000.0, 450.0, 90.0))
    assert great_circle_m(*RX, far.state.lat, far.state.lon) > 390_000
    assert emit_report(far, QUIET, random.Random(0)) is None


def test_zero_noise_record_equals_state():
    a = agent(t=12.0, callsign="KLM1")
    rec = emit_report(a, QUIET, random.Random(0), epoch=1000.0)
    assert (rec.lat_deg, rec.lon_deg, rec.altitude_ft, rec.ground_speed_kt, rec.track_deg) == (52.0, 5.0, 30000, 450.0, 90.0)
    assert rec.timestamp == 1012.0 and rec.callsign == "KLM1"


def test_spoof_jump_implies_absurd_speed():
    scen = spoof_scenario(n=1, seed=0, at_time=30.0)
    scen = Scenario(scen.agents, SensorModel(*RX), epoch=scen.epoch)
    res = run(scen, seed=1, horizon_s=35.0)
    recs = res.records
    jump = [
        great_circle_m(p.lat_deg, p.lon_deg, q.lat_deg, q.lon_deg) / 1852.0 * 3600.0 / (q.timestamp - p.timestamp)
        for p, q in zip(recs, recs[1:])
    ]
    assert max(jump) > 50_000
    assert sum(1 for s in jump if s > 50_000) == 1


def test_replay_reemits_the_stream_from_delay_ago():
    base = Scenario((agent(),), QUIET)
    honest = run(base, seed=0, horizon_s=100.0).records
    replayed = run(inject_attack(base, "replay", {"icao": "ABC123", "delay_s": 30, "at_time": 40}), 0, 100.0).records
    by_ts = {r.timestamp: r for r in honest}
    for r in replayed:
        t = r.timestamp - base.epoch
        if t < 40:
            assert r == by_ts[r.timestamp]
        else:
            old = by_ts[round(r.timestamp - 30, 3)]
            assert (r.lat_deg, r.lon_deg, r.altitude_ft) == (old.lat_deg, old.lon_deg, old.altitude_ft)


def test_silence_window():
    base = Scenario((agent(),), QUIET)
    res = run(inject_attack(base, "silence", {"icao": "ABC123", "start": 10, "end": 20}), 0, 30.0)
    assert res.counters.silent_drops == 10
    assert all(not (10 <= r.timestamp - base.epoch < 20) for r in res.records)


# engine

def test_same_seed_same_log():
    scen = nominal_flights(20, seed=3)
    a, b = run(scen, 11, 120.0), run(scen, 11, 120.0)
    assert a.log_bytes() == b.log_bytes() and a.log_bytes()
    assert run(scen, 12, 120.0).log_bytes() != a.log_bytes()


def test_empty_scenario_has_no_events():
    res = run(Scenario(), seed=0, horizon_s=100.0)
    assert res.events == [] and res.log_bytes() == b""


def test_equal_times_follow_scheduling_order():
    q = _Queue()
    q.schedule(5.0, "emit_report", "B")
    q.schedule(5.0, "emit_report", "A")
    q.schedule(1.0, "feedback_tick", "f")
    order = [q.pop().subject for _ in range(3)]
    assert order == ["f", "B", "A"]


def test_schedule_in_the_past():
    q = _Queue()
    q.schedule(5.0, "emit_report", "x")
    q.pop()
    with pytest.raises(ScheduleError):
        q.schedule(4.0, "emit_report", "x")


def test_event_clock_monotone_and_seq_unique():
    res = run(nominal_flights(10, seed=1), 0, 60.0)
    ts = [e.t for e in res.events]
    assert ts == sorted(ts)
    pairs = [(e.t, e.seq) for e in res.events]
    assert pairs == sorted(pairs) and len({e.seq for e in res.events}) == len(pairs)


def test_waypoint_events_logged():
    a = agent(state=AgentState(52.0, 5.0, 30000.0, 450.0, 90.0), waypoints=((52.0, 5.1),))
    res = run(Scenario((a,), QUIET), 0, 120.0)
    kinds = [e.kind for e in res.events]
    assert kinds.count("waypoint_reached") == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.5))
def test_conservation(seed, dropout):
    scen = nominal_flights(6, seed=seed, dropout_prob=dropout)
    far = agent(icao="FAR001", state=AgentState(60.0, 5.0, 30000.0, 450.0, 0.0))
    scen = inject_attack(Scenario(scen.agents + (far,), scen.sensor), "silence", {"icao": scen.agents[0].icao, "start": 5, "end": 9})
    c = run(scen, seed, 30.0).counters
    assert c.emitted == c.scheduled_emits - c.range_drops - c.dropout_drops - c.silent_drops
    assert c.range_drops > 0


def test_csv_round_trip_reproduces_truth():
    scen = nominal_flights(5, seed=2, noise=False, dropout_prob=0.0)
    res = run(scen, 0, 30.0)
    back = ingest_csv(res.csv_text())
    assert back.skip_count == 0 and len(back.records) == len(res.truth)
    for rec, (ts, icao, state) in zip(back.records, res.truth):
        assert rec.icao == icao and rec.timestamp == pytest.approx(ts, abs=1e-3)
        assert great_circle_m(rec.lat_deg, rec.lon_deg, state.lat, state.lon) < 1.0
        assert abs(rec.altitude_ft - state.altitude_ft) <= 1
        assert rec.ground_speed_kt == pytest.approx(state.ground_speed_kt, abs=0.01)


# attacks

def test_spoof_on_unknown_aircraft():
    with pytest.raises(UnknownAgent):
        inject_attack(Scenario((agent(),), QUIET), "spoof", {"icao": "FFFFFF", "jump_km": 10, "at_time": 0})


@pytest.mark.parametrize("kind, params", [
    ("spoof", {"icao": "ABC123", "jump_km": 0, "at_time": 0}),
    ("spoof", {"icao": "ABC123", "jump_km": 5, "at_time": -1}),
    ("replay", {"icao": "ABC123", "delay_s": "x"}),
    ("dos_flood", {"rate": 0, "duration_s": 1}),
    ("silence", {"icao": "ABC123", "start": 5, "end": 5}),
    ("meteor", {"icao": "ABC123"}),
    ("spoof", {"jump_km": 5}),
])
def test_bad_attack_params(kind, params):
    with pytest.raises(BadParams):
        inject_attack(Scenario((agent(),), QUIET), kind, params)


def test_flood_count_is_exact():
    scen = inject_attack(Scenario(), "dos_flood", {"rate": 1000, "duration_s": 10, "start": 1})
    res = run(scen, 0, 20.0)
    bursts = [e for e in res.events if e.kind == "emit_report" and e.data.get("attack") == "dos_flood"]
    assert len(bursts) == 10_000 == res.counters.flood_emits == len(res.flood_records)
    assert sum(1 for e in res.events if e.kind == "attack_trigger") == 1


# feedback

def test_feedback_scales_and_caps():
    c = FeedbackController(FeedbackConfig(high_water=100, low_water=20))
    assert feedback_tick(c, {"fog_queue_len": 5})["report_period_scale"] == 1
    scales = [c.tick({"fog_queue_len": 500})["report_period_scale"] for _ in range(5)]
    assert scales == [2, 4, 8, 8, 8]
    assert c.tick({"fog_queue_len": 10}) == {"report_period_scale": 1, "threshold_unchanged": True}


def test_feedback_hysteresis_inside_band():
    c = FeedbackController(FeedbackConfig(high_water=100, low_water=20))
    c.tick({"fog_queue_len": 200})
    for q in (55, 65, 45, 60, 100, 20):
        assert c.tick({"fog_queue_len": q})["report_period_scale"] == 2


def test_feedback_config_validation():
    with pytest.raises(BadParams):
        FeedbackConfig(high_water=10, low_water=10)


def test_feedback_slows_reporting_in_a_run():
    scen = nominal_flights(30, seed=4, feedback=FeedbackConfig(high_water=100, low_water=10, period_s=5))
    res = run(scen, 0, 60.0)
    assert max(s for _, s in res.scales) > 1
    ticks = [e for e in res.events if e.kind == "feedback_tick"]
    assert len(ticks) == 12 and all(e.data["threshold_unchanged"] for e in ticks)
    plain = run(nominal_flights(30, seed=4), 0, 60.0)
    assert res.counters.scheduled_emits < plain.counters.scheduled_emits


def test_scripted_metrics_drive_feedback():
    trace = iter([500, 500, 50, 5, 500])
    scen = Scenario((agent(),), QUIET, feedback=FeedbackConfig(100, 10, period_s=1))
    res = run(scen, 0, 5.0, metrics_fn=lambda t: {"fog_queue_len": next(trace)})
    assert [s for _, s in res.scales] == [2, 4, 4, 1, 2]


# files and CLI

def test_scenario_json_round_trip(tmp_path):
    scen = inject_attack(spoof_scenario(n=3, seed=1), "dos_flood", {"rate": 5, "duration_s": 2})
    scen = Scenario(scen.agents, scen.sensor, scen.floods, FeedbackConfig(50, 5), scen.epoch, scen.name)
    path = tmp_path / "s.json"
    save_scenario(scen, path)
    again = load_scenario(path)
    assert again == scen
    assert run(again, 3, 40.0).log_bytes() == run(scen, 3, 40.0).log_bytes()


def test_log_lines_are_sorted_json():
    res = run(nominal_flights(2, seed=0), 0, 3.0)
    for line in res.log_bytes().decode().splitlines():
        doc = json.loads(line)
        assert list(doc) == sorted(doc)


def test_cli_generate_and_run(tmp_path, capsys):
    scen, log1, log2, csv = (tmp_path / n for n in ("s.json", "a.ndjson", "b.ndjson", "r.csv"))
    assert sim_main(["generate", "--kind", "spoof", "--flights", "4", "--seed", "2", "--out", str(scen)]) == 0
    assert sim_main(["run", "--scenario", str(scen), "--seed", "5", "--horizon", "30", "--log", str(log1), "--csv", str(csv)]) == 0
    assert sim_main(["run", "--scenario", str(scen), "--seed", "5", "--horizon", "30", "--log", str(log2)]) == 0
    assert log1.read_bytes() == log2.read_bytes()
    assert len(ingest_csv(csv.read_text()).records) > 0
