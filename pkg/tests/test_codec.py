import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsbtrust import codec
from adsbtrust.codec import (
    AdsbRecord,
    AirbornePosition,
    AirborneVelocity,
    CprFrame,
    CrcError,
    EmptyInput,
    FrameAssembler,
    FrameLengthError,
    HeaderError,
    Identification,
    NonAdsbFrame,
    PositionAmbiguous,
    RangeError,
    RawFrame,
    StalePair,
    Unsupported,
    cpr_decode_global,
    cpr_encode,
    crc24,
    encode_identification,
    encode_position,
    encode_velocity,
    ingest_csv,
    parse_frame,
    records_to_csv,
)

from oracles import callsign_oracle, cpr_pair_oracle, crc24_long_division, great_circle_m, velocity_oracle

IDENT = "8D4840D6202CC371C32CE0576098"
VELOCITY = "8D485020994409940838175B284F"
POS_EVEN = "8D40621D58C382D690C8AC2863A7"
POS_ODD = "8D40621D58C386435CC412692AD6"


def flip(hex_text: str, bit: int) -> str:
    value = int(hex_text, 16) ^ (1 << (111 - bit))
    return f"{value:028X}"


def random_valid_frames(n: int, seed: int = 7) -> list[str]:
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        icao = f"{rng.randrange(1 << 24):06X}"
        me = rng.getrandbits(56)
        out.append(codec._frame(icao, me))
    return out


# ---- CRC -------------------------------------------------------------------


def test_crc_zero_frame():
    assert crc24("00" * 14) == 0


@pytest.mark.parametrize("frame", [IDENT, VELOCITY, POS_EVEN, POS_ODD])
def test_crc_known_frames_match_long_division(frame):
    assert crc24(frame) == crc24_long_division(frame) == 0


def test_crc_every_single_bit_flip_detected():
    for frame in [IDENT] + random_valid_frames(20):
        for bit in range(112):
            bad = flip(frame, bit)
            assert crc24(bad) != 0
            assert crc24(bad) == crc24_long_division(bad)


@given(st.binary(min_size=14, max_size=14))
def test_crc_matches_oracle_on_arbitrary_words(data):
    assert crc24(data) == crc24_long_division(data.hex())


def test_crc_length_errors():
    with pytest.raises(FrameLengthError):
        crc24(b"\x00" * 13)
    with pytest.raises(FrameLengthError):
        RawFrame(b"\x00" * 15, 0.0)


def test_raw_frame_normalizes_hex():
    f = RawFrame.from_hex("8d4840d6 202cc371c32ce0576098", 1.23456)
    assert f.hex == IDENT and f.received_at == 1.235


# ---- parse_frame --------------------------------------------------------------


def test_identification_frame():
    msg = parse_frame(IDENT, 1.0)
    assert msg.downlink_format == 17 and msg.icao == "4840D6" and msg.type_code == 4
    assert isinstance(msg.payload, Identification)
    assert msg.payload.callsign == "KLM1023" == callsign_oracle(IDENT)


def test_velocity_frame_against_oracle():
    msg = parse_frame(VELOCITY)
    assert isinstance(msg.payload, AirborneVelocity)
    speed, track, vr = velocity_oracle(VELOCITY)
    assert msg.payload.ground_speed_kt == pytest.approx(speed, abs=0.5)
    assert msg.payload.track_deg == pytest.approx(track, abs=0.5)
    assert msg.payload.vertical_rate_fpm == vr == -832
    assert msg.payload.ground_speed_kt == pytest.approx(159, abs=0.5)
    assert msg.payload.track_deg == pytest.approx(183, abs=0.5)


def test_position_frame_fields():
    msg = parse_frame(POS_EVEN, 2.0)
    assert isinstance(msg.payload, AirbornePosition)
    assert msg.payload.cpr.parity == "even" and msg.payload.altitude_ft == 38000
    assert parse_frame(POS_ODD).payload.cpr.odd


def test_parse_rejects_short_input():
    with pytest.raises(FrameLengthError):
        parse_frame(IDENT[:27])


def test_parse_rejects_bad_crc_and_non_df17():
    with pytest.raises(CrcError):
        parse_frame(flip(IDENT, 60))
    df11 = "5D4840D6" + "0" * 20
    with pytest.raises(NonAdsbFrame):
        parse_frame(df11)


def test_parse_never_yields_payload_on_bad_crc():
    rng = random.Random(3)
    for frame in random_valid_frames(50):
        bad = flip(frame, rng.randrange(5, 112))  # keep DF bits intact
        with pytest.raises(CrcError):
            parse_frame(bad)


def test_other_type_codes_unsupported():
    me = (28 << 51) | 12345
    msg = parse_frame(codec._frame("ABCDEF", me))
    assert isinstance(msg.payload, Unsupported) and msg.icao == "ABCDEF" and msg.type_code == 28


def test_velocity_subtype_three_unsupported():
    me = (19 << 51) | (3 << 48) | (5 << 32) | (5 << 21)
    assert isinstance(parse_frame(codec._frame("ABCDEF", me)).payload, Unsupported)


@given(
    st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789", min_size=1, max_size=8),
    st.integers(0, (1 << 24) - 1),
)
def test_identification_round_trip(callsign, icao):
    frame = encode_identification(f"{icao:06X}", callsign)
    assert parse_frame(frame).payload.callsign == callsign == callsign_oracle(frame)


@given(st.floats(0, 1000), st.floats(0, 359.99), st.integers(-32000, 32000))
def test_velocity_round_trip(speed, track, vr):
    frame = encode_velocity("ABC123", speed, track, vr)
    v = parse_frame(frame).payload
    ospeed, otrack, ovr = velocity_oracle(frame)
    assert v.ground_speed_kt == pytest.approx(ospeed) and v.vertical_rate_fpm == ovr
    assert v.ground_speed_kt == pytest.approx(speed, abs=1.0)
    assert abs(v.vertical_rate_fpm - vr) <= 32
    if speed > 20:
        assert abs((v.track_deg - track + 180) % 360 - 180) < 3.0
    assert 0 <= v.track_deg < 360


# ---- CPR ---------------------------------------------------------------------


def test_known_cpr_pair():
    # the reference position is resolved in the even frame's zone: even is newer
    even = parse_frame(POS_EVEN, 1.0).payload.cpr
    odd = parse_frame(POS_ODD, 0.0).payload.cpr
    lat, lon = cpr_decode_global(even, odd)
    assert lat == pytest.approx(52.257, abs=1e-3) and lon == pytest.approx(3.919, abs=1e-3)
    olat, olon = cpr_pair_oracle(even.lat_cpr, even.lon_cpr, odd.lat_cpr, odd.lon_cpr, False)
    assert (lat, lon) == pytest.approx((olat, olon), abs=1e-9)


def test_cpr_origin_fixed_point():
    assert cpr_decode_global(cpr_encode(0, 0, "even"), cpr_encode(0, 0, "odd", 1.0)) == (0.0, 0.0)


def test_cpr_stale_pair_boundary():
    e, o = cpr_encode(10, 10, "even", 0.0), cpr_encode(10, 10, "odd", 11.0)
    with pytest.raises(StalePair):
        cpr_decode_global(e, o)
    cpr_decode_global(e, cpr_encode(10, 10, "odd", 10.0))


def test_cpr_polar_range_error():
    with pytest.raises(RangeError):
        cpr_encode(90, 0, "even")
    with pytest.raises(RangeError):
        cpr_encode(-87.5, 0, "odd")


def test_cpr_parity_preserved():
    assert cpr_encode(45, 45, "odd").parity == "odd"
    assert cpr_encode(45, 45, "even").parity == "even"


def test_cpr_straddling_zone_is_ambiguous():
    # same longitude, latitudes on either side of an NL transition
    e = cpr_encode(10.47, 20.0, "even", 0.0)
    o = cpr_encode(10.48, 20.0, "odd", 1.0)
    with pytest.raises(PositionAmbiguous):
        cpr_decode_global(e, o)


def arc_deg(lat1, lon1, lat2, lon2):
    return math.degrees(great_circle_m(lat1, lon1, lat2, lon2) / 6371000.0)


def test_cpr_round_trip_1000_random_positions():
    rng = random.Random(11)
    for _ in range(1000):
        lat, lon = rng.uniform(-87, 87), rng.uniform(-180, 180)
        try:
            dlat, dlon = cpr_decode_global(cpr_encode(lat, lon, "even", 0.0), cpr_encode(lat, lon, "odd", 1.0))
        except PositionAmbiguous:
            continue  # quantized latitude lands across an NL edge
        assert abs(dlat - lat) < 1e-3
        assert arc_deg(lat, lon, dlat, dlon) < 1e-3


def test_cpr_longitude_error_is_half_a_zone_step():
    # near the poles only one or two longitude zones exist, so raw degrees drift more
    rng = random.Random(5)
    for _ in range(300):
        lat = rng.choice([-1, 1]) * rng.uniform(86.6, 87.0)
        lon = rng.uniform(-180, 180)
        for newer in ("even", "odd"):
            even = cpr_encode(lat, lon, "even", 1.0 if newer == "even" else 0.0)
            odd = cpr_encode(lat, lon, "odd", 1.0 if newer == "odd" else 0.0)
            try:
                dlat, dlon = cpr_decode_global(even, odd)
            except PositionAmbiguous:
                continue
            zones = 1 if newer == "odd" else 2
            bound = 360.0 / zones / 2**17 / 2 + 1e-9
            assert abs((dlon - lon + 180) % 360 - 180) <= bound


@settings(max_examples=300)
@given(st.floats(-87, 87), st.floats(-180, 180), st.booleans())
def test_cpr_decode_matches_oracle(lat, lon, odd_newer):
    e, o = cpr_encode(lat, lon, "even", 0.0), cpr_encode(lat, lon, "odd", 1.0 if odd_newer else -1.0)
    try:
        got = cpr_decode_global(e, o)
    except PositionAmbiguous:
        return
    want = cpr_pair_oracle(e.lat_cpr, e.lon_cpr, o.lat_cpr, o.lon_cpr, odd_newer)
    assert got[0] == pytest.approx(want[0], abs=1e-9)
    assert (got[1] - want[1] + 180) % 360 - 180 == pytest.approx(0, abs=1e-9)


def test_cpr_frame_validates_bits():
    with pytest.raises(ValueError):
        CprFrame("even", 1 << 17, 0, 0.0)


# ---- records and assembly --------------------------------------------------------


def _record(**kw):
    base = dict(
        icao="ABC123", callsign="TEST1", lat_deg=52.0, lon_deg=4.0, altitude_ft=35000,
        ground_speed_kt=450.0, track_deg=90.0, vertical_rate_fpm=0.0, timestamp=1.0,
    )
    base.update(kw)
    return AdsbRecord(**base)


def test_record_json_field_order():
    doc = json.loads(_record().to_json())
    assert list(doc) == list(codec.RECORD_FIELDS)
    assert AdsbRecord.from_dict(doc) == _record()


@pytest.mark.parametrize(
    "bad", [dict(lat_deg=91), dict(lon_deg=-180.0), dict(track_deg=360.0), dict(timestamp=0.0), dict(ground_speed_kt=-1)]
)
def test_record_invariants(bad):
    with pytest.raises(ValueError):
        _record(**bad)


def test_assembler_builds_record():
    asm = FrameAssembler()
    assert asm.feed_hex(IDENT, 0.5) is None
    icao = "40621D"
    assert asm.feed_hex(encode_velocity(icao, 400, 90, 0), 0.6) is None
    assert asm.feed_hex(POS_ODD, 1.0) is None
    rec = asm.feed_hex(POS_EVEN, 2.0)
    assert rec.icao == icao and rec.lat_deg == pytest.approx(52.2572, abs=1e-4)
    assert rec.altitude_ft == 38000 and rec.timestamp == 2.0


def test_assembler_counts_stale_pairs():
    asm = FrameAssembler()
    asm.feed_hex(encode_velocity("AAAAAA", 400, 90, 0), 0.0)
    asm.feed_hex(encode_position("AAAAAA", 50, 5, 30000, "even"), 0.0)
    assert asm.feed_hex(encode_position("AAAAAA", 50, 5, 30000, "odd"), 20.0) is None
    assert asm.errors == {"StalePair": 1}


# ---- CSV ---------------------------------------------------------------------------

HEADER = "timestamp,icao,callsign,lat,lon,altitude,speed,track\n"


def test_ingest_three_rows():
    text = HEADER + "".join(f"{100 + i},ABC12{i},X{i},50.{i},4.0,30000,400,90\n" for i in range(3))
    res = ingest_csv(text)
    assert len(res) == 3 and res.skip_count == 0
    assert [r.icao for r in res] == ["ABC120", "ABC121", "ABC122"]


def test_ingest_skips_and_logs_bad_row(caplog):
    rows = [f"{100 + i},ABC12{i},X,50.0,4.0,30000,400,90\n" for i in range(10)]
    rows[4] = "104,ABC124,X,n/a,4.0,30000,400,90\n"
    with caplog.at_level("WARNING"):
        res = ingest_csv(HEADER + "".join(rows))
    assert len(res) == 9 and res.skip_count == 1
    assert res.skipped[0][0] == 6  # header is line 1
    assert "line 6" in caplog.text


def test_ingest_aliases_and_position_column():
    text = 'Timestamp,Callsign,Position,Altitude,Speed,Direction,hex\n2023-01-01T00:00:00Z,KLM1,"52.1,4.5",1000,150,359,abcdef\n'
    (rec,) = ingest_csv(text).records
    assert rec.lat_deg == 52.1 and rec.lon_deg == 4.5 and rec.icao == "ABCDEF"
    assert rec.timestamp == 1672531200.0 and rec.track_deg == 359


def test_ingest_header_errors():
    with pytest.raises(EmptyInput):
        ingest_csv("")
    with pytest.raises(HeaderError):
        ingest_csv("timestamp,icao,lat,lon\n1,A,1,1\n")


@settings(max_examples=50)
@given(st.lists(st.sampled_from(["ok", "bad_lat", "short", "bad_ts"]), max_size=30))
def test_ingest_conservation(kinds):
    lines = []
    for i, k in enumerate(kinds):
        if k == "ok":
            lines.append(f"{i + 1},AAA{i:03d},,10,10,100,100,10")
        elif k == "bad_lat":
            lines.append(f"{i + 1},AAA{i:03d},,x,10,100,100,10")
        elif k == "short":
            lines.append(f"{i + 1},AAA{i:03d}")
        else:
            lines.append(f"never,AAA{i:03d},,10,10,100,100,10")
    res = ingest_csv(HEADER + "\n".join(lines) + "\n")
    assert len(res) + res.skip_count == len(kinds)
    assert len(res) == kinds.count("ok")


def test_csv_round_trip_within_quantization():
    recs = [_record(lat_deg=51.123456789, lon_deg=-0.987654321, timestamp=1700000000.1234, track_deg=359.999)]
    (back,) = ingest_csv(records_to_csv(recs)).records
    assert back.lat_deg == pytest.approx(recs[0].lat_deg, abs=5e-7)
    assert back.timestamp == pytest.approx(recs[0].timestamp, abs=5e-4)
    assert 0 <= back.track_deg < 360
