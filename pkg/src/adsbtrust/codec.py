"""Mode-S extended squitter (DF17) and CSV ingestion into canonical records.

Frame layout (112 bits)::

    DF(5) CA(3) ICAO(24) ME(56) PI(24)

Only airborne identification (TC 1-4), airborne position with barometric
altitude (TC 9-18) and airborne velocity over ground (TC 19, subtypes 1/2)
are decoded; every other payload comes back as :class:`Unsupported`.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional, Union

from . import kernels

log = logging.getLogger(__name__)

FRAME_OCTETS = 14
FRAME_HEX_CHARS = 2 * FRAME_OCTETS
ADSB_DF = 17
CPR_MAX = 1 << 17
MAX_PAIR_GAP_S = 10.0
MAX_CPR_LAT = 87.0

CALLSIGN_ALPHABET = "#ABCDEFGHIJKLMNOPQRSTUVWXYZ##### ###############0123456789######"


class CodecError(ValueError):
    """Base class for decoding failures."""


class FrameLengthError(CodecError):
    pass


class CrcError(CodecError):
    def __init__(self, remainder: int):
        super().__init__(f"CRC remainder {remainder:06X}")
        self.remainder = remainder


class NonAdsbFrame(CodecError):
    def __init__(self, downlink_format: int):
        super().__init__(f"downlink format {downlink_format} is not 17")
        self.downlink_format = downlink_format


class StalePair(CodecError):
    pass


class PositionAmbiguous(CodecError):
    pass


class RangeError(CodecError):
    pass


class HeaderError(CodecError):
    pass


class EmptyInput(CodecError):
    pass


# --------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class RawFrame:
    bits: bytes
    received_at: float

    def __post_init__(self):
        if len(self.bits) != FRAME_OCTETS:
            raise FrameLengthError(f"expected {FRAME_OCTETS} octets, got {len(self.bits)}")

    @classmethod
    def from_hex(cls, text: str, received_at: float = 0.0) -> "RawFrame":
        return cls(_hex_to_bytes(text), round(received_at, 3))

    @property
    def hex(self) -> str:
        return self.bits.hex().upper()


@dataclass(frozen=True)
class CprFrame:
    parity: str  # "even" | "odd"
    lat_cpr: int
    lon_cpr: int
    t: float

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError(f"parity must be even or odd, not {self.parity!r}")
        if not (0 <= self.lat_cpr < CPR_MAX and 0 <= self.lon_cpr < CPR_MAX):
            raise ValueError("CPR coordinates must be 17-bit")

    @property
    def odd(self) -> bool:
        return self.parity == "odd"


@dataclass(frozen=True)
class Identification:
    callsign: str
    category: int = 0


@dataclass(frozen=True)
class AirbornePosition:
    cpr: CprFrame
    altitude_ft: int


@dataclass(frozen=True)
class AirborneVelocity:
    ground_speed_kt: float
    track_deg: float
    vertical_rate_fpm: int


@dataclass(frozen=True)
class Unsupported:
    reason: str = ""


Payload = Union[Identification, AirbornePosition, AirborneVelocity, Unsupported]


@dataclass(frozen=True)
class DecodedMessage:
    downlink_format: int
    icao: str
    type_code: int
    payload: Payload
    received_at: float = 0.0


RECORD_FIELDS = (
    "icao",
    "callsign",
    "lat_deg",
    "lon_deg",
    "altitude_ft",
    "ground_speed_kt",
    "track_deg",
    "vertical_rate_fpm",
    "timestamp",
)


@dataclass(frozen=True)
class AdsbRecord:
    """One aircraft state report, the unit exchanged between tiers."""

    icao: str
    callsign: Optional[str]
    lat_deg: float
    lon_deg: float
    altitude_ft: int
    ground_speed_kt: float
    track_deg: float
    vertical_rate_fpm: float
    timestamp: float

    def __post_init__(self):
        if not (-90.0 <= self.lat_deg <= 90.0):
            raise ValueError(f"latitude {self.lat_deg} out of range")
        if not (-180.0 < self.lon_deg <= 180.0):
            raise ValueError(f"longitude {self.lon_deg} out of range")
        if not (0.0 <= self.track_deg < 360.0):
            raise ValueError(f"track {self.track_deg} out of range")
        if self.ground_speed_kt < 0 or not math.isfinite(self.ground_speed_kt):
            raise ValueError(f"ground speed {self.ground_speed_kt} invalid")
        if not (self.timestamp > 0 and math.isfinite(self.timestamp)):
            raise ValueError("timestamp must be strictly positive")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in RECORD_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "AdsbRecord":
        missing = [k for k in RECORD_FIELDS if k not in data]
        if missing:
            raise ValueError(f"record missing fields: {missing}")
        return cls(
            icao=str(data["icao"]).upper(),
            callsign=data["callsign"],
            lat_deg=float(data["lat_deg"]),
            lon_deg=float(data["lon_deg"]),
            altitude_ft=int(data["altitude_ft"]),
            ground_speed_kt=float(data["ground_speed_kt"]),
            track_deg=float(data["track_deg"]),
            vertical_rate_fpm=float(data["vertical_rate_fpm"]),
            timestamp=float(data["timestamp"]),
        )


# --------------------------------------------------------------------------
# Frame-level operations


def _hex_to_bytes(text: str) -> bytes:
    cleaned = "".join(ch for ch in text.strip().strip("*;") if ch not in " :-_\t")
    if len(cleaned) != FRAME_HEX_CHARS:
        raise FrameLengthError(f"expected {FRAME_HEX_CHARS} hex characters, got {len(cleaned)}")
    try:
        return bytes.fromhex(cleaned)
    except ValueError as exc:
        raise FrameLengthError(f"not a hex frame: {text!r}") from exc


def _as_bytes(frame: Union[RawFrame, bytes, bytearray, str]) -> bytes:
    if isinstance(frame, RawFrame):
        return frame.bits
    if isinstance(frame, str):
        return _hex_to_bytes(frame)
    data = bytes(frame)
    if len(data) != FRAME_OCTETS:
        raise FrameLengthError(f"expected {FRAME_OCTETS} octets, got {len(data)}")
    return data


def crc24(frame: Union[RawFrame, bytes, bytearray, str]) -> int:
    """Mode-S CRC remainder of a 112-bit frame; 0 means the frame is intact."""
    return kernels.crc24(_as_bytes(frame))


def _decode_callsign(me: int) -> str:
    chars = []
    for i in range(8):
        chars.append(CALLSIGN_ALPHABET[(me >> (42 - 6 * i)) & 0x3F])
    return "".join(chars).replace("#", "").rstrip()


def _decode_altitude(alt_code: int) -> Optional[int]:
    # Q bit set: 25 ft increments; Gillham-coded altitudes are not decoded
    if alt_code == 0 or not alt_code & 0x010:
        return None
    n = ((alt_code & 0xFE0) >> 1) | (alt_code & 0x00F)
    return n * 25 - 1000


def _decode_velocity(me: int) -> Payload:
    subtype = (me >> 48) & 0x7
    if subtype not in (1, 2):
        return Unsupported(f"velocity subtype {subtype}")
    d_ew = (me >> 42) & 0x1
    v_ew = (me >> 32) & 0x3FF
    d_ns = (me >> 31) & 0x1
    v_ns = (me >> 21) & 0x3FF
    vr_sign = (me >> 19) & 0x1
    vr = (me >> 10) & 0x1FF
    if v_ew == 0 or v_ns == 0:
        return Unsupported("velocity not available")
    scale = 4 if subtype == 2 else 1
    vx = (v_ew - 1) * scale * (-1 if d_ew else 1)
    vy = (v_ns - 1) * scale * (-1 if d_ns else 1)
    speed = math.hypot(vx, vy)
    track = math.degrees(math.atan2(vx, vy)) % 360.0
    vertical = 0 if vr == 0 else (vr - 1) * 64 * (-1 if vr_sign else 1)
    return AirborneVelocity(speed, track, vertical)


def parse_frame(hex_text: str, received_at: float = 0.0) -> DecodedMessage:
    """Decode one DF17 frame given as 28 hex characters."""
    data = _hex_to_bytes(hex_text)
    df = data[0] >> 3
    if df != ADSB_DF:
        raise NonAdsbFrame(df)
    remainder = kernels.crc24(data)
    if remainder:
        raise CrcError(remainder)
    icao = data[1:4].hex().upper()
    me = int.from_bytes(data[4:11], "big")
    tc = me >> 51
    received_at = round(float(received_at), 3)
    if 1 <= tc <= 4:
        payload: Payload = Identification(_decode_callsign(me), category=(me >> 48) & 0x7)
    elif 9 <= tc <= 18:
        altitude = _decode_altitude((me >> 36) & 0xFFF)
        if altitude is None:
            payload = Unsupported("altitude not available")
        else:
            parity = "odd" if (me >> 34) & 0x1 else "even"
            cpr = CprFrame(parity, (me >> 17) & 0x1FFFF, me & 0x1FFFF, received_at)
            payload = AirbornePosition(cpr, altitude)
    elif tc == 19:
        payload = _decode_velocity(me)
    else:
        payload = Unsupported(f"type code {tc}")
    return DecodedMessage(df, icao, tc, payload, received_at)


# --------------------------------------------------------------------------
# Compact position reporting


def cpr_encode(lat_deg: float, lon_deg: float, parity: str, t: float = 0.0) -> CprFrame:
    if not (-90.0 <= lat_deg <= 90.0) or not (-180.0 <= lon_deg <= 180.0):
        raise RangeError(f"position ({lat_deg}, {lon_deg}) out of range")
    if abs(lat_deg) > MAX_CPR_LAT:
        raise RangeError(f"latitude {lat_deg} inside the polar zone")
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be even or odd, not {parity!r}")
    yz, xz = kernels.cpr_encode(lat_deg, lon_deg, parity == "odd")
    return CprFrame(parity, int(yz), int(xz), t)


def cpr_decode_global(even: CprFrame, odd: CprFrame) -> tuple[float, float]:
    """Resolve an even/odd pair to (lat, lon), using the newer frame's zone."""
    if even.parity != "even" or odd.parity != "odd":
        raise ValueError("need one even and one odd frame")
    if abs(even.t - odd.t) > MAX_PAIR_GAP_S:
        raise StalePair(f"frames {abs(even.t - odd.t):.3f} s apart")
    status, lat, lon = kernels.cpr_decode_global(
        even.lat_cpr, even.lon_cpr, odd.lat_cpr, odd.lon_cpr, odd.t > even.t
    )
    if status == kernels.CPR_AMBIGUOUS:
        raise PositionAmbiguous("frames straddle a latitude zone boundary")
    if status == kernels.CPR_POLAR:
        raise RangeError("decoded latitude inside the polar zone")
    if lon == -180.0:
        lon = 180.0
    return lat, lon


# --------------------------------------------------------------------------
# Frame encoders (test vectors and simulator output)


def _char_code(ch: str) -> int:
    if ch == " ":
        return 32
    idx = CALLSIGN_ALPHABET.find(ch)
    if idx <= 0:
        raise ValueError(f"character {ch!r} not in the callsign alphabet")
    return idx


def _frame(icao: str, me: int, capability: int = 5) -> str:
    head = ((ADSB_DF << 3) | capability).to_bytes(1, "big") + bytes.fromhex(icao)
    body = head + me.to_bytes(7, "big")
    parity = kernels.crc24_parity(body)
    return (body + parity.to_bytes(3, "big")).hex().upper()


def encode_identification(icao: str, callsign: str, category: int = 0) -> str:
    text = callsign.upper().ljust(8)[:8]
    me = (4 << 51) | (category << 48)
    for i, ch in enumerate(text):
        me |= _char_code(ch) << (42 - 6 * i)
    return _frame(icao, me)


def encode_position(icao: str, lat_deg: float, lon_deg: float, altitude_ft: int, parity: str) -> str:
    cpr = cpr_encode(lat_deg, lon_deg, parity)
    n = max(0, min(0x7FF, int(round((altitude_ft + 1000) / 25))))
    alt_code = ((n & 0x7F0) << 1) | 0x010 | (n & 0x00F)
    me = (11 << 51) | (alt_code << 36) | ((1 if cpr.odd else 0) << 34)
    me |= (cpr.lat_cpr << 17) | cpr.lon_cpr
    return _frame(icao, me)


def encode_velocity(icao: str, ground_speed_kt: float, track_deg: float, vertical_rate_fpm: float) -> str:
    rad = math.radians(track_deg)
    vx = int(round(ground_speed_kt * math.sin(rad)))
    vy = int(round(ground_speed_kt * math.cos(rad)))
    vr_units = int(round(abs(vertical_rate_fpm) / 64))
    me = (19 << 51) | (1 << 48)
    me |= (1 if vx < 0 else 0) << 42
    me |= (min(abs(vx), 1022) + 1) << 32
    me |= (1 if vy < 0 else 0) << 31
    me |= (min(abs(vy), 1022) + 1) << 21
    me |= (1 if vertical_rate_fpm < 0 else 0) << 19
    me |= (min(vr_units, 510) + 1) << 10
    return _frame(icao, me)


# --------------------------------------------------------------------------
# Stream assembly


@dataclass
class _AircraftState:
    callsign: Optional[str] = None
    even: Optional[CprFrame] = None
    odd: Optional[CprFrame] = None
    altitude_ft: Optional[int] = None
    velocity: Optional[AirborneVelocity] = None


class FrameAssembler:
    """Combines per-ICAO identification, position and velocity frames.

    Emits an :class:`AdsbRecord` whenever a position resolves and a velocity
    report is already known for the aircraft.
    """

    def __init__(self):
        self._state: dict[str, _AircraftState] = {}
        self.errors: dict[str, int] = {}

    def feed(self, msg: DecodedMessage) -> Optional[AdsbRecord]:
        st = self._state.setdefault(msg.icao, _AircraftState())
        payload = msg.payload
        if isinstance(payload, Identification):
            st.callsign = payload.callsign
            return None
        if isinstance(payload, AirborneVelocity):
            st.velocity = payload
            return None
        if not isinstance(payload, AirbornePosition):
            return None
        if payload.cpr.odd:
            st.odd = payload.cpr
        else:
            st.even = payload.cpr
        st.altitude_ft = payload.altitude_ft
        if st.even is None or st.odd is None or st.velocity is None:
            return None
        try:
            lat, lon = cpr_decode_global(st.even, st.odd)
        except CodecError as exc:
            name = type(exc).__name__
            self.errors[name] = self.errors.get(name, 0) + 1
            return None
        vel = st.velocity
        return AdsbRecord(
            icao=msg.icao,
            callsign=st.callsign,
            lat_deg=lat,
            lon_deg=lon,
            altitude_ft=payload.altitude_ft,
            ground_speed_kt=vel.ground_speed_kt,
            track_deg=vel.track_deg,
            vertical_rate_fpm=vel.vertical_rate_fpm,
            timestamp=msg.received_at,
        )

    def feed_hex(self, hex_text: str, received_at: float) -> Optional[AdsbRecord]:
        return self.feed(parse_frame(hex_text, received_at))


# --------------------------------------------------------------------------
# CSV ingestion

REQUIRED_COLUMNS = ("timestamp", "icao", "lat", "lon", "altitude", "speed", "track")

COLUMN_ALIASES = {
    "timestamp": "timestamp",
    "time": "timestamp",
    "ts": "timestamp",
    "utc": "timestamp",
    "icao": "icao",
    "icao24": "icao",
    "hex": "icao",
    "address": "icao",
    "lat": "lat",
    "latitude": "lat",
    "lat_deg": "lat",
    "lon": "lon",
    "lng": "lon",
    "long": "lon",
    "longitude": "lon",
    "lon_deg": "lon",
    "altitude": "altitude",
    "alt": "altitude",
    "altitude_ft": "altitude",
    "speed": "speed",
    "ground_speed": "speed",
    "ground_speed_kt": "speed",
    "gs": "speed",
    "track": "track",
    "direction": "track",
    "heading": "track",
    "track_deg": "track",
    "callsign": "callsign",
    "flight": "callsign",
    "vertical_rate": "vertical_rate",
    "vertical_rate_fpm": "vertical_rate",
    "vrate": "vertical_rate",
    "vertical_speed": "vertical_rate",
    "position": "position",
}


@dataclass
class IngestResult:
    records: list[AdsbRecord] = field(default_factory=list)
    skipped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def skip_count(self) -> int:
        return len(self.skipped)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def _parse_timestamp(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _row_to_record(row: dict[str, str]) -> AdsbRecord:
    if "lat" not in row and "position" in row:
        lat_text, _, lon_text = row["position"].partition(",")
        row = dict(row, lat=lat_text, lon=lon_text)
    lon = float(row["lon"])
    if lon == -180.0:
        lon = 180.0
    track = float(row["track"]) % 360.0
    callsign = (row.get("callsign") or "").strip() or None
    vrate = row.get("vertical_rate")
    return AdsbRecord(
        icao=row["icao"].strip().upper(),
        callsign=callsign,
        lat_deg=float(row["lat"]),
        lon_deg=lon,
        altitude_ft=int(round(float(row["altitude"]))),
        ground_speed_kt=float(row["speed"]),
        track_deg=track,
        vertical_rate_fpm=float(vrate) if vrate not in (None, "") else 0.0,
        timestamp=round(_parse_timestamp(row["timestamp"]), 3),
    )


def ingest_csv(stream: Union[Iterable[str], str, io.TextIOBase]) -> IngestResult:
    """Read CSV rows into records; malformed rows are skipped and counted."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInput("no header row") from None
    columns = [COLUMN_ALIASES.get(h.strip().lower()) for h in header]
    present = {c for c in columns if c}
    if "position" in present:
        present |= {"lat", "lon"}
    missing = [c for c in REQUIRED_COLUMNS if c not in present]
    if missing:
        raise HeaderError(f"missing required columns: {', '.join(missing)}")

    result = IngestResult()
    for row in reader:
        line_no = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(columns):
            reason = f"expected {len(columns)} fields, got {len(row)}"
        else:
            mapped = {c: v for c, v in zip(columns, row) if c}
            try:
                result.records.append(_row_to_record(mapped))
                continue
            except (ValueError, KeyError) as exc:
                reason = str(exc)
        log.warning("skipping CSV line %d: %s", line_no, reason)
        result.skipped.append((line_no, reason))
    return result


CSV_COLUMNS = ("timestamp", "icao", "callsign", "lat", "lon", "altitude", "speed", "track", "vertical_rate")


def records_to_csv(records: Iterable[AdsbRecord]) -> str:
    """Render records in the column layout :func:`ingest_csv` reads."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                f"{r.timestamp:.3f}",
                r.icao,
                r.callsign or "",
                f"{r.lat_deg:.6f}",
                f"{r.lon_deg:.6f}",
                r.altitude_ft,
                f"{r.ground_speed_kt:.2f}",
                f"{r.track_deg:.2f}",
                f"{r.vertical_rate_fpm:.1f}",
            ]
        )
    return out.getvalue()
