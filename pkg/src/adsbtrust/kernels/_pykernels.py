"""Pure-Python implementations of the hot numeric kernels.

Mirrors ``_ckernels.pyx`` function for function; the package falls back to
this module when the compiled extension is unavailable.
"""

import math

GENERATOR = 0xFFF409
EARTH_RADIUS_M = 6371000.0
NZ = 15
CPR_SCALE = 131072  # 2**17

CPR_OK = 0
CPR_AMBIGUOUS = 1
CPR_POLAR = 2


def _build_table():
    table = []
    for i in range(256):
        crc = i << 16
        for _ in range(8):
            crc = (crc << 1) ^ GENERATOR if crc & 0x800000 else crc << 1
        table.append(crc & 0xFFFFFF)
    return table


_TABLE = _build_table()


def crc24(data):
    """Remainder of the whole frame modulo the Mode-S generator.

    Divides everything but the trailing parity field, then folds the parity
    in, which equals the remainder of the full message.
    """
    n = len(data)
    if n < 3:
        return int.from_bytes(bytes(data), "big")
    crc = 0
    table = _TABLE
    for byte in data[: n - 3]:
        crc = ((crc << 8) & 0xFFFFFF) ^ table[(crc >> 16) ^ byte]
    return crc ^ ((data[n - 3] << 16) | (data[n - 2] << 8) | data[n - 1])


def crc24_parity(data):
    """Parity to append to ``data`` so the resulting frame has remainder 0."""
    crc = 0
    table = _TABLE
    for byte in data:
        crc = ((crc << 8) & 0xFFFFFF) ^ table[(crc >> 16) ^ byte]
    return crc


def haversine_m(lat1, lon1, lat2, lon2):
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def initial_bearing_deg(lat1, lon1, lat2, lon2):
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    y = math.sin(dl) * math.cos(p2)
    x = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)
    return math.degrees(math.atan2(y, x)) % 360.0


def destination(lat, lon, bearing_deg, dist_m):
    """Point reached travelling ``dist_m`` along a great circle."""
    d = dist_m / EARTH_RADIUS_M
    p1 = math.radians(lat)
    l1 = math.radians(lon)
    b = math.radians(bearing_deg)
    sp2 = math.sin(p1) * math.cos(d) + math.cos(p1) * math.sin(d) * math.cos(b)
    p2 = math.asin(max(-1.0, min(1.0, sp2)))
    l2 = l1 + math.atan2(
        math.sin(b) * math.sin(d) * math.cos(p1), math.cos(d) - math.sin(p1) * sp2
    )
    lon2 = (math.degrees(l2) + 540.0) % 360.0 - 180.0
    if lon2 == -180.0:
        lon2 = 180.0
    return math.degrees(p2), lon2


def cpr_nl(lat):
    """Number of longitude zones at ``lat``."""
    alat = abs(lat)
    if alat < 1e-9:
        return 59
    if alat == 87.0:
        return 2
    if alat > 87.0:
        return 1
    a = 1.0 - math.cos(math.pi / (2.0 * NZ))
    b = math.cos(math.pi / 180.0 * alat) ** 2
    return int(math.floor(2.0 * math.pi / math.acos(1.0 - a / b)))


def _mod(x, y):
    return x - y * math.floor(x / y)


def cpr_encode(lat, lon, odd):
    i = 1 if odd else 0
    dlat = 360.0 / (4 * NZ - i)
    yz = math.floor(CPR_SCALE * _mod(lat, dlat) / dlat + 0.5)
    rlat = dlat * (yz / CPR_SCALE + math.floor(lat / dlat))
    ni = max(cpr_nl(rlat) - i, 1)
    dlon = 360.0 / ni
    xz = math.floor(CPR_SCALE * _mod(lon, dlon) / dlon + 0.5)
    return int(yz) % CPR_SCALE, int(xz) % CPR_SCALE


def cpr_decode_global(lat_even, lon_even, lat_odd, lon_odd, odd_newer):
    """Return ``(status, lat, lon)``; status is one of the ``CPR_*`` codes."""
    ye = lat_even / CPR_SCALE
    yo = lat_odd / CPR_SCALE
    xe = lon_even / CPR_SCALE
    xo = lon_odd / CPR_SCALE
    j = math.floor(59.0 * ye - 60.0 * yo + 0.5)
    rlat_e = (360.0 / 60.0) * (_mod(j, 60) + ye)
    rlat_o = (360.0 / 59.0) * (_mod(j, 59) + yo)
    if rlat_e >= 270.0:
        rlat_e -= 360.0
    if rlat_o >= 270.0:
        rlat_o -= 360.0
    if abs(rlat_e) > 87.0 or abs(rlat_o) > 87.0:
        return CPR_POLAR, 0.0, 0.0
    nl_e = cpr_nl(rlat_e)
    if nl_e != cpr_nl(rlat_o):
        return CPR_AMBIGUOUS, 0.0, 0.0
    if odd_newer:
        lat, i, x = rlat_o, 1, xo
    else:
        lat, i, x = rlat_e, 0, xe
    nl = nl_e
    ni = max(nl - i, 1)
    m = math.floor(xe * (nl - 1) - xo * nl + 0.5)
    lon = (360.0 / ni) * (_mod(m, ni) + x)
    if lon >= 180.0:
        lon -= 360.0
    return CPR_OK, lat, lon
