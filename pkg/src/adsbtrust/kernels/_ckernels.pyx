# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: CRC-24, CPR zone arithmetic and spherical geometry.

Same signatures and results as ``_pykernels``.
"""

from libc.math cimport sin, cos, asin, acos, atan2, sqrt, floor, fabs, M_PI, fmod
from libc.stdint cimport uint32_t

DEF GENERATOR = 0xFFF409
DEF EARTH_RADIUS_M = 6371000.0
DEF NZ = 15
DEF CPR_SCALE = 131072.0

CPR_OK = 0
CPR_AMBIGUOUS = 1
CPR_POLAR = 2

cdef uint32_t _TABLE[256]


cdef void _build_table():
    cdef uint32_t crc
    cdef int i, k
    for i in range(256):
        crc = (<uint32_t>i) << 16
        for k in range(8):
            if crc & 0x800000:
                crc = (crc << 1) ^ GENERATOR
            else:
                crc = crc << 1
        _TABLE[i] = crc & 0xFFFFFF


_build_table()


cdef inline uint32_t _crc_run(const unsigned char[:] data, Py_ssize_t n):
    cdef uint32_t crc = 0
    cdef Py_ssize_t i
    for i in range(n):
        crc = ((crc << 8) & 0xFFFFFF) ^ _TABLE[((crc >> 16) ^ data[i]) & 0xFF]
    return crc


def crc24(const unsigned char[:] data):
    cdef Py_ssize_t n = data.shape[0]
    cdef uint32_t crc
    if n < 3:
        crc = 0
        for i in range(n):
            crc = (crc << 8) | data[i]
        return crc
    crc = _crc_run(data, n - 3)
    return crc ^ ((<uint32_t>data[n - 3] << 16) | (<uint32_t>data[n - 2] << 8) | data[n - 1])


def crc24_parity(const unsigned char[:] data):
    return _crc_run(data, data.shape[0])


cdef inline double _rad(double d):
    return d * M_PI / 180.0


cdef inline double _deg(double r):
    return r * 180.0 / M_PI


cpdef double haversine_m(double lat1, double lon1, double lat2, double lon2):
    cdef double p1 = _rad(lat1)
    cdef double p2 = _rad(lat2)
    cdef double dp = p2 - p1
    cdef double dl = _rad(lon2 - lon1)
    cdef double a = sin(dp / 2) ** 2 + cos(p1) * cos(p2) * sin(dl / 2) ** 2
    a = sqrt(a)
    if a > 1.0:
        a = 1.0
    return 2.0 * EARTH_RADIUS_M * asin(a)


cdef inline double _pymod(double x, double y):
    return x - y * floor(x / y)


cpdef double initial_bearing_deg(double lat1, double lon1, double lat2, double lon2):
    cdef double p1 = _rad(lat1)
    cdef double p2 = _rad(lat2)
    cdef double dl = _rad(lon2 - lon1)
    cdef double y = sin(dl) * cos(p2)
    cdef double x = cos(p1) * sin(p2) - sin(p1) * cos(p2) * cos(dl)
    return _pymod(_deg(atan2(y, x)), 360.0)


def destination(double lat, double lon, double bearing_deg, double dist_m):
    cdef double d = dist_m / EARTH_RADIUS_M
    cdef double p1 = _rad(lat)
    cdef double l1 = _rad(lon)
    cdef double b = _rad(bearing_deg)
    cdef double sp2 = sin(p1) * cos(d) + cos(p1) * sin(d) * cos(b)
    if sp2 > 1.0:
        sp2 = 1.0
    elif sp2 < -1.0:
        sp2 = -1.0
    cdef double p2 = asin(sp2)
    cdef double l2 = l1 + atan2(sin(b) * sin(d) * cos(p1), cos(d) - sin(p1) * sp2)
    cdef double lon2 = _pymod(_deg(l2) + 540.0, 360.0) - 180.0
    if lon2 == -180.0:
        lon2 = 180.0
    return _deg(p2), lon2


cpdef int cpr_nl(double lat):
    cdef double alat = fabs(lat)
    if alat < 1e-9:
        return 59
    if alat == 87.0:
        return 2
    if alat > 87.0:
        return 1
    cdef double a = 1.0 - cos(M_PI / (2.0 * NZ))
    cdef double b = cos(M_PI / 180.0 * alat) ** 2
    return <int>floor(2.0 * M_PI / acos(1.0 - a / b))


def cpr_encode(double lat, double lon, bint odd):
    cdef int i = 1 if odd else 0
    cdef double dlat = 360.0 / (4 * NZ - i)
    cdef double yz = floor(CPR_SCALE * _pymod(lat, dlat) / dlat + 0.5)
    cdef double rlat = dlat * (yz / CPR_SCALE + floor(lat / dlat))
    cdef int ni = cpr_nl(rlat) - i
    if ni < 1:
        ni = 1
    cdef double dlon = 360.0 / ni
    cdef double xz = floor(CPR_SCALE * _pymod(lon, dlon) / dlon + 0.5)
    return <long>_pymod(yz, CPR_SCALE), <long>_pymod(xz, CPR_SCALE)


def cpr_decode_global(long lat_even, long lon_even, long lat_odd, long lon_odd, bint odd_newer):
    cdef double ye = lat_even / CPR_SCALE
    cdef double yo = lat_odd / CPR_SCALE
    cdef double xe = lon_even / CPR_SCALE
    cdef double xo = lon_odd / CPR_SCALE
    cdef double j = floor(59.0 * ye - 60.0 * yo + 0.5)
    cdef double rlat_e = (360.0 / 60.0) * (_pymod(j, 60.0) + ye)
    cdef double rlat_o = (360.0 / 59.0) * (_pymod(j, 59.0) + yo)
    if rlat_e >= 270.0:
        rlat_e -= 360.0
    if rlat_o >= 270.0:
        rlat_o -= 360.0
    if fabs(rlat_e) > 87.0 or fabs(rlat_o) > 87.0:
        return CPR_POLAR, 0.0, 0.0
    cdef int nl = cpr_nl(rlat_e)
    if nl != cpr_nl(rlat_o):
        return CPR_AMBIGUOUS, 0.0, 0.0
    cdef double lat, x
    cdef int i
    if odd_newer:
        lat = rlat_o
        i = 1
        x = xo
    else:
        lat = rlat_e
        i = 0
        x = xe
    cdef int ni = nl - i
    if ni < 1:
        ni = 1
    cdef double m = floor(xe * (nl - 1) - xo * nl + 0.5)
    cdef double lon = (360.0 / ni) * (_pymod(m, <double>ni) + x)
    if lon >= 180.0:
        lon -= 360.0
    return CPR_OK, lat, lon
