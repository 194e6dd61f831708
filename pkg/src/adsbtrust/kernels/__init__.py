"""Hot numeric kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it was built; set ``ADSBTRUST_PURE=1``
to force the fallback. ``BACKEND`` names the backend actually loaded.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("ADSBTRUST_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

crc24 = _impl.crc24
crc24_parity = _impl.crc24_parity
haversine_m = _impl.haversine_m
initial_bearing_deg = _impl.initial_bearing_deg
destination = _impl.destination
cpr_nl = _impl.cpr_nl
cpr_encode = _impl.cpr_encode
cpr_decode_global = _impl.cpr_decode_global

CPR_OK = python_backend.CPR_OK
CPR_AMBIGUOUS = python_backend.CPR_AMBIGUOUS
CPR_POLAR = python_backend.CPR_POLAR
EARTH_RADIUS_M = python_backend.EARTH_RADIUS_M

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "crc24",
    "crc24_parity",
    "haversine_m",
    "initial_bearing_deg",
    "destination",
    "cpr_nl",
    "cpr_encode",
    "cpr_decode_global",
    "CPR_OK",
    "CPR_AMBIGUOUS",
    "CPR_POLAR",
    "EARTH_RADIUS_M",
]
