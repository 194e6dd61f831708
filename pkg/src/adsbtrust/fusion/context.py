"""Context derivation: time band and sector on a lat/lon grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..tracker import AirspaceBox, FeatureVector


class SectorUnmapped(ValueError):
    pass


@dataclass(frozen=True)
class Context:
    time_band: str  # "day" | "night"
    sector_id: str
    security_level: int

    def __post_init__(self):
        if self.time_band not in ("day", "night"):
            raise ValueError(f"bad time band {self.time_band!r}")
        if not 1 <= self.security_level <= 3:
            raise ValueError(f"security level {self.security_level} outside 1..3")


def _parse_hhmm(text: str) -> int:
    hh, mm = text.split(":")
    return int(hh) * 60 + int(mm)


@dataclass(frozen=True)
class GridConfig:
    """Regular rows x cols partition of an airspace box.

    Cells are half-open except along the northern and eastern edges, which
    belong to the last row and column so the whole box is covered.
    """

    box: AirspaceBox
    rows: int = 4
    cols: int = 4
    security_levels: dict = field(default_factory=dict)
    default_security_level: int = 1
    day_start: str = "06:00"
    day_end: str = "22:00"
    utc_offset_hours: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and column")
        if not (self.box.lat_max > self.box.lat_min and self.box.lon_max > self.box.lon_min):
            raise ValueError("degenerate airspace box")

    def sector_of(self, lat: float, lon: float) -> str:
        b = self.box
        if not b.contains(lat, lon):
            raise SectorUnmapped(f"({lat:.5f}, {lon:.5f}) outside the grid")
        r = min(int((lat - b.lat_min) / (b.lat_max - b.lat_min) * self.rows), self.rows - 1)
        c = min(int((lon - b.lon_min) / (b.lon_max - b.lon_min) * self.cols), self.cols - 1)
        return f"R{r}C{c}"

    def time_band(self, clock: float) -> str:
        minute = int(((clock + self.utc_offset_hours * 3600.0) // 60) % 1440)
        start, end = _parse_hhmm(self.day_start), _parse_hhmm(self.day_end)
        return "day" if start <= minute < end else "night"

    @classmethod
    def from_dict(cls, data: dict) -> "GridConfig":
        box = data["box"]
        if isinstance(box, dict):
            box = AirspaceBox(**box)
        else:
            box = AirspaceBox(*box)
        return cls(
            box=box,
            rows=int(data.get("rows", 4)),
            cols=int(data.get("cols", 4)),
            security_levels=dict(data.get("security_levels", {})),
            default_security_level=int(data.get("default_security_level", 1)),
            day_start=data.get("day_start", "06:00"),
            day_end=data.get("day_end", "22:00"),
            utc_offset_hours=float(data.get("utc_offset_hours", 0.0)),
        )


def contextualize(fv: FeatureVector, clock: float, grid: GridConfig, position: Optional[tuple] = None) -> Context:
    lat, lon = position if position is not None else (fv.lat_deg, fv.lon_deg)
    sector = grid.sector_of(lat, lon)
    level = int(grid.security_levels.get(sector, grid.default_security_level))
    return Context(grid.time_band(clock), sector, level)
