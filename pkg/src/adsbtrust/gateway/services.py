"""Services reachable through ``POST /v1/service/{name}``."""

from __future__ import annotations

from typing import Any, Callable, Optional, Sequence

from ..codec import CodecError, parse_frame

ServiceFn = Callable[[dict], Any]


class UnknownService(KeyError):
    pass


def decode_frames(args: dict, store: Sequence[str] = ()) -> dict:
    """Decode hex frames: ``frames`` given inline, or the ``recent`` newest held in ``store``."""
    frames = args.get("frames")
    if frames is None:
        recent = args.get("recent", 0)
        if isinstance(recent, bool) or not isinstance(recent, int) or recent < 0:
            raise ValueError("recent must be a non-negative integer")
        frames = list(store[-recent:]) if recent else []
    if not isinstance(frames, list):
        raise ValueError("frames must be a list of hex strings")
    decoded = errors = 0
    icaos = set()
    for raw in frames:
        try:
            msg = parse_frame(raw, 0.0)
        except (CodecError, TypeError):
            errors += 1
            continue
        decoded += 1
        icaos.add(msg.icao)
    return {"decoded": decoded, "errors": errors, "icaos": sorted(icaos)}


class ServiceRegistry:
    def __init__(self, services: Optional[dict] = None):
        self._services: dict[str, ServiceFn] = {}
        for name, fn in (services or {}).items():
            self.register(name, fn)

    def register(self, name: str, fn: ServiceFn) -> None:
        if not name or "/" in name:
            raise ValueError(f"bad service name {name!r}")
        self._services[name] = fn

    def __contains__(self, name: str) -> bool:
        return name in self._services

    def names(self) -> list[str]:
        return sorted(self._services)

    def call(self, name: str, args: dict) -> Any:
        try:
            fn = self._services[name]
        except KeyError:
            raise UnknownService(name) from None
        return fn(args)


def default_registry(
    alerts_source: Optional[Callable[[], list]] = None, frame_store: Sequence[str] = ()
) -> ServiceRegistry:
    def alerts(_args: dict) -> list:
        return [a.to_dict() for a in alerts_source()] if alerts_source else []

    return ServiceRegistry(
        {"features": lambda args: decode_frames(args, frame_store), "alerts": alerts, "echo": lambda args: args}
    )
