"""HTTP/1.1 gateway with a monolithic and a microservice deployment mode.

Mono: one server answers everything in process. Micro: the public front
server forwards each service request over loopback sockets to separately
scheduled units (an access-control unit, then a service unit), sleeping the
configured link delay before every hop.
"""

from __future__ import annotations

import argparse
import http.client
import json
import logging
import sys
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional, Sequence

from ..fusion import FogEngine
from ..tracker import parse_features
from .access import AccessController, HttpRpcQuery, RpcBridge, RpcError
from .fabric import Fabric
from .services import ServiceRegistry, UnknownService, default_registry

log = logging.getLogger(__name__)

MAX_FEATURE_BODY = 1 << 20
MAX_BODY = 8 << 20
STAGE_HEADERS = ("X-Auth-Us", "X-Access-Us", "X-Service-Us")


class BusyError(RuntimeError):
    pass


class QueueFull(RuntimeError):
    pass


@dataclass(frozen=True)
class DeploymentMode:
    mode: str = "mono"
    link_delay_ms: float = 0.0

    def __post_init__(self):
        if self.mode not in ("mono", "micro"):
            raise ValueError(f"mode must be mono or micro, not {self.mode!r}")
        if self.link_delay_ms < 0:
            raise ValueError("link delay must be non-negative")

    @property
    def hop_delay_s(self) -> float:
        # mono has no network hops, so the configured delay never applies
        return self.link_delay_ms / 1000.0 if self.mode == "micro" else 0.0


@dataclass(frozen=True)
class ServiceRequest:
    requester_vid: Optional[str]
    token_id: Optional[str]
    resource: str
    action: str
    body: bytes
    request_id: str


class FeatureQueue:
    """Bounded FIFO between the features endpoint and the fog engine."""

    def __init__(self, capacity: int = 10_000):
        self.capacity = capacity
        self._items: deque = deque()
        self._cond = threading.Condition()
        self.received = 0

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)

    def put_all(self, items: list) -> None:
        with self._cond:
            if len(self._items) + len(items) > self.capacity:
                raise QueueFull(f"{len(items)} entries do not fit ({len(self._items)}/{self.capacity})")
            self._items.extend(items)
            self.received += len(items)
            self._cond.notify_all()

    def drain(self, timeout: Optional[float] = None) -> list:
        with self._cond:
            if not self._items and timeout:
                self._cond.wait(timeout)
            out = list(self._items)
            self._items.clear()
            return out


def _json_bytes(doc) -> bytes:
    return json.dumps(doc, separators=(",", ":"), sort_keys=True).encode("utf-8")


class _Hop:
    """Keep-alive client connections to one unit, one per calling thread."""

    def __init__(self, host: str, port: int):
        self.host, self.port = host, port
        self._local = threading.local()

    def _conn(self) -> http.client.HTTPConnection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = http.client.HTTPConnection(self.host, self.port, timeout=30)
            self._local.conn = conn
        return conn

    def forward(self, delay_s: float, path: str, body: bytes, headers: dict) -> tuple[int, dict, bytes]:
        if delay_s > 0:
            time.sleep(delay_s)
        for attempt in (0, 1):
            conn = self._conn()
            try:
                conn.request("POST", path, body=body, headers=headers)
                resp = conn.getresponse()
                data = resp.read()
                return resp.status, dict(resp.getheaders()), data
            except (ConnectionError, http.client.HTTPException, OSError):
                conn.close()
                self._local.conn = None
                if attempt:
                    raise
        raise AssertionError("unreachable")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True
    server_version = "adsbtrust"
    sys_version = ""

    def log_message(self, fmt, *args):  # route through logging, not stderr
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, doc, headers: Optional[dict] = None, close: bool = False) -> None:
        body = doc if isinstance(doc, bytes) else _json_bytes(doc)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        headers = dict(headers or {})
        headers.setdefault("X-Decision-Us", "0")
        for k, v in headers.items():
            self.send_header(k, str(v))
        if close:
            self.send_header("Connection", "close")
            self.close_connection = True
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, error: str, reason: str = "", headers: Optional[dict] = None, close=False):
        self._send(status, {"error": error, "reason": reason}, headers, close)

    def _body(self, limit: int) -> Optional[bytes]:
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            self._error(400, "BadRequest", "invalid Content-Length", close=True)
            return None
        if length > limit:
            self._error(413, "TooLarge", f"{length} > {limit} octets", close=True)
            return None
        return self.rfile.read(length) if length else b""


def _handle_rpc(handler: _Handler, gw: "Gateway") -> None:
    body = handler._body(MAX_BODY)
    if body is None:
        return
    try:
        doc = json.loads(body.decode("utf-8"))
        method, params = doc["method"], doc.get("params", {})
    except (ValueError, KeyError, TypeError, AttributeError):
        return handler._error(400, "BadRequest", "expected {method, params}")
    try:
        result, height = gw.rpc.call(method, params)
    except RpcError as exc:
        return handler._send(exc.status, {"error": exc.error, "reason": exc.reason, "height": gw.fabric.height})
    handler._send(200, {"result": result, "height": height})


class Gateway:
    def __init__(
        self,
        fabric: Optional[Fabric] = None,
        mode: DeploymentMode = DeploymentMode(),
        ac_enabled: bool = True,
        host: str = "127.0.0.1",
        port: int = 0,
        services: Optional[ServiceRegistry] = None,
        fog: Optional[FogEngine] = None,
        queue_capacity: int = 10_000,
        cache_enabled: bool = False,
        frame_store: Sequence[str] = (),
        ledger_transport: str = "rpc",
    ):
        if ledger_transport not in ("rpc", "inproc"):
            raise ValueError("ledger_transport must be rpc or inproc")
        self.ledger_transport = ledger_transport
        self.fabric = fabric or Fabric()
        self.mode = mode
        self.ac_enabled = ac_enabled
        self.host = host
        self.port = port
        self.fog = fog
        self.services = services or default_registry(lambda: self.fog.alerts if self.fog else [], frame_store)
        self.queue = FeatureQueue(queue_capacity)
        self.access = AccessController(self.fabric, cache_enabled)
        self.rpc = RpcBridge(self.fabric)
        self._lock = threading.Lock()
        self._inflight = 0
        self._seen_ids: set[str] = set()
        self._front: Optional[ThreadingHTTPServer] = None
        self._ledger_rpc: Optional[ThreadingHTTPServer] = None
        self._units: dict[str, ThreadingHTTPServer] = {}
        self._hops: dict[str, _Hop] = {}
        self._threads: list[threading.Thread] = []
        self._fog_thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

    # ---- lifecycle --------------------------------------------------------

    def _serve(self, handler_cls, name: str, port: int = 0) -> ThreadingHTTPServer:
        server = ThreadingHTTPServer((self.host, port), handler_cls)
        server.daemon_threads = True
        t = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05}, name=name, daemon=True)
        t.start()
        self._threads.append(t)
        return server

    def start(self) -> "Gateway":
        self._front = self._serve(self._front_handler(), "gateway-front", self.port)
        self.port = self._front.server_address[1]
        if self.ledger_transport == "rpc":
            # the ledger node is its own network service in both modes
            self._ledger_rpc = self._serve(self._ledger_rpc_handler(), "ledger-rpc")
            self.access.query = HttpRpcQuery(f"http://{self.host}:{self._ledger_rpc.server_address[1]}")
        self._configure_units()
        if self.fog is not None:
            self._fog_thread = threading.Thread(target=self._fog_loop, name="fog-consumer", daemon=True)
            self._fog_thread.start()
        return self

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def _configure_units(self) -> None:
        for server in self._units.values():
            server.shutdown()
            server.server_close()
        self._units.clear()
        self._hops.clear()
        if self.mode.mode != "micro":
            return
        for name, handler in (("service", self._service_unit_handler()), ("access", self._access_unit_handler())):
            server = self._serve(handler, f"unit-{name}")
            self._units[name] = server
            self._hops[name] = _Hop(self.host, server.server_address[1])

    def set_mode(self, mode: DeploymentMode, ac_enabled: Optional[bool] = None) -> None:
        with self._lock:
            if self._inflight:
                raise BusyError(f"{self._inflight} request(s) in flight")
            self.mode = mode
            if ac_enabled is not None:
                self.ac_enabled = ac_enabled
            if self._front is not None:
                self._configure_units()

    def close(self) -> None:
        self._stop.set()
        extra = [srv for srv in (self._front, self._ledger_rpc) if srv is not None]
        for server in list(self._units.values()) + extra:
            server.shutdown()
            server.server_close()
        self._units.clear()
        self._front = self._ledger_rpc = None

    def __enter__(self) -> "Gateway":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    def _fog_loop(self) -> None:
        while not self._stop.is_set():
            for fv in self.queue.drain(timeout=0.1):
                self.fog.process(fv)

    # ---- request bookkeeping ------------------------------------------------

    def _enter(self) -> None:
        with self._lock:
            self._inflight += 1

    def _leave(self) -> None:
        with self._lock:
            self._inflight -= 1

    @property
    def inflight(self) -> int:
        with self._lock:
            return self._inflight

    def _claim_request_id(self, request_id: Optional[str]) -> Optional[str]:
        request_id = request_id or uuid.uuid4().hex
        with self._lock:
            if request_id in self._seen_ids:
                return None
            self._seen_ids.add(request_id)
        return request_id

    def parse_service_request(self, headers, body: bytes, request_id: str, name: str) -> ServiceRequest:
        doc = json.loads(body.decode("utf-8") or "{}")
        if not isinstance(doc, dict):
            raise ValueError("request body must be a JSON object")
        resource = doc.get("resource", f"/{name}/default")
        action = doc.get("action", "read")
        if not isinstance(resource, str) or not resource or not isinstance(action, str):
            raise ValueError("resource and action must be non-empty strings")
        if resource != f"/{name}" and not resource.startswith(f"/{name}/"):
            # a token for one service must not open another
            raise ValueError(f"resource {resource!r} is outside /{name}")
        return ServiceRequest(headers.get("X-VID"), headers.get("X-Token-Id"), resource, action, body, request_id)

    def run_service(self, name: str, body: bytes) -> tuple[int, dict, dict]:
        doc = json.loads(body.decode("utf-8") or "{}")
        args = doc.get("args", {}) if isinstance(doc, dict) else {}
        t0 = time.perf_counter_ns()
        try:
            result = self.services.call(name, args)
        except UnknownService:
            return 404, {"error": "UnknownService", "reason": name}, {"X-Service-Us": 0}
        except (ValueError, TypeError) as exc:
            return 400, {"error": "BadArgs", "reason": str(exc)}, {"X-Service-Us": (time.perf_counter_ns() - t0) // 1000}
        return 200, {"result": result}, {"X-Service-Us": (time.perf_counter_ns() - t0) // 1000}

    def guarded_request(self, req: ServiceRequest, name: str) -> tuple[int, dict, dict]:
        """In-process pipeline: authenticate, verify access, dispatch."""
        headers = {"X-Auth-Us": 0, "X-Access-Us": 0}
        if self.ac_enabled:
            d = self.access.decide(req.request_id, req.requester_vid, req.token_id, req.resource, req.action)
            headers.update({"X-Auth-Us": d.auth_us, "X-Access-Us": d.access_us, "X-Decision-Us": d.decision_us})
            if not d.granted:
                error = {401: "AuthFailed", 403: "AccessDenied"}.get(d.status, "BadRequest")
                return d.status, {"error": error, "reason": d.reason}, headers
        status, doc, svc_headers = self.run_service(name, req.body)
        headers.update(svc_headers)
        return status, doc, headers

    # ---- handlers --------------------------------------------------------------

    def _front_handler(self):
        gw = self

        class Front(_Handler):
            def do_GET(self):
                if self.path != "/v1/health":
                    return self._error(404, "NotFound", self.path)
                height = gw.fabric.height
                self._send(200, {"status": "ok", "mode": gw.mode.mode, "ac": gw.ac_enabled, "height": height})

            def do_POST(self):
                gw._enter()
                try:
                    if self.path == "/v1/features":
                        return self._features()
                    if self.path == "/v1/rpc":
                        return self._rpc()
                    if self.path.startswith("/v1/service/"):
                        return self._service(self.path[len("/v1/service/"):])
                    self._body(MAX_BODY)
                    self._error(404, "NotFound", self.path)
                finally:
                    gw._leave()

            def _features(self):
                body = self._body(MAX_FEATURE_BODY)
                if body is None:
                    return
                try:
                    fmap = parse_features(body or b"{}")
                except (ValueError, UnicodeDecodeError) as exc:
                    return self._error(400, "SchemaError", str(exc))
                try:
                    gw.queue.put_all(list(fmap.entries.values()))
                except QueueFull as exc:
                    return self._error(503, "QueueFull", str(exc))
                self._send(200, {"accepted": len(fmap)})

            def _rpc(self):
                _handle_rpc(self, gw)

            def _service(self, name: str):
                body = self._body(MAX_BODY)
                if body is None:
                    return
                request_id = gw._claim_request_id(self.headers.get("X-Request-Id"))
                if request_id is None:
                    return self._error(409, "DuplicateRequest", self.headers.get("X-Request-Id", ""))
                ids = {"X-Request-Id": request_id}
                try:
                    req = gw.parse_service_request(self.headers, body, request_id, name)
                except (ValueError, UnicodeDecodeError) as exc:
                    return self._error(400, "SchemaError", str(exc), ids)
                if name not in gw.services:
                    return self._error(404, "UnknownService", name, ids)
                if gw.mode.mode == "mono":
                    status, doc, headers = gw.guarded_request(req, name)
                    return self._send(status, doc, {**headers, **ids})
                unit, path = ("access", f"/unit/access/{name}") if gw.ac_enabled else ("service", f"/unit/service/{name}")
                fwd = {"Content-Type": "application/json", "X-Request-Id": request_id}
                for h in ("X-VID", "X-Token-Id"):
                    if self.headers.get(h):
                        fwd[h] = self.headers[h]
                try:
                    status, headers, data = gw._hops[unit].forward(gw.mode.hop_delay_s, path, body, fwd)
                except OSError as exc:
                    return self._error(502, "ServiceUnavailable", str(exc), ids)
                relay = {k: headers[k] for k in ("X-Decision-Us",) + STAGE_HEADERS if k in headers}
                self._send(status, data, {**relay, **ids})

        return Front

    def _ledger_rpc_handler(self):
        gw = self

        class LedgerRpc(_Handler):
            def do_POST(self):
                if self.path != "/v1/rpc":
                    self._body(MAX_BODY)
                    return self._error(404, "NotFound", self.path)
                _handle_rpc(self, gw)

        return LedgerRpc

    def _access_unit_handler(self):
        gw = self

        class AccessUnit(_Handler):
            def do_POST(self):
                name = self.path.rsplit("/", 1)[-1]
                body = self._body(MAX_BODY)
                if body is None:
                    return
                req = gw.parse_service_request(self.headers, body, self.headers["X-Request-Id"], name)
                d = gw.access.decide(req.request_id, req.requester_vid, req.token_id, req.resource, req.action)
                headers = {"X-Auth-Us": d.auth_us, "X-Access-Us": d.access_us, "X-Decision-Us": d.decision_us}
                if not d.granted:
                    error = {401: "AuthFailed", 403: "AccessDenied"}.get(d.status, "BadRequest")
                    return self._send(d.status, {"error": error, "reason": d.reason}, headers)
                try:
                    status, svc_headers, data = gw._hops["service"].forward(
                        gw.mode.hop_delay_s, f"/unit/service/{name}", body, {"Content-Type": "application/json"}
                    )
                except OSError as exc:
                    return self._error(502, "ServiceUnavailable", str(exc), headers)
                if "X-Service-Us" in svc_headers:
                    headers["X-Service-Us"] = svc_headers["X-Service-Us"]
                self._send(status, data, headers)

        return AccessUnit

    def _service_unit_handler(self):
        gw = self

        class ServiceUnit(_Handler):
            def do_POST(self):
                name = self.path.rsplit("/", 1)[-1]
                body = self._body(MAX_BODY)
                if body is None:
                    return
                status, doc, headers = gw.run_service(name, body)
                self._send(status, doc, headers)

        return ServiceUnit


def bootstrap(
    n_clients: int = 4,
    resources: tuple = ("/features", "/alerts", "/echo"),
    actions: tuple = ("read",),
    interval_ms: int = 200,
    seed: str = "fabric",
) -> tuple[Fabric, dict]:
    """Fabric with every client registered and holding a token per resource root."""
    fabric = Fabric(n_clients=n_clients, interval_ms=interval_ms, seed=seed)
    fabric.register_all()
    tokens: dict = {}
    for root in resources:
        fabric.own(root)
        for client in fabric.clients:
            tokens.setdefault(client.vid, {})[root] = fabric.issue(client, f"{root}/*", actions)
    return fabric, tokens


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="adsbtrust-gateway")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8080)
    ap.add_argument("--mode", choices=("mono", "micro"), default="mono")
    ap.add_argument("--ac", choices=("off", "blendcac"), default="blendcac")
    ap.add_argument("--link-delay-ms", type=float, default=0.0)
    ap.add_argument("--clients", type=int, default=4)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    fabric, tokens = bootstrap(args.clients)
    fabric.start()
    gw = Gateway(fabric, DeploymentMode(args.mode, args.link_delay_ms), args.ac == "blendcac", args.host, args.port)
    gw.start()
    json.dump({"url": gw.url, "tokens": tokens}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    sys.stdout.flush()
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        gw.close()
        fabric.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
