"""Minimal keep-alive client for the gateway endpoints."""

from __future__ import annotations

import http.client
import json
import time
from dataclasses import dataclass
from typing import Any, Optional
from urllib.parse import urlparse


@dataclass(frozen=True)
class Response:
    status: int
    headers: dict
    body: Any
    elapsed_ms: float

    def header_int(self, name: str) -> int:
        return int(self.headers.get(name, 0))


class GatewayClient:
    def __init__(self, url: str, timeout: float = 30.0):
        parsed = urlparse(url)
        self.host, self.port = parsed.hostname, parsed.port
        self.timeout = timeout
        self._conn: Optional[http.client.HTTPConnection] = None

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    def __enter__(self) -> "GatewayClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def request(self, method: str, path: str, body: Optional[bytes] = None, headers: Optional[dict] = None) -> Response:
        headers = dict(headers or {})
        if body is not None:
            headers.setdefault("Content-Type", "application/json")
        for attempt in (0, 1):
            if self._conn is None:
                self._conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
            t0 = time.perf_counter()
            try:
                self._conn.request(method, path, body=body, headers=headers)
                resp = self._conn.getresponse()
                data = resp.read()
            except (ConnectionError, http.client.HTTPException):
                # the server closed an idle keep-alive connection; reconnect once
                self.close()
                if attempt:
                    raise
                continue
            elapsed = (time.perf_counter() - t0) * 1000.0
            if resp.getheader("Connection", "").lower() == "close":
                self.close()
            doc = json.loads(data) if data else None
            return Response(resp.status, dict(resp.getheaders()), doc, elapsed)
        raise AssertionError("unreachable")

    def post_json(self, path: str, doc: Any, headers: Optional[dict] = None) -> Response:
        return self.request("POST", path, json.dumps(doc).encode("utf-8"), headers)

    def health(self) -> Response:
        return self.request("GET", "/v1/health")

    def post_features(self, body) -> Response:
        if not isinstance(body, (bytes, bytearray)):
            body = body.encode("utf-8") if isinstance(body, str) else json.dumps(body).encode("utf-8")
        return self.request("POST", "/v1/features", bytes(body))

    def rpc(self, method: str, params: Optional[dict] = None) -> Response:
        return self.post_json("/v1/rpc", {"method": method, "params": params or {}})

    def service(
        self,
        name: str,
        vid: Optional[str] = None,
        token_id: Optional[str] = None,
        resource: Optional[str] = None,
        action: str = "read",
        args: Optional[dict] = None,
        request_id: Optional[str] = None,
    ) -> Response:
        headers = {}
        if vid is not None:
            headers["X-VID"] = vid
        if token_id is not None:
            headers["X-Token-Id"] = token_id
        if request_id is not None:
            headers["X-Request-Id"] = request_id
        doc = {"action": action, "args": args or {}}
        if resource is not None:
            doc["resource"] = resource
        return self.post_json(f"/v1/service/{name}", doc, headers)
