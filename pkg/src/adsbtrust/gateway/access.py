"""Token-guarded access decisions and the JSON-RPC bridge to the ledger."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Optional

from ..chain import ChainError, Transaction
from ..chain.encoding import DecodeError
from ..contracts import ContractError
from .client import GatewayClient
from .fabric import Fabric


@dataclass(frozen=True)
class Decision:
    status: int  # 200 grant, 401 authentication failure, 403 deny, 400 bad request
    reason: Optional[str]
    subject: Optional[str]
    token_id: Optional[str]
    height: int
    auth_us: int
    access_us: int

    @property
    def granted(self) -> bool:
        return self.status == 200

    @property
    def decision_us(self) -> int:
        return self.auth_us + self.access_us


@dataclass(frozen=True)
class AccessRecord:
    request_id: str
    vid: Optional[str]
    resource: str
    action: str
    granted: bool
    status: int
    reason: Optional[str]
    height: int


def _us(start_ns: int) -> int:
    return (time.perf_counter_ns() - start_ns) // 1000


class QueryFailed(Exception):
    def __init__(self, code: str, reason: str = ""):
        super().__init__(f"{code}: {reason}" if reason else code)
        self.code = code


class InProcessQuery:
    """Contract reads straight on the node's command queue."""

    def __init__(self, fabric: Fabric):
        self.fabric = fabric

    def __call__(self, contract: bytes, function: str, args: list) -> tuple[Any, int]:
        try:
            return self.fabric.query_at_head(contract, function, *args)
        except ContractError as exc:
            raise QueryFailed(exc.code, str(exc)) from exc


class HttpRpcQuery:
    """Contract reads through the node's JSON-RPC endpoint, one keep-alive connection per thread."""

    def __init__(self, url: str):
        self.url = url
        self._local = threading.local()

    def __call__(self, contract: bytes, function: str, args: list) -> tuple[Any, int]:
        client = getattr(self._local, "client", None)
        if client is None:
            client = self._local.client = GatewayClient(self.url)
        resp = client.rpc("contract_query", {"contract": contract.hex(), "function": function, "args": args})
        if resp.status != 200:
            raise QueryFailed(resp.body.get("error", "RpcError"), resp.body.get("reason", ""))
        return resp.body["result"], resp.body["height"]


class AccessController:
    """authenticate(vid, address) then verify_access(subject, resource, action).

    Decisions are taken against the current head. The optional cache is keyed
    by the request tuple and the head height, and is emptied on every new head.
    """

    def __init__(self, fabric: Fabric, cache_enabled: bool = False, query=None):
        self.fabric = fabric
        self.query = query or InProcessQuery(fabric)
        self.cache_enabled = cache_enabled
        self._cache: dict = {}
        self._lock = threading.Lock()
        self.log: list[AccessRecord] = []
        fabric.service.on_new_head(lambda _h: self._invalidate())

    def _invalidate(self) -> None:
        with self._lock:
            self._cache.clear()

    def _authenticate(self, vid: str, token_id: Optional[str]) -> tuple[Optional[str], int]:
        if token_id:
            try:
                token, height = self.query(self.fabric.capability, "get_token", [token_id])
            except QueryFailed:
                return None, -1
            address = token["subject"]
        else:
            address, height = self.query(self.fabric.registry, "lookup_vid", [vid])
            if address is None:
                return None, height
        ok, height = self.query(self.fabric.registry, "authenticate", [vid, address])
        return (address if ok else None), height

    def decide(self, request_id: str, vid: Optional[str], token_id: Optional[str], resource: str, action: str) -> Decision:
        key = (vid, token_id, resource, action)
        if self.cache_enabled:
            with self._lock:
                hit = self._cache.get(key)
            if hit is not None:
                return self._record(request_id, vid, resource, action, hit)
        t0 = time.perf_counter_ns()
        if not vid:
            decision = Decision(401, "MissingVid", None, None, -1, _us(t0), 0)
            return self._record(request_id, vid, resource, action, decision)
        try:
            subject, height = self._authenticate(vid, token_id)
        except QueryFailed as exc:
            decision = Decision(401, exc.code, None, None, -1, _us(t0), 0)
            return self._record(request_id, vid, resource, action, decision)
        auth_us = _us(t0)
        if subject is None:
            decision = Decision(401, "AuthFailed", None, None, height, auth_us, 0)
            return self._record(request_id, vid, resource, action, decision)
        t1 = time.perf_counter_ns()
        try:
            verdict, height = self.query(self.fabric.capability, "verify_access", [subject, resource, action])
        except QueryFailed as exc:
            decision = Decision(400, exc.code, subject, None, height, auth_us, _us(t1))
            return self._record(request_id, vid, resource, action, decision)
        access_us = _us(t1)
        if verdict["granted"]:
            decision = Decision(200, None, subject, verdict["token_id"], height, auth_us, access_us)
        else:
            decision = Decision(403, verdict["reason"], subject, None, height, auth_us, access_us)
        if self.cache_enabled:
            with self._lock:
                self._cache[key] = decision
        return self._record(request_id, vid, resource, action, decision)

    def _record(self, request_id, vid, resource, action, decision: Decision) -> Decision:
        with self._lock:
            self.log.append(
                AccessRecord(request_id, vid, resource, action, decision.granted, decision.status, decision.reason, decision.height)
            )
        return decision

    def counts(self) -> dict:
        with self._lock:
            grants = sum(1 for r in self.log if r.granted)
            denies = sum(1 for r in self.log if r.status == 403)
            auth_failures = sum(1 for r in self.log if r.status == 401)
        return {"grant": grants, "deny": denies, "auth_failed": auth_failures}


# --------------------------------------------------------------------------
# RPC


class RpcError(Exception):
    status = 400

    def __init__(self, error: str, reason: str = ""):
        super().__init__(f"{error}: {reason}" if reason else error)
        self.error = error
        self.reason = reason


class UnknownMethod(RpcError):
    def __init__(self, method):
        super().__init__("UnknownMethod", str(method))


class UpstreamError(RpcError):
    status = 422


def _receipt_json(receipt) -> Optional[dict]:
    if receipt is None:
        return None
    return {
        "tx_hash": receipt.tx_hash.hex(),
        "ok": receipt.ok,
        "result": receipt.result,
        "error": receipt.error,
        "contract": receipt.contract.hex() if receipt.contract else None,
    }


def _hex_param(params: dict, name: str) -> bytes:
    value = params.get(name)
    if not isinstance(value, str):
        raise RpcError("BadParams", f"{name} must be a hex string")
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise RpcError("BadParams", f"{name} is not hex") from None


class RpcBridge:
    """Stateless mapping from RPC methods to node operations."""

    METHODS = ("submit_tx", "head", "block", "tx_status", "contract_query")

    def __init__(self, fabric: Fabric):
        self.fabric = fabric

    def _contract(self, value) -> bytes:
        if value == "registration":
            return self.fabric.registry
        if value == "capability":
            return self.fabric.capability
        return _hex_param({"contract": value}, "contract")

    def call(self, method: str, params: Any) -> tuple[Any, int]:
        """Returns (result, height answered at)."""
        if method not in self.METHODS:
            raise UnknownMethod(method)
        if params is None:
            params = {}
        if not isinstance(params, dict):
            raise RpcError("BadParams", "params must be an object")
        handler = getattr(self, f"_{method}")
        try:
            return self.fabric.service.run(lambda node: handler(node, params))
        except (ChainError, ContractError) as exc:
            raise UpstreamError(getattr(exc, "code", type(exc).__name__), str(exc)) from exc

    def _head(self, node, params):
        return node.head_block.header.to_json(), node.height

    def _block(self, node, params):
        height = params.get("height")
        if isinstance(height, bool) or not isinstance(height, int):
            raise RpcError("BadParams", "height must be an integer")
        try:
            return node.block_at(height).to_json(), node.height
        except KeyError:
            raise UpstreamError("UnknownBlock", str(height)) from None

    def _tx_status(self, node, params):
        status = node.tx_status(_hex_param(params, "tx_hash"))
        doc = {"state": status.state, "height": status.height, "reason": status.reason, "receipt": _receipt_json(status.receipt)}
        return doc, node.height

    def _submit_tx(self, node, params):
        try:
            tx = Transaction.decode(_hex_param(params, "tx"))
        except (DecodeError, ValueError) as exc:
            raise RpcError("BadParams", f"undecodable transaction: {exc}") from None
        return {"tx_hash": node.submit_tx(tx).hex()}, node.height

    def _contract_query(self, node, params):
        function = params.get("function")
        args = params.get("args", [])
        if not isinstance(function, str) or not isinstance(args, list):
            raise RpcError("BadParams", "function must be a string and args a list")
        h = node.height
        result = node.head_state.world.query(self._contract(params.get("contract")), function, args, height=h)
        return result, h
