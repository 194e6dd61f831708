"""Contract runtime: accounts, storage commitments, payload format, dispatch.

Contracts are native Python modules picked by ``code_id``. Storage values
are canonical JSON bytes; a contract's commitment is the Merkle root over
its sorted (key, value) pairs, and the world root folds those together.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..chain.encoding import ADDRESS_SIZE, ZERO_ADDRESS, decode, digest, encode
from ..chain.merkle import merkle_root


class ContractError(Exception):
    code = "ContractError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


def _error(name: str):
    return type(name, (ContractError,), {"code": name})


UnknownFunction = _error("UnknownFunction")
UnknownContract = _error("UnknownContract")
ArgumentError = _error("ArgumentError")
Unauthorized = _error("Unauthorized")
AddressCollision = _error("AddressCollision")
ReadOnlyViolation = _error("ReadOnlyViolation")


def canonical_json(value: Any) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass
class ContractAccount:
    address: bytes
    code_id: str
    creator: bytes
    storage: dict = field(default_factory=dict)  # str -> bytes

    def copy(self) -> "ContractAccount":
        return ContractAccount(self.address, self.code_id, self.creator, dict(self.storage))

    def storage_root(self) -> bytes:
        return merkle_root([encode(k, self.storage[k]) for k in sorted(self.storage)])


class CallContext:
    """Storage view for one call; writes land in ``delta`` until committed."""

    def __init__(self, world: "World", account: ContractAccount, caller: bytes, height: int, mutable: bool):
        self.world = world
        self.account = account
        self.caller = caller
        self.height = height
        self.mutable = mutable
        self.delta: dict[str, Optional[bytes]] = {}

    def get(self, key: str, default: Any = None) -> Any:
        if key in self.delta:
            raw = self.delta[key]
        else:
            raw = self.account.storage.get(key)
        return default if raw is None else json.loads(raw)

    def put(self, key: str, value: Any) -> None:
        if not self.mutable:
            raise ReadOnlyViolation(f"write to {key!r} in a read-only call")
        self.delta[key] = canonical_json(value)

    def delete(self, key: str) -> None:
        if not self.mutable:
            raise ReadOnlyViolation(f"delete of {key!r} in a read-only call")
        self.delta[key] = None

    @property
    def caller_hex(self) -> str:
        return self.caller.hex()


Handler = Callable[[CallContext, list], Any]


@dataclass(frozen=True)
class ContractCode:
    code_id: str
    functions: dict  # name -> (handler, mutating)


_CODES: dict[str, ContractCode] = {}


def register_code(code: ContractCode) -> ContractCode:
    _CODES[code.code_id] = code
    return code


def code_for(code_id: str) -> ContractCode:
    try:
        return _CODES[code_id]
    except KeyError:
        raise ArgumentError(f"unknown code id {code_id!r}") from None


ROLE_AUTHORITY = "authority"
ROLE_SERVICE_MANAGER = "service_manager"


def contract_address(creator: bytes, nonce: int) -> bytes:
    return digest(encode(b"contract", creator, nonce))[:ADDRESS_SIZE]


class World:
    """All contract accounts plus the role table fixed at genesis."""

    def __init__(self, roles: Optional[dict] = None):
        self.roles: dict[bytes, str] = dict(roles or {})
        self.accounts: dict[bytes, ContractAccount] = {}

    def copy(self) -> "World":
        w = World(self.roles)
        w.accounts = {a: acct.copy() for a, acct in self.accounts.items()}
        return w

    def state_root(self) -> bytes:
        return merkle_root([encode(a, self.accounts[a].storage_root()) for a in sorted(self.accounts)])

    def storage_roots(self) -> dict[bytes, bytes]:
        return {a: acct.storage_root() for a, acct in sorted(self.accounts.items())}

    def account(self, address: bytes) -> ContractAccount:
        try:
            return self.accounts[address]
        except KeyError:
            raise UnknownContract(address.hex()) from None

    def deploy(self, creator: bytes, code_id: str, nonce: int) -> ContractAccount:
        if self.roles.get(creator) not in (ROLE_AUTHORITY, ROLE_SERVICE_MANAGER):
            raise Unauthorized(f"{creator.hex()} may not deploy contracts")
        code_for(code_id)
        address = contract_address(creator, nonce)
        if address in self.accounts:
            raise AddressCollision(address.hex())
        acct = ContractAccount(address, code_id, creator)
        self.accounts[address] = acct
        return acct

    def call(
        self, address: bytes, function: str, args: list, caller: bytes, height: int, mutable: bool = True
    ) -> tuple[Any, dict]:
        """Run ``function``; returns (result, storage delta). Does not commit."""
        acct = self.account(address)
        code = code_for(acct.code_id)
        try:
            handler, mutating = code.functions[function]
        except KeyError:
            raise UnknownFunction(f"{acct.code_id}.{function}") from None
        if not isinstance(args, list):
            raise ArgumentError("arguments must be a list")
        ctx = CallContext(self, acct, caller, height, mutable and mutating)
        try:
            result = handler(ctx, args)
        except (TypeError, ValueError, IndexError, KeyError) as exc:
            raise ArgumentError(f"{function}: {exc}") from exc
        return result, ctx.delta

    def commit(self, address: bytes, delta: dict) -> None:
        storage = self.account(address).storage
        for key, raw in delta.items():
            if raw is None:
                storage.pop(key, None)
            else:
                storage[key] = raw

    def query(self, address: bytes, function: str, args: list, caller: bytes = ZERO_ADDRESS, height: int = 0) -> Any:
        acct = self.account(address)
        _, mutating = code_for(acct.code_id).functions.get(function, (None, None))
        if mutating is None:
            raise UnknownFunction(f"{acct.code_id}.{function}")
        if mutating:
            raise ReadOnlyViolation(f"{function} mutates state; submit a transaction")
        result, _ = self.call(address, function, args, caller, height, mutable=False)
        return result


# --------------------------------------------------------------------------
# Transaction payloads: code address | function name | length-prefixed args


def call_payload(address: bytes, function: str, *args: Any) -> bytes:
    return encode(address, function, *[canonical_json(a) for a in args])


def deploy_payload(code_id: str) -> bytes:
    return call_payload(ZERO_ADDRESS, "deploy", code_id)


def note_payload(data: bytes) -> bytes:
    """Opaque data transaction; recorded on chain, no state change."""
    return encode(ZERO_ADDRESS, "note", data)


@dataclass(frozen=True)
class ParsedPayload:
    address: bytes
    function: str
    args: list
    raw_note: Optional[bytes] = None


def parse_payload(payload: bytes) -> ParsedPayload:
    fields = decode(payload)
    if len(fields) < 2 or len(fields[0]) != ADDRESS_SIZE:
        raise ArgumentError("malformed payload")
    address, function = fields[0], fields[1].decode("utf-8")
    if address == ZERO_ADDRESS and function == "note":
        return ParsedPayload(address, function, [], fields[2] if len(fields) > 2 else b"")
    try:
        args = [json.loads(f) for f in fields[2:]]
    except ValueError as exc:
        raise ArgumentError(f"argument is not JSON: {exc}") from exc
    return ParsedPayload(address, function, args)


@dataclass(frozen=True)
class Receipt:
    tx_hash: bytes
    ok: bool
    result: Any = None
    error: Optional[str] = None
    contract: Optional[bytes] = None


def execute(world: World, sender: bytes, nonce: int, payload: bytes, height: int, tx_hash: bytes = b"") -> Receipt:
    """Apply one confirmed transaction to ``world`` in place."""
    try:
        parsed = parse_payload(payload)
        if parsed.address == ZERO_ADDRESS:
            if parsed.function == "note":
                return Receipt(tx_hash, True)
            if parsed.function == "deploy":
                if len(parsed.args) != 1 or not isinstance(parsed.args[0], str):
                    raise ArgumentError("deploy takes one code id")
                acct = world.deploy(sender, parsed.args[0], nonce)
                return Receipt(tx_hash, True, acct.address.hex(), contract=acct.address)
            raise UnknownFunction(parsed.function)
        result, delta = world.call(parsed.address, parsed.function, parsed.args, sender, height)
        world.commit(parsed.address, delta)
        return Receipt(tx_hash, True, result, contract=parsed.address)
    except ContractError as exc:
        return Receipt(tx_hash, False, error=f"{exc.code}: {exc}")
    except ValueError as exc:
        return Receipt(tx_hash, False, error=f"ArgumentError: {exc}")
