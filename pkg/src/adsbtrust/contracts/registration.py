"""VID registration: a one-to-one binding of virtual IDs to account addresses."""

from __future__ import annotations

from .base import ArgumentError, CallContext, ContractCode, ContractError, Unauthorized, register_code

CODE_ID = "registration"
MAX_VID_LEN = 64


class VidTaken(ContractError):
    code = "VidTaken"


class AddressTaken(ContractError):
    code = "AddressTaken"


def _address_arg(value) -> str:
    if not isinstance(value, str) or len(value) != 40:
        raise ArgumentError("address must be 40 hex characters")
    int(value, 16)
    return value.lower()


def _vid_arg(value) -> str:
    if not isinstance(value, str) or not 0 < len(value) <= MAX_VID_LEN:
        raise ArgumentError(f"vid must be 1..{MAX_VID_LEN} characters")
    return value


def register(ctx: CallContext, args: list):
    vid, address = _vid_arg(args[0]), _address_arg(args[1])
    if ctx.caller != ctx.account.creator and ctx.caller_hex != address:
        raise Unauthorized("only the registrar or the account itself may register")
    if ctx.get(f"vid:{vid}") is not None:
        raise VidTaken(vid)
    if ctx.get(f"addr:{address}") is not None:
        raise AddressTaken(address)
    ctx.put(f"vid:{vid}", {"address": address, "registered_at": ctx.height})
    ctx.put(f"addr:{address}", vid)
    return True


def authenticate(ctx: CallContext, args: list):
    vid, address = _vid_arg(args[0]), _address_arg(args[1])
    entry = ctx.get(f"vid:{vid}")
    return bool(entry and entry["address"] == address and entry["registered_at"] <= ctx.height)


def lookup_vid(ctx: CallContext, args: list):
    entry = ctx.get(f"vid:{_vid_arg(args[0])}")
    return entry["address"] if entry else None


def lookup_address(ctx: CallContext, args: list):
    return ctx.get(f"addr:{_address_arg(args[0])}")


CODE = register_code(
    ContractCode(
        CODE_ID,
        {
            "register": (register, True),
            "authenticate": (authenticate, False),
            "lookup_vid": (lookup_vid, False),
            "lookup_address": (lookup_address, False),
        },
    )
)
