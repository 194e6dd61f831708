"""Native deterministic contracts: VID registration and capability tokens."""

from . import capability, registration
from .base import (
    ROLE_AUTHORITY,
    ROLE_SERVICE_MANAGER,
    AddressCollision,
    ArgumentError,
    ContractAccount,
    ContractError,
    Receipt,
    Unauthorized,
    UnknownContract,
    UnknownFunction,
    World,
    call_payload,
    contract_address,
    deploy_payload,
    execute,
    note_payload,
    parse_payload,
)
from .capability import (
    BadTtl,
    DepthExhausted,
    NotOwner,
    NotRevocable,
    SupersetActions,
    TokenInvalid,
    UnknownSubject,
    UnknownToken,
    pattern_matches,
)
from .registration import AddressTaken, VidTaken

__all__ = [
    "ROLE_AUTHORITY",
    "ROLE_SERVICE_MANAGER",
    "AddressCollision",
    "AddressTaken",
    "ArgumentError",
    "BadTtl",
    "ContractAccount",
    "ContractError",
    "DepthExhausted",
    "NotOwner",
    "NotRevocable",
    "Receipt",
    "SupersetActions",
    "TokenInvalid",
    "Unauthorized",
    "UnknownContract",
    "UnknownFunction",
    "UnknownSubject",
    "UnknownToken",
    "VidTaken",
    "World",
    "call_payload",
    "capability",
    "contract_address",
    "deploy_payload",
    "execute",
    "note_payload",
    "parse_payload",
    "pattern_matches",
    "registration",
]
