"""Capability tokens: issue, delegate, revoke and verify access.

Tokens are scoped to a slash-delimited resource pattern where ``*`` stands
for exactly one segment. Block height is the clock: a token is usable while
``issued_at <= height < expires_at``. Revoking a token cuts off every
token delegated from it.
"""

from __future__ import annotations

from typing import Optional

from ..chain.encoding import digest
from .base import ArgumentError, CallContext, ContractCode, ContractError, Unauthorized, canonical_json, register_code
from .registration import _address_arg

CODE_ID = "capability"
ACTIONS = ("read", "write", "execute")


def _err(name):
    return type(name, (ContractError,), {"code": name})


NotOwner = _err("NotOwner")
UnknownSubject = _err("UnknownSubject")
BadTtl = _err("BadTtl")
DepthExhausted = _err("DepthExhausted")
SupersetActions = _err("SupersetActions")
NotRevocable = _err("NotRevocable")
UnknownToken = _err("UnknownToken")
TokenInvalid = _err("TokenInvalid")
RegistryUnset = _err("RegistryUnset")


def split_path(path: str) -> list[str]:
    if not isinstance(path, str) or not path.startswith("/"):
        raise ArgumentError(f"resource {path!r} must start with '/'")
    parts = path.split("/")[1:]
    if any(p == "" for p in parts) or "**" in parts:
        raise ArgumentError(f"malformed resource {path!r}")
    return parts


def pattern_matches(pattern: str, resource: str) -> bool:
    p, r = split_path(pattern), split_path(resource)
    return len(p) == len(r) and all(a == "*" or a == b for a, b in zip(p, r))


def resource_root(pattern: str) -> str:
    first = split_path(pattern)[0]
    if first == "*":
        raise ArgumentError("resource root may not be a wildcard")
    return "/" + first


def _actions_arg(value) -> list[str]:
    if not isinstance(value, list) or not value:
        raise ArgumentError("actions must be a non-empty list")
    acts = sorted(set(value))
    bad = [a for a in acts if a not in ACTIONS]
    if bad:
        raise ArgumentError(f"unknown actions {bad}")
    return acts


def _int_arg(value, name) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ArgumentError(f"{name} must be an integer")
    return value


def _admin_only(ctx: CallContext):
    if ctx.caller != ctx.account.creator:
        raise Unauthorized("admin function")


def _require_registered(ctx: CallContext, address_hex: str):
    registry = ctx.get("registry")
    if registry is None:
        raise RegistryUnset("capability contract has no registry bound")
    vid = ctx.world.query(bytes.fromhex(registry), "lookup_address", [address_hex], height=ctx.height)
    if vid is None:
        raise UnknownSubject(address_hex)


def _new_token(ctx: CallContext, body: dict) -> dict:
    serial = ctx.get("serial", 0) + 1
    ctx.put("serial", serial)
    body = dict(body, serial=serial)
    token_id = digest(canonical_json(body)).hex()
    token = dict(body, token_id=token_id, revoked=False)
    ctx.put(f"token:{token_id}", token)
    held = ctx.get(f"subject:{token['subject']}", [])
    ctx.put(f"subject:{token['subject']}", held + [token_id])
    return token


def _token(ctx: CallContext, token_id) -> dict:
    if not isinstance(token_id, str):
        raise ArgumentError("token id must be a hex string")
    token = ctx.get(f"token:{token_id}")
    if token is None:
        raise UnknownToken(token_id)
    return token


def _ancestry(ctx: CallContext, token: dict) -> list[dict]:
    """The token followed by its parents up to the root."""
    chain = [token]
    while chain[-1]["parent_token"] is not None:
        chain.append(_token(ctx, chain[-1]["parent_token"]))
    return chain


def _revoked_in_chain(ctx: CallContext, token: dict) -> bool:
    return any(t["revoked"] for t in _ancestry(ctx, token))


# ---- admin ---------------------------------------------------------------


def set_registry(ctx: CallContext, args: list):
    _admin_only(ctx)
    ctx.put("registry", _address_arg(args[0]))
    return True


def set_owner(ctx: CallContext, args: list):
    _admin_only(ctx)
    root = resource_root(args[0])
    ctx.put(f"owner:{root}", _address_arg(args[1]))
    return True


def owner_of(ctx: CallContext, args: list):
    return ctx.get(f"owner:{resource_root(args[0])}")


# ---- lifecycle -------------------------------------------------------------


def issue(ctx: CallContext, args: list):
    subject, resource, actions, ttl, depth = args
    subject = _address_arg(subject)
    split_path(resource)
    actions = _actions_arg(actions)
    ttl = _int_arg(ttl, "ttl_blocks")
    depth = _int_arg(depth, "delegation_depth")
    if ctx.get(f"owner:{resource_root(resource)}") != ctx.caller_hex:
        raise NotOwner(f"{ctx.caller_hex} does not own {resource_root(resource)}")
    if ttl < 1:
        raise BadTtl(str(ttl))
    if depth < 0:
        raise ArgumentError("delegation_depth must be >= 0")
    _require_registered(ctx, subject)
    token = _new_token(
        ctx,
        {
            "issuer": ctx.caller_hex,
            "subject": subject,
            "resource": resource,
            "actions": actions,
            "issued_at": ctx.height,
            "expires_at": ctx.height + ttl,
            "delegation_depth": depth,
            "parent_token": None,
        },
    )
    return token["token_id"]


def delegate(ctx: CallContext, args: list):
    parent_id, new_subject, actions, ttl = args
    parent = _token(ctx, parent_id)
    new_subject = _address_arg(new_subject)
    actions = _actions_arg(actions)
    ttl = _int_arg(ttl, "ttl_blocks")
    if ctx.caller_hex != parent["subject"]:
        raise Unauthorized("only the token subject may delegate it")
    if _revoked_in_chain(ctx, parent) or not ctx.height < parent["expires_at"]:
        raise TokenInvalid(f"{parent_id} is revoked or expired")
    if parent["delegation_depth"] < 1:
        raise DepthExhausted(parent_id)
    if not set(actions) <= set(parent["actions"]):
        raise SupersetActions(f"{actions} exceeds {parent['actions']}")
    if ttl < 1:
        raise BadTtl(str(ttl))
    _require_registered(ctx, new_subject)
    token = _new_token(
        ctx,
        {
            "issuer": ctx.caller_hex,
            "subject": new_subject,
            "resource": parent["resource"],
            "actions": actions,
            "issued_at": ctx.height,
            "expires_at": min(ctx.height + ttl, parent["expires_at"]),
            "delegation_depth": parent["delegation_depth"] - 1,
            "parent_token": parent_id,
        },
    )
    children = ctx.get(f"children:{parent_id}", [])
    ctx.put(f"children:{parent_id}", children + [token["token_id"]])
    return token["token_id"]


def revoke(ctx: CallContext, args: list):
    token = _token(ctx, args[0])
    issuers = {t["issuer"] for t in _ancestry(ctx, token)}
    if ctx.caller_hex not in issuers:
        raise NotRevocable(f"{ctx.caller_hex} is not an issuer in the chain of {token['token_id']}")
    if not token["revoked"]:
        ctx.put(f"token:{token['token_id']}", dict(token, revoked=True))
    return True


# ---- queries ---------------------------------------------------------------

DENY_PRIORITY = ("NoToken", "ResourceMismatch", "ActionNotPermitted", "NotYetValid", "Revoked", "Expired")


def evaluate_access(tokens: list[dict], revoked_chain, resource: str, action: str, height: int) -> dict:
    """Grant or deny from a subject's tokens; shared by the contract and the gateway cache."""
    if not tokens:
        return {"granted": False, "reason": "NoToken", "token_id": None}
    best: Optional[dict] = None
    reason_rank = 0
    for token in tokens:
        if not pattern_matches(token["resource"], resource):
            rank = 1
        elif action not in token["actions"]:
            rank = 2
        elif height < token["issued_at"]:
            rank = 3
        elif revoked_chain(token):
            rank = 4
        elif not height < token["expires_at"]:
            rank = 5
        else:
            key = (token["issued_at"], _neg_hex(token["token_id"]))
            if best is None or key > (best["issued_at"], _neg_hex(best["token_id"])):
                best = token
            continue
        reason_rank = max(reason_rank, rank)
    if best is not None:
        return {"granted": True, "reason": None, "token_id": best["token_id"]}
    return {"granted": False, "reason": DENY_PRIORITY[reason_rank], "token_id": None}


def _neg_hex(h: str) -> tuple:
    # newest issued_at wins; equal heights prefer the lexicographically smaller id
    return tuple(-ord(c) for c in h)


def verify_access(ctx: CallContext, args: list):
    subject, resource, action = _address_arg(args[0]), args[1], args[2]
    at_height = ctx.height if len(args) < 4 or args[3] is None else _int_arg(args[3], "at_height")
    if action not in ACTIONS:
        raise ArgumentError(f"unknown action {action!r}")
    split_path(resource)
    tokens = [_token(ctx, tid) for tid in ctx.get(f"subject:{subject}", [])]
    return evaluate_access(tokens, lambda t: _revoked_in_chain(ctx, t), resource, action, at_height)


def get_token(ctx: CallContext, args: list):
    return _token(ctx, args[0])


def tokens_of(ctx: CallContext, args: list):
    return ctx.get(f"subject:{_address_arg(args[0])}", [])


def token_valid(ctx: CallContext, args: list):
    token = _token(ctx, args[0])
    h = ctx.height if len(args) < 2 else _int_arg(args[1], "at_height")
    return token["issued_at"] <= h < token["expires_at"] and not _revoked_in_chain(ctx, token)


CODE = register_code(
    ContractCode(
        CODE_ID,
        {
            "set_registry": (set_registry, True),
            "set_owner": (set_owner, True),
            "owner_of": (owner_of, False),
            "issue": (issue, True),
            "delegate": (delegate, True),
            "revoke": (revoke, True),
            "verify_access": (verify_access, False),
            "get_token": (get_token, False),
            "tokens_of": (tokens_of, False),
            "token_valid": (token_valid, False),
        },
    )
)
