import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsbtrust.contracts import (
    ROLE_AUTHORITY,
    UnknownFunction,
    World,
    call_payload,
    contract_address,
    deploy_payload,
    execute,
    pattern_matches,
)
from adsbtrust.contracts.base import ReadOnlyViolation

from contract_bed import Bed, addr, compare_with_oracle, oracle_access, random_token_set, stored_tokens

OWNER, ALICE, BOB, CAROL = (addr(n) for n in ("owner", "alice", "bob", "carol"))


@pytest.fixture
def bed():
    b = Bed()
    for i, a in enumerate((OWNER, ALICE, BOB, CAROL)):
        b.register(f"vid-{i}", a)
    b.own("/features", OWNER)
    return b


def issue(bed, subject=ALICE, resource="/features/*", actions=("read",), ttl=100, depth=1, caller=OWNER):
    return bed.tx(caller, bed.cap, "issue", subject.hex(), resource, list(actions), ttl, depth)


def err(receipt):
    assert not receipt.ok
    return receipt.error.split(":")[0]


# deploy and call

def test_deploy_address_is_deterministic():
    admin = addr("bed-admin")
    w1, w2 = World({admin: ROLE_AUTHORITY}), World({admin: ROLE_AUTHORITY})
    r1 = execute(w1, admin, 7, deploy_payload("registration"), 1)
    r2 = execute(w2, admin, 7, deploy_payload("registration"), 1)
    assert r1.contract == r2.contract == contract_address(admin, 7)
    r3 = execute(w1, admin, 8, deploy_payload("registration"), 1)
    assert r3.contract != r1.contract


def test_deploy_requires_role():
    w = World({})
    assert err(execute(w, ALICE, 1, deploy_payload("capability"), 1)) == "Unauthorized"


def test_read_only_calls_are_repeatable_and_write_nothing(bed):
    before = bed.world.state_root()
    a = bed.q(bed.reg, "lookup_vid", "vid-1")
    b = bed.q(bed.reg, "lookup_vid", "vid-1")
    assert a == b == ALICE.hex()
    assert bed.world.state_root() == before
    _, delta = bed.world.call(bed.reg, "lookup_vid", ["vid-1"], OWNER, bed.height)
    assert delta == {}


def test_query_refuses_mutating_function(bed):
    with pytest.raises(ReadOnlyViolation):
        bed.world.query(bed.reg, "register", ["x", ALICE.hex()])


def test_unknown_function(bed):
    assert err(bed.tx(OWNER, bed.reg, "nope")) == "UnknownFunction"
    with pytest.raises(UnknownFunction):
        bed.q(bed.reg, "nope")


def test_bad_arguments_fail_the_receipt(bed):
    assert err(bed.tx(OWNER, bed.reg, "register", "v", "not-hex")) == "ArgumentError"
    assert err(bed.tx(OWNER, bed.reg, "register")) == "ArgumentError"


# registration

def test_register_and_authenticate():
    b = Bed()
    a1, a2 = addr("a1"), addr("a2")
    b.register("A", a1)
    assert b.q(b.reg, "authenticate", "A", a1.hex()) is True
    assert b.q(b.reg, "authenticate", "A", a2.hex()) is False
    assert err(b.tx(b.admin, b.reg, "register", "A", a2.hex())) == "VidTaken"
    assert err(b.tx(b.admin, b.reg, "register", "B", a1.hex())) == "AddressTaken"


def test_self_registration_only_for_own_address():
    b = Bed()
    me, other = addr("me"), addr("other")
    assert b.tx(me, b.reg, "register", "me", me.hex()).ok
    assert err(b.tx(me, b.reg, "register", "x", other.hex())) == "Unauthorized"


def test_authenticate_respects_height():
    b = Bed()
    b.height = 10
    b.register("late", ALICE)
    assert not b.world.query(b.reg, "authenticate", ["late", ALICE.hex()], height=9)
    assert b.world.query(b.reg, "authenticate", ["late", ALICE.hex()], height=10)


@settings(max_examples=40)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=25))
def test_registration_stays_a_bijection(pairs):
    b = Bed()
    for v, a in pairs:
        b.tx(b.admin, b.reg, "register", f"v{v}", addr(f"x{a}").hex())
    storage = b.world.account(b.reg).storage
    vids = {k[4:]: json.loads(x)["address"] for k, x in storage.items() if k.startswith("vid:")}
    addrs = {k[5:]: json.loads(x) for k, x in storage.items() if k.startswith("addr:")}
    assert len(set(vids.values())) == len(vids)
    assert {a: v for v, a in vids.items()} == addrs


# capability lifecycle

def test_deny_by_default(bed):
    assert bed.access(ALICE, "/features/x", "read") == {"granted": False, "reason": "NoToken", "token_id": None}


def test_issue_grants_until_exclusive_expiry(bed):
    bed.height = 5
    tid = issue(bed, ttl=100).result
    tok = bed.q(bed.cap, "get_token", tid)
    assert tok["expires_at"] == 105 and tok["issued_at"] == 5
    assert bed.access(ALICE, "/features/x", "read", 104) == {"granted": True, "reason": None, "token_id": tid}
    assert bed.access(ALICE, "/features/x", "read", 105)["reason"] == "Expired"
    assert bed.access(ALICE, "/features/x", "read", 4)["reason"] == "NotYetValid"


def test_non_owner_and_bad_ttl(bed):
    assert err(issue(bed, caller=ALICE)) == "NotOwner"
    assert err(issue(bed, ttl=0)) == "BadTtl"
    assert err(issue(bed, subject=addr("stranger"))) == "UnknownSubject"


def test_resource_and_action_mismatch(bed):
    issue(bed, resource="/features/*", actions=("read",))
    assert bed.access(ALICE, "/alerts/x", "read")["reason"] == "ResourceMismatch"
    assert bed.access(ALICE, "/features/x/y", "read")["reason"] == "ResourceMismatch"
    assert bed.access(ALICE, "/features/x", "write")["reason"] == "ActionNotPermitted"


def test_delegation_depth_exhaustion(bed):
    root = issue(bed, depth=1).result
    child = bed.ok(ALICE, bed.cap, "delegate", root, BOB.hex(), ["read"], 10)
    assert bed.q(bed.cap, "get_token", child)["delegation_depth"] == 0
    assert err(bed.tx(BOB, bed.cap, "delegate", child, CAROL.hex(), ["read"], 10)) == "DepthExhausted"


def test_delegation_subset_and_caller(bed):
    root = issue(bed, actions=("read",)).result
    assert err(bed.tx(ALICE, bed.cap, "delegate", root, BOB.hex(), ["read", "write"], 10)) == "SupersetActions"
    assert err(bed.tx(BOB, bed.cap, "delegate", root, CAROL.hex(), ["read"], 10)) == "Unauthorized"


def test_child_expiry_capped_by_parent(bed):
    root = issue(bed, ttl=5).result
    child = bed.ok(ALICE, bed.cap, "delegate", root, BOB.hex(), ["read"], 50)
    assert bed.q(bed.cap, "get_token", child)["expires_at"] == bed.q(bed.cap, "get_token", root)["expires_at"]


def test_transitive_revocation(bed):
    root = issue(bed, depth=2).result
    child = bed.ok(ALICE, bed.cap, "delegate", root, BOB.hex(), ["read"], 10)
    grandchild = bed.ok(BOB, bed.cap, "delegate", child, CAROL.hex(), ["read"], 10)
    assert bed.access(CAROL, "/features/x", "read")["granted"]
    assert err(bed.tx(CAROL, bed.cap, "revoke", root)) == "NotRevocable"
    bed.ok(OWNER, bed.cap, "revoke", root)
    for who in (ALICE, BOB, CAROL):
        assert bed.access(who, "/features/x", "read")["reason"] == "Revoked"
    assert not bed.q(bed.cap, "token_valid", grandchild)
    assert err(bed.tx(BOB, bed.cap, "delegate", child, CAROL.hex(), ["read"], 10)) == "TokenInvalid"


def test_ancestor_issuer_may_revoke_descendant(bed):
    root = issue(bed, depth=2).result
    child = bed.ok(ALICE, bed.cap, "delegate", root, BOB.hex(), ["read"], 10)
    bed.ok(OWNER, bed.cap, "revoke", child)
    assert bed.access(ALICE, "/features/x", "read")["granted"]
    assert not bed.access(BOB, "/features/x", "read")["granted"]


def test_newest_token_reported(bed):
    first = issue(bed).result
    bed.height += 3
    second = issue(bed).result
    assert bed.access(ALICE, "/features/x", "read")["token_id"] == second != first


def test_pattern_wildcard_is_one_segment():
    assert pattern_matches("/features/*", "/features/a")
    assert not pattern_matches("/features/*", "/features/a/b")
    assert pattern_matches("/a/*/c", "/a/b/c")


def test_verify_access_matches_brute_force_oracle():
    tally = {}
    mismatches, checked = compare_with_oracle(150, seed=3, tally=tally)
    assert mismatches == 0 and checked == 1800
    assert tally.get("Granted", 0) > 100 and tally.get("Revoked", 0) > 20


def test_revocation_never_grows_grants():
    rng = random.Random(8)
    for _ in range(40):
        bed, users = random_token_set(rng)
        tokens = stored_tokens(bed)
        if not tokens:
            continue
        probes = [(u, r, a) for u in users for r in ("/features/a", "/alerts/y/z") for a in ("read", "write")]
        before = {p for p in probes if bed.access(p[0], p[1], p[2], bed.height)["granted"]}
        victim = tokens[rng.choice(sorted(tokens))]
        bed.tx(bytes.fromhex(victim["issuer"]), bed.cap, "revoke", victim["token_id"])
        after = {p for p in probes if bed.access(p[0], p[1], p[2], bed.height)["granted"]}
        assert after <= before


def test_delegation_chains_bounded_by_root_depth():
    rng = random.Random(2)
    for _ in range(60):
        bed, _ = random_token_set(rng)
        tokens = stored_tokens(bed)
        for t in tokens.values():
            length, node = 0, t
            while node["parent_token"]:
                node = tokens[node["parent_token"]]
                length += 1
            assert length <= node["delegation_depth"]
            assert t["delegation_depth"] == node["delegation_depth"] - length


# determinism

def test_replay_reproduces_storage_roots():
    rng = random.Random(4)
    for _ in range(30):
        bed, _ = random_token_set(rng)
        replayed = bed.replayed_world()
        assert replayed.storage_roots() == bed.world.storage_roots()
        assert replayed.state_root() == bed.world.state_root()


def test_oracle_self_check():
    assert oracle_access({}, "00" * 20, "/a", "read", 1) == (False, "NoToken", None)
