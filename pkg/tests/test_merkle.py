import hashlib
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsbtrust.chain import EMPTY_DIGEST, IndexOutOfRange, MerkleProof, digest, merkle_proof, merkle_root, verify_proof


def brute_root(items):
    """Level-by-level pairwise hashing written without the package helpers."""
    level = [hashlib.sha256(x).digest() for x in items]
    if not level:
        return hashlib.sha256(b"").digest()
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            left = level[i]
            right = level[i + 1] if i + 1 < len(level) else level[i]
            nxt.append(hashlib.sha256(left + right).digest())
        level = nxt
    return level[0]


def items(n):
    return [f"tx-{n}-{i}".encode() for i in range(n)]


def test_digest_seam_is_sha256():
    assert digest(b"abc") == hashlib.sha256(b"abc").digest()


def test_empty_and_single():
    assert merkle_root([]) == EMPTY_DIGEST == hashlib.sha256(b"").digest()
    assert merkle_root([b"only"]) == digest(b"only")


def test_four_items_two_levels():
    a, b, c, d = (digest(x) for x in items(4))
    assert merkle_root(items(4)) == digest(digest(a + b) + digest(c + d))


def corruptions(proof: MerkleProof):
    for k, sib in enumerate(proof.siblings):
        for pos in (0, len(sib) - 1):
            s = bytearray(sib)
            s[pos] ^= 0x01
            sibs = list(proof.siblings)
            sibs[k] = bytes(s)
            yield replace(proof, siblings=tuple(sibs))
    if proof.siblings:
        yield replace(proof, siblings=proof.siblings[:-1])
    yield replace(proof, siblings=proof.siblings + (bytes(32),))


def test_every_proof_for_1_to_64_leaves():
    checked = corrupted = 0
    for n in range(1, 65):
        txs = items(n)
        root = merkle_root(txs)
        assert root == brute_root(txs)
        for i in range(n):
            leaf = digest(txs[i])
            proof = merkle_proof(txs, i)
            assert verify_proof(root, leaf, proof)
            checked += 1
            for bad in corruptions(proof):
                assert not verify_proof(root, leaf, bad)
                corrupted += 1
            bad_leaf = bytearray(leaf)
            bad_leaf[5] ^= 0x80
            assert not verify_proof(root, bytes(bad_leaf), proof)
    assert checked == 64 * 65 // 2 and corrupted > checked


def test_wrong_index_fails_unless_sibling_is_a_self_pair():
    txs = items(8)
    root = merkle_root(txs)
    p = merkle_proof(txs, 3)
    assert not verify_proof(root, digest(txs[3]), replace(p, index=2))
    assert not verify_proof(root, digest(txs[3]), replace(p, index=-1))


def test_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        merkle_proof(items(5), 5)
    with pytest.raises(IndexOutOfRange):
        merkle_proof([], 0)


@settings(max_examples=100)
@given(st.lists(st.binary(max_size=40), min_size=1, max_size=40), st.data())
def test_proof_property(txs, data):
    i = data.draw(st.integers(0, len(txs) - 1))
    root = merkle_root(txs)
    assert root == brute_root(txs)
    assert verify_proof(root, digest(txs[i]), merkle_proof(txs, i))
