"""Bottom-up binary Merkle tree over an ordered list of leaves.

An odd node at any level is paired with itself. The empty tree's root is
the digest of the empty string and a one-leaf tree's root is the leaf hash.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .encoding import EMPTY_DIGEST, digest


class IndexOutOfRange(IndexError):
    pass


def _parent(left: bytes, right: bytes) -> bytes:
    return digest(left + right)


def root_from_hashes(leaves: Sequence[bytes]) -> bytes:
    if not leaves:
        return EMPTY_DIGEST
    level = list(leaves)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [_parent(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def leaf_hashes(items: Sequence[bytes]) -> list[bytes]:
    return [digest(item) for item in items]


def merkle_root(items: Sequence[bytes]) -> bytes:
    """Root over canonical item encodings (each item is hashed into a leaf)."""
    return root_from_hashes(leaf_hashes(items))


@dataclass(frozen=True)
class MerkleProof:
    """Sibling hashes from leaf to root; ``index`` fixes left/right order."""

    index: int
    siblings: tuple


def proof_from_hashes(leaves: Sequence[bytes], index: int) -> MerkleProof:
    if not 0 <= index < len(leaves):
        raise IndexOutOfRange(f"index {index} for {len(leaves)} leaves")
    siblings = []
    level = list(leaves)
    i = index
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        siblings.append(level[i ^ 1])
        level = [_parent(level[j], level[j + 1]) for j in range(0, len(level), 2)]
        i //= 2
    return MerkleProof(index, tuple(siblings))


def merkle_proof(items: Sequence[bytes], index: int) -> MerkleProof:
    return proof_from_hashes(leaf_hashes(items), index)


def verify_proof(root: bytes, leaf: bytes, proof: MerkleProof) -> bool:
    node = leaf
    i = proof.index
    if i < 0:
        return False
    for sibling in proof.siblings:
        node = _parent(sibling, node) if i & 1 else _parent(node, sibling)
        i >>= 1
    return i == 0 and node == root
