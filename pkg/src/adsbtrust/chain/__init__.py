"""Permissioned append-only ledger with round-robin proof-of-authority."""

from .encoding import EMPTY_DIGEST, ZERO_ADDRESS, ZERO_DIGEST, decode, digest, encode
from .keys import AccountKey, Ed25519Key, HmacKey, verify_signature
from .merkle import IndexOutOfRange, MerkleProof, merkle_proof, merkle_root, root_from_hashes, verify_proof
from .node import (
    BadSignature,
    BlockState,
    ChainError,
    ChainParams,
    DuplicateTx,
    IntervalNotElapsed,
    InvalidBlock,
    Mempool,
    Node,
    NonceGap,
    NotMyTurn,
    TxStatus,
    UnknownSender,
    UnknownTx,
    better_head,
    make_params,
)
from .types import Block, BlockHeader, Transaction, genesis_block

__all__ = [
    "AccountKey",
    "BadSignature",
    "Block",
    "BlockHeader",
    "BlockState",
    "ChainError",
    "ChainParams",
    "DuplicateTx",
    "EMPTY_DIGEST",
    "Ed25519Key",
    "HmacKey",
    "IndexOutOfRange",
    "IntervalNotElapsed",
    "InvalidBlock",
    "Mempool",
    "MerkleProof",
    "Node",
    "NonceGap",
    "NotMyTurn",
    "Transaction",
    "TxStatus",
    "UnknownSender",
    "UnknownTx",
    "ZERO_ADDRESS",
    "ZERO_DIGEST",
    "better_head",
    "decode",
    "digest",
    "encode",
    "genesis_block",
    "make_params",
    "merkle_proof",
    "merkle_root",
    "root_from_hashes",
    "verify_proof",
    "verify_signature",
]
