"""Transactions, block headers and blocks with their canonical encodings."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

from .encoding import ADDRESS_SIZE, ZERO_ADDRESS, ZERO_DIGEST, as_int, decode, digest, encode
from .keys import SigningKey
from .merkle import merkle_root


@dataclass(frozen=True)
class Transaction:
    sender: bytes
    nonce: int
    payload: bytes
    signature: bytes = b""

    def __post_init__(self):
        if len(self.sender) != ADDRESS_SIZE:
            raise ValueError("sender must be a 20-octet address")
        if self.nonce < 0:
            raise ValueError("nonce must be non-negative")

    @property
    def signing_bytes(self) -> bytes:
        return encode(b"tx", self.sender, self.nonce, self.payload)

    @cached_property
    def encoded(self) -> bytes:
        return encode(self.sender, self.nonce, self.payload, self.signature)

    @cached_property
    def hash(self) -> bytes:
        return digest(self.encoded)

    @classmethod
    def create(cls, key: SigningKey, nonce: int, payload: bytes) -> "Transaction":
        unsigned = cls(key.address, nonce, payload)
        return replace(unsigned, signature=key.sign(unsigned.signing_bytes))

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        sender, nonce, payload, signature = decode(data)
        return cls(sender, as_int(nonce), payload, signature)

    def to_json(self) -> dict:
        return {
            "hash": self.hash.hex(),
            "sender": self.sender.hex(),
            "nonce": self.nonce,
            "payload": self.payload.hex(),
            "signature": self.signature.hex(),
        }


@dataclass(frozen=True)
class BlockHeader:
    parent_hash: bytes
    height: int
    merkle_root: bytes
    timestamp: int  # milliseconds
    proposer: bytes
    skips: int = 0  # rotation slots skipped after proposer timeouts
    proposer_signature: bytes = b""

    @property
    def signing_bytes(self) -> bytes:
        return encode(
            b"header", self.parent_hash, self.height, self.merkle_root, self.timestamp, self.proposer, self.skips
        )

    @cached_property
    def encoded(self) -> bytes:
        return encode(
            self.parent_hash,
            self.height,
            self.merkle_root,
            self.timestamp,
            self.proposer,
            self.skips,
            self.proposer_signature,
        )

    @cached_property
    def hash(self) -> bytes:
        return digest(self.encoded)

    @classmethod
    def decode(cls, data: bytes) -> "BlockHeader":
        parent, height, root, ts, proposer, skips, sig = decode(data)
        return cls(parent, as_int(height), root, as_int(ts), proposer, as_int(skips), sig)

    def to_json(self) -> dict:
        return {
            "hash": self.hash.hex(),
            "parent_hash": self.parent_hash.hex(),
            "height": self.height,
            "merkle_root": self.merkle_root.hex(),
            "timestamp": self.timestamp,
            "proposer": self.proposer.hex(),
            "skips": self.skips,
            "proposer_signature": self.proposer_signature.hex(),
        }


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple = ()

    @property
    def hash(self) -> bytes:
        return self.header.hash

    @property
    def height(self) -> int:
        return self.header.height

    @cached_property
    def encoded(self) -> bytes:
        return encode(self.header.encoded, *[tx.encoded for tx in self.transactions])

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        fields = decode(data)
        if not fields:
            raise ValueError("empty block encoding")
        header = BlockHeader.decode(fields[0])
        return cls(header, tuple(Transaction.decode(f) for f in fields[1:]))

    @classmethod
    def build(
        cls,
        parent: BlockHeader,
        transactions: Sequence[Transaction],
        timestamp: int,
        key: SigningKey,
        skips: int = 0,
    ) -> "Block":
        txs = tuple(transactions)
        header = BlockHeader(
            parent_hash=parent.hash,
            height=parent.height + 1,
            merkle_root=merkle_root([tx.encoded for tx in txs]),
            timestamp=timestamp,
            proposer=key.address,
            skips=skips,
        )
        header = replace(header, proposer_signature=key.sign(header.signing_bytes))
        return cls(header, txs)

    def to_json(self) -> dict:
        return {"header": self.header.to_json(), "transactions": [tx.to_json() for tx in self.transactions]}


def genesis_block(timestamp: int = 0) -> Block:
    header = BlockHeader(
        parent_hash=ZERO_DIGEST,
        height=0,
        merkle_root=merkle_root([]),
        timestamp=timestamp,
        proposer=ZERO_ADDRESS,
    )
    return Block(header, ())

