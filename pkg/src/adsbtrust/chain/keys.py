"""Signing keys and signature verification.

The default scheme is a keyed hash (HMAC-SHA256), fine for a single-host
harness where every verifier may hold the shared key. ``Ed25519Key`` plugs
an asymmetric scheme into the same seam when ``cryptography`` is installed.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Protocol

from .encoding import ADDRESS_SIZE, digest


class SigningKey(Protocol):
    scheme: str

    @property
    def address(self) -> bytes: ...

    @property
    def public(self) -> bytes: ...

    def sign(self, message: bytes) -> bytes: ...


def address_for(scheme: str, public: bytes) -> bytes:
    return digest(scheme.encode() + b":" + public)[:ADDRESS_SIZE]


@dataclass(frozen=True)
class HmacKey:
    secret: bytes
    scheme: str = "hmac-sha256"

    @classmethod
    def from_seed(cls, seed: str) -> "HmacKey":
        return cls(hashlib.sha256(b"seed:" + seed.encode()).digest())

    @property
    def public(self) -> bytes:
        return self.secret

    @property
    def address(self) -> bytes:
        return address_for(self.scheme, self.public)

    def sign(self, message: bytes) -> bytes:
        return hmac.new(self.secret, message, hashlib.sha256).digest()


class Ed25519Key:
    scheme = "ed25519"

    def __init__(self, private_key=None):
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        self._sk = private_key or Ed25519PrivateKey.generate()

    @property
    def public(self) -> bytes:
        from cryptography.hazmat.primitives import serialization

        return self._sk.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    @property
    def address(self) -> bytes:
        return address_for(self.scheme, self.public)

    def sign(self, message: bytes) -> bytes:
        return self._sk.sign(message)


def verify_signature(scheme: str, public: bytes, message: bytes, signature: bytes) -> bool:
    if scheme == "hmac-sha256":
        expected = hmac.new(public, message, hashlib.sha256).digest()
        return hmac.compare_digest(expected, signature)
    if scheme == "ed25519":
        from cryptography.exceptions import InvalidSignature
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

        try:
            Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True
    return False


@dataclass(frozen=True)
class AccountKey:
    """What a verifier knows about a registered account."""

    scheme: str
    public: bytes

    @classmethod
    def of(cls, key: SigningKey) -> "AccountKey":
        return cls(key.scheme, key.public)

    def verify(self, message: bytes, signature: bytes) -> bool:
        return verify_signature(self.scheme, self.public, message, signature)
