"""Cryptographic primitives behind stable, pluggable contracts.

Nothing here is implemented from scratch: signing is Ed25519, symmetric
encryption is AES-256-GCM, public-key encryption is an X25519 + HKDF +
AES-GCM hybrid, and hashing is SHA-256, all via ``cryptography``.

Every random draw (keys, nonces, salts, session IDs) flows through one
injected ``random.Random`` so that a seeded scenario replays to identical
bytes.  Pass an unseeded RNG (``make_rng(None)``) when reproducibility is
not wanted.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import EmptyPassword, IntegrityFailure

SYM_KEY_SIZE = 32
NONCE_SIZE = 12
SALT_SIZE = 16

_ECIES_INFO = b"ehrguard-hybrid-v1"


def make_rng(seed: int | None) -> random.Random:
    """Seeded deterministic generator, or an OS-entropy generator for None."""
    if seed is None:
        return random.SystemRandom()
    return random.Random(seed)


def child_seed(seed: int, label: str) -> int:
    """Stable per-component sub-seed; independent of derivation order."""
    digest = hashlib.sha256(f"{seed}/{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def key_derive(password: str, key_size: int = SYM_KEY_SIZE) -> bytes:
    """Derive a symmetric key from a password by one-way digest.

    Deterministic: the controller and the authentication server must arrive
    at the same key from the password alone.
    """
    if not password:
        raise EmptyPassword("password must be non-empty")
    if not 1 <= key_size <= 32:
        raise ValueError("key_size must be within the digest size")
    return sha256(password.encode("utf-8"))[:key_size]


def hash_password(password: str, salt: bytes) -> bytes:
    """Salted one-way hash for credential storage."""
    if not password:
        raise EmptyPassword("password must be non-empty")
    return sha256(salt + password.encode("utf-8"))


def check_password(password: str, salt: bytes, expected_hash: bytes) -> bool:
    return hmac.compare_digest(hash_password(password, salt), expected_hash)


# --- authenticated symmetric encryption --------------------------------------


def sym_encrypt(plaintext: bytes, key: bytes, rng: random.Random) -> bytes:
    """AES-GCM with a fresh nonce drawn from `rng`; nonce is prepended."""
    nonce = rng.randbytes(NONCE_SIZE)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def sym_decrypt(blob: bytes, key: bytes) -> bytes:
    """Inverse of sym_encrypt; raises IntegrityFailure on wrong key or tamper."""
    if len(blob) < NONCE_SIZE + 16:
        raise IntegrityFailure("ciphertext too short")
    nonce, ct = blob[:NONCE_SIZE], blob[NONCE_SIZE:]
    try:
        return AESGCM(key).decrypt(nonce, ct, None)
    except Exception as exc:
        raise IntegrityFailure("authenticated decryption failed") from exc


# --- signatures ----------------------------------------------------------------


@dataclass(frozen=True)
class SigningKeyPair:
    """Ed25519 key pair. Signatures are deterministic for a fixed message."""

    private: Ed25519PrivateKey
    public_bytes: bytes

    ALGORITHM = "Ed25519"

    @classmethod
    def generate(cls, rng: random.Random) -> "SigningKeyPair":
        private = Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
        return cls(private, private.public_key().public_bytes_raw())

    def sign(self, message: bytes) -> bytes:
        return self.private.sign(message)


def verify_signature(public_bytes: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_bytes).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


# --- public-key (hybrid) encryption ---------------------------------------------


@dataclass(frozen=True)
class EncryptionKeyPair:
    """X25519 key pair for hybrid public-key encryption."""

    private: X25519PrivateKey
    public_bytes: bytes

    @classmethod
    def generate(cls, rng: random.Random) -> "EncryptionKeyPair":
        private = X25519PrivateKey.from_private_bytes(rng.randbytes(32))
        return cls(private, private.public_key().public_bytes_raw())


def _hybrid_key(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(),
        length=SYM_KEY_SIZE,
        salt=None,
        info=_ECIES_INFO + eph_pub + recipient_pub,
    ).derive(shared)


def asym_encrypt(plaintext: bytes, recipient_pub: bytes, rng: random.Random) -> bytes:
    """Encrypt to an X25519 public key: ephemeral pub || AES-GCM blob."""
    eph = X25519PrivateKey.from_private_bytes(rng.randbytes(32))
    eph_pub = eph.public_key().public_bytes_raw()
    shared = eph.exchange(X25519PublicKey.from_public_bytes(recipient_pub))
    key = _hybrid_key(shared, eph_pub, recipient_pub)
    return eph_pub + sym_encrypt(plaintext, key, rng)


def asym_decrypt(blob: bytes, keypair: EncryptionKeyPair) -> bytes:
    """Inverse of asym_encrypt; raises IntegrityFailure on wrong key or tamper."""
    if len(blob) < 32 + NONCE_SIZE + 16:
        raise IntegrityFailure("ciphertext too short")
    eph_pub, rest = blob[:32], blob[32:]
    try:
        shared = keypair.private.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    except ValueError as exc:
        raise IntegrityFailure("bad ephemeral public key") from exc
    key = _hybrid_key(shared, eph_pub, keypair.public_bytes)
    return sym_decrypt(rest, key)


@dataclass(frozen=True)
class NodeKeys:
    """Signing + encryption key material for one network node."""

    signing: SigningKeyPair
    encryption: EncryptionKeyPair

    @classmethod
    def generate(cls, rng: random.Random) -> "NodeKeys":
        return cls(SigningKeyPair.generate(rng), EncryptionKeyPair.generate(rng))
