"""TLS-style secure channel: suite negotiation, key transport, record layer.

The four-step handshake is plain key transport: the client offers protocol
versions and an ordered suite list, the server picks the first mutually
supported suite and returns its certificate and public key, the client
encrypts a fresh session key to that public key, and the server recovers
it.  There is no separate server confirmation message; the first sealed
record serves as implicit confirmation, so the client marks its channel
secure as soon as the key-exchange message is sent.

Sealed records carry an 8-byte sequence number and a direction byte inside
the ciphertext, so replayed or reflected records are detectable at the
record layer.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from . import crypto
from .errors import (
    BadCertificate,
    DecryptFailure,
    EmptySuiteList,
    IntegrityFailure,
    NoCommonSuite,
    NotSecure,
    SequenceReplay,
    SerializationError,
    VersionMismatch,
)
from .serialization import decode_fields, encode_fields

DEFAULT_VERSIONS: tuple[str, ...] = ("TLS1.2",)

# Suite names map to symmetric key sizes; the mechanics (X25519 key
# transport + AES-GCM records) are shared by all registered suites.
CIPHER_SUITES: dict[str, int] = {
    "ECDHE-RSA-AES128-GCM-SHA256": 16,
    "ECDHE-RSA-AES256-GCM-SHA384": 32,
    "ECDHE-ECDSA-AES256-GCM-SHA256": 32,
}


def suite_key_size(name: str) -> int:
    try:
        return CIPHER_SUITES[name]
    except KeyError:
        raise SerializationError(f"unknown cipher suite {name!r}") from None


# --- certificates -------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """Self-signed binding of a subject to its signing and encryption keys."""

    subject: str
    sign_pub: bytes
    enc_pub: bytes
    signature: bytes

    @classmethod
    def issue(cls, subject: str, keys: crypto.NodeKeys) -> "Certificate":
        body = encode_fields(subject, keys.signing.public_bytes, keys.encryption.public_bytes)
        return cls(
            subject,
            keys.signing.public_bytes,
            keys.encryption.public_bytes,
            keys.signing.sign(body),
        )

    def verify(self) -> bool:
        body = encode_fields(self.subject, self.sign_pub, self.enc_pub)
        return crypto.verify_signature(self.sign_pub, body, self.signature)

    def to_bytes(self) -> bytes:
        return encode_fields(self.subject, self.sign_pub, self.enc_pub, self.signature)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Certificate":
        return cls(*decode_fields(raw, ("str", "bytes", "bytes", "bytes")))


# --- handshake messages ---------------------------------------------------------


@dataclass(frozen=True)
class HelloMessage:
    versions: tuple[str, ...]
    suites: tuple[str, ...]

    def to_bytes(self) -> bytes:
        return encode_fields(list(self.versions), list(self.suites))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "HelloMessage":
        versions, suites = decode_fields(raw, ("strlist", "strlist"))
        return cls(versions, suites)


@dataclass(frozen=True)
class SelectMessage:
    version: str
    suite: str
    certificate: Certificate
    server_public_key: bytes

    def to_bytes(self) -> bytes:
        return encode_fields(self.version, self.suite, self.certificate.to_bytes(), self.server_public_key)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SelectMessage":
        version, suite, cert_raw, pub = decode_fields(raw, ("str", "str", "bytes", "bytes"))
        return cls(version, suite, Certificate.from_bytes(cert_raw), pub)


@dataclass(frozen=True)
class KeyExchangeMessage:
    ciphertext: bytes

    def to_bytes(self) -> bytes:
        return encode_fields(self.ciphertext)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "KeyExchangeMessage":
        (ct,) = decode_fields(raw, ("bytes",))
        return cls(ct)


# --- handshake steps --------------------------------------------------------------


def client_hello(
    supported_versions: tuple[str, ...] | list[str], suites: tuple[str, ...] | list[str]
) -> HelloMessage:
    if not suites:
        raise EmptySuiteList("client must offer at least one cipher suite")
    return HelloMessage(tuple(supported_versions), tuple(suites))


def server_select(
    hello: HelloMessage,
    server_suites: frozenset[str] | set[str],
    cert: Certificate,
    server_versions: tuple[str, ...] = DEFAULT_VERSIONS,
) -> SelectMessage:
    """Pick the protocol version, then the first client-ordered mutual suite."""
    version = next((v for v in hello.versions if v in server_versions), None)
    if version is None:
        raise VersionMismatch(f"no common version among {hello.versions}")
    suite = next((s for s in hello.suites if s in server_suites), None)
    if suite is None:
        raise NoCommonSuite(f"no common suite among {hello.suites}")
    return SelectMessage(version, suite, cert, cert.enc_pub)


def client_key_exchange(
    select: SelectMessage, rng: random.Random
) -> tuple[KeyExchangeMessage, bytes]:
    """Draw a fresh session key and encrypt it to the server's public key."""
    if not select.certificate.verify():
        raise BadCertificate(f"certificate for {select.certificate.subject!r} does not verify")
    session_key = rng.randbytes(suite_key_size(select.suite))
    ct = crypto.asym_encrypt(session_key, select.certificate.enc_pub, rng)
    return KeyExchangeMessage(ct), session_key


def server_finish(kx: KeyExchangeMessage, keys: crypto.NodeKeys) -> bytes:
    """Recover the session key with the server's private key."""
    try:
        return crypto.asym_decrypt(kx.ciphertext, keys.encryption)
    except IntegrityFailure as exc:
        raise DecryptFailure("key exchange message does not decrypt") from exc


# --- record layer ------------------------------------------------------------------


_ROLE_BYTES = {"client": b"C", "server": b"S"}


class RecordLayer:
    """Sealed record stream over one symmetric key.

    Each sealed payload carries (sequence, direction, data); the receiver
    rejects non-increasing sequence numbers (SequenceReplay) and records
    whose direction byte matches its own role (reflected traffic).
    """

    def __init__(self, key: bytes, role: str, rng: random.Random):
        if role not in _ROLE_BYTES:
            raise ValueError("role must be 'client' or 'server'")
        if len(key) < 32:
            # AES-GCM accepts 16-byte keys; expand shorter negotiated keys
            # to the AEAD's strongest size by hashing so both sides agree.
            key = crypto.sha256(key)
        self._key = key
        self.role = role
        self._rng = rng
        self._send_seq = 0
        self._recv_seq = -1

    def seal(self, payload: bytes) -> bytes:
        inner = encode_fields(self._send_seq, _ROLE_BYTES[self.role], payload)
        self._send_seq += 1
        return crypto.sym_encrypt(inner, self._key, self._rng)

    def open(self, blob: bytes) -> bytes:
        inner = crypto.sym_decrypt(blob, self._key)
        seq, direction, payload = decode_fields(inner, ("int", "bytes", "bytes"))
        if direction == _ROLE_BYTES[self.role]:
            raise IntegrityFailure("record direction matches our own role")
        if seq <= self._recv_seq:
            raise SequenceReplay(f"record sequence {seq} already accepted")
        self._recv_seq = seq
        return payload


def frame_record(ciphertext: bytes) -> bytes:
    """Record wire form: 4-byte big-endian length, then the ciphertext."""
    return len(ciphertext).to_bytes(4, "big") + ciphertext


def unframe_record(data: bytes) -> bytes:
    if len(data) < 4:
        raise SerializationError("record frame shorter than its header")
    n = int.from_bytes(data[:4], "big")
    if len(data) != 4 + n:
        raise SerializationError("record frame length disagrees with input size")
    return data[4:]


# --- channel state machine -----------------------------------------------------------


class ChannelPhase(Enum):
    HELLO = "hello"
    NEGOTIATED = "negotiated"
    KEY_EXCHANGED = "key_exchanged"
    SECURE = "secure"
    FAILED = "failed"


class ChannelState:
    """One endpoint's view of a channel; drives the handshake steps in order."""

    def __init__(self, role: str, rng: random.Random):
        self.role = role
        self.rng = rng
        self.phase = ChannelPhase.HELLO
        self.negotiated: str | None = None
        self.session_key: bytes | None = None
        self.peer_public_key: bytes | None = None
        self._records: RecordLayer | None = None

    # -- client side --

    @classmethod
    def client(cls, rng: random.Random) -> "ChannelState":
        return cls("client", rng)

    def begin(self, versions: tuple[str, ...], suites: tuple[str, ...]) -> HelloMessage:
        return client_hello(versions, suites)

    def on_select(self, select: SelectMessage) -> KeyExchangeMessage:
        try:
            kx, key = client_key_exchange(select, self.rng)
        except BadCertificate:
            self.phase = ChannelPhase.FAILED
            raise
        self.negotiated = select.suite
        self.peer_public_key = select.server_public_key
        self.session_key = key
        self.phase = ChannelPhase.KEY_EXCHANGED
        # No confirmation message follows; the first sealed record is the
        # implicit confirmation, so the client may seal immediately.
        self.mark_secure()
        return kx

    # -- server side --

    @classmethod
    def server(cls, rng: random.Random) -> "ChannelState":
        return cls("server", rng)

    def on_hello(
        self,
        hello: HelloMessage,
        server_suites: frozenset[str] | set[str],
        cert: Certificate,
        server_versions: tuple[str, ...] = DEFAULT_VERSIONS,
    ) -> SelectMessage:
        try:
            select = server_select(hello, server_suites, cert, server_versions)
        except (VersionMismatch, NoCommonSuite):
            self.phase = ChannelPhase.FAILED
            raise
        self.negotiated = select.suite
        self.phase = ChannelPhase.NEGOTIATED
        return select

    def on_key_exchange(self, kx: KeyExchangeMessage, keys: crypto.NodeKeys) -> None:
        try:
            self.session_key = server_finish(kx, keys)
        except DecryptFailure:
            self.phase = ChannelPhase.FAILED
            raise
        self.mark_secure()

    # -- shared --

    def mark_secure(self) -> None:
        if self.session_key is None:
            raise NotSecure("no session key established")
        self._records = RecordLayer(self.session_key, self.role, self.rng)
        self.phase = ChannelPhase.SECURE

    def seal(self, payload: bytes) -> bytes:
        if self.phase is not ChannelPhase.SECURE or self._records is None:
            raise NotSecure(f"cannot seal in phase {self.phase.value}")
        return self._records.seal(payload)

    def open(self, blob: bytes) -> bytes:
        if self.phase is not ChannelPhase.SECURE or self._records is None:
            raise NotSecure(f"cannot open in phase {self.phase.value}")
        return self._records.open(blob)


def perform_handshake(
    client_versions: tuple[str, ...],
    client_suites: tuple[str, ...],
    server_suites: frozenset[str] | set[str],
    server_keys: crypto.NodeKeys,
    client_rng: random.Random,
    server_rng: random.Random,
    server_versions: tuple[str, ...] = DEFAULT_VERSIONS,
    server_subject: str = "server",
) -> tuple[ChannelState, ChannelState]:
    """Run the full four-step exchange in memory; both ends end up secure."""
    cert = Certificate.issue(server_subject, server_keys)
    client = ChannelState.client(client_rng)
    server = ChannelState.server(server_rng)
    hello = client.begin(client_versions, client_suites)
    select = server.on_hello(hello, server_suites, cert, server_versions)
    kx = client.on_select(select)
    server.on_key_exchange(kx, server_keys)
    return client, server
