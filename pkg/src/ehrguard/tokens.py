"""User authentication: signed, time-bounded bearer tokens.

A token is header bytes | payload bytes | signature over their
concatenation, with the familiar three-part ``b64url.b64url.b64url`` wire
form.  Tokens expire after a configurable TTL (default 120 minutes) and are
renewed by presenting the old token; renewal does not require the password,
it only requires an authentic signature.
"""

from __future__ import annotations

import base64
import random
import threading
from dataclasses import dataclass

from . import crypto
from .clock import ManualClock, SystemClock
from .errors import (
    BadSignature,
    Expired,
    RoleNotCovered,
    SerializationError,
    UnknownUser,
    WrongPassword,
)
from .model import OrgId, UserCredential
from .serialization import decode_fields, encode_fields

DEFAULT_TOKEN_TTL_MS = 120 * 60 * 1000
DEFAULT_ISSUER = "ehr-guard-auth"

_HEADER_SCHEMA = ("str", "str")
_PAYLOAD_SCHEMA = ("strlist", "str", "str", "int", "int", "int")


@dataclass(frozen=True)
class TokenHeader:
    alg: str
    typ: str = "JWT"

    def to_bytes(self) -> bytes:
        return encode_fields(self.alg, self.typ)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "TokenHeader":
        alg, typ = decode_fields(raw, _HEADER_SCHEMA)
        return cls(alg, typ)


@dataclass(frozen=True)
class TokenPayload:
    roles: tuple[str, ...]
    issuer: str
    user_id: str
    expires_at: int
    version: int
    issued_at: int

    def __post_init__(self):
        if self.expires_at <= self.issued_at:
            raise ValueError("expires_at must be after issued_at")

    def to_bytes(self) -> bytes:
        return encode_fields(
            list(self.roles), self.issuer, self.user_id, self.expires_at, self.version, self.issued_at
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "TokenPayload":
        roles, issuer, user_id, expires_at, version, issued_at = decode_fields(raw, _PAYLOAD_SCHEMA)
        return cls(roles, issuer, user_id, expires_at, version, issued_at)


@dataclass(frozen=True)
class SignedToken:
    header: TokenHeader
    payload: TokenPayload
    signature: bytes

    def signing_input(self) -> bytes:
        return self.header.to_bytes() + self.payload.to_bytes()

    def encode(self) -> str:
        """Three-part dotted wire form: b64url(header).b64url(payload).b64url(sig)."""
        return ".".join(
            _b64url(part)
            for part in (self.header.to_bytes(), self.payload.to_bytes(), self.signature)
        )

    @classmethod
    def decode(cls, wire: str) -> "SignedToken":
        parts = wire.split(".")
        if len(parts) != 3:
            raise SerializationError("token wire form must have three dot-separated parts")
        raw = [_b64url_decode(p) for p in parts]
        return cls(TokenHeader.from_bytes(raw[0]), TokenPayload.from_bytes(raw[1]), raw[2])


def _b64url(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")


def _b64url_decode(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    try:
        return base64.urlsafe_b64decode(text + pad)
    except Exception as exc:
        raise SerializationError("invalid base64url segment") from exc


class CredentialStore:
    """User credential registry; usernames are unique system-wide."""

    def __init__(self):
        self._by_username: dict[str, UserCredential] = {}
        self._by_id: dict[str, UserCredential] = {}
        self._lock = threading.Lock()

    def add(self, credential: UserCredential) -> None:
        with self._lock:
            if credential.username in self._by_username:
                raise ValueError(f"username {credential.username!r} already registered")
            if credential.user_id in self._by_id:
                raise ValueError(f"user id {credential.user_id!r} already registered")
            self._by_username[credential.username] = credential
            self._by_id[credential.user_id] = credential

    def add_user(
        self,
        user_id: str,
        username: str,
        password: str,
        roles: tuple[str, ...],
        org_id: OrgId,
        rng: random.Random,
    ) -> UserCredential:
        cred = UserCredential.create(user_id, username, password, roles, org_id, rng)
        self.add(cred)
        return cred

    def get_by_username(self, username: str) -> UserCredential:
        try:
            return self._by_username[username]
        except KeyError:
            raise UnknownUser(f"no credential for username {username!r}") from None

    def get_by_id(self, user_id: str) -> UserCredential:
        try:
            return self._by_id[user_id]
        except KeyError:
            raise UnknownUser(f"no credential for user id {user_id!r}") from None

    def remove(self, user_id: str) -> None:
        with self._lock:
            cred = self._by_id.pop(user_id, None)
            if cred is not None:
                self._by_username.pop(cred.username, None)

    def __contains__(self, user_id: str) -> bool:
        return user_id in self._by_id


class TokenIssuer:
    """Mints, verifies, and renews signed tokens against a credential store."""

    def __init__(
        self,
        store: CredentialStore,
        signing_keys: crypto.SigningKeyPair,
        ttl_ms: int = DEFAULT_TOKEN_TTL_MS,
        issuer: str = DEFAULT_ISSUER,
    ):
        if ttl_ms <= 0:
            raise ValueError("token TTL must be positive")
        self.store = store
        self.keys = signing_keys
        self.ttl_ms = ttl_ms
        self.issuer = issuer
        self._versions: dict[str, int] = {}
        self._lock = threading.Lock()

    # -- minting ---------------------------------------------------------

    def authenticate_user(
        self, username: str, password: str, clock: ManualClock | SystemClock
    ) -> SignedToken:
        """Check the password against the stored salted hash and mint a token."""
        cred = self.store.get_by_username(username)
        if not cred.check_password(password):
            raise WrongPassword(f"password mismatch for {username!r}")
        return self._mint(cred, clock.now(), self._next_version(cred.user_id))

    def _next_version(self, user_id: str) -> int:
        with self._lock:
            v = self._versions.get(user_id, 0) + 1
            self._versions[user_id] = v
            return v

    def _mint(self, cred: UserCredential, now_ms: int, version: int) -> SignedToken:
        header = TokenHeader(alg=self.keys.ALGORITHM)
        payload = TokenPayload(
            roles=cred.roles,
            issuer=self.issuer,
            user_id=cred.user_id,
            expires_at=now_ms + self.ttl_ms,
            version=version,
            issued_at=now_ms,
        )
        signature = self.keys.sign(header.to_bytes() + payload.to_bytes())
        return SignedToken(header, payload, signature)

    # -- verification ------------------------------------------------------

    def verify_token(self, token: SignedToken, clock: ManualClock | SystemClock) -> TokenPayload:
        """Return the payload iff the signature verifies and the token is live.

        Check order is fixed: signature before expiry, so nothing about the
        payload is trusted (or leaked) for a token we did not sign.
        """
        self._check_signature(token)
        if clock.now() >= token.payload.expires_at:
            raise Expired(f"token for {token.payload.user_id!r} expired")
        return token.payload

    def _check_signature(self, token: SignedToken) -> None:
        if token.header.alg != self.keys.ALGORITHM or token.header.typ != "JWT":
            raise BadSignature("unexpected token header")
        if not crypto.verify_signature(
            self.keys.public_bytes, token.signing_input(), token.signature
        ):
            raise BadSignature("token signature does not verify")

    def renew_token(self, old: SignedToken, clock: ManualClock | SystemClock) -> SignedToken:
        """Mint a fresh token from an authentic (possibly expired) old one.

        Expiry is deliberately not checked: renewal is the remedy for expiry.
        """
        self._check_signature(old)
        cred = self.store.get_by_id(old.payload.user_id)
        new_version = old.payload.version + 1
        with self._lock:
            self._versions[cred.user_id] = max(self._versions.get(cred.user_id, 0), new_version)
        return self._mint(cred, clock.now(), new_version)

    def authorize_request(
        self, token: SignedToken, required_role: str, clock: ManualClock | SystemClock
    ) -> TokenPayload:
        """verify_token, then require `required_role` among the token's roles."""
        payload = self.verify_token(token, clock)
        if required_role not in payload.roles:
            raise RoleNotCovered(f"token roles {payload.roles} do not cover {required_role!r}")
        return payload
