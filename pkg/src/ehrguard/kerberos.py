"""Ticket-based controller authentication and authorization.

Both sides of the two-phase exchange are implemented here.

Authentication: the controller sends its ID to the authentication server
(AS), which answers with M_A (the TGS session key and the fresh timestamp,
encrypted under the controller's password-derived key) and M_B (the
ticket: controller ID, timestamp, and TGS session key encrypted under the
ticket granting service's own key).  The controller forwards the ticket in
M_C together with the target service and the requested permissions, and
proves knowledge of the session key in M_D.

Authorization: after the TGS checks the ticket, identity, and timestamp
age, it consults the DAC table.  On success it issues M_E (a ticket for
the database service) and M_F (the database session key, timestamp, and
ID for the controller).  The controller forwards M_E and answers with M_G;
the database service cross-checks identity and timestamp, replies with
M_H, and both ends hold the same session key — one exchange per session,
after which data requests ride the established record layer without
touching AS or TGS again.

All service keys (TGS and per-database) are symmetric keys provisioned
out of band; every plaintext uses the canonical field encoding.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from . import crypto
from .channel import RecordLayer
from .clock import ManualClock, SystemClock
from .directory import ActiveDirectory, Permission, parse_request_letters, perms_to_str
from .errors import (
    DecryptFailure,
    EmptyRequest,
    IdentityMismatch,
    IntegrityFailure,
    TicketDecryptFailure,
    TicketExpired,
    TimestampMismatch,
    UnknownController,
    WrongPassword,
)
from .serialization import decode_fields, encode_fields

DEFAULT_TICKET_TTL_MS = 5 * 60 * 1000

SERVICE_PREFIX = "dbs:"


def service_for_collection(collection: str) -> str:
    """Service principal ID fronting a DAC target collection."""
    return SERVICE_PREFIX + collection


def collection_of_service(service_id: str) -> str:
    """DAC target collection fronted by a service principal."""
    if not service_id.startswith(SERVICE_PREFIX):
        raise ValueError(f"not a database service id: {service_id!r}")
    return service_id[len(SERVICE_PREFIX):]


class ServiceKeyring:
    """Out-of-band provisioned symmetric keys of the service principals."""

    def __init__(self):
        self._keys: dict[str, bytes] = {}

    def provision(self, service_id: str, rng: random.Random) -> bytes:
        key = rng.randbytes(crypto.SYM_KEY_SIZE)
        self._keys[service_id] = key
        return key

    def get(self, service_id: str) -> bytes | None:
        return self._keys.get(service_id)

    def services(self) -> tuple[str, ...]:
        return tuple(self._keys)


@dataclass(frozen=True)
class Reject:
    """Rejection outcome of a protocol step; reason is an error class name."""

    step: str
    reason: str

    def to_bytes(self) -> bytes:
        return encode_fields(self.step, self.reason)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Reject":
        step, reason = decode_fields(raw, ("str", "str"))
        return cls(step, reason)


class Phase(Enum):
    INIT = "init"
    AWAIT_AS = "await_as"
    AWAIT_TGS = "await_tgs"
    AWAIT_DBS = "await_dbs"
    ESTABLISHED = "established"
    FAILED = "failed"


@dataclass
class SessionState:
    phase: Phase
    controller_id: str
    tgs_session_key: bytes | None = None
    dbs_session_key: bytes | None = None
    ts_c: int | None = None
    ts_c_dbs: int | None = None
    failure: str | None = None


@dataclass(frozen=True)
class AuthenticatedContext:
    """What the TGS knows about a controller after ticket verification."""

    controller_id: str
    ts_c: int
    tgs_session_key: bytes
    service_id: str
    collection: str
    request: frozenset[Permission]


@dataclass(frozen=True)
class EstablishedSession:
    """Controller-side session after mutual authentication with a service."""

    controller_id: str
    service_id: str
    session_key: bytes
    ts_c_dbs: int
    records: RecordLayer = field(compare=False)

    @property
    def established(self) -> bool:
        return True


@dataclass(frozen=True)
class ServerSession:
    """Service-side session created when a controller's ticket verifies."""

    controller_id: str
    service_id: str
    session_key: bytes
    ts_c_dbs: int
    records: RecordLayer = field(compare=False)

    @property
    def established(self) -> bool:
        return True


# --- the authentication server ---------------------------------------------------


class AuthServer:
    """Issues TGS tickets to controllers listed in the directory."""

    def __init__(
        self,
        directory: ActiveDirectory,
        tgs_key: bytes,
        clock: ManualClock | SystemClock,
        rng: random.Random,
    ):
        self.directory = directory
        self.tgs_key = tgs_key
        self.clock = clock
        self.rng = rng

    def handle_request(self, controller_id: str) -> tuple[bytes, bytes]:
        """Return (M_A, M_B) for a listed controller.

        M_A = Enc_{K_c}(tgs session key, timestamp); the timestamp rides in
        M_A because the controller needs it to build its authenticator.
        M_B = Enc_{tgs key}(controller id, timestamp, tgs session key).
        """
        credential = self.directory.get_credential(controller_id)
        if credential is None:
            raise UnknownController(f"controller {controller_id!r} is not listed")
        ts_c = self.clock.now()
        tgs_session_key = self.rng.randbytes(crypto.SYM_KEY_SIZE)
        m_b = crypto.sym_encrypt(
            encode_fields(controller_id, ts_c, tgs_session_key), self.tgs_key, self.rng
        )
        m_a = crypto.sym_encrypt(
            encode_fields(tgs_session_key, ts_c), credential.secret_key, self.rng
        )
        return m_a, m_b


# --- the ticket granting service ----------------------------------------------------


class TicketGrantingService:
    """Verifies tickets and authorizes requests against the DAC table."""

    def __init__(
        self,
        directory: ActiveDirectory,
        tgs_key: bytes,
        keyring: ServiceKeyring,
        clock: ManualClock | SystemClock,
        rng: random.Random,
        ttl_ms: int = DEFAULT_TICKET_TTL_MS,
        bind_request: bool = False,
        enforce_ttl: bool = True,
        enforce_dac: bool = True,
    ):
        if ttl_ms <= 0:
            raise ValueError("ticket TTL must be positive")
        self.directory = directory
        self.tgs_key = tgs_key
        self.keyring = keyring
        self.clock = clock
        self.rng = rng
        self.ttl_ms = ttl_ms
        self.bind_request = bind_request
        self.enforce_ttl = enforce_ttl
        self.enforce_dac = enforce_dac

    def authenticate(self, m_c: bytes, m_d: bytes) -> AuthenticatedContext:
        """Open the ticket in M_C, the authenticator M_D, and cross-check them."""
        m_b, service_id, req_letters = decode_fields(m_c, ("bytes", "str", "str"))
        try:
            ticket_plain = crypto.sym_decrypt(m_b, self.tgs_key)
        except IntegrityFailure as exc:
            raise TicketDecryptFailure("ticket does not decrypt under the service key") from exc
        ticket_id, ts_c, tgs_session_key = decode_fields(ticket_plain, ("str", "int", "bytes"))

        try:
            auth_plain = crypto.sym_decrypt(m_d, tgs_session_key)
        except IntegrityFailure as exc:
            raise TicketDecryptFailure("authenticator does not decrypt under the session key") from exc
        if self.bind_request:
            auth_id, auth_ts, req_digest = decode_fields(auth_plain, ("str", "int", "bytes"))
            expected = crypto.sha256(encode_fields(service_id, req_letters))
            if req_digest != expected:
                raise IdentityMismatch("request binding digest mismatch")
        else:
            auth_id, auth_ts = decode_fields(auth_plain, ("str", "int"))

        if ticket_id != auth_id:
            raise IdentityMismatch(f"ticket says {ticket_id!r}, authenticator says {auth_id!r}")
        if self.enforce_ttl and self.clock.now() - ts_c >= self.ttl_ms:
            raise TicketExpired(f"ticket timestamp {ts_c} older than {self.ttl_ms} ms")

        return AuthenticatedContext(
            controller_id=ticket_id,
            ts_c=ts_c,
            tgs_session_key=tgs_session_key,
            service_id=service_id,
            collection=collection_of_service(service_id),
            request=parse_request_letters(req_letters),
        )

    def authorize(self, ctx: AuthenticatedContext) -> tuple[bytes, bytes] | Reject:
        """DAC check, then issue (M_E, M_F) or a rejection.

        M_E = Enc_{service key}(controller id, timestamp, dbs session key);
        M_F = Enc_{tgs session key}(dbs session key, timestamp, controller id).
        """
        try:
            allowed = self.directory.check_request(ctx.controller_id, ctx.collection, ctx.request)
        except EmptyRequest:
            return Reject("tgs-authorize", "EmptyRequest")
        if not allowed and self.enforce_dac:
            return Reject("tgs-authorize", "PermissionDenied")

        service_key = self.keyring.get(ctx.service_id)
        if service_key is None:
            return Reject("tgs-authorize", "UnknownService")
        ts_c_dbs = self.clock.now()
        dbs_session_key = self.rng.randbytes(crypto.SYM_KEY_SIZE)
        m_e = crypto.sym_encrypt(
            encode_fields(ctx.controller_id, ts_c_dbs, dbs_session_key), service_key, self.rng
        )
        m_f = crypto.sym_encrypt(
            encode_fields(dbs_session_key, ts_c_dbs, ctx.controller_id),
            ctx.tgs_session_key,
            self.rng,
        )
        return m_e, m_f


# --- the database service --------------------------------------------------------------


class DatabaseService:
    """Service-side endpoint of the authorization phase."""

    def __init__(
        self,
        service_id: str,
        service_key: bytes,
        clock: ManualClock | SystemClock,
        rng: random.Random,
        ttl_ms: int = DEFAULT_TICKET_TTL_MS,
        enforce_ttl: bool = True,
    ):
        if ttl_ms <= 0:
            raise ValueError("ticket TTL must be positive")
        self.service_id = service_id
        self.service_key = service_key
        self.clock = clock
        self.rng = rng
        self.ttl_ms = ttl_ms
        self.enforce_ttl = enforce_ttl
        # (controller, timestamp, key digest) triples already presented;
        # re-presenting one is a replay even inside the TTL window.
        self._consumed: set[tuple[str, int, bytes]] = set()

    def verify(self, m_e: bytes, m_g: bytes) -> tuple[bytes, ServerSession]:
        """Cross-check M_E against M_G and reply with M_H on success."""
        try:
            ticket_plain = crypto.sym_decrypt(m_e, self.service_key)
        except IntegrityFailure as exc:
            raise DecryptFailure("service ticket does not decrypt") from exc
        ticket_id, ts_c_dbs, dbs_session_key = decode_fields(ticket_plain, ("str", "int", "bytes"))

        try:
            auth_plain = crypto.sym_decrypt(m_g, dbs_session_key)
        except IntegrityFailure as exc:
            raise DecryptFailure("authenticator does not decrypt") from exc
        auth_id, auth_ts = decode_fields(auth_plain, ("str", "int"))

        if ticket_id != auth_id:
            raise IdentityMismatch(f"ticket says {ticket_id!r}, authenticator says {auth_id!r}")
        if ts_c_dbs != auth_ts:
            raise TimestampMismatch(f"ticket timestamp {ts_c_dbs} != authenticator {auth_ts}")
        if self.enforce_ttl and self.clock.now() - ts_c_dbs >= self.ttl_ms:
            raise TicketExpired(f"ticket timestamp {ts_c_dbs} older than {self.ttl_ms} ms")
        marker = (ticket_id, ts_c_dbs, crypto.sha256(dbs_session_key)[:8])
        if marker in self._consumed:
            raise TimestampMismatch(f"timestamp {ts_c_dbs} already consumed for {ticket_id!r}")
        self._consumed.add(marker)

        m_h = crypto.sym_encrypt(encode_fields(ts_c_dbs), dbs_session_key, self.rng)
        session = ServerSession(
            controller_id=ticket_id,
            service_id=self.service_id,
            session_key=dbs_session_key,
            ts_c_dbs=ts_c_dbs,
            records=RecordLayer(dbs_session_key, "server", self.rng),
        )
        return m_h, session


# --- the controller (client) side ---------------------------------------------------------


class ControllerSession:
    """Client-side state machine for one authentication+authorization run."""

    def __init__(
        self,
        controller_id: str,
        password: str,
        service_id: str,
        request: frozenset[Permission],
        clock: ManualClock | SystemClock,
        rng: random.Random,
        bind_request: bool = False,
    ):
        self.state = SessionState(Phase.INIT, controller_id)
        self.password = password
        self.service_id = service_id
        self.request = request
        self.clock = clock
        self.rng = rng
        self.bind_request = bind_request
        self.session_id = rng.randrange(2**64)

    @property
    def phase(self) -> Phase:
        return self.state.phase

    def start(self) -> bytes:
        """Body of the opening request: just the controller's ID."""
        self.state.phase = Phase.AWAIT_AS
        return encode_fields(self.state.controller_id)

    def handle_as_reply(self, m_a: bytes, m_b: bytes) -> tuple[bytes, bytes]:
        """Decrypt M_A with the password-derived key; build (M_C, M_D)."""
        k_c = crypto.key_derive(self.password)
        try:
            plain = crypto.sym_decrypt(m_a, k_c)
        except IntegrityFailure as exc:
            self._fail("WrongPassword")
            raise WrongPassword("reply does not decrypt under the password-derived key") from exc
        tgs_session_key, ts_c = decode_fields(plain, ("bytes", "int"))
        self.state.tgs_session_key = tgs_session_key
        self.state.ts_c = ts_c

        req_letters = perms_to_str(self.request)
        m_c = encode_fields(m_b, self.service_id, req_letters)
        if self.bind_request:
            digest = crypto.sha256(encode_fields(self.service_id, req_letters))
            auth_plain = encode_fields(self.state.controller_id, ts_c, digest)
        else:
            auth_plain = encode_fields(self.state.controller_id, ts_c)
        m_d = crypto.sym_encrypt(auth_plain, tgs_session_key, self.rng)
        self.state.phase = Phase.AWAIT_TGS
        return m_c, m_d

    def handle_tgs_reply(self, m_e: bytes, m_f: bytes) -> bytes:
        """Decrypt M_F, keep the database session key, build M_G."""
        assert self.state.tgs_session_key is not None
        try:
            plain = crypto.sym_decrypt(m_f, self.state.tgs_session_key)
        except IntegrityFailure as exc:
            self._fail("DecryptFailure")
            raise DecryptFailure("service reply does not decrypt") from exc
        dbs_session_key, ts_c_dbs, _controller_id = decode_fields(plain, ("bytes", "int", "str"))
        self.state.dbs_session_key = dbs_session_key
        self.state.ts_c_dbs = ts_c_dbs
        m_g = crypto.sym_encrypt(
            encode_fields(self.state.controller_id, ts_c_dbs), dbs_session_key, self.rng
        )
        self.state.phase = Phase.AWAIT_DBS
        return m_g

    def handle_dbs_reply(self, m_h: bytes) -> EstablishedSession:
        """Check the echoed timestamp; on match the session is mutual."""
        assert self.state.dbs_session_key is not None
        try:
            plain = crypto.sym_decrypt(m_h, self.state.dbs_session_key)
        except IntegrityFailure as exc:
            self._fail("DecryptFailure")
            raise DecryptFailure("confirmation does not decrypt") from exc
        (echoed_ts,) = decode_fields(plain, ("int",))
        if echoed_ts != self.state.ts_c_dbs:
            self._fail("TimestampMismatch")
            raise TimestampMismatch(
                f"service echoed {echoed_ts}, expected {self.state.ts_c_dbs}"
            )
        self.state.phase = Phase.ESTABLISHED
        return EstablishedSession(
            controller_id=self.state.controller_id,
            service_id=self.service_id,
            session_key=self.state.dbs_session_key,
            ts_c_dbs=self.state.ts_c_dbs,
            records=RecordLayer(self.state.dbs_session_key, "client", self.rng),
        )

    def handle_reject(self, reject: Reject) -> None:
        self._fail(reject.reason)

    def _fail(self, reason: str) -> None:
        self.state.phase = Phase.FAILED
        self.state.failure = reason


# --- in-memory orchestration ------------------------------------------------------------


_REJECT_ERRORS = {
    "PermissionDenied": "PermissionDenied",
    "EmptyRequest": "EmptyRequest",
}


class HandshakeRejected(Exception):
    """Raised by run_handshake when a server answers with a rejection."""

    def __init__(self, reject: Reject):
        super().__init__(f"{reject.step}: {reject.reason}")
        self.reject = reject


def run_handshake(
    controller: ControllerSession,
    auth_server: AuthServer,
    tgs: TicketGrantingService,
    dbs: DatabaseService,
) -> tuple[EstablishedSession, ServerSession]:
    """Drive the full six-message exchange directly, without a network."""
    controller.start()
    try:
        m_a, m_b = auth_server.handle_request(controller.state.controller_id)
    except UnknownController:
        controller.handle_reject(Reject("as", "UnknownController"))
        raise
    m_c, m_d = controller.handle_as_reply(m_a, m_b)
    ctx = tgs.authenticate(m_c, m_d)
    result = tgs.authorize(ctx)
    if isinstance(result, Reject):
        controller.handle_reject(result)
        raise HandshakeRejected(result)
    m_e, m_f = result
    m_g = controller.handle_tgs_reply(m_e, m_f)
    m_h, server_session = dbs.verify(m_e, m_g)
    client_session = controller.handle_dbs_reply(m_h)
    return client_session, server_session
