"""Exception hierarchy shared by every ehrguard module.

Every failure mode a caller is expected to branch on has its own class;
handlers and reports refer to failures by ``type(exc).__name__``, so the
class names are part of the wire/report contract and must stay stable.
"""


class EhrGuardError(Exception):
    """Base class for all ehrguard errors."""


# --- crypto / serialization ------------------------------------------------


class EmptyPassword(EhrGuardError):
    """Key derivation was given an empty password."""


class IntegrityFailure(EhrGuardError):
    """Authenticated decryption failed: wrong key or tampered ciphertext."""


class SerializationError(EhrGuardError):
    """Canonical message bytes do not match the expected schema."""


# --- user authentication (tokens) -------------------------------------------


class UnknownUser(EhrGuardError):
    """No credential or user record exists for the given name/ID."""


class WrongPassword(EhrGuardError):
    """Password check failed against the stored salted hash."""


class BadSignature(EhrGuardError):
    """Token signature does not verify under the issuer's public key."""


class Expired(EhrGuardError):
    """Token lifetime has elapsed."""


class RoleNotCovered(EhrGuardError):
    """Token verified but does not carry the required role."""


# --- user authorization ------------------------------------------------------


class UnknownOrg(EhrGuardError):
    """Organization ID does not resolve in the registry."""


# --- directory ---------------------------------------------------------------


class DuplicateName(EhrGuardError):
    """A controller with this name/ID is already registered."""


class EmptyRequest(EhrGuardError):
    """A permission request must name at least one permission."""


# --- controller protocol ------------------------------------------------------


class UnknownController(EhrGuardError):
    """Controller ID is not listed in the authentication server's registry."""


class TicketDecryptFailure(EhrGuardError):
    """A ticket or authenticator could not be decrypted by the service."""


class IdentityMismatch(EhrGuardError):
    """Identities recovered from two protocol messages disagree."""


class TicketExpired(EhrGuardError):
    """Ticket timestamp is older than the configured time-to-live."""


class DecryptFailure(EhrGuardError):
    """A protocol message failed authenticated decryption."""


class TimestampMismatch(EhrGuardError):
    """Timestamps recovered from two protocol messages disagree, or the
    presented timestamp was already consumed by an earlier exchange."""


# --- secure channel -----------------------------------------------------------


class EmptySuiteList(EhrGuardError):
    """Client offered no cipher suites."""


class NoCommonSuite(EhrGuardError):
    """Client and server share no cipher suite."""


class VersionMismatch(EhrGuardError):
    """Server supports none of the client's protocol versions."""


class BadCertificate(EhrGuardError):
    """Certificate self-signature does not verify."""


class NotSecure(EhrGuardError):
    """Record operation attempted before the channel reached the secure phase."""


class SequenceReplay(EhrGuardError):
    """Record carries a sequence number at or below one already accepted."""


# --- backend store ------------------------------------------------------------


class PermissionDenied(EhrGuardError):
    """The per-hop permission re-check rejected the request."""


class UnknownCollection(EhrGuardError):
    """No collection with this name exists on the store."""


class DuplicateDocument(EhrGuardError):
    """A document with this ID already exists; stored data is append-only."""


# --- scenario / scripts ---------------------------------------------------------


class MalformedScript(EhrGuardError):
    """Adversary script failed to parse or referenced an invalid action."""


class ScenarioError(EhrGuardError):
    """Scenario configuration or fixture file failed to load."""
