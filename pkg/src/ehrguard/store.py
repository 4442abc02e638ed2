"""Tiered back-end store with per-hop permission re-verification.

Collections live on named in-process store servers and carry a tier
(original, de-identified statistics, anonymized).  Writes are append-only:
a document can be added once and never changed or removed.  Every data
request is re-verified at the store hop even though the ticket service
already authorized the session — a revoked DAC entry therefore cuts off an
already-established session.  All checks are recorded in a SecurityAudit
so tests can assert that at least two verification points guard every
served request.

The secured view is the only read surface for the analysis components: it
returns de-identified copies (QI fields stripped, global ID replaced by a
keyed pseudonym) and never the original documents.
"""

from __future__ import annotations

import hmac
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .directory import READ, WRITE, ActiveDirectory, Permission
from .errors import (
    DuplicateDocument,
    PermissionDenied,
    ScenarioError,
    UnknownCollection,
)

DEFAULT_QI_FIELDS: tuple[str, ...] = ("name", "birthdate", "address", "school_id", "clinic_id")

SECURED_VIEW_TARGET = "secured_view"
DEFAULT_VIEW_CONTROLLERS: frozenset[str] = frozenset({"analysis_backend", "analysis_services"})


class Tier(Enum):
    ORIGINAL = "original"
    DEIDENTIFIED = "deidentified"
    ANONYMIZED = "anonymized"


@dataclass(frozen=True)
class QiRegistry:
    """Field names considered quasi-identifiable."""

    names: frozenset[str] = frozenset(DEFAULT_QI_FIELDS)

    def __post_init__(self):
        if not self.names:
            raise ValueError("QI registry must not be empty")


@dataclass
class Document:
    doc_id: str
    global_id: str
    fields: dict[str, str] = field(default_factory=dict)

    def copy(self) -> "Document":
        return Document(self.doc_id, self.global_id, dict(self.fields))

    def to_json(self) -> str:
        return json.dumps(
            {"doc_id": self.doc_id, "global_id": self.global_id, "fields": self.fields},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "Document":
        raw = json.loads(text)
        return cls(raw["doc_id"], raw["global_id"], dict(raw["fields"]))

    def freeze(self) -> tuple:
        return (self.doc_id, self.global_id, tuple(sorted(self.fields.items())))


@dataclass
class Collection:
    name: str
    tier: Tier
    documents: dict[str, Document] = field(default_factory=dict)


def pseudonymize(global_id: str, key: bytes) -> str:
    """Keyed one-way pseudonym for a global ID; stable under a fixed key."""
    digest = hmac.new(key, global_id.encode("utf-8"), "sha256").hexdigest()
    return "anon-" + digest[:24]


def deidentify(doc: Document, qi: QiRegistry, pseudonym_key: bytes) -> Document:
    """Copy of `doc` with QI fields removed and the global ID pseudonymized."""
    kept = {k: v for k, v in doc.fields.items() if k not in qi.names}
    return Document(doc.doc_id, pseudonymize(doc.global_id, pseudonym_key), kept)


# --- audit instrumentation -----------------------------------------------------


@dataclass
class RequestAudit:
    request_id: int
    op: str
    controller: str
    collection: str
    checks: list[tuple[str, bool]] = field(default_factory=list)
    served: bool = False

    @property
    def check_count(self) -> int:
        return len(self.checks)


class SecurityAudit:
    """Counts the verification points each data request passes through."""

    def __init__(self):
        self._requests: dict[int, RequestAudit] = {}
        self._next_id = 0

    def new_request(self, op: str, controller: str, collection: str) -> RequestAudit:
        self._next_id += 1
        audit = RequestAudit(self._next_id, op, controller, collection)
        self._requests[audit.request_id] = audit
        return audit

    def record(self, audit: RequestAudit, checkpoint: str, ok: bool) -> None:
        audit.checks.append((checkpoint, ok))

    def served(self) -> tuple[RequestAudit, ...]:
        return tuple(a for a in self._requests.values() if a.served)

    def all_requests(self) -> tuple[RequestAudit, ...]:
        return tuple(self._requests.values())


# --- the store ---------------------------------------------------------------------


class TieredStore:
    """One in-process store server holding a set of tiered collections."""

    def __init__(
        self,
        server_id: str,
        directory: ActiveDirectory,
        qi: QiRegistry,
        pseudonym_key: bytes,
        audit: SecurityAudit | None = None,
        view_controllers: frozenset[str] = DEFAULT_VIEW_CONTROLLERS,
        enforce_dac: bool = True,
    ):
        self.server_id = server_id
        self.directory = directory
        self.qi = qi
        self.pseudonym_key = pseudonym_key
        self.audit = audit if audit is not None else SecurityAudit()
        self.view_controllers = view_controllers
        self.enforce_dac = enforce_dac
        self._collections: dict[str, Collection] = {}

    # -- setup --

    def create_collection(self, name: str, tier: Tier) -> Collection:
        if name in self._collections:
            raise ScenarioError(f"collection {name!r} already exists on {self.server_id!r}")
        coll = Collection(name, tier)
        self._collections[name] = coll
        return coll

    def collection_names(self) -> tuple[str, ...]:
        return tuple(self._collections)

    def insert_raw(self, collection: str, doc: Document) -> None:
        """Fixture loading path; bypasses sessions but not append-only rules."""
        coll = self._get_collection(collection)
        self._validate_for_tier(coll, doc)
        if doc.doc_id in coll.documents:
            raise DuplicateDocument(f"document {doc.doc_id!r} already in {collection!r}")
        coll.documents[doc.doc_id] = doc.copy()

    # -- session-gated operations --

    def read(self, session, collection: str, query: dict[str, str] | None = None) -> list[Document]:
        """Return copies of matching documents after re-checking R permission."""
        audit = self.audit.new_request("read", getattr(session, "controller_id", "?"), collection)
        self._check_session(session, audit)
        coll = self._get_collection(collection)
        self._check_dac(session.controller_id, collection, READ, audit)
        docs = [d.copy() for d in coll.documents.values() if _matches(d, query)]
        audit.served = True
        return docs

    def write(self, session, collection: str, doc: Document) -> None:
        """Append one document after re-checking W permission; never overwrites."""
        audit = self.audit.new_request("write", getattr(session, "controller_id", "?"), collection)
        self._check_session(session, audit)
        coll = self._get_collection(collection)
        self._check_dac(session.controller_id, collection, WRITE, audit)
        self._validate_for_tier(coll, doc)
        if doc.doc_id in coll.documents:
            raise DuplicateDocument(
                f"document {doc.doc_id!r} already in {collection!r}; stored data is immutable"
            )
        coll.documents[doc.doc_id] = doc.copy()
        audit.served = True

    def secured_view(self, session, collection: str) -> list[Document]:
        """De-identified read surface for the analysis components only."""
        audit = self.audit.new_request("view", getattr(session, "controller_id", "?"), collection)
        self._check_session(session, audit)
        controller = session.controller_id
        allowed = controller in self.view_controllers and self.directory.check_request(
            controller, SECURED_VIEW_TARGET, READ
        )
        self.audit.record(audit, "view-gate", allowed)
        if not allowed and self.enforce_dac:
            raise PermissionDenied(f"{controller!r} may not use the secured view")
        coll = self._get_collection(collection)
        docs = [deidentify(d, self.qi, self.pseudonym_key) for d in coll.documents.values()]
        audit.served = True
        return docs

    # -- internals --

    def _check_session(self, session, audit: RequestAudit) -> None:
        ok = bool(getattr(session, "established", False)) and bool(
            getattr(session, "controller_id", "")
        )
        self.audit.record(audit, "session-entry", ok)
        if not ok:
            raise PermissionDenied("request without an established session")

    def _check_dac(
        self, controller: str, collection: str, needed: frozenset[Permission], audit: RequestAudit
    ) -> None:
        ok = needed <= self.directory.dac_lookup(controller, collection)
        self.audit.record(audit, "store-dac", ok)
        if not ok and self.enforce_dac:
            raise PermissionDenied(
                f"{controller!r} lacks {''.join(sorted(p.value for p in needed))} on {collection!r}"
            )

    def _get_collection(self, name: str) -> Collection:
        try:
            return self._collections[name]
        except KeyError:
            raise UnknownCollection(f"no collection {name!r} on {self.server_id!r}") from None

    def _validate_for_tier(self, coll: Collection, doc: Document) -> None:
        if coll.tier is Tier.ORIGINAL and not doc.global_id:
            raise ScenarioError("original-tier documents must carry a global id")
        if coll.tier is Tier.ANONYMIZED:
            leaked = self.qi.names & doc.fields.keys()
            if leaked:
                raise ScenarioError(f"anonymized-tier document carries QI fields {sorted(leaked)}")

    def snapshot(self) -> dict[str, frozenset[tuple]]:
        """Frozen view of every collection's document multiset."""
        return {
            name: frozenset(d.freeze() for d in coll.documents.values())
            for name, coll in self._collections.items()
        }


@dataclass(frozen=True)
class StoreSession:
    """Minimal session object for direct (non-networked) library use."""

    controller_id: str
    established: bool = True


def _matches(doc: Document, query: dict[str, str] | None) -> bool:
    if not query:
        return True
    for key, value in query.items():
        if key == "doc_id":
            if doc.doc_id != value:
                return False
        elif key == "global_id":
            if doc.global_id != value:
                return False
        elif doc.fields.get(key) != value:
            return False
    return True


def load_collection_file(path: str | Path) -> list[Document]:
    """Parse a collection fixture: `doc_id global_id field=value ...` per line."""
    docs: list[Document] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) < 2:
            raise ScenarioError(f"{path}:{lineno}: expected 'doc_id global_id [k=v ...]'")
        doc_id, global_id, *pairs = parts
        fields: dict[str, str] = {}
        for pair in pairs:
            if "=" not in pair:
                raise ScenarioError(f"{path}:{lineno}: field {pair!r} is not k=v")
            key, value = pair.split("=", 1)
            fields[key] = value
        docs.append(Document(doc_id, global_id, fields))
    return docs
