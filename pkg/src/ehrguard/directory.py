"""In-process active directory: controller credentials plus the DAC table.

The DAC table maps (controller, collection) pairs to permission sets drawn
from {R, W}.  Lookups are default-deny: a missing entry is the empty set.
The directory is consulted twice per data path — once by the ticket
granting service and again at the store hop.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DuplicateName, EmptyRequest, ScenarioError
from .model import ControllerCredential


class Permission(Enum):
    R = "R"
    W = "W"


READ: frozenset[Permission] = frozenset({Permission.R})
WRITE: frozenset[Permission] = frozenset({Permission.W})
READ_WRITE: frozenset[Permission] = frozenset({Permission.R, Permission.W})

_FIXTURE_PERMS = {"R": READ, "W": WRITE, "RW": READ_WRITE}


def perms_to_str(perms: frozenset[Permission]) -> str:
    """Canonical string form, sorted: "", "R", "W", or "RW"."""
    return "".join(sorted(p.value for p in perms))


def parse_fixture_perms(text: str) -> frozenset[Permission]:
    """Strict fixture form: exactly "R", "W", or "RW"."""
    try:
        return _FIXTURE_PERMS[text]
    except KeyError:
        raise ScenarioError(f"unknown permission string {text!r}") from None


def parse_request_letters(text: str) -> frozenset[Permission]:
    """Permission letters of a request; search (S) and compare (C) are
    non-mutating and map to R."""
    perms = set()
    for ch in text:
        if ch in ("R", "S", "C"):
            perms.add(Permission.R)
        elif ch == "W":
            perms.add(Permission.W)
        else:
            raise ScenarioError(f"unknown permission letter {ch!r}")
    return frozenset(perms)


@dataclass(frozen=True)
class DacEntry:
    controller: str
    collection: str
    permissions: frozenset[Permission]


@dataclass
class DirectoryEntry:
    controller_name: str
    password_hash: bytes
    org: str = ""
    group: str = ""
    domain_name: str = ""
    acl: dict[str, frozenset[Permission]] = field(default_factory=dict)


class ActiveDirectory:
    """Controller registry and ACL store; reads concurrent, writes serialized."""

    def __init__(self):
        self._entries: dict[str, DirectoryEntry] = {}
        self._credentials: dict[str, ControllerCredential] = {}
        self._lock = threading.Lock()

    def register_controller(
        self,
        credential: ControllerCredential,
        acl: list[DacEntry],
        org: str = "",
        group: str = "",
        domain_name: str = "",
    ) -> None:
        with self._lock:
            if credential.controller_id in self._entries:
                raise DuplicateName(f"controller {credential.controller_id!r} already registered")
            if any(e.controller_name == credential.controller_name for e in self._entries.values()):
                raise DuplicateName(f"controller name {credential.controller_name!r} already taken")
            entry = DirectoryEntry(
                controller_name=credential.controller_name,
                password_hash=credential.password_hash,
                org=org,
                group=group,
                domain_name=domain_name,
            )
            for dac in acl:
                if dac.controller != credential.controller_id:
                    raise ScenarioError(
                        f"ACL row for {dac.controller!r} attached to {credential.controller_id!r}"
                    )
                if dac.collection in entry.acl:
                    raise ScenarioError(
                        f"duplicate ACL row ({dac.controller}, {dac.collection})"
                    )
                entry.acl[dac.collection] = dac.permissions
            self._entries[credential.controller_id] = entry
            self._credentials[credential.controller_id] = credential

    def is_registered(self, controller: str) -> bool:
        return controller in self._entries

    def get_credential(self, controller: str) -> ControllerCredential | None:
        return self._credentials.get(controller)

    def controllers(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def dac_lookup(self, controller: str, collection: str) -> frozenset[Permission]:
        """Permission set for (controller, collection); empty set if absent."""
        entry = self._entries.get(controller)
        if entry is None:
            return frozenset()
        return entry.acl.get(collection, frozenset())

    def dac_entries(self, controller: str) -> tuple[DacEntry, ...]:
        entry = self._entries.get(controller)
        if entry is None:
            return ()
        return tuple(
            DacEntry(controller, col, perms) for col, perms in entry.acl.items()
        )

    def check_request(
        self, controller: str, collection: str, requested: frozenset[Permission]
    ) -> bool:
        """True iff every requested permission is granted for the pair."""
        if not requested:
            raise EmptyRequest("permission request must be non-empty")
        return requested <= self.dac_lookup(controller, collection)

    def revoke_permissions(self, controller: str, collection: str) -> None:
        """Set the pair's permissions to the empty set (explicit deny)."""
        with self._lock:
            entry = self._entries.get(controller)
            if entry is not None:
                entry.acl[collection] = frozenset()


def load_dac_rows(path: str | Path) -> list[DacEntry]:
    """Parse a DAC fixture: one `controller collection R|W|RW` row per line."""
    rows: list[DacEntry] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise ScenarioError(f"{path}:{lineno}: expected 'controller collection perms'")
        controller, collection, perm_text = parts
        rows.append(DacEntry(controller, collection, parse_fixture_perms(perm_text)))
    return rows
