"""Shared domain types: roles, organizations, and credentials."""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from . import crypto
from .errors import EmptyPassword

# Closed default role taxonomy: school staff/members, clinic staff/members,
# and the system-level administrative roles.
DEFAULT_ROLE_NAMES: tuple[str, ...] = (
    "clinician",
    "teacher",
    "school_admin",
    "clinic_admin",
    "global_admin",
    "policy_maker",
    "student",
    "patient",
)


class RoleRegistry:
    """Closed set of role names; unknown names are rejected at parse time."""

    def __init__(self, names: tuple[str, ...] = DEFAULT_ROLE_NAMES):
        if not names or any(not n for n in names):
            raise ValueError("role names must be non-empty")
        self._names = frozenset(names)

    @property
    def names(self) -> frozenset[str]:
        return self._names

    def parse(self, name: str) -> str:
        if name not in self._names:
            raise ValueError(f"unknown role {name!r}")
        return name

    def parse_list(self, names: list[str] | tuple[str, ...]) -> tuple[str, ...]:
        if not names:
            raise ValueError("role list must be non-empty")
        return tuple(self.parse(n) for n in names)


class OrgKind(Enum):
    SCHOOL = "school"
    CLINIC = "clinic"
    SYSTEM = "system"


@dataclass(frozen=True)
class OrgId:
    value: str
    kind: OrgKind

    def __post_init__(self):
        if not self.value:
            raise ValueError("org id must be non-empty")


def default_admin_roles(kind: OrgKind) -> frozenset[str]:
    """Administrative roles managing members of an organization class."""
    if kind is OrgKind.CLINIC:
        return frozenset({"clinic_admin", "clinician"})
    if kind is OrgKind.SCHOOL:
        return frozenset({"school_admin", "teacher"})
    return frozenset({"global_admin"})


@dataclass(frozen=True)
class UserCredential:
    """Stored login credential of an end-user.

    Only the salted hash of the password is kept; the structural check in
    __post_init__ guards against a plaintext ever being stored in its place.
    """

    user_id: str
    username: str
    password_salt: bytes
    password_hash: bytes
    roles: tuple[str, ...]
    org_id: OrgId

    def __post_init__(self):
        if not self.roles:
            raise ValueError("credential must carry at least one role")
        if len(self.password_hash) != 32 or len(self.password_salt) != crypto.SALT_SIZE:
            raise ValueError("password_hash/salt must be digest-shaped")

    @classmethod
    def create(
        cls,
        user_id: str,
        username: str,
        password: str,
        roles: tuple[str, ...],
        org_id: OrgId,
        rng: random.Random,
    ) -> "UserCredential":
        salt = rng.randbytes(crypto.SALT_SIZE)
        return cls(user_id, username, salt, crypto.hash_password(password, salt), tuple(roles), org_id)

    def check_password(self, password: str) -> bool:
        if not password:
            return False
        return crypto.check_password(password, self.password_salt, self.password_hash)


@dataclass(frozen=True)
class ControllerCredential:
    """Stored credential of a system controller.

    `secret_key` is re-derivable from the password alone (both protocol ends
    must compute it independently), so the plaintext is never stored.
    """

    controller_id: str
    controller_name: str
    password_salt: bytes
    password_hash: bytes
    secret_key: bytes

    @classmethod
    def create(
        cls, controller_id: str, controller_name: str, password: str, rng: random.Random
    ) -> "ControllerCredential":
        if not password:
            raise EmptyPassword("controller password must be non-empty")
        salt = rng.randbytes(crypto.SALT_SIZE)
        return cls(
            controller_id,
            controller_name,
            salt,
            crypto.hash_password(password, salt),
            crypto.key_derive(password),
        )
