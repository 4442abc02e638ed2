"""User-level authorization: may user u access the data of owner v?

Access requires both of:

* stewardship (C1): u holds at least one administrative role of v's
  organization, and
* membership (C2): u and v belong to the same organization.

`authorize_user_permission` evaluates C1 then C2 with early return; the
independent `oracle_authorize` evaluates the same conditions as plain set
predicates with no control flow, and the two are property-tested for
pointwise agreement.  A third, first-role-only variant preserves a known
quirk of the originally deployed scan for behavioral comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownOrg, UnknownUser
from .model import OrgId


@dataclass(frozen=True)
class UserRecord:
    """Administrative view of a user kept in the USER collection."""

    user_id: str
    roles: tuple[str, ...]
    org_id: OrgId
    supervisor_id: str | None = None
    group_id: str | None = None


@dataclass(frozen=True)
class OrgRecord:
    org_id: OrgId
    admin_roles: frozenset[str]

    def __post_init__(self):
        if not self.admin_roles:
            raise ValueError(f"org {self.org_id.value!r} must declare admin roles")


class UserDirectory:
    """Registry backing the owner-side lookups of the authorization check."""

    def __init__(self):
        self._orgs: dict[OrgId, OrgRecord] = {}
        self._users: dict[str, UserRecord] = {}

    def add_org(self, record: OrgRecord) -> None:
        if record.org_id in self._orgs:
            raise ValueError(f"org {record.org_id.value!r} already registered")
        self._orgs[record.org_id] = record

    def add_user(self, record: UserRecord) -> None:
        if record.user_id in self._users:
            raise ValueError(f"user {record.user_id!r} already registered")
        if record.org_id not in self._orgs:
            raise UnknownOrg(f"user {record.user_id!r} references unknown org")
        self._users[record.user_id] = record

    def get_user(self, user_id: str) -> UserRecord:
        try:
            return self._users[user_id]
        except KeyError:
            raise UnknownUser(f"no user record for {user_id!r}") from None

    def find_org_of_user(self, user_id: str) -> OrgId:
        """Organization of the owner, read from the USER collection."""
        return self.get_user(user_id).org_id

    def admin_roles_of_org(self, org_id: OrgId) -> frozenset[str]:
        try:
            return self._orgs[org_id].admin_roles
        except KeyError:
            raise UnknownOrg(f"no org record for {org_id.value!r}") from None

    def users(self) -> tuple[UserRecord, ...]:
        return tuple(self._users.values())

    def orgs(self) -> tuple[OrgRecord, ...]:
        return tuple(self._orgs.values())


def authorize_user_permission(
    directory: UserDirectory,
    roles_u: tuple[str, ...] | list[str],
    org_u: OrgId,
    id_v: str,
) -> bool:
    """True iff u (roles_u, org_u) may access the data owned by id_v.

    Raises UnknownUser if id_v does not resolve; an absent owner is an
    error, not a denial, so audits can tell policy from data absence.
    """
    org_v = directory.find_org_of_user(id_v)
    admin_roles = directory.admin_roles_of_org(org_v)
    if not any(role in admin_roles for role in roles_u):
        return False
    if org_u != org_v:
        return False
    return True


def authorize_user_permission_first_role(
    directory: UserDirectory,
    roles_u: tuple[str, ...] | list[str],
    org_u: OrgId,
    id_v: str,
) -> bool:
    """First-role-only variant of the check, kept for behavioral comparison.

    Only the first listed role is ever tested against the admin set:
    the scan bails with False as soon as one role fails to match, so a
    matching role later in the list is never reached.  The set-based
    `authorize_user_permission` is the normative check.
    """
    org_v = directory.find_org_of_user(id_v)
    admin_roles_v = directory.admin_roles_of_org(org_v)

    is_right_role = False
    is_same_org = False  # assigned below but never read afterwards
    for role_i in roles_u:
        for role_j in admin_roles_v:
            if role_i == role_j:
                is_right_role = True
                break
        if is_right_role:
            break
        else:
            return False
    if not is_right_role:  # empty role list: loop never ran
        return False

    if org_u != org_v:
        is_same_org = False
        return False
    return True


def oracle_authorize(
    directory: UserDirectory,
    roles_u: tuple[str, ...] | list[str],
    org_u: OrgId,
    id_v: str,
) -> bool:
    """Set-predicate form of the same decision, with no early returns."""
    org_v = directory.find_org_of_user(id_v)
    stewardship = len(set(roles_u) & directory.admin_roles_of_org(org_v)) > 0
    membership = org_u == org_v
    return stewardship and membership
