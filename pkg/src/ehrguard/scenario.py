"""Scenario loading and runtime wiring.

A scenario is one JSON config file plus line-based fixture files for the
DAC table, the user/org registry, the QI field list, and the collection
contents.  `build_runtime` assembles every component — credential stores,
token issuer, active directory, ticket services, tiered stores — from the
config, deriving all randomness from the single scenario seed so a re-run
reproduces identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import crypto
from .authz import OrgRecord, UserDirectory, UserRecord
from .clock import ManualClock
from .directory import ActiveDirectory, DacEntry, load_dac_rows
from .errors import ScenarioError
from .kerberos import (
    DEFAULT_TICKET_TTL_MS,
    AuthServer,
    DatabaseService,
    ServiceKeyring,
    TicketGrantingService,
    service_for_collection,
)
from .model import (
    ControllerCredential,
    OrgId,
    OrgKind,
    RoleRegistry,
)
from .store import (
    SECURED_VIEW_TARGET,
    QiRegistry,
    SecurityAudit,
    Tier,
    TieredStore,
    load_collection_file,
)
from .tokens import DEFAULT_TOKEN_TTL_MS, CredentialStore, TokenIssuer


@dataclass(frozen=True)
class ControllerSpec:
    controller_id: str
    password: str
    org: str = ""
    group: str = ""
    domain_name: str = ""


@dataclass(frozen=True)
class CollectionSpec:
    name: str
    tier: Tier
    store: str
    fixture: Path | None


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    ttl_token_ms: int
    ttl_ticket_ms: int
    suites: tuple[str, ...]
    directory_fixture: Path
    user_fixture: Path
    qi_registry: Path
    controllers: tuple[ControllerSpec, ...]
    collections: tuple[CollectionSpec, ...]

    def __post_init__(self):
        if self.ttl_token_ms <= 0 or self.ttl_ticket_ms <= 0:
            raise ScenarioError("TTLs must be positive")
        for path in (self.directory_fixture, self.user_fixture, self.qi_registry):
            if not Path(path).is_file():
                raise ScenarioError(f"fixture file {path} does not exist")
        for spec in self.collections:
            if spec.fixture is not None and not spec.fixture.is_file():
                raise ScenarioError(f"collection fixture {spec.fixture} does not exist")

    def override(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def default_scenario_path() -> Path:
    return Path(str(resources.files("ehrguard") / "fixtures" / "default" / "scenario.json"))


def bundled_script_path(name: str) -> Path:
    return Path(str(resources.files("ehrguard") / "fixtures" / "scripts" / name))


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot load scenario {path}: {exc}") from exc
    base = path.parent

    def _resolve(rel: str) -> Path:
        return (base / rel).resolve()

    try:
        controllers = tuple(
            ControllerSpec(
                controller_id=c["id"],
                password=c["password"],
                org=c.get("org", ""),
                group=c.get("group", ""),
                domain_name=c.get("domain", ""),
            )
            for c in raw["controllers"]
        )
        collections = tuple(
            CollectionSpec(
                name=name,
                tier=Tier(spec["tier"]),
                store=spec["store"],
                fixture=_resolve(spec["fixture"]) if spec.get("fixture") else None,
            )
            for name, spec in raw["collections"].items()
        )
        return ScenarioConfig(
            seed=int(raw["seed"]),
            ttl_token_ms=int(raw.get("ttl_token_ms", DEFAULT_TOKEN_TTL_MS)),
            ttl_ticket_ms=int(raw.get("ttl_ticket_ms", DEFAULT_TICKET_TTL_MS)),
            suites=tuple(raw.get("suites", [])),
            directory_fixture=_resolve(raw["directory_fixture"]),
            user_fixture=_resolve(raw["user_fixture"]),
            qi_registry=_resolve(raw["qi_registry"]),
            controllers=controllers,
            collections=collections,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario config {path}: {exc}") from exc


def load_default_scenario() -> ScenarioConfig:
    return load_scenario(default_scenario_path())


# --- fixture parsers ----------------------------------------------------------


@dataclass(frozen=True)
class UserSpec:
    user_id: str
    username: str
    password: str
    org: str
    roles: tuple[str, ...]
    supervisor_id: str | None = None
    group_id: str | None = None


def load_user_fixture(path: str | Path) -> tuple[list[tuple[str, OrgKind, tuple[str, ...]]], list[UserSpec]]:
    """Parse `org id kind role,role` and `user id name pw org role,role [k=v]` lines."""
    orgs: list[tuple[str, OrgKind, tuple[str, ...]]] = []
    users: list[UserSpec] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        kind = parts[0]
        try:
            if kind == "org":
                _, org_id, org_kind, roles = parts
                orgs.append((org_id, OrgKind(org_kind), tuple(roles.split(","))))
            elif kind == "user":
                _, user_id, username, password, org, roles, *extras = parts
                supervisor = group = None
                for extra in extras:
                    key, _, value = extra.partition("=")
                    if key == "supervisor":
                        supervisor = value
                    elif key == "group":
                        group = value
                    else:
                        raise ValueError(f"unknown extra {extra!r}")
                users.append(
                    UserSpec(user_id, username, password, org, tuple(roles.split(",")), supervisor, group)
                )
            else:
                raise ValueError(f"unknown record type {kind!r}")
        except ValueError as exc:
            raise ScenarioError(f"{path}:{lineno}: {exc}") from exc
    return orgs, users


def load_qi_registry(path: str | Path) -> QiRegistry:
    names = frozenset(
        line.strip()
        for line in Path(path).read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    )
    if not names:
        raise ScenarioError(f"QI registry {path} is empty")
    return QiRegistry(names)


# --- runtime assembly -----------------------------------------------------------


class ScenarioRuntime:
    """All protocol components of one scenario, wired from a single seed."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.clock = ManualClock(0)
        seed = config.seed

        self.role_registry = RoleRegistry()
        self.audit = SecurityAudit()

        # users / tokens
        setup_rng = crypto.make_rng(crypto.child_seed(seed, "setup"))
        self.credential_store = CredentialStore()
        self.user_directory = UserDirectory()
        self._load_users(setup_rng)
        self.token_issuer = TokenIssuer(
            self.credential_store,
            crypto.SigningKeyPair.generate(crypto.make_rng(crypto.child_seed(seed, "issuer"))),
            ttl_ms=config.ttl_token_ms,
        )

        # controllers / DAC (the credential store of the ticket authority)
        self.active_directory = ActiveDirectory()
        dac_rows = load_dac_rows(config.directory_fixture)
        rows_by_controller: dict[str, list[DacEntry]] = {}
        for row in dac_rows:
            rows_by_controller.setdefault(row.controller, []).append(row)
        for spec in config.controllers:
            credential = ControllerCredential.create(
                spec.controller_id, spec.controller_id, spec.password, setup_rng
            )
            self.active_directory.register_controller(
                credential,
                rows_by_controller.pop(spec.controller_id, []),
                org=spec.org,
                group=spec.group,
                domain_name=spec.domain_name,
            )
        if rows_by_controller:
            missing = ", ".join(sorted(rows_by_controller))
            raise ScenarioError(f"DAC rows for unconfigured controllers: {missing}")
        self.controller_passwords = {c.controller_id: c.password for c in config.controllers}

        # ticket services
        self.keyring = ServiceKeyring()
        key_rng = crypto.make_rng(crypto.child_seed(seed, "service-keys"))
        tgs_key = key_rng.randbytes(crypto.SYM_KEY_SIZE)
        dac_targets = sorted({row.collection for row in dac_rows} | {SECURED_VIEW_TARGET})
        for target in dac_targets:
            self.keyring.provision(service_for_collection(target), key_rng)
        self.auth_server = AuthServer(
            self.active_directory,
            tgs_key,
            self.clock,
            crypto.make_rng(crypto.child_seed(seed, "as")),
        )
        self.tgs = TicketGrantingService(
            self.active_directory,
            tgs_key,
            self.keyring,
            self.clock,
            crypto.make_rng(crypto.child_seed(seed, "tgs")),
            ttl_ms=config.ttl_ticket_ms,
        )

        # stores and collections
        self.qi = load_qi_registry(config.qi_registry)
        pseudonym_key = key_rng.randbytes(32)
        self.stores: dict[str, TieredStore] = {}
        self.collection_store: dict[str, TieredStore] = {}
        for spec in config.collections:
            store = self.stores.get(spec.store)
            if store is None:
                store = TieredStore(
                    spec.store, self.active_directory, self.qi, pseudonym_key, audit=self.audit
                )
                self.stores[spec.store] = store
            store.create_collection(spec.name, spec.tier)
            self.collection_store[spec.name] = store
            if spec.fixture is not None:
                for doc in load_collection_file(spec.fixture):
                    store.insert_raw(spec.name, doc)

        # one database-service principal per DAC target
        self.services: dict[str, DatabaseService] = {}
        for target in dac_targets:
            service_id = service_for_collection(target)
            self.services[service_id] = DatabaseService(
                service_id,
                self.keyring.get(service_id),
                self.clock,
                crypto.make_rng(crypto.child_seed(seed, service_id)),
                ttl_ms=config.ttl_ticket_ms,
            )

    def _load_users(self, rng) -> None:
        orgs, users = load_user_fixture(self.config.user_fixture)
        org_ids: dict[str, OrgId] = {}
        for org_value, org_kind, admin_roles in orgs:
            org_id = OrgId(org_value, org_kind)
            org_ids[org_value] = org_id
            self.user_directory.add_org(
                OrgRecord(org_id, frozenset(self.role_registry.parse_list(admin_roles)))
            )
        for spec in users:
            if spec.org not in org_ids:
                raise ScenarioError(f"user {spec.user_id!r} references unknown org {spec.org!r}")
            roles = self.role_registry.parse_list(spec.roles)
            org_id = org_ids[spec.org]
            self.user_directory.add_user(
                UserRecord(spec.user_id, roles, org_id, spec.supervisor_id, spec.group_id)
            )
            self.credential_store.add_user(
                spec.user_id, spec.username, spec.password, roles, org_id, rng
            )

    # -- conveniences --

    def store_for_collection(self, collection: str) -> TieredStore:
        try:
            return self.collection_store[collection]
        except KeyError:
            raise ScenarioError(f"no store hosts collection {collection!r}") from None

    def controller_rng(self, controller_id: str):
        return crypto.make_rng(crypto.child_seed(self.config.seed, f"controller:{controller_id}"))


def build_runtime(config: ScenarioConfig | None = None) -> ScenarioRuntime:
    return ScenarioRuntime(config if config is not None else load_default_scenario())
