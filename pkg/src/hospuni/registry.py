"""Organization registry: orgs, component/associate edges, and closures.

Component edges point child -> parent and mean the child's publication
output belongs to the parent's counting unit.  Associate edges record an
affiliation that is deliberately NOT counted.  The component subgraph must
stay acyclic at all times; snapshots are immutable views restricted to a
reference window and are safe to share across threads.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import (
    ComponentCycleError,
    DuplicateOrgError,
    EmptyCanonicalNameError,
    InvalidWindowError,
    MalformedRecordError,
    UnknownOrgError,
)
from .matching import AliasIndex, normalize

_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")

PROVENANCE_MANUAL = "manual"
_PROVENANCE_RE = re.compile(r"^(manual|assessment:.+)$")


class OrgKind(str, Enum):
    UNIVERSITY = "university"
    HOSPITAL = "hospital"
    HEALTH_SYSTEM = "health-system"
    MEDICAL_FACULTY = "medical-faculty"
    RESEARCH_UNIT = "research-unit"
    HEALTH_NETWORK = "health-network"
    OTHER = "other"


class RelKind(str, Enum):
    COMPONENT = "component"
    ASSOCIATE = "associate"


@dataclass(frozen=True)
class Alias:
    name: str
    script: str | None = None


@dataclass(frozen=True)
class Organization:
    id: str
    canonical_name: str
    kind: OrgKind
    country: str
    aliases: tuple[Alias, ...] = ()
    region: str | None = None


def _validated_org(org: Organization) -> Organization:
    """Normalize an organization record: canonical name folded into the
    alias set, aliases deduplicated by normalized form."""
    if not org.id or not org.id.strip():
        raise MalformedRecordError("organization id must be non-empty")
    if not org.canonical_name or not org.canonical_name.strip():
        raise EmptyCanonicalNameError(f"organization {org.id!r} has an empty canonical name")
    if not isinstance(org.kind, OrgKind):
        raise MalformedRecordError(f"organization {org.id!r} has unknown kind {org.kind!r}")
    if not _COUNTRY_RE.match(org.country):
        raise MalformedRecordError(
            f"organization {org.id!r} country must be a two-letter code, got {org.country!r}"
        )
    seen: set[tuple[str, ...]] = set()
    aliases: list[Alias] = []
    for alias in (Alias(org.canonical_name), *org.aliases):
        folded = normalize(alias.name)
        if not folded:
            raise MalformedRecordError(
                f"organization {org.id!r} alias {alias.name!r} normalizes to nothing"
            )
        if folded in seen:
            continue
        seen.add(folded)
        aliases.append(alias)
    return replace(org, aliases=tuple(aliases))


@dataclass(frozen=True)
class Relationship:
    child: str
    parent: str
    kind: RelKind
    valid_from: int
    valid_to: int | None = None
    provenance: str = PROVENANCE_MANUAL
    notes: str | None = None


def _validated_rel(rel: Relationship) -> Relationship:
    if rel.child == rel.parent:
        if rel.kind is RelKind.COMPONENT:
            raise ComponentCycleError(f"{rel.child!r} cannot be a component of itself")
        raise MalformedRecordError(f"{rel.child!r} cannot relate to itself")
    if not isinstance(rel.kind, RelKind):
        raise MalformedRecordError(f"relationship has unknown kind {rel.kind!r}")
    if rel.valid_to is not None and rel.valid_from > rel.valid_to:
        raise InvalidWindowError(
            f"relationship {rel.child}->{rel.parent} valid_from {rel.valid_from} "
            f"is after valid_to {rel.valid_to}"
        )
    if not _PROVENANCE_RE.match(rel.provenance):
        raise MalformedRecordError(f"bad provenance {rel.provenance!r}")
    return rel


def _overlaps(rel: Relationship, window: tuple[int, int]) -> bool:
    start, end = window
    return rel.valid_from <= end and (rel.valid_to is None or rel.valid_to >= start)


def _check_window(window: tuple[int, int]) -> tuple[int, int]:
    start, end = window
    if start > end:
        raise InvalidWindowError(f"window start {start} is after end {end}")
    return (start, end)


class RegistrySnapshot:
    """Immutable view of the registry restricted to a reference window.

    Holds every organization, but only the relationships whose validity
    overlaps the window.  Builds the alias index once so repeated matching
    against the same snapshot is cheap.
    """

    def __init__(
        self,
        organizations: dict[str, Organization],
        relationships: tuple[Relationship, ...],
        window: tuple[int, int],
    ):
        self.window = _check_window(window)
        self._orgs = dict(organizations)
        self.relationships = tuple(r for r in relationships if _overlaps(r, self.window))
        for rel in self.relationships:
            if rel.child not in self._orgs or rel.parent not in self._orgs:
                raise UnknownOrgError(
                    f"relationship {rel.child}->{rel.parent} references a missing organization"
                )
        self.alias_index = AliasIndex(self._orgs.values())
        children: dict[str, list[str]] = {}
        for rel in self.relationships:
            if rel.kind is RelKind.COMPONENT:
                children.setdefault(rel.parent, []).append(rel.child)
        self._component_children = children

    def organization(self, org_id: str) -> Organization:
        try:
            return self._orgs[org_id]
        except KeyError:
            raise UnknownOrgError(f"unknown organization {org_id!r}") from None

    def has_organization(self, org_id: str) -> bool:
        return org_id in self._orgs

    def organizations(self) -> tuple[Organization, ...]:
        return tuple(self._orgs[k] for k in sorted(self._orgs))

    def component_children(self, parent: str) -> tuple[str, ...]:
        return tuple(self._component_children.get(parent, ()))

    def treating(
        self, pairs: list[tuple[str, str]], kind: RelKind
    ) -> "RegistrySnapshot":
        """Derived snapshot where each (child, parent) pair's direct edge is
        treated as ``kind``, adding the edge when none exists.

        This is the what-if primitive behind delta reports: it never
        touches the underlying registry.
        """
        wanted = set(pairs)
        kept = [
            r for r in self.relationships if (r.child, r.parent) not in wanted
        ]
        start = self.window[0]
        for child, parent in sorted(wanted):
            self.organization(child)
            self.organization(parent)
            kept.append(
                Relationship(child=child, parent=parent, kind=kind, valid_from=start)
            )
        return RegistrySnapshot(self._orgs, tuple(kept), self.window)


def component_closure(root: str, snapshot: RegistrySnapshot) -> frozenset[str]:
    """The root plus every org whose component-edge chain reaches it.

    Traversal follows component edges against their child->parent
    direction and never crosses associate edges.  Orgs of kind
    health-network are never pulled in as sources: network membership is
    not an ownership relation.
    """
    snapshot.organization(root)
    seen = {root}
    stack = [root]
    while stack:
        node = stack.pop()
        for child in snapshot.component_children(node):
            if child in seen:
                continue
            if snapshot.organization(child).kind is OrgKind.HEALTH_NETWORK:
                continue
            seen.add(child)
            stack.append(child)
    return frozenset(seen)


class Registry:
    """Mutable organization store.  All writes go through one lock."""

    def __init__(self):
        self._orgs: dict[str, Organization] = {}
        self._rels: list[Relationship] = []
        self._alias_lookup: dict[tuple[str, ...], set[str]] = {}
        self._lock = threading.Lock()

    # ---- reads ----

    def organization(self, org_id: str) -> Organization:
        try:
            return self._orgs[org_id]
        except KeyError:
            raise UnknownOrgError(f"unknown organization {org_id!r}") from None

    def organizations(self) -> tuple[Organization, ...]:
        return tuple(self._orgs[k] for k in sorted(self._orgs))

    def relationships(self) -> tuple[Relationship, ...]:
        return tuple(self._rels)

    def lookup_alias(self, text: str) -> tuple[Organization, ...]:
        """Organizations whose alias set contains the normalized text."""
        ids = self._alias_lookup.get(normalize(text), set())
        return tuple(self._orgs[i] for i in sorted(ids))

    def snapshot(self, window: tuple[int, int]) -> RegistrySnapshot:
        with self._lock:
            return RegistrySnapshot(self._orgs, tuple(self._rels), window)

    # ---- writes ----

    def add_organization(self, org: Organization) -> str:
        validated = _validated_org(org)
        with self._lock:
            if validated.id in self._orgs:
                raise DuplicateOrgError(f"organization {validated.id!r} already registered")
            self._orgs[validated.id] = validated
            for alias in validated.aliases:
                self._alias_lookup.setdefault(normalize(alias.name), set()).add(validated.id)
        return validated.id

    def link(self, rel: Relationship) -> None:
        validated = _validated_rel(rel)
        with self._lock:
            self._require(validated.child)
            self._require(validated.parent)
            if validated.kind is RelKind.COMPONENT:
                self._check_no_cycle(validated.child, validated.parent)
            self._rels.append(validated)

    def supersede_pair(
        self,
        child: str,
        parent: str,
        kind: RelKind,
        valid_from: int,
        provenance: str,
    ) -> Relationship:
        """Close any live edge on the pair and open a new one.

        A prior edge still open at ``valid_from`` gets valid_to set to the
        year before; an edge that only starts at or after ``valid_from`` is
        dropped outright since the new edge overwrites its whole life.
        """
        with self._lock:
            self._require(child)
            self._require(parent)
            kept: list[Relationship] = []
            for rel in self._rels:
                if rel.child != child or rel.parent != parent:
                    kept.append(rel)
                    continue
                if rel.valid_to is not None and rel.valid_to < valid_from:
                    kept.append(rel)
                    continue
                if rel.valid_from >= valid_from:
                    continue
                kept.append(replace(rel, valid_to=valid_from - 1))
            self._rels = kept
            new_rel = _validated_rel(
                Relationship(
                    child=child,
                    parent=parent,
                    kind=kind,
                    valid_from=valid_from,
                    provenance=provenance,
                )
            )
            if new_rel.kind is RelKind.COMPONENT:
                self._check_no_cycle(child, parent)
            self._rels.append(new_rel)
            return new_rel

    # ---- helpers ----

    def _require(self, org_id: str) -> None:
        if org_id not in self._orgs:
            raise UnknownOrgError(f"unknown organization {org_id!r}")

    def _check_no_cycle(self, child: str, parent: str) -> None:
        # Adding child->parent closes a cycle iff child is already reachable
        # from parent along existing component edges.
        parents_of: dict[str, set[str]] = {}
        for rel in self._rels:
            if rel.kind is RelKind.COMPONENT:
                parents_of.setdefault(rel.child, set()).add(rel.parent)
        stack = [parent]
        seen = {parent}
        while stack:
            node = stack.pop()
            if node == child:
                raise ComponentCycleError(
                    f"component edge {child}->{parent} would close a cycle"
                )
            for nxt in parents_of.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
