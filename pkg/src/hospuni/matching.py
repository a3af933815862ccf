"""Affiliation text normalization and alias matching.

Address strings are folded into token sequences (lowercase, diacritics
stripped, punctuation removed) and matched against the normalized aliases
of registered organizations.  Matching is exact on token subsequences;
there is no fuzzy or edit-distance matching, so every hit is explainable
by pointing at the alias and the span it covered.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

from .errors import MalformedRecordError

if TYPE_CHECKING:
    from .registry import Organization, RegistrySnapshot

GRADE_EXACT = "exact"
GRADE_ALIAS = "alias"


def normalize(text: str) -> tuple[str, ...]:
    """Fold an affiliation string into a normalized token sequence.

    Applies NFKD decomposition, strips combining marks, casefolds, and
    treats every non-alphanumeric character as a token boundary.  The fold
    is idempotent: normalizing the joined output again yields the same
    tokens.
    """
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    folded = stripped.casefold()
    return tuple("".join(ch if ch.isalnum() else " " for ch in folded).split())


@dataclass(frozen=True)
class Mention:
    """One organization detected in an address.

    ``start``/``end`` index the normalized token sequence (end exclusive).
    """

    org: str
    grade: str
    start: int
    end: int

    def to_dict(self) -> dict:
        return {"org": self.org, "grade": self.grade, "span": [self.start, self.end]}


@dataclass(frozen=True)
class MatchResult:
    mentions: tuple[Mention, ...] = ()

    @property
    def unmatched(self) -> bool:
        return not self.mentions

    def orgs(self) -> frozenset[str]:
        return frozenset(m.org for m in self.mentions)

    def to_dict(self) -> dict:
        return {"mentions": [m.to_dict() for m in self.mentions]}


class AliasIndex:
    """Normalized alias lookup table for one registry snapshot.

    Aliases whose normalized form equals the organization's normalized
    canonical name match at grade ``exact``; every other alias matches at
    grade ``alias``.
    """

    def __init__(self, organizations: Iterable["Organization"]):
        by_tokens: dict[tuple[str, ...], list[tuple[str, str]]] = {}
        for org in organizations:
            canonical = normalize(org.canonical_name)
            for alias in org.aliases:
                tokens = normalize(alias.name)
                if not tokens:
                    continue
                grade = GRADE_EXACT if tokens == canonical else GRADE_ALIAS
                entries = by_tokens.setdefault(tokens, [])
                if (org.id, grade) not in entries:
                    entries.append((org.id, grade))
        self._by_tokens = by_tokens
        self._lengths = tuple(sorted({len(t) for t in by_tokens}, reverse=True))

    def candidates(self, tokens: tuple[str, ...]) -> list[tuple[int, int, str, str]]:
        """All alias occurrences as (start, end, org, grade) spans."""
        found: list[tuple[int, int, str, str]] = []
        n = len(tokens)
        for start in range(n):
            for length in self._lengths:
                if start + length > n:
                    continue
                hits = self._by_tokens.get(tokens[start : start + length])
                if not hits:
                    continue
                for org_id, grade in hits:
                    found.append((start, start + length, org_id, grade))
        return found


def resolve_spans(candidates: list[tuple[int, int, str, str]]) -> tuple[Mention, ...]:
    """Pick a non-overlapping subset of candidate spans deterministically.

    Longer spans win; ties go to the lexicographically smaller org id,
    then to the leftmost start.  Each org is reported at most once, at its
    leftmost accepted span.
    """
    ordered = sorted(candidates, key=lambda c: (c[0] - c[1], c[2], c[0], c[3]))
    accepted: list[tuple[int, int, str, str]] = []
    for start, end, org_id, grade in ordered:
        if any(start < a_end and a_start < end for a_start, a_end, _, _ in accepted):
            continue
        accepted.append((start, end, org_id, grade))
    leftmost: dict[str, tuple[int, int, str, str]] = {}
    for cand in accepted:
        best = leftmost.get(cand[2])
        if best is None or cand[0] < best[0]:
            leftmost[cand[2]] = cand
    mentions = [
        Mention(org=org_id, grade=grade, start=start, end=end)
        for start, end, org_id, grade in leftmost.values()
    ]
    mentions.sort(key=lambda m: (m.start, m.org))
    return tuple(mentions)


def match_mention(text: str, snapshot: "RegistrySnapshot") -> MatchResult:
    """Match one raw address against every alias in the snapshot."""
    tokens = normalize(text)
    if not tokens:
        return MatchResult()
    return MatchResult(mentions=resolve_spans(snapshot.alias_index.candidates(tokens)))


class DocType(str, Enum):
    ARTICLE = "article"
    REVIEW = "review"
    OTHER = "other"


@dataclass(frozen=True)
class RawPublication:
    """A publication as it arrives from a corpus file, addresses unparsed."""

    id: str
    year: int
    doctype: DocType
    addresses: tuple[str, ...]


@dataclass(frozen=True)
class ResolvedAddress:
    raw: str
    match: MatchResult

    def to_dict(self) -> dict:
        return {"raw": self.raw, "match": self.match.to_dict()}


@dataclass(frozen=True)
class Publication:
    """A publication whose every address carries its match result."""

    id: str
    year: int
    doctype: DocType
    addresses: tuple[ResolvedAddress, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "year": self.year,
            "doctype": self.doctype.value,
            "addresses": [a.to_dict() for a in self.addresses],
        }


def resolve_publication(pub: RawPublication, snapshot: "RegistrySnapshot") -> Publication:
    """Attach a match result to every address of one publication."""
    if not pub.addresses:
        raise MalformedRecordError(f"publication {pub.id!r} has no addresses")
    resolved = tuple(
        ResolvedAddress(raw=addr, match=match_mention(addr, snapshot))
        for addr in pub.addresses
    )
    return Publication(id=pub.id, year=pub.year, doctype=pub.doctype, addresses=resolved)


def resolve_corpus(
    pubs: Iterable[RawPublication], snapshot: "RegistrySnapshot"
) -> list[Publication]:
    return [resolve_publication(p, snapshot) for p in pubs]
