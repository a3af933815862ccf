"""Publication counting and hospital delta reports.

Counts accumulate as exact rationals (fractions.Fraction) so additivity
identities hold bit-for-bit; rounding happens only at the display edge,
half-up to two decimals.  Only articles and reviews inside the year window
are counted, everything else contributes zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptyUnitError, InvalidWindowError, MalformedRecordError
from .matching import DocType, Publication
from .registry import RegistrySnapshot, RelKind, component_closure

COUNTED_DOCTYPES = (DocType.ARTICLE, DocType.REVIEW)


class Scheme(str, Enum):
    FULL = "full"
    FRACTIONAL = "fractional"


@dataclass(frozen=True)
class CountingUnit:
    """A named set of organizations counted as one entity."""

    label: str
    members: frozenset[str]


def closure_unit(root: str, snapshot: RegistrySnapshot) -> CountingUnit:
    org = snapshot.organization(root)
    return CountingUnit(label=org.canonical_name, members=component_closure(root, snapshot))


def _check_window(window: tuple[int, int]) -> tuple[int, int]:
    start, end = window
    if start > end:
        raise InvalidWindowError(f"window start {start} is after end {end}")
    return (start, end)


def publication_share(pub: Publication, members: frozenset[str], scheme: Scheme) -> Fraction:
    """One publication's contribution to a unit under a scheme.

    Full: 1 if at least one address mentions a member.  Fractional: the
    share of addresses mentioning a member.
    """
    if not pub.addresses:
        return Fraction(0)
    hits = sum(1 for addr in pub.addresses if addr.match.orgs() & members)
    if hits == 0:
        return Fraction(0)
    if scheme is Scheme.FULL:
        return Fraction(1)
    return Fraction(hits, len(pub.addresses))


def count(
    corpus: Iterable[Publication],
    unit: CountingUnit,
    scheme: Scheme,
    window: tuple[int, int],
) -> Fraction:
    """Total output of a unit over a corpus within a year window."""
    start, end = _check_window(window)
    if not unit.members:
        raise EmptyUnitError(f"counting unit {unit.label!r} has no members")
    total = Fraction(0)
    for pub in corpus:
        if pub.doctype not in COUNTED_DOCTYPES:
            continue
        if not start <= pub.year <= end:
            continue
        total += publication_share(pub, unit.members, scheme)
    return total


def format_count(value: Fraction, places: int = 2) -> str:
    """Render an exact count as fixed-point decimal text, rounding half-up."""
    with localcontext() as ctx:
        ctx.prec = 50
        dec = Decimal(value.numerator) / Decimal(value.denominator)
        return str(dec.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class DeltaReport:
    """Separate/combined accounting for one university and its hospital(s).

    ``marginal_hospital`` is defined as combined minus separate, so the
    additivity identity holds by construction; ``pct_share`` is the
    marginal's share of the combined total, in percentage points.
    """

    university: str
    university_label: str
    hospitals: tuple[str, ...]
    hospital_label: str
    separate_university: Fraction
    marginal_hospital: Fraction
    combined: Fraction
    scheme: Scheme
    window: tuple[int, int]

    @property
    def pct_share(self) -> Fraction:
        if self.combined == 0:
            return Fraction(0)
        return 100 * self.marginal_hospital / self.combined

    def figures(self) -> dict[str, str]:
        return {
            "separate": format_count(self.separate_university),
            "marginal": format_count(self.marginal_hospital),
            "combined": format_count(self.combined),
            "pct_share": format_count(self.pct_share),
        }

    def to_dict(self) -> dict:
        return {
            "university": self.university,
            "university_label": self.university_label,
            "hospitals": list(self.hospitals),
            "hospital_label": self.hospital_label,
            "scheme": self.scheme.value,
            "window": list(self.window),
            **self.figures(),
        }


def pct_share(marginal: Fraction, combined: Fraction) -> Fraction:
    """Marginal share of the combined count, in points; 0 for an empty total."""
    if combined == 0:
        return Fraction(0)
    return 100 * Fraction(marginal) / Fraction(combined)


def _hospital_list(hospital: str | Sequence[str]) -> tuple[str, ...]:
    if isinstance(hospital, str):
        return (hospital,)
    hospitals = tuple(hospital)
    if not hospitals:
        raise EmptyUnitError("delta report needs at least one hospital")
    if len(set(hospitals)) != len(hospitals):
        raise MalformedRecordError("duplicate hospital in delta report")
    return hospitals


def delta_report(
    corpus: Sequence[Publication],
    university: str,
    hospital: str | Sequence[str],
    scheme: Scheme,
    window: tuple[int, int],
    snapshot: RegistrySnapshot,
) -> DeltaReport:
    """Count the university with its hospital edge(s) treated both ways.

    ``separate`` treats every named hospital edge as associate; ``combined``
    treats them all as component.  The current registry verdicts on those
    edges do not influence either branch.
    """
    hospitals = _hospital_list(hospital)
    if university in hospitals:
        raise MalformedRecordError("university cannot be its own hospital")
    pairs = [(h, university) for h in hospitals]
    separate_snap = snapshot.treating(pairs, RelKind.ASSOCIATE)
    combined_snap = snapshot.treating(pairs, RelKind.COMPONENT)
    separate = count(corpus, closure_unit(university, separate_snap), scheme, window)
    combined = count(corpus, closure_unit(university, combined_snap), scheme, window)
    return DeltaReport(
        university=university,
        university_label=snapshot.organization(university).canonical_name,
        hospitals=hospitals,
        hospital_label=" + ".join(
            snapshot.organization(h).canonical_name for h in hospitals
        ),
        separate_university=separate,
        marginal_hospital=combined - separate,
        combined=combined,
        scheme=scheme,
        window=window,
    )


def whatif_report(
    corpus: Sequence[Publication],
    university: str,
    hospital: str | Sequence[str],
    scheme: Scheme,
    window: tuple[int, int],
    snapshot: RegistrySnapshot,
) -> dict[str, DeltaReport]:
    """Delta figures under both hypothetical verdicts.

    The component branch is the ordinary delta report.  Under the associate
    branch nothing is added to the university, so combined collapses onto
    separate and the marginal is zero.
    """
    component = delta_report(corpus, university, hospital, scheme, window, snapshot)
    associate = DeltaReport(
        university=component.university,
        university_label=component.university_label,
        hospitals=component.hospitals,
        hospital_label=component.hospital_label,
        separate_university=component.separate_university,
        marginal_hospital=Fraction(0),
        combined=component.separate_university,
        scheme=scheme,
        window=window,
    )
    return {"component": component, "associate": associate}


def table_report(
    corpus: Sequence[Publication],
    pairs: Sequence[tuple[str, str]],
    scheme: Scheme,
    window: tuple[int, int],
    snapshot: RegistrySnapshot,
) -> list[DeltaReport]:
    """One delta report per university, hospitals grouped and summed.

    ``pairs`` lists (university, hospital) edges; a university appearing
    with several hospitals gets a single report whose marginal covers all
    of them.  Universities keep their first-appearance order.
    """
    grouped: dict[str, list[str]] = {}
    for university, hospital in pairs:
        hospitals = grouped.setdefault(university, [])
        if hospital not in hospitals:
            hospitals.append(hospital)
    return [
        delta_report(corpus, university, hospitals, scheme, window, snapshot)
        for university, hospitals in grouped.items()
    ]
