"""Three-step hospital assessment workflow.

Step 1 looks at legal ownership, step 2 at the teaching mandate, step 3 at
physical integration and author publication behaviour.  Steps 1 and 2 can
settle a pair outright (component, no further questions); step 3 always
ends the trail with component or associate.  Unknown evidence never makes
a pair component: when nothing usable is known the verdict is associate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

from .counting import COUNTED_DOCTYPES, Scheme, closure_unit, count
from .errors import (
    InvalidEvidenceError,
    InvalidWindowError,
    UnknownPublicationError,
    WorkflowStateError,
)
from .matching import Publication
from .registry import OrgKind, Registry, RegistrySnapshot, Relationship, RelKind

DEFAULT_QUEUE_THRESHOLD = 50


class Ownership(str, Enum):
    UNIVERSITY = "university"
    UNIVERSITY_RELATED_FOUNDATION = "university_related_foundation"
    UNIVERSITY_HEALTH_SYSTEM = "university_health_system"
    REVERSE_OWNERSHIP = "reverse_ownership"
    GOVERNMENT_HEALTH_AUTHORITY = "government_health_authority"
    INDEPENDENT_FOUNDATION = "independent_foundation"
    PRIVATE = "private"
    UNKNOWN = "unknown"


OWNERSHIP_DECISIVE = frozenset(
    {
        Ownership.UNIVERSITY,
        Ownership.UNIVERSITY_RELATED_FOUNDATION,
        Ownership.UNIVERSITY_HEALTH_SYSTEM,
        Ownership.REVERSE_OWNERSHIP,
    }
)


class Mandate(str, Enum):
    CORE_CURRICULUM = "core_curriculum"
    SPECIALIST_OR_CONTINUING_ONLY = "specialist_or_continuing_only"
    PATIENT_EDUCATION_ONLY = "patient_education_only"
    NONE_DOCUMENTED = "none_documented"
    UNKNOWN = "unknown"


class StepVerdict(str, Enum):
    COMPONENT_TERMINAL = "component_terminal"
    PROCEED = "proceed"
    ASSOCIATE = "associate"
    COMPONENT = "component"


class QueueStatus(str, Enum):
    PENDING = "pending"
    IN_PROGRESS = "in_progress"
    DECIDED = "decided"


@dataclass(frozen=True)
class StepPolicy:
    """Tunable thresholds for step 3 and overlap trust.

    ``theta_loc``: minimum co-location share treated as integrated.
    ``theta_auth``: minimum author-overlap fraction treated as integrated.
    ``n_min``: overlap samples smaller than this are treated as unknown.
    """

    theta_loc: float = 0.5
    theta_auth: float = 0.5
    n_min: int = 10

    def validate(self) -> "StepPolicy":
        if not 0 <= self.theta_loc <= 1 or not 0 <= self.theta_auth <= 1:
            raise InvalidEvidenceError("policy thresholds must lie in [0, 1]")
        if self.n_min < 1:
            raise InvalidEvidenceError("policy n_min must be at least 1")
        return self


DEFAULT_POLICY = StepPolicy()


@dataclass(frozen=True)
class Source:
    field: str
    citation: str
    retrieved_at: str

    def to_dict(self) -> dict:
        return {"field": self.field, "citation": self.citation, "retrieved_at": self.retrieved_at}

    @staticmethod
    def from_dict(data: Mapping) -> "Source":
        return Source(
            field=str(data["field"]),
            citation=str(data["citation"]),
            retrieved_at=str(data["retrieved_at"]),
        )


@dataclass(frozen=True)
class AuthorOverlap:
    fraction: float
    sample_size: int

    def to_dict(self) -> dict:
        return {"fraction": self.fraction, "sample_size": self.sample_size}


EVIDENCE_FIELDS = ("ownership", "mandate", "colocation_share", "author_overlap", "research_active")
_SOURCED_FIELDS = ("ownership", "mandate", "colocation_share", "author_overlap")


@dataclass(frozen=True)
class EvidenceDossier:
    """Everything known about one hospital-university pair.

    Fields left unknown stay unknown; the workflow treats them
    conservatively.  Every known evidence field must be backed by at least
    one source entry naming it.
    """

    hospital: str
    university: str
    window: tuple[int, int]
    ownership: Ownership = Ownership.UNKNOWN
    mandate: Mandate = Mandate.UNKNOWN
    colocation_share: float | None = None
    author_overlap: AuthorOverlap | None = None
    research_active: bool = True
    sources: tuple[Source, ...] = ()

    def to_dict(self) -> dict:
        return {
            "hospital": self.hospital,
            "university": self.university,
            "window": list(self.window),
            "ownership": self.ownership.value,
            "mandate": self.mandate.value,
            "colocation_share": self.colocation_share,
            "author_overlap": None if self.author_overlap is None else self.author_overlap.to_dict(),
            "research_active": self.research_active,
            "sources": [s.to_dict() for s in self.sources],
        }

    @staticmethod
    def from_dict(data: Mapping) -> "EvidenceDossier":
        overlap = data.get("author_overlap")
        window = data["window"]
        return EvidenceDossier(
            hospital=str(data["hospital"]),
            university=str(data["university"]),
            window=(int(window[0]), int(window[1])),
            ownership=Ownership(data.get("ownership", "unknown")),
            mandate=Mandate(data.get("mandate", "unknown")),
            colocation_share=(
                None if data.get("colocation_share") is None else float(data["colocation_share"])
            ),
            author_overlap=(
                None
                if overlap is None
                else AuthorOverlap(fraction=float(overlap["fraction"]), sample_size=int(overlap["sample_size"]))
            ),
            research_active=bool(data.get("research_active", True)),
            sources=tuple(Source.from_dict(s) for s in data.get("sources", ())),
        )


def validate_dossier(dossier: EvidenceDossier) -> EvidenceDossier:
    """Check dossier invariants; raises InvalidEvidenceError on violation."""
    start, end = dossier.window
    if start > end:
        raise InvalidWindowError(f"dossier window start {start} is after end {end}")
    if dossier.colocation_share is not None and not 0 <= dossier.colocation_share <= 1:
        raise InvalidEvidenceError(
            f"colocation_share {dossier.colocation_share} outside [0, 1]"
        )
    if dossier.author_overlap is not None:
        if not 0 <= dossier.author_overlap.fraction <= 1:
            raise InvalidEvidenceError(
                f"author_overlap fraction {dossier.author_overlap.fraction} outside [0, 1]"
            )
        if dossier.author_overlap.sample_size < 1:
            raise InvalidEvidenceError("author_overlap sample_size must be at least 1")
    sourced = {s.field for s in dossier.sources}
    missing = [name for name in _SOURCED_FIELDS if _field_known(dossier, name) and name not in sourced]
    if missing:
        raise InvalidEvidenceError(
            "known evidence without a source entry: " + ", ".join(missing)
        )
    return dossier


def _field_known(dossier: EvidenceDossier, name: str) -> bool:
    if name == "ownership":
        return dossier.ownership is not Ownership.UNKNOWN
    if name == "mandate":
        return dossier.mandate is not Mandate.UNKNOWN
    if name == "colocation_share":
        return dossier.colocation_share is not None
    if name == "author_overlap":
        return dossier.author_overlap is not None
    return True


@dataclass(frozen=True)
class StepOutcome:
    step: int
    verdict: StepVerdict
    rationale: str

    def __post_init__(self):
        if self.step not in (1, 2, 3):
            raise WorkflowStateError(f"step must be 1, 2 or 3, got {self.step}")
        if self.verdict is StepVerdict.COMPONENT_TERMINAL and self.step == 3:
            raise WorkflowStateError("component_terminal can only come from steps 1 and 2")
        if self.verdict in (StepVerdict.ASSOCIATE, StepVerdict.COMPONENT) and self.step != 3:
            raise WorkflowStateError("associate/component verdicts can only come from step 3")

    def to_dict(self) -> dict:
        return {"step": self.step, "verdict": self.verdict.value, "rationale": self.rationale}

    @staticmethod
    def from_dict(data: Mapping) -> "StepOutcome":
        return StepOutcome(
            step=int(data["step"]),
            verdict=StepVerdict(data["verdict"]),
            rationale=str(data["rationale"]),
        )


@dataclass(frozen=True)
class Override:
    verdict: str
    justification: str
    assessor: str
    at: str

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "justification": self.justification,
            "assessor": self.assessor,
            "at": self.at,
        }


@dataclass(frozen=True)
class Classification:
    hospital: str
    university: str
    verdict: str
    trail: tuple[StepOutcome, ...]
    dossier: EvidenceDossier
    assessor: str
    decided_at: str
    override: Override | None = None

    @property
    def effective_verdict(self) -> str:
        return self.override.verdict if self.override else self.verdict

    def to_dict(self) -> dict:
        return {
            "hospital": self.hospital,
            "university": self.university,
            "verdict": self.verdict,
            "trail": [o.to_dict() for o in self.trail],
            "dossier": self.dossier.to_dict(),
            "assessor": self.assessor,
            "decided_at": self.decided_at,
            "override": None if self.override is None else self.override.to_dict(),
        }

    @staticmethod
    def from_dict(data: Mapping) -> "Classification":
        override = data.get("override")
        return Classification(
            hospital=str(data["hospital"]),
            university=str(data["university"]),
            verdict=str(data["verdict"]),
            trail=tuple(StepOutcome.from_dict(o) for o in data["trail"]),
            dossier=EvidenceDossier.from_dict(data["dossier"]),
            assessor=str(data["assessor"]),
            decided_at=str(data["decided_at"]),
            override=None
            if override is None
            else Override(
                verdict=str(override["verdict"]),
                justification=str(override["justification"]),
                assessor=str(override["assessor"]),
                at=str(override["at"]),
            ),
        )


def verdict_from_trail(trail: Sequence[StepOutcome]) -> str:
    """Recompute the verdict a trail implies; used to audit stored results."""
    if not trail:
        raise WorkflowStateError("empty assessment trail")
    last = trail[-1]
    if last.verdict is StepVerdict.COMPONENT_TERMINAL:
        return "component"
    if last.verdict is StepVerdict.COMPONENT:
        return "component"
    if last.verdict is StepVerdict.ASSOCIATE:
        return "associate"
    raise WorkflowStateError("trail ends without a decision")


# ---- Step evaluation ----


def evaluate_step1(dossier: EvidenceDossier) -> StepOutcome:
    """Legal status and ownership."""
    ownership = dossier.ownership
    if ownership in OWNERSHIP_DECISIVE:
        return StepOutcome(
            step=1,
            verdict=StepVerdict.COMPONENT_TERMINAL,
            rationale=f"ownership {ownership.value} ties the hospital to the university",
        )
    return StepOutcome(
        step=1,
        verdict=StepVerdict.PROCEED,
        rationale=f"ownership {ownership.value} does not settle the pair",
    )


def evaluate_step2(dossier: EvidenceDossier) -> StepOutcome:
    """Educational mandate."""
    mandate = dossier.mandate
    if mandate is Mandate.CORE_CURRICULUM:
        return StepOutcome(
            step=2,
            verdict=StepVerdict.COMPONENT_TERMINAL,
            rationale="hospital carries core-curriculum teaching for the university",
        )
    return StepOutcome(
        step=2,
        verdict=StepVerdict.PROCEED,
        rationale=f"mandate {mandate.value} does not settle the pair",
    )


def _overlap_signal(dossier: EvidenceDossier, policy: StepPolicy) -> tuple[bool | None, str]:
    overlap = dossier.author_overlap
    if overlap is None:
        return None, "author overlap unknown"
    if overlap.sample_size < policy.n_min:
        return (
            None,
            f"author overlap sample of {overlap.sample_size} below minimum "
            f"{policy.n_min}, treated as unknown",
        )
    high = overlap.fraction >= policy.theta_auth
    word = "meets" if high else "falls below"
    return (
        high,
        f"author overlap {overlap.fraction:g} ({overlap.sample_size} checked) "
        f"{word} threshold {policy.theta_auth:g}",
    )


def _colocation_signal(dossier: EvidenceDossier, policy: StepPolicy) -> tuple[bool | None, str]:
    share = dossier.colocation_share
    if share is None:
        return None, "co-location unknown"
    high = share >= policy.theta_loc
    word = "meets" if high else "falls below"
    return high, f"co-location share {share:g} {word} threshold {policy.theta_loc:g}"


def evaluate_step3(dossier: EvidenceDossier, policy: StepPolicy = DEFAULT_POLICY) -> StepOutcome:
    """Physical integration and author publication behaviour.

    Both signals known: component only if both clear their thresholds.
    Exactly one known: it decides alone.  Neither known: associate.
    """
    loc_high, loc_text = _colocation_signal(dossier, policy)
    auth_high, auth_text = _overlap_signal(dossier, policy)
    if loc_high is None and auth_high is None:
        verdict = StepVerdict.ASSOCIATE
        rationale = f"{loc_text}; {auth_text}; no usable integration signal"
    elif loc_high is None or auth_high is None:
        decided = auth_high if loc_high is None else loc_high
        verdict = StepVerdict.COMPONENT if decided else StepVerdict.ASSOCIATE
        rationale = f"{loc_text}; {auth_text}; single known signal decides"
    else:
        verdict = StepVerdict.COMPONENT if (loc_high and auth_high) else StepVerdict.ASSOCIATE
        rationale = f"{loc_text}; {auth_text}; both signals must clear their thresholds"
    return StepOutcome(step=3, verdict=verdict, rationale=rationale)


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def classify(
    dossier: EvidenceDossier,
    policy: StepPolicy = DEFAULT_POLICY,
    assessor: str = "system",
    decided_at: str | None = None,
) -> Classification:
    """Run the three steps in order, stopping at the first terminal verdict.

    The verdict and trail depend only on the dossier and the policy;
    assessor and timestamp are audit metadata.
    """
    validate_dossier(dossier)
    policy.validate()
    trail: list[StepOutcome] = []
    verdict = ""
    for evaluate in (evaluate_step1, evaluate_step2):
        outcome = evaluate(dossier)
        trail.append(outcome)
        if outcome.verdict is StepVerdict.COMPONENT_TERMINAL:
            verdict = "component"
            break
    if not verdict:
        outcome = evaluate_step3(dossier, policy)
        trail.append(outcome)
        verdict = "component" if outcome.verdict is StepVerdict.COMPONENT else "associate"
    return Classification(
        hospital=dossier.hospital,
        university=dossier.university,
        verdict=verdict,
        trail=tuple(trail),
        dossier=dossier,
        assessor=assessor,
        decided_at=decided_at if decided_at is not None else _utcnow(),
    )


# ---- Queue and sampling ----


@dataclass(frozen=True)
class AssessmentQueueEntry:
    hospital: str
    label: str
    standalone_output: Fraction
    status: QueueStatus = QueueStatus.PENDING

    def to_dict(self) -> dict:
        from .counting import format_count

        return {
            "hospital": self.hospital,
            "label": self.label,
            "standalone_output": format_count(self.standalone_output),
            "status": self.status.value,
        }


def build_queue(
    corpus: Sequence[Publication],
    snapshot: RegistrySnapshot,
    threshold: int = DEFAULT_QUEUE_THRESHOLD,
    statuses: Mapping[str, QueueStatus] | None = None,
) -> list[AssessmentQueueEntry]:
    """Hospitals whose standalone full count reaches the threshold.

    Standalone output is the full count over the hospital's own component
    closure within the snapshot window.  Sorted by output descending, ties
    by org id.
    """
    statuses = statuses or {}
    entries: list[AssessmentQueueEntry] = []
    for org in snapshot.organizations():
        if org.kind is not OrgKind.HOSPITAL:
            continue
        output = count(corpus, closure_unit(org.id, snapshot), Scheme.FULL, snapshot.window)
        if output >= threshold:
            entries.append(
                AssessmentQueueEntry(
                    hospital=org.id,
                    label=org.canonical_name,
                    standalone_output=output,
                    status=statuses.get(org.id, QueueStatus.PENDING),
                )
            )
    entries.sort(key=lambda e: (-e.standalone_output, e.hospital))
    return entries


def sample_hospital_only(
    corpus: Sequence[Publication],
    hospital: str,
    university: str,
    n: int,
    seed: int,
    snapshot: RegistrySnapshot,
) -> list[Publication]:
    """Seeded uniform sample of hospital-only publications.

    Qualifying publications mention the hospital in at least one address
    and no member of the university's unit in any address, with the pair's
    own edge treated as associate so prior verdicts cannot hide evidence.
    Only counted doctypes inside the snapshot window qualify.  Returns all
    qualifying publications when fewer than n exist; output is sorted by
    publication id.
    """
    if n < 1:
        raise InvalidEvidenceError(f"sample size must be positive, got {n}")
    snapshot.organization(hospital)
    start, end = snapshot.window
    separate_snap = snapshot.treating([(hospital, university)], RelKind.ASSOCIATE)
    university_unit = closure_unit(university, separate_snap).members
    qualifying = []
    for pub in corpus:
        if pub.doctype not in COUNTED_DOCTYPES:
            continue
        if not start <= pub.year <= end:
            continue
        orgs_by_address = [addr.match.orgs() for addr in pub.addresses]
        if not any(hospital in orgs for orgs in orgs_by_address):
            continue
        if any(orgs & university_unit for orgs in orgs_by_address):
            continue
        qualifying.append(pub)
    qualifying.sort(key=lambda p: p.id)
    if len(qualifying) <= n:
        return qualifying
    chosen = random.Random(seed).sample(qualifying, n)
    chosen.sort(key=lambda p: p.id)
    return chosen


def overlap_from_verdicts(
    sample_ids: Sequence[str],
    verdicts: Sequence[tuple[str, bool]],
    at: str,
) -> tuple[AuthorOverlap, Source]:
    """Turn per-publication yes/no verdicts into an overlap evidence entry.

    Every verdict must refer to a publication drawn for this assessment.
    """
    if not verdicts:
        raise InvalidEvidenceError("no verdicts recorded")
    allowed = set(sample_ids)
    seen: set[str] = set()
    hits = 0
    for pub_id, is_overlap in verdicts:
        if pub_id not in allowed:
            raise UnknownPublicationError(
                f"publication {pub_id!r} was not part of the drawn sample"
            )
        if pub_id in seen:
            raise InvalidEvidenceError(f"duplicate verdict for publication {pub_id!r}")
        seen.add(pub_id)
        if is_overlap:
            hits += 1
    overlap = AuthorOverlap(fraction=hits / len(verdicts), sample_size=len(verdicts))
    source = Source(
        field="author_overlap",
        citation=f"author check on {len(verdicts)} sampled hospital-only publications",
        retrieved_at=at,
    )
    return overlap, source


def record_overlap_verdicts(
    dossier: EvidenceDossier,
    sample_ids: Sequence[str],
    verdicts: Sequence[tuple[str, bool]],
    at: str | None = None,
) -> EvidenceDossier:
    """Fold recorded verdicts into the dossier's author_overlap field."""
    overlap, source = overlap_from_verdicts(sample_ids, verdicts, at or _utcnow())
    return replace(
        dossier,
        author_overlap=overlap,
        sources=dossier.sources + (source,),
    )


def assessment_id(hospital: str, university: str) -> str:
    return f"{hospital}~{university}"


def apply_classification(classification: Classification, registry: Registry) -> Relationship:
    """Write the (possibly overridden) verdict into the registry.

    Creates or supersedes the direct hospital->university edge starting at
    the dossier window's first year, with provenance pointing back at the
    assessment.
    """
    verdict = classification.effective_verdict
    if verdict not in ("component", "associate"):
        raise WorkflowStateError(f"cannot apply verdict {verdict!r}")
    return registry.supersede_pair(
        child=classification.hospital,
        parent=classification.university,
        kind=RelKind(verdict),
        valid_from=classification.dossier.window[0],
        provenance="assessment:" + assessment_id(classification.hospital, classification.university),
    )
