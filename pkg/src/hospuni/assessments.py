"""Event-sourced assessment store.

Assessments never overwrite state: every change is appended to a
line-delimited event log, and the current state of every assessment is a
pure fold over that log.  Replaying the same log always reconstructs the
same dossiers, trails, and verdicts, which is what makes the audit trail
trustworthy.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

from .corpus_io import FORMAT_ASSESSMENT_LOG, canonical_json, header_line, read_records
from .errors import (
    InvalidEvidenceError,
    MalformedRecordError,
    VersionConflictError,
    WorkflowStateError,
)
from .workflow import (
    AuthorOverlap,
    Classification,
    EvidenceDossier,
    Mandate,
    Override,
    Ownership,
    QueueStatus,
    Source,
    assessment_id,
    overlap_from_verdicts,
    validate_dossier,
)

EVENT_EVIDENCE_SET = "evidence-set"
EVENT_SAMPLE_DRAWN = "sample-drawn"
EVENT_VERDICTS_RECORDED = "verdicts-recorded"
EVENT_CLASSIFIED = "classified"
EVENT_OVERRIDDEN = "overridden"

EVENT_KINDS = (
    EVENT_EVIDENCE_SET,
    EVENT_SAMPLE_DRAWN,
    EVENT_VERDICTS_RECORDED,
    EVENT_CLASSIFIED,
    EVENT_OVERRIDDEN,
)


@dataclass(frozen=True)
class AssessmentEvent:
    event: str
    hospital: str
    university: str
    window: tuple[int, int]
    seq: int
    at: str
    payload: dict

    @property
    def assessment(self) -> str:
        return assessment_id(self.hospital, self.university)

    def to_dict(self) -> dict:
        return {
            "event": self.event,
            "hospital": self.hospital,
            "university": self.university,
            "window": list(self.window),
            "seq": self.seq,
            "at": self.at,
            "payload": self.payload,
        }

    @staticmethod
    def from_dict(data: Mapping) -> "AssessmentEvent":
        if data.get("event") not in EVENT_KINDS:
            raise MalformedRecordError(f"unknown event kind {data.get('event')!r}")
        window = data["window"]
        return AssessmentEvent(
            event=str(data["event"]),
            hospital=str(data["hospital"]),
            university=str(data["university"]),
            window=(int(window[0]), int(window[1])),
            seq=int(data["seq"]),
            at=str(data["at"]),
            payload=dict(data["payload"]),
        )


@dataclass(frozen=True)
class AssessmentState:
    dossier: EvidenceDossier
    sample_ids: tuple[str, ...] = ()
    sample_seed: int | None = None
    classification: Classification | None = None
    version: int = 0

    @property
    def status(self) -> QueueStatus:
        if self.classification is not None:
            return QueueStatus.DECIDED
        if self.version > 0:
            return QueueStatus.IN_PROGRESS
        return QueueStatus.PENDING

    def to_dict(self) -> dict:
        return {
            "hospital": self.dossier.hospital,
            "university": self.dossier.university,
            "window": list(self.dossier.window),
            "dossier": self.dossier.to_dict(),
            "sample": (
                None
                if self.sample_seed is None and not self.sample_ids
                else {"seed": self.sample_seed, "publication_ids": list(self.sample_ids)}
            ),
            "classification": (
                None if self.classification is None else self.classification.to_dict()
            ),
            "version": self.version,
            "status": self.status.value,
        }


def fresh_state(hospital: str, university: str, window: tuple[int, int]) -> AssessmentState:
    return AssessmentState(
        dossier=EvidenceDossier(hospital=hospital, university=university, window=window)
    )


def _parse_evidence_value(field: str, value):
    try:
        if field == "ownership":
            return Ownership(value)
        if field == "mandate":
            return Mandate(value)
        if field == "colocation_share":
            return None if value is None else float(value)
        if field == "author_overlap":
            if value is None:
                return None
            return AuthorOverlap(
                fraction=float(value["fraction"]), sample_size=int(value["sample_size"])
            )
        if field == "research_active":
            if not isinstance(value, bool):
                raise InvalidEvidenceError("research_active must be a boolean")
            return value
    except (ValueError, TypeError, KeyError) as exc:
        raise InvalidEvidenceError(f"bad value for {field}: {exc}") from None
    raise InvalidEvidenceError(f"unknown evidence field {field!r}")


def apply_event(state: AssessmentState, event: AssessmentEvent) -> AssessmentState:
    """Fold one event onto an assessment state.

    Raises when the event does not fit the state: wrong sequence number,
    wrong pair, a verdict for an undrawn publication, an override without a
    classification.
    """
    dossier = state.dossier
    if event.hospital != dossier.hospital or event.university != dossier.university:
        raise WorkflowStateError(
            f"event for {event.assessment} cannot apply to "
            f"{assessment_id(dossier.hospital, dossier.university)}"
        )
    if state.version > 0 and event.window != dossier.window:
        raise WorkflowStateError(
            f"event window {event.window} does not match assessment window {dossier.window}"
        )
    if event.seq != state.version + 1:
        raise VersionConflictError(
            f"event seq {event.seq} does not follow version {state.version}",
            expected=state.version + 1,
            actual=event.seq,
        )
    if state.version == 0 and event.window != dossier.window:
        dossier = replace(dossier, window=event.window)
        state = replace(state, dossier=dossier)

    payload = event.payload
    if event.event == EVENT_EVIDENCE_SET:
        field = payload["field"]
        value = _parse_evidence_value(field, payload["value"])
        new_dossier = replace(dossier, **{field: value})
        source = payload.get("source")
        if source is not None:
            new_dossier = replace(
                new_dossier,
                sources=new_dossier.sources
                + (
                    Source(
                        field=field,
                        citation=str(source["citation"]),
                        retrieved_at=str(source["retrieved_at"]),
                    ),
                ),
            )
        validate_dossier(new_dossier)
        return replace(state, dossier=new_dossier, version=event.seq)

    if event.event == EVENT_SAMPLE_DRAWN:
        ids = tuple(str(i) for i in payload["publication_ids"])
        return replace(
            state,
            sample_ids=ids,
            sample_seed=int(payload["seed"]),
            version=event.seq,
        )

    if event.event == EVENT_VERDICTS_RECORDED:
        verdicts = [(str(pub_id), bool(flag)) for pub_id, flag in payload["verdicts"]]
        overlap, source = overlap_from_verdicts(state.sample_ids, verdicts, event.at)
        new_dossier = replace(
            dossier, author_overlap=overlap, sources=dossier.sources + (source,)
        )
        validate_dossier(new_dossier)
        return replace(state, dossier=new_dossier, version=event.seq)

    if event.event == EVENT_CLASSIFIED:
        classification = Classification.from_dict(payload["classification"])
        return replace(state, classification=classification, version=event.seq)

    if event.event == EVENT_OVERRIDDEN:
        if state.classification is None:
            raise WorkflowStateError("cannot override before classification")
        if payload["verdict"] not in ("component", "associate"):
            raise InvalidEvidenceError(f"override verdict {payload['verdict']!r} is not allowed")
        if not str(payload.get("justification", "")).strip():
            raise InvalidEvidenceError("override requires a justification")
        override = Override(
            verdict=str(payload["verdict"]),
            justification=str(payload["justification"]),
            assessor=str(payload["assessor"]),
            at=event.at,
        )
        return replace(
            state, classification=replace(state.classification, override=override), version=event.seq
        )

    raise MalformedRecordError(f"unknown event kind {event.event!r}")


def replay(
    events: Iterable[AssessmentEvent], window: tuple[int, int] | None = None
) -> dict[str, AssessmentState]:
    """Fold a whole event stream into per-assessment states."""
    states: dict[str, AssessmentState] = {}
    for event in events:
        key = event.assessment
        state = states.get(key)
        if state is None:
            state = fresh_state(event.hospital, event.university, window or event.window)
        states[key] = apply_event(state, event)
    return states


class AssessmentStore:
    """Append-only assessment log bound to a file.

    Appends are serialized through one lock and guarded by optimistic
    versioning: a caller must name the version it saw, and loses with a
    version conflict if someone else appended first.
    """

    def __init__(self, path: str | Path, window: tuple[int, int]):
        self.path = Path(path)
        self.window = window
        self._lock = threading.Lock()
        self._states: dict[str, AssessmentState] = {}
        self._events: list[AssessmentEvent] = []
        if self.path.exists():
            for _, record in read_records(self.path, FORMAT_ASSESSMENT_LOG):
                self._events.append(AssessmentEvent.from_dict(record))
            self._states = replay(self._events)
        else:
            self.path.write_text(header_line(FORMAT_ASSESSMENT_LOG) + "\n", encoding="utf-8")

    def events(self) -> tuple[AssessmentEvent, ...]:
        return tuple(self._events)

    def states(self) -> dict[str, AssessmentState]:
        return dict(self._states)

    def state(self, hospital: str, university: str) -> AssessmentState:
        """Current state of one assessment; a pristine state if untouched."""
        key = assessment_id(hospital, university)
        got = self._states.get(key)
        if got is not None:
            return got
        return fresh_state(hospital, university, self.window)

    def append(
        self,
        kind: str,
        hospital: str,
        university: str,
        payload: Mapping,
        expected_version: int,
        at: str,
        window: tuple[int, int] | None = None,
    ) -> AssessmentState:
        """Validate, persist, and fold exactly one event."""
        if kind not in EVENT_KINDS:
            raise MalformedRecordError(f"unknown event kind {kind!r}")
        with self._lock:
            current = self.state(hospital, university)
            if expected_version != current.version:
                raise VersionConflictError(
                    f"assessment {assessment_id(hospital, university)} is at version "
                    f"{current.version}, caller expected {expected_version}",
                    expected=expected_version,
                    actual=current.version,
                )
            event = AssessmentEvent(
                event=kind,
                hospital=hospital,
                university=university,
                window=window or current.dossier.window,
                seq=current.version + 1,
                at=at,
                payload=dict(payload),
            )
            new_state = apply_event(current, event)
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(canonical_json(event.to_dict()) + "\n")
            self._events.append(event)
            self._states[event.assessment] = new_state
            return new_state

    def statuses_by_hospital(self) -> dict[str, QueueStatus]:
        """Most advanced status per hospital, for queue display."""
        rank = {QueueStatus.PENDING: 0, QueueStatus.IN_PROGRESS: 1, QueueStatus.DECIDED: 2}
        out: dict[str, QueueStatus] = {}
        for state in self._states.values():
            hospital = state.dossier.hospital
            if hospital not in out or rank[state.status] > rank[out[hospital]]:
                out[hospital] = state.status
        return out
