"""HTTP service for the assessment workflow.

All endpoints live under /v1 and speak JSON.  Mutating calls require a
session token and the caller's last-seen assessment version; a stale
version loses with 409.  Every mutating call appends exactly one event to
the assessment log, and reads never mutate anything.

Error codes: 400 malformed request, 401 missing/expired session, 404
unknown organization or pair, 409 concurrent edit, 422 invariant
violation.  Bodies carry {"code": ..., "message": ...}.
"""

from __future__ import annotations

import re
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Callable, Mapping

from fastapi import Body, FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .assessments import (
    EVENT_CLASSIFIED,
    EVENT_EVIDENCE_SET,
    EVENT_OVERRIDDEN,
    EVENT_SAMPLE_DRAWN,
    EVENT_VERDICTS_RECORDED,
    AssessmentStore,
)
from .corpus_io import LoadMode, load_corpus, load_registry
from .counting import Scheme, table_report, whatif_report
from .errors import (
    ChecksumMismatchError,
    HospuniError,
    MalformedRecordError,
    UnknownOrgError,
    VersionConflictError,
)
from .matching import Publication, resolve_corpus
from .registry import OrgKind, Registry, RegistrySnapshot
from .workflow import (
    DEFAULT_POLICY,
    DEFAULT_QUEUE_THRESHOLD,
    StepPolicy,
    apply_classification,
    build_queue,
    classify,
    sample_hospital_only,
)


@dataclass(frozen=True)
class ServiceConfig:
    registry_path: str
    corpus_paths: tuple[str, ...]
    window: tuple[int, int]
    log_path: str
    scheme: Scheme = Scheme.FRACTIONAL
    mode: LoadMode = LoadMode.STRICT
    threshold: int = DEFAULT_QUEUE_THRESHOLD
    policy: StepPolicy = DEFAULT_POLICY
    token_ttl: int = 8 * 3600


@dataclass
class Session:
    token: str
    assessor: str
    expires_at: datetime


@dataclass
class ServiceState:
    config: ServiceConfig
    registry: Registry
    snapshot: RegistrySnapshot
    corpus: list[Publication]
    store: AssessmentStore
    clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc)
    sessions: dict[str, Session] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def now_iso(self) -> str:
        return self.clock().isoformat(timespec="seconds")

    def refresh_snapshot(self) -> None:
        self.snapshot = self.registry.snapshot(self.config.window)


def build_state(config: ServiceConfig) -> ServiceState:
    """Load everything the service needs and replay decided assessments.

    The event log is the source of truth for verdicts: any classification
    found in it is re-applied to the in-memory registry, so a restart
    reconstructs the same counting units without rewriting the registry
    file.
    """
    registry = load_registry(config.registry_path)
    snapshot = registry.snapshot(config.window)
    raw, _ = load_corpus(config.corpus_paths, config.mode)
    corpus = resolve_corpus(raw, snapshot)
    store = AssessmentStore(config.log_path, config.window)
    for state in store.states().values():
        if state.classification is not None:
            apply_classification(state.classification, registry)
    service = ServiceState(
        config=config,
        registry=registry,
        snapshot=registry.snapshot(config.window),
        corpus=corpus,
        store=store,
    )
    return service


class _AuthError(Exception):
    def __init__(self, message: str, code: str = "session-invalid"):
        super().__init__(message)
        self.message = message
        self.code = code


_WINDOW_RE = re.compile(r"^(\d{4}):(\d{4})$")


def _parse_window(text: str | None, default: tuple[int, int]) -> tuple[int, int]:
    if text is None:
        return default
    match = _WINDOW_RE.match(text)
    if not match:
        raise MalformedRecordError(f"window must look like 2014:2017, got {text!r}")
    return (int(match.group(1)), int(match.group(2)))


def _parse_scheme(text: str | None, default: Scheme) -> Scheme:
    if text is None:
        return default
    try:
        return Scheme(text)
    except ValueError:
        raise MalformedRecordError(f"scheme must be full or fractional, got {text!r}") from None


def _require_int(body: Mapping, key: str) -> int:
    value = body.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise MalformedRecordError(f"body field {key!r} must be an integer")
    return value


def _require_str(body: Mapping, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str) or not value:
        raise MalformedRecordError(f"body field {key!r} must be a non-empty string")
    return value


_STATUS_FOR = [
    (VersionConflictError, 409),
    (UnknownOrgError, 404),
    (MalformedRecordError, 400),
    (ChecksumMismatchError, 400),
]


def _status_for(exc: HospuniError) -> int:
    for kind, status in _STATUS_FOR:
        if isinstance(exc, kind):
            return status
    return 422


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="hospuni assessment service", version=__version__)

    @app.exception_handler(HospuniError)
    async def domain_error(request: Request, exc: HospuniError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"code": exc.code, "message": exc.message},
        )

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "malformed-request", "message": str(exc.errors()[:1])},
        )

    def _session(token: str | None) -> Session:
        if not token or token not in state.sessions:
            raise _AuthError("missing or unknown session token")
        session = state.sessions[token]
        if state.clock() >= session.expires_at:
            raise _AuthError("session expired", code="session-expired")
        return session

    def _pair(hospital: str, university: str) -> tuple[str, str]:
        for org_id in (hospital, university):
            if not state.snapshot.has_organization(org_id):
                raise UnknownOrgError(f"unknown organization {org_id!r}")
        return hospital, university

    @app.post("/v1/session")
    async def open_session(body: dict = Body(...)):
        assessor = _require_str(body, "assessor")
        token = secrets.token_hex(16)
        expires = state.clock() + timedelta(seconds=state.config.token_ttl)
        state.sessions[token] = Session(token=token, assessor=assessor, expires_at=expires)
        return {
            "token": token,
            "assessor": assessor,
            "expires_at": expires.isoformat(timespec="seconds"),
        }

    @app.get("/v1/queue")
    async def queue():
        entries = build_queue(
            state.corpus,
            state.snapshot,
            state.config.threshold,
            state.store.statuses_by_hospital(),
        )
        return {"entries": [e.to_dict() for e in entries]}

    @app.get("/v1/assessments/{hospital}/{university}")
    async def get_assessment(hospital: str, university: str):
        hospital, university = _pair(hospital, university)
        return state.store.state(hospital, university).to_dict()

    @app.put("/v1/assessments/{hospital}/{university}/evidence")
    async def put_evidence(
        hospital: str,
        university: str,
        body: dict = Body(...),
        x_session_token: str | None = Header(default=None),
    ):
        _session(x_session_token)
        hospital, university = _pair(hospital, university)
        version = _require_int(body, "version")
        field_name = _require_str(body, "field")
        if "value" not in body:
            raise MalformedRecordError("body field 'value' is required")
        payload = {"field": field_name, "value": body["value"], "source": body.get("source")}
        source = body.get("source")
        if source is not None and (
            not isinstance(source, dict)
            or not isinstance(source.get("citation"), str)
            or not isinstance(source.get("retrieved_at"), str)
        ):
            raise MalformedRecordError("source must carry citation and retrieved_at strings")
        new_state = state.store.append(
            EVENT_EVIDENCE_SET,
            hospital,
            university,
            payload,
            expected_version=version,
            at=state.now_iso(),
        )
        return new_state.to_dict()

    @app.post("/v1/assessments/{hospital}/{university}/sample")
    async def draw_sample(
        hospital: str,
        university: str,
        body: dict = Body(...),
        x_session_token: str | None = Header(default=None),
    ):
        _session(x_session_token)
        hospital, university = _pair(hospital, university)
        version = _require_int(body, "version")
        n = _require_int(body, "n")
        seed = _require_int(body, "seed")
        chosen = sample_hospital_only(
            state.corpus, hospital, university, n, seed, state.snapshot
        )
        new_state = state.store.append(
            EVENT_SAMPLE_DRAWN,
            hospital,
            university,
            {"n": n, "seed": seed, "publication_ids": [p.id for p in chosen]},
            expected_version=version,
            at=state.now_iso(),
        )
        return {
            **new_state.to_dict(),
            "publications": [
                {
                    "id": p.id,
                    "year": p.year,
                    "doctype": p.doctype.value,
                    "addresses": [a.raw for a in p.addresses],
                }
                for p in chosen
            ],
        }

    @app.post("/v1/assessments/{hospital}/{university}/verdicts")
    async def record_verdicts(
        hospital: str,
        university: str,
        body: dict = Body(...),
        x_session_token: str | None = Header(default=None),
    ):
        _session(x_session_token)
        hospital, university = _pair(hospital, university)
        version = _require_int(body, "version")
        verdicts = body.get("verdicts")
        if not isinstance(verdicts, list) or not all(
            isinstance(v, (list, tuple)) and len(v) == 2 and isinstance(v[1], bool)
            for v in verdicts
        ):
            raise MalformedRecordError("verdicts must be a list of [publication_id, bool] pairs")
        new_state = state.store.append(
            EVENT_VERDICTS_RECORDED,
            hospital,
            university,
            {"verdicts": [[str(pub_id), flag] for pub_id, flag in verdicts]},
            expected_version=version,
            at=state.now_iso(),
        )
        return new_state.to_dict()

    @app.post("/v1/assessments/{hospital}/{university}/classify")
    async def classify_pair(
        hospital: str,
        university: str,
        body: dict = Body(...),
        x_session_token: str | None = Header(default=None),
    ):
        session = _session(x_session_token)
        hospital, university = _pair(hospital, university)
        version = _require_int(body, "version")
        current = state.store.state(hospital, university)
        decided_at = state.now_iso()
        classification = classify(
            current.dossier,
            state.config.policy,
            assessor=session.assessor,
            decided_at=decided_at,
        )
        new_state = state.store.append(
            EVENT_CLASSIFIED,
            hospital,
            university,
            {"classification": classification.to_dict()},
            expected_version=version,
            at=decided_at,
        )
        with state.lock:
            apply_classification(classification, state.registry)
            state.refresh_snapshot()
        return new_state.to_dict()

    @app.post("/v1/assessments/{hospital}/{university}/override")
    async def override_pair(
        hospital: str,
        university: str,
        body: dict = Body(...),
        x_session_token: str | None = Header(default=None),
    ):
        session = _session(x_session_token)
        hospital, university = _pair(hospital, university)
        version = _require_int(body, "version")
        payload = {
            "verdict": _require_str(body, "verdict"),
            "justification": _require_str(body, "justification"),
            "assessor": session.assessor,
        }
        new_state = state.store.append(
            EVENT_OVERRIDDEN,
            hospital,
            university,
            payload,
            expected_version=version,
            at=state.now_iso(),
        )
        with state.lock:
            apply_classification(new_state.classification, state.registry)
            state.refresh_snapshot()
        return new_state.to_dict()

    @app.get("/v1/whatif/{university}/{hospital}")
    async def whatif(
        university: str,
        hospital: str,
        scheme: str | None = Query(default=None),
        window: str | None = Query(default=None),
    ):
        hospital, university = _pair(hospital, university)
        chosen_scheme = _parse_scheme(scheme, state.config.scheme)
        chosen_window = _parse_window(window, state.config.window)
        branches = whatif_report(
            state.corpus, university, hospital, chosen_scheme, chosen_window, state.snapshot
        )
        component = branches["component"]
        return {
            "university": university,
            "university_label": component.university_label,
            "hospital": hospital,
            "hospital_label": component.hospital_label,
            "scheme": chosen_scheme.value,
            "window": f"{chosen_window[0]}:{chosen_window[1]}",
            "component": component.figures(),
            "associate": branches["associate"].figures(),
        }

    @app.get("/v1/reports/delta-table")
    async def delta_table(
        scheme: str | None = Query(default=None),
        window: str | None = Query(default=None),
    ):
        chosen_scheme = _parse_scheme(scheme, state.config.scheme)
        chosen_window = _parse_window(window, state.config.window)
        snapshot = state.registry.snapshot(chosen_window)
        pairs = sorted(
            {
                (rel.parent, rel.child)
                for rel in snapshot.relationships
                if snapshot.organization(rel.child).kind is OrgKind.HOSPITAL
                and snapshot.organization(rel.parent).kind is OrgKind.UNIVERSITY
            }
        )
        reports = table_report(state.corpus, pairs, chosen_scheme, chosen_window, snapshot)
        rows = []
        for report in reports:
            figures = report.figures()
            rows.append(
                {
                    "organization": report.university_label,
                    "separate": figures["separate"],
                    "combined": figures["combined"],
                    "percentage": figures["pct_share"],
                }
            )
            rows.append(
                {
                    "organization": report.hospital_label,
                    "separate": figures["marginal"],
                    "combined": "-",
                    "percentage": "-",
                }
            )
        return {"rows": rows, "scheme": chosen_scheme.value, "window": f"{chosen_window[0]}:{chosen_window[1]}"}

    @app.exception_handler(_AuthError)
    async def auth_error(request: Request, exc: _AuthError):
        return JSONResponse(status_code=401, content={"code": exc.code, "message": exc.message})

    return app
