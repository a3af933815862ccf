"""File formats: registry, publication corpora, manifests, reports.

Every machine-readable file is UTF-8, line-delimited, and starts with a
header line declaring its format name and version.  Loaders reject files
whose major version they do not know.  Writers emit canonical JSON (sorted
keys, compact separators) so saving the same data twice is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .counting import DeltaReport, format_count
from .errors import (
    ChecksumMismatchError,
    FormatVersionError,
    MalformedRecordError,
)
from .matching import DocType, RawPublication
from .registry import (
    Alias,
    Organization,
    OrgKind,
    Registry,
    Relationship,
    RelKind,
)
from .workflow import EvidenceDossier, validate_dossier

FORMAT_REGISTRY = "registry"
FORMAT_PUBLICATIONS = "publications"
FORMAT_RESOLVED = "resolved-publications"
FORMAT_ASSESSMENT_LOG = "assessment-log"
FORMAT_MANIFEST = "corpus-manifest"
FORMAT_DOSSIER = "dossier"

_CURRENT_VERSION = "1.0"
_SUPPORTED_MAJOR = "1"


class LoadMode(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


def canonical_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def header_line(format_name: str) -> str:
    return canonical_json({"format": format_name, "version": _CURRENT_VERSION})


def check_header(line: str, format_name: str, path: str) -> None:
    try:
        head = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"unreadable header: {exc.msg}", path, 1) from None
    if not isinstance(head, dict) or "format" not in head or "version" not in head:
        raise MalformedRecordError("header must declare format and version", path, 1)
    if head["format"] != format_name:
        raise MalformedRecordError(
            f"expected format {format_name!r}, found {head['format']!r}", path, 1
        )
    major = str(head["version"]).split(".")[0]
    if major != _SUPPORTED_MAJOR:
        raise FormatVersionError(
            f"unsupported {format_name} version {head['version']!r}", path, 1
        )


def read_records(path: str | Path, format_name: str) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) after validating the header line."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise MalformedRecordError("empty file, header missing", path, 1)
        check_header(first.rstrip("\n"), format_name, path)
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"unreadable record: {exc.msg}", path, line_no) from None
            if not isinstance(record, dict):
                raise MalformedRecordError("record is not an object", path, line_no)
            yield line_no, record


def write_lines(path: str | Path, format_name: str, records: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header_line(format_name) + "\n")
        for record in records:
            fh.write(canonical_json(record) + "\n")


def _require_fields(
    record: Mapping, required: set[str], optional: set[str], path: str, line_no: int
) -> None:
    keys = set(record)
    unknown = keys - required - optional
    if unknown:
        raise MalformedRecordError(
            "unknown field(s): " + ", ".join(sorted(unknown)), path, line_no
        )
    missing = required - keys
    if missing:
        raise MalformedRecordError(
            "missing field(s): " + ", ".join(sorted(missing)), path, line_no
        )


# ---- Publications ----


def _publication_from_record(record: Mapping, path: str, line_no: int) -> RawPublication:
    _require_fields(record, {"id", "year", "doctype", "addresses"}, set(), path, line_no)
    pub_id = record["id"]
    if not isinstance(pub_id, str) or not pub_id:
        raise MalformedRecordError("id must be a non-empty string", path, line_no)
    year = record["year"]
    if not isinstance(year, int) or isinstance(year, bool):
        raise MalformedRecordError("year must be an integer", path, line_no)
    try:
        doctype = DocType(record["doctype"])
    except ValueError:
        raise MalformedRecordError(
            f"doctype must be one of article, review, other; got {record['doctype']!r}",
            path,
            line_no,
        ) from None
    addresses = record["addresses"]
    if (
        not isinstance(addresses, list)
        or not addresses
        or not all(isinstance(a, str) for a in addresses)
    ):
        raise MalformedRecordError(
            "addresses must be a non-empty list of strings", path, line_no
        )
    return RawPublication(id=pub_id, year=year, doctype=doctype, addresses=tuple(addresses))


def load_publications(
    path: str | Path, mode: LoadMode = LoadMode.STRICT, seen_ids: set[str] | None = None
) -> tuple[list[RawPublication], list[str]]:
    """Load one publications file.

    Strict mode raises on the first malformed line; lenient mode skips bad
    lines and reports each one in the diagnostics list.
    """
    path = str(path)
    seen = seen_ids if seen_ids is not None else set()
    pubs: list[RawPublication] = []
    diagnostics: list[str] = []
    for line_no, record in read_records(path, FORMAT_PUBLICATIONS):
        try:
            pub = _publication_from_record(record, path, line_no)
            if pub.id in seen:
                raise MalformedRecordError(f"duplicate publication id {pub.id!r}", path, line_no)
        except MalformedRecordError as exc:
            if mode is LoadMode.STRICT:
                raise
            diagnostics.append(exc.message)
            continue
        seen.add(pub.id)
        pubs.append(pub)
    return pubs, diagnostics


def load_corpus(
    paths: Sequence[str | Path], mode: LoadMode = LoadMode.STRICT
) -> tuple[list[RawPublication], list[str]]:
    """Load and concatenate several publications files.

    Publication ids must be unique across the whole corpus.
    """
    seen: set[str] = set()
    pubs: list[RawPublication] = []
    diagnostics: list[str] = []
    for path in paths:
        loaded, diags = load_publications(path, mode, seen_ids=seen)
        pubs.extend(loaded)
        diagnostics.extend(diags)
    return pubs, diagnostics


def save_publications(path: str | Path, pubs: Sequence[RawPublication]) -> None:
    write_lines(
        path,
        FORMAT_PUBLICATIONS,
        (
            {
                "id": p.id,
                "year": p.year,
                "doctype": p.doctype.value,
                "addresses": list(p.addresses),
            }
            for p in pubs
        ),
    )


# ---- Registry ----

_ORG_FIELDS = {"record", "id", "canonical_name", "kind", "country", "aliases"}
_ORG_OPTIONAL = {"region"}
_REL_FIELDS = {"record", "child", "parent", "kind", "valid_from"}
_REL_OPTIONAL = {"valid_to", "provenance", "notes"}


def _org_from_record(record: Mapping, path: str, line_no: int) -> Organization:
    _require_fields(record, _ORG_FIELDS, _ORG_OPTIONAL, path, line_no)
    aliases = record["aliases"]
    if not isinstance(aliases, list):
        raise MalformedRecordError("aliases must be a list", path, line_no)
    parsed: list[Alias] = []
    for alias in aliases:
        if not isinstance(alias, dict) or set(alias) - {"name", "script"}:
            raise MalformedRecordError(
                "alias entries must be objects with name and optional script", path, line_no
            )
        if "name" not in alias or not isinstance(alias["name"], str):
            raise MalformedRecordError("alias name must be a string", path, line_no)
        parsed.append(Alias(name=alias["name"], script=alias.get("script")))
    try:
        kind = OrgKind(record["kind"])
    except ValueError:
        raise MalformedRecordError(f"unknown org kind {record['kind']!r}", path, line_no) from None
    return Organization(
        id=str(record["id"]),
        canonical_name=str(record["canonical_name"]),
        kind=kind,
        country=str(record["country"]),
        aliases=tuple(parsed),
        region=record.get("region"),
    )


def _rel_from_record(record: Mapping, path: str, line_no: int) -> Relationship:
    _require_fields(record, _REL_FIELDS, _REL_OPTIONAL, path, line_no)
    try:
        kind = RelKind(record["kind"])
    except ValueError:
        raise MalformedRecordError(
            f"unknown relationship kind {record['kind']!r}", path, line_no
        ) from None
    valid_from = record["valid_from"]
    valid_to = record.get("valid_to")
    if not isinstance(valid_from, int) or isinstance(valid_from, bool):
        raise MalformedRecordError("valid_from must be an integer year", path, line_no)
    if valid_to is not None and (not isinstance(valid_to, int) or isinstance(valid_to, bool)):
        raise MalformedRecordError("valid_to must be an integer year or null", path, line_no)
    return Relationship(
        child=str(record["child"]),
        parent=str(record["parent"]),
        kind=kind,
        valid_from=valid_from,
        valid_to=valid_to,
        provenance=str(record.get("provenance", "manual")),
        notes=record.get("notes"),
    )


def load_registry(path: str | Path) -> Registry:
    """Load a registry file.  Registry files are always read strictly."""
    path = str(path)
    orgs: list[Organization] = []
    rels: list[tuple[int, Relationship]] = []
    for line_no, record in read_records(path, FORMAT_REGISTRY):
        record_kind = record.get("record")
        if record_kind == "organization":
            orgs.append(_org_from_record(record, path, line_no))
        elif record_kind == "relationship":
            rels.append((line_no, _rel_from_record(record, path, line_no)))
        else:
            raise MalformedRecordError(
                f"record must be organization or relationship, got {record_kind!r}",
                path,
                line_no,
            )
    registry = Registry()
    for org in orgs:
        registry.add_organization(org)
    for line_no, rel in rels:
        try:
            registry.link(rel)
        except MalformedRecordError:
            raise
        except Exception as exc:
            raise MalformedRecordError(str(exc), path, line_no) from exc
    return registry


def _org_record(org: Organization) -> dict:
    return {
        "record": "organization",
        "id": org.id,
        "canonical_name": org.canonical_name,
        "kind": org.kind.value,
        "country": org.country,
        "region": org.region,
        "aliases": [{"name": a.name, "script": a.script} for a in org.aliases],
    }


def _rel_record(rel: Relationship) -> dict:
    return {
        "record": "relationship",
        "child": rel.child,
        "parent": rel.parent,
        "kind": rel.kind.value,
        "valid_from": rel.valid_from,
        "valid_to": rel.valid_to,
        "provenance": rel.provenance,
        "notes": rel.notes,
    }


def save_registry(registry: Registry, path: str | Path) -> None:
    """Write the registry canonically: organizations sorted by id, then
    relationships sorted by their full field tuple."""
    rel_key = lambda r: (
        r.child,
        r.parent,
        r.kind.value,
        r.valid_from,
        r.valid_to if r.valid_to is not None else 10**9,
        r.provenance,
        r.notes or "",
    )
    records: list[dict] = [_org_record(o) for o in registry.organizations()]
    records.extend(_rel_record(r) for r in sorted(registry.relationships(), key=rel_key))
    write_lines(path, FORMAT_REGISTRY, records)


# ---- Corpus manifest ----


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    sha256: str
    records: int


@dataclass(frozen=True)
class CorpusManifest:
    window: tuple[int, int]
    mode: LoadMode
    files: tuple[ManifestEntry, ...]

    @property
    def total_records(self) -> int:
        return sum(f.records for f in self.files)


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(
    paths: Sequence[str | Path], window: tuple[int, int], mode: LoadMode = LoadMode.STRICT
) -> tuple[CorpusManifest, list[str]]:
    """Validate corpus files and record their checksums and counts."""
    entries: list[ManifestEntry] = []
    diagnostics: list[str] = []
    seen: set[str] = set()
    for path in paths:
        pubs, diags = load_publications(path, mode, seen_ids=seen)
        diagnostics.extend(diags)
        entries.append(
            ManifestEntry(path=str(path), sha256=file_sha256(path), records=len(pubs))
        )
    return CorpusManifest(window=window, mode=mode, files=tuple(entries)), diagnostics


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    records: list[dict] = [
        {
            "record": "manifest",
            "window": list(manifest.window),
            "mode": manifest.mode.value,
        }
    ]
    records.extend(
        {"record": "file", "path": f.path, "sha256": f.sha256, "records": f.records}
        for f in manifest.files
    )
    write_lines(path, FORMAT_MANIFEST, records)


def load_manifest(path: str | Path) -> CorpusManifest:
    path = str(path)
    window: tuple[int, int] | None = None
    mode = LoadMode.STRICT
    files: list[ManifestEntry] = []
    for line_no, record in read_records(path, FORMAT_MANIFEST):
        record_kind = record.get("record")
        if record_kind == "manifest":
            _require_fields(record, {"record", "window", "mode"}, set(), path, line_no)
            window = (int(record["window"][0]), int(record["window"][1]))
            mode = LoadMode(record["mode"])
        elif record_kind == "file":
            _require_fields(record, {"record", "path", "sha256", "records"}, set(), path, line_no)
            files.append(
                ManifestEntry(
                    path=str(record["path"]),
                    sha256=str(record["sha256"]),
                    records=int(record["records"]),
                )
            )
        else:
            raise MalformedRecordError(
                f"record must be manifest or file, got {record_kind!r}", path, line_no
            )
    if window is None:
        raise MalformedRecordError("manifest record missing", path)
    return CorpusManifest(window=window, mode=mode, files=tuple(files))


def verify_manifest(manifest: CorpusManifest) -> None:
    """Re-hash every corpus file and compare against the manifest."""
    for entry in manifest.files:
        actual = file_sha256(entry.path)
        if actual != entry.sha256:
            raise ChecksumMismatchError(
                f"{entry.path}: checksum {actual} does not match manifest {entry.sha256}"
            )


# ---- Reports ----

REPORT_HEADER = "# format: delta-table 1.0"
REPORT_COLUMNS = "organization\tseparate\tcombined\tpercentage"


def render_report(reports: Sequence[DeltaReport]) -> str:
    """Tabular text: a university row with its totals, then one row for the
    hospital side carrying the marginal in the separate column."""
    lines = [REPORT_HEADER, REPORT_COLUMNS]
    for report in reports:
        lines.append(
            "\t".join(
                [
                    report.university_label,
                    format_count(report.separate_university),
                    format_count(report.combined),
                    format_count(report.pct_share),
                ]
            )
        )
        lines.append(
            "\t".join([report.hospital_label, format_count(report.marginal_hospital), "-", "-"])
        )
    return "\n".join(lines) + "\n"


def save_report(reports: Sequence[DeltaReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_report(reports))


# ---- Evidence dossiers ----


def load_dossier(path: str | Path) -> EvidenceDossier:
    """Read a dossier from a single-object JSON file."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(f"unreadable dossier: {exc.msg}", path) from None
    if not isinstance(data, dict):
        raise MalformedRecordError("dossier must be a JSON object", path)
    if data.get("format", FORMAT_DOSSIER) != FORMAT_DOSSIER:
        raise MalformedRecordError(f"expected format {FORMAT_DOSSIER!r}", path)
    major = str(data.get("version", _CURRENT_VERSION)).split(".")[0]
    if major != _SUPPORTED_MAJOR:
        raise FormatVersionError(f"unsupported dossier version {data['version']!r}", path)
    body = {k: v for k, v in data.items() if k not in ("format", "version")}
    try:
        dossier = EvidenceDossier.from_dict(body)
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedRecordError(f"bad dossier field: {exc}", path) from None
    return validate_dossier(dossier)


def save_dossier(dossier: EvidenceDossier, path: str | Path) -> None:
    payload = {"format": FORMAT_DOSSIER, "version": _CURRENT_VERSION, **dossier.to_dict()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(payload) + "\n")
