"""Command-line interface.

Exit codes: 0 on success, 1 on usage errors (bad flags, malformed window
syntax), 2 on data errors (missing files, malformed records, unknown
organizations).  Every subcommand is deterministic given identical input
files, flags, and seed; `assess` takes --decided-at to pin its timestamp.
"""

from __future__ import annotations

import argparse
import re
import sys
from datetime import datetime, timezone

from . import __version__
from .assessments import EVENT_CLASSIFIED, AssessmentStore
from .corpus_io import (
    LoadMode,
    build_manifest,
    canonical_json,
    header_line,
    load_corpus,
    load_dossier,
    load_registry,
    render_report,
    save_manifest,
    save_registry,
    save_report,
    FORMAT_RESOLVED,
)
from .counting import Scheme, closure_unit, count, delta_report, table_report
from .errors import HospuniError
from .matching import resolve_corpus
from .workflow import (
    DEFAULT_POLICY,
    DEFAULT_QUEUE_THRESHOLD,
    StepPolicy,
    apply_classification,
    build_queue,
    classify,
    sample_hospital_only,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def window_arg(text: str) -> tuple[int, int]:
    match = re.fullmatch(r"(\d{4}):(\d{4})", text)
    if not match:
        raise argparse.ArgumentTypeError(f"window must look like 2014:2017, got {text!r}")
    start, end = int(match.group(1)), int(match.group(2))
    if start > end:
        raise argparse.ArgumentTypeError(f"window start {start} is after end {end}")
    return (start, end)


def pair_arg(text: str) -> tuple[str, list[str]]:
    """UNIVERSITY:HOSPITAL[+HOSPITAL...] for report rows."""
    if ":" not in text:
        raise argparse.ArgumentTypeError(f"pair must look like UNIV:HOSP, got {text!r}")
    university, _, hospitals = text.partition(":")
    parts = [h for h in hospitals.split("+") if h]
    if not university or not parts:
        raise argparse.ArgumentTypeError(f"pair must look like UNIV:HOSP, got {text!r}")
    return university, parts


def _build_parser() -> _Parser:
    parser = _Parser(prog="hospuni", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hospuni {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    registry_flags = _Parser(add_help=False)
    registry_flags.add_argument("--registry", required=True, help="registry file")

    corpus_flags = _Parser(add_help=False)
    corpus_flags.add_argument(
        "--corpus", action="append", required=True, help="publications file (repeatable)"
    )
    corpus_flags.add_argument(
        "--window", type=window_arg, required=True, help="year window, e.g. 2014:2017"
    )
    corpus_flags.add_argument(
        "--mode",
        choices=[m.value for m in LoadMode],
        default=LoadMode.STRICT.value,
        help="strict fails on the first malformed line; lenient skips and reports",
    )

    scheme_flags = _Parser(add_help=False)
    scheme_flags.add_argument(
        "--scheme",
        choices=[s.value for s in Scheme],
        default=Scheme.FRACTIONAL.value,
        help="counting scheme",
    )

    policy_flags = _Parser(add_help=False)
    policy_flags.add_argument("--theta-loc", type=float, default=DEFAULT_POLICY.theta_loc)
    policy_flags.add_argument("--theta-auth", type=float, default=DEFAULT_POLICY.theta_auth)
    policy_flags.add_argument("--n-min", type=int, default=DEFAULT_POLICY.n_min)

    p = sub.add_parser("ingest", parents=[corpus_flags], help="validate corpus files and write a manifest")
    p.add_argument("--output", required=True, help="manifest file to write")

    p = sub.add_parser(
        "match", parents=[registry_flags, corpus_flags], help="resolve corpus addresses against the registry"
    )
    p.add_argument("--output", help="resolved publications file (default: stdout)")

    p = sub.add_parser(
        "count", parents=[registry_flags, corpus_flags, scheme_flags], help="count a unit's output"
    )
    p.add_argument(
        "--unit", action="append", required=True, help="organization id counted with its component closure (repeatable)"
    )

    p = sub.add_parser(
        "delta",
        parents=[registry_flags, corpus_flags, scheme_flags],
        help="separate/combined/marginal accounting for one university and its hospital(s)",
    )
    p.add_argument("--university", required=True)
    p.add_argument("--hospital", action="append", required=True, help="hospital id (repeatable)")

    p = sub.add_parser(
        "queue", parents=[registry_flags, corpus_flags], help="hospitals above the assessment threshold"
    )
    p.add_argument("--threshold", type=int, default=DEFAULT_QUEUE_THRESHOLD)
    p.add_argument("--log", help="assessment log used to mark statuses")

    p = sub.add_parser(
        "sample",
        parents=[registry_flags, corpus_flags],
        help="seeded sample of hospital-only publications",
    )
    p.add_argument("--hospital", required=True)
    p.add_argument("--university", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("assess", parents=[policy_flags], help="classify a pair from a dossier file")
    p.add_argument("--dossier", required=True, help="dossier JSON file")
    p.add_argument("--assessor", default="cli")
    p.add_argument("--decided-at", help="ISO timestamp to pin on the classification")
    p.add_argument("--output", help="write the classification JSON here instead of stdout")
    p.add_argument("--log", help="append a classified event to this assessment log")
    p.add_argument("--registry", help="registry file, required with --apply")
    p.add_argument(
        "--apply",
        action="store_true",
        help="write the verdict into the registry file as the pair's edge",
    )

    p = sub.add_parser(
        "report",
        parents=[registry_flags, corpus_flags, scheme_flags],
        help="delta table for several university/hospital pairs",
    )
    p.add_argument(
        "--pair",
        action="append",
        required=True,
        type=pair_arg,
        help="UNIVERSITY:HOSPITAL or UNIVERSITY:HOSP1+HOSP2 (repeatable)",
    )
    p.add_argument("--output", help="report file (default: stdout)")

    p = sub.add_parser(
        "serve",
        parents=[registry_flags, corpus_flags, scheme_flags, policy_flags],
        help="run the assessment HTTP service",
    )
    p.add_argument("--threshold", type=int, default=DEFAULT_QUEUE_THRESHOLD)
    p.add_argument("--log", default="assessments.jsonl", help="assessment event log file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--token-ttl", type=int, default=8 * 3600, help="session lifetime in seconds")

    return parser


def _load_resolved(args):
    registry = load_registry(args.registry)
    snapshot = registry.snapshot(args.window)
    raw, diagnostics = load_corpus(args.corpus, LoadMode(args.mode))
    for line in diagnostics:
        print(f"skipped: {line}", file=sys.stderr)
    return registry, snapshot, resolve_corpus(raw, snapshot)


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_ingest(args) -> int:
    manifest, diagnostics = build_manifest(args.corpus, args.window, LoadMode(args.mode))
    for line in diagnostics:
        print(f"skipped: {line}", file=sys.stderr)
    save_manifest(manifest, args.output)
    for entry in manifest.files:
        print(f"{entry.path}\t{entry.records}\t{entry.sha256}")
    print(f"total\t{manifest.total_records}")
    return 0


def cmd_match(args) -> int:
    _, _, pubs = _load_resolved(args)
    lines = [header_line(FORMAT_RESOLVED)]
    lines.extend(canonical_json(p.to_dict()) for p in pubs)
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_count(args) -> int:
    _, snapshot, pubs = _load_resolved(args)
    from .counting import format_count

    for org_id in args.unit:
        unit = closure_unit(org_id, snapshot)
        total = count(pubs, unit, Scheme(args.scheme), args.window)
        print(f"{org_id}\t{unit.label}\t{format_count(total)}")
    return 0


def cmd_delta(args) -> int:
    _, snapshot, pubs = _load_resolved(args)
    report = delta_report(
        pubs, args.university, args.hospital, Scheme(args.scheme), args.window, snapshot
    )
    figures = report.figures()
    print(f"university\t{report.university}\t{report.university_label}")
    print(f"hospitals\t{'+'.join(report.hospitals)}\t{report.hospital_label}")
    print(f"scheme\t{report.scheme.value}")
    print(f"window\t{report.window[0]}:{report.window[1]}")
    for key in ("separate", "marginal", "combined", "pct_share"):
        print(f"{key}\t{figures[key]}")
    return 0


def cmd_queue(args) -> int:
    _, snapshot, pubs = _load_resolved(args)
    statuses = None
    if args.log:
        statuses = AssessmentStore(args.log, args.window).statuses_by_hospital()
    from .counting import format_count

    for entry in build_queue(pubs, snapshot, args.threshold, statuses):
        print(
            f"{entry.hospital}\t{entry.label}\t{format_count(entry.standalone_output)}"
            f"\t{entry.status.value}"
        )
    return 0


def cmd_sample(args) -> int:
    _, snapshot, pubs = _load_resolved(args)
    chosen = sample_hospital_only(
        pubs, args.hospital, args.university, args.n, args.seed, snapshot
    )
    for pub in chosen:
        print(pub.id)
    return 0


def cmd_assess(args) -> int:
    dossier = load_dossier(args.dossier)
    policy = StepPolicy(theta_loc=args.theta_loc, theta_auth=args.theta_auth, n_min=args.n_min)
    decided_at = args.decided_at or datetime.now(timezone.utc).isoformat(timespec="seconds")
    classification = classify(dossier, policy, assessor=args.assessor, decided_at=decided_at)
    _emit(canonical_json(classification.to_dict()) + "\n", args.output)
    if args.log:
        store = AssessmentStore(args.log, dossier.window)
        current = store.state(dossier.hospital, dossier.university)
        store.append(
            EVENT_CLASSIFIED,
            dossier.hospital,
            dossier.university,
            {"classification": classification.to_dict()},
            expected_version=current.version,
            at=decided_at,
            window=dossier.window,
        )
    if args.apply:
        if not args.registry:
            raise HospuniError("--apply requires --registry")
        registry = load_registry(args.registry)
        apply_classification(classification, registry)
        save_registry(registry, args.registry)
    return 0


def cmd_report(args) -> int:
    _, snapshot, pubs = _load_resolved(args)
    pairs: list[tuple[str, str]] = []
    for university, hospitals in args.pair:
        pairs.extend((university, hospital) for hospital in hospitals)
    reports = table_report(pubs, pairs, Scheme(args.scheme), args.window, snapshot)
    if args.output:
        save_report(reports, args.output)
    else:
        sys.stdout.write(render_report(reports))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import ServiceConfig, build_state, create_app

    config = ServiceConfig(
        registry_path=args.registry,
        corpus_paths=tuple(args.corpus),
        window=args.window,
        scheme=Scheme(args.scheme),
        mode=LoadMode(args.mode),
        threshold=args.threshold,
        policy=StepPolicy(
            theta_loc=args.theta_loc, theta_auth=args.theta_auth, n_min=args.n_min
        ),
        log_path=args.log,
        token_ttl=args.token_ttl,
    )
    app = create_app(build_state(config))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "match": cmd_match,
    "count": cmd_count,
    "delta": cmd_delta,
    "queue": cmd_queue,
    "sample": cmd_sample,
    "assess": cmd_assess,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except HospuniError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
