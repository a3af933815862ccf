from dataclasses import replace
from fractions import Fraction

import pytest

from hospuni.counting import Scheme, closure_unit, count, delta_report
from hospuni.errors import (
    InvalidEvidenceError,
    InvalidWindowError,
    UnknownPublicationError,
    WorkflowStateError,
)
from hospuni.matching import DocType, RawPublication, resolve_corpus
from hospuni.registry import (
    Organization,
    OrgKind,
    Registry,
    Relationship,
    RelKind,
)
from hospuni.workflow import (
    _SOURCED_FIELDS,
    AuthorOverlap,
    Classification,
    EvidenceDossier,
    Mandate,
    Override,
    Ownership,
    QueueStatus,
    Source,
    StepOutcome,
    StepPolicy,
    StepVerdict,
    _field_known,
    apply_classification,
    build_queue,
    classify,
    overlap_from_verdicts,
    record_overlap_verdicts,
    sample_hospital_only,
    validate_dossier,
    verdict_from_trail,
)

from oracles import flat_verdict, hospital_only_ok
from synth import WINDOW, resolved_random_instance, zurich_registry

AT = "2026-01-05T09:00:00+00:00"


def sourced(dossier: EvidenceDossier) -> EvidenceDossier:
    sources = tuple(
        Source(field=name, citation="registry extract", retrieved_at=AT)
        for name in _SOURCED_FIELDS
        if _field_known(dossier, name)
    )
    return replace(dossier, sources=sources)


def make_dossier(**kw) -> EvidenceDossier:
    return sourced(EvidenceDossier(hospital="UHZ", university="UZ", window=WINDOW, **kw))


# ---- Frozen decision examples ----


def test_university_ownership_settles_at_step_one():
    result = classify(make_dossier(ownership=Ownership.UNIVERSITY), decided_at=AT)
    assert result.verdict == "component"
    assert len(result.trail) == 1
    assert result.trail[0].verdict is StepVerdict.COMPONENT_TERMINAL


def test_every_decisive_ownership_is_terminal():
    for ownership in (
        Ownership.UNIVERSITY,
        Ownership.UNIVERSITY_RELATED_FOUNDATION,
        Ownership.UNIVERSITY_HEALTH_SYSTEM,
        Ownership.REVERSE_OWNERSHIP,
    ):
        result = classify(make_dossier(ownership=ownership), decided_at=AT)
        assert (result.verdict, len(result.trail)) == ("component", 1)


def test_core_curriculum_settles_at_step_two():
    dossier = make_dossier(
        ownership=Ownership.GOVERNMENT_HEALTH_AUTHORITY, mandate=Mandate.CORE_CURRICULUM
    )
    result = classify(dossier, decided_at=AT)
    assert result.verdict == "component"
    assert len(result.trail) == 2
    assert result.trail[1].verdict is StepVerdict.COMPONENT_TERMINAL


def test_nothing_known_defaults_to_associate():
    result = classify(make_dossier(), decided_at=AT)
    assert result.verdict == "associate"
    assert len(result.trail) == 3
    assert [o.verdict for o in result.trail] == [
        StepVerdict.PROCEED,
        StepVerdict.PROCEED,
        StepVerdict.ASSOCIATE,
    ]


def test_both_signals_high_gives_component():
    dossier = make_dossier(
        colocation_share=0.8, author_overlap=AuthorOverlap(fraction=0.9, sample_size=25)
    )
    result = classify(dossier, decided_at=AT)
    assert result.verdict == "component"
    assert len(result.trail) == 3


def test_one_low_signal_blocks_component_when_both_known():
    dossier = make_dossier(
        colocation_share=0.8, author_overlap=AuthorOverlap(fraction=0.2, sample_size=25)
    )
    assert classify(dossier, decided_at=AT).verdict == "associate"


def test_single_known_signal_decides_alone():
    high_loc = make_dossier(colocation_share=0.6)
    assert classify(high_loc, decided_at=AT).verdict == "component"
    low_loc = make_dossier(colocation_share=0.3)
    assert classify(low_loc, decided_at=AT).verdict == "associate"
    high_auth = make_dossier(author_overlap=AuthorOverlap(fraction=0.9, sample_size=25))
    assert classify(high_auth, decided_at=AT).verdict == "component"


def test_thresholds_are_inclusive():
    assert classify(make_dossier(colocation_share=0.5), decided_at=AT).verdict == "component"
    at_auth = make_dossier(author_overlap=AuthorOverlap(fraction=0.5, sample_size=10))
    assert classify(at_auth, decided_at=AT).verdict == "component"


def test_small_overlap_sample_is_treated_as_unknown():
    dossier = make_dossier(author_overlap=AuthorOverlap(fraction=0.9, sample_size=5))
    result = classify(dossier, decided_at=AT)
    assert result.verdict == "associate"
    assert "treated as unknown" in result.trail[-1].rationale


def test_decision_sweep_matches_flat_rule_oracle():
    policy = StepPolicy()
    overlaps = [None, (0.1, 25), (0.4, 25), (0.5, 25), (0.9, 5)]
    colocations = [None, 0.0, 0.3, 0.5, 0.8]
    checked = 0
    for ownership in Ownership:
        for mandate in Mandate:
            for colocation in colocations:
                for overlap in overlaps:
                    dossier = make_dossier(
                        ownership=ownership,
                        mandate=mandate,
                        colocation_share=colocation,
                        author_overlap=(
                            None
                            if overlap is None
                            else AuthorOverlap(fraction=overlap[0], sample_size=overlap[1])
                        ),
                    )
                    result = classify(dossier, policy, decided_at=AT)
                    expected, steps = flat_verdict(
                        ownership.value, mandate.value, colocation, overlap
                    )
                    assert result.verdict == expected
                    assert len(result.trail) == steps
                    assert verdict_from_trail(result.trail) == result.verdict
                    checked += 1
    assert checked == 1000


def test_terminal_verdicts_ignore_later_evidence():
    low_everything = dict(
        colocation_share=0.0, author_overlap=AuthorOverlap(fraction=0.0, sample_size=100)
    )
    result = classify(
        make_dossier(ownership=Ownership.UNIVERSITY, **low_everything), decided_at=AT
    )
    assert (result.verdict, len(result.trail)) == ("component", 1)
    result = classify(
        make_dossier(mandate=Mandate.CORE_CURRICULUM, **low_everything), decided_at=AT
    )
    assert (result.verdict, len(result.trail)) == ("component", 2)


def test_policy_thresholds_are_tunable():
    dossier = make_dossier(colocation_share=0.3)
    lax = StepPolicy(theta_loc=0.25)
    assert classify(dossier, lax, decided_at=AT).verdict == "component"
    trusting = StepPolicy(n_min=5)
    small = make_dossier(author_overlap=AuthorOverlap(fraction=0.9, sample_size=5))
    assert classify(small, trusting, decided_at=AT).verdict == "component"


# ---- Invariants and validation ----


def test_step_outcome_rejects_misplaced_verdicts():
    with pytest.raises(WorkflowStateError):
        StepOutcome(step=3, verdict=StepVerdict.COMPONENT_TERMINAL, rationale="x")
    with pytest.raises(WorkflowStateError):
        StepOutcome(step=1, verdict=StepVerdict.COMPONENT, rationale="x")
    with pytest.raises(WorkflowStateError):
        StepOutcome(step=2, verdict=StepVerdict.ASSOCIATE, rationale="x")
    with pytest.raises(WorkflowStateError):
        StepOutcome(step=4, verdict=StepVerdict.PROCEED, rationale="x")


def test_dossier_fraction_bounds_are_checked():
    with pytest.raises(InvalidEvidenceError):
        validate_dossier(make_dossier(colocation_share=1.5))
    with pytest.raises(InvalidEvidenceError):
        validate_dossier(
            make_dossier(author_overlap=AuthorOverlap(fraction=-0.1, sample_size=20))
        )
    with pytest.raises(InvalidEvidenceError):
        validate_dossier(
            make_dossier(author_overlap=AuthorOverlap(fraction=0.5, sample_size=0))
        )
    with pytest.raises(InvalidWindowError):
        validate_dossier(
            EvidenceDossier(hospital="UHZ", university="UZ", window=(2017, 2014))
        )


def test_known_evidence_requires_a_source():
    unsourced = EvidenceDossier(
        hospital="UHZ", university="UZ", window=WINDOW, ownership=Ownership.PRIVATE
    )
    with pytest.raises(InvalidEvidenceError):
        validate_dossier(unsourced)
    with pytest.raises(InvalidEvidenceError):
        classify(unsourced, decided_at=AT)
    bare = EvidenceDossier(
        hospital="UHZ", university="UZ", window=WINDOW, research_active=False
    )
    assert validate_dossier(bare) is bare


def test_policy_validation():
    with pytest.raises(InvalidEvidenceError):
        StepPolicy(theta_loc=1.5).validate()
    with pytest.raises(InvalidEvidenceError):
        StepPolicy(n_min=0).validate()
    with pytest.raises(InvalidEvidenceError):
        classify(make_dossier(), StepPolicy(theta_auth=-0.2), decided_at=AT)


def test_classify_is_deterministic_and_pins_metadata():
    dossier = make_dossier(colocation_share=0.7)
    first = classify(dossier, assessor="rk", decided_at=AT)
    second = classify(dossier, assessor="rk", decided_at=AT)
    assert first == second
    assert first.assessor == "rk"
    assert first.decided_at == AT
    assert first.dossier == dossier


def test_verdict_from_trail_rejects_undecided_trails():
    with pytest.raises(WorkflowStateError):
        verdict_from_trail(())
    with pytest.raises(WorkflowStateError):
        verdict_from_trail((StepOutcome(step=1, verdict=StepVerdict.PROCEED, rationale="x"),))


def test_dossier_round_trips_through_dict():
    dossier = make_dossier(
        ownership=Ownership.INDEPENDENT_FOUNDATION,
        colocation_share=0.25,
        author_overlap=AuthorOverlap(fraction=0.4, sample_size=20),
        research_active=False,
    )
    assert EvidenceDossier.from_dict(dossier.to_dict()) == dossier


def test_classification_round_trips_through_dict():
    result = classify(make_dossier(colocation_share=0.9), assessor="rk", decided_at=AT)
    result = replace(
        result,
        override=Override(verdict="associate", justification="merger", assessor="mw", at=AT),
    )
    restored = Classification.from_dict(result.to_dict())
    assert restored == result
    assert restored.effective_verdict == "associate"


# ---- Queue ----


def _queue_fixture():
    registry = Registry()
    for org_id, name, kind in (
        ("U", "Ghent University", OrgKind.UNIVERSITY),
        ("HB", "Saint Luke Clinic", OrgKind.HOSPITAL),
        ("HA", "Aurora Clinic", OrgKind.HOSPITAL),
        ("H1", "Ghent University Hospital", OrgKind.HOSPITAL),
        ("LAB", "Cancer Research Lab Ghent", OrgKind.RESEARCH_UNIT),
    ):
        registry.add_organization(
            Organization(id=org_id, canonical_name=name, kind=kind, country="BE")
        )
    registry.link(Relationship(child="LAB", parent="H1", kind=RelKind.COMPONENT, valid_from=2000))
    snap = registry.snapshot(WINDOW)
    raw = []
    for i, address in enumerate(
        ["Ghent University Hospital"] * 3
        + ["Cancer Research Lab Ghent"] * 2
        + ["Saint Luke Clinic"]
        + ["Aurora Clinic"]
        + ["Ghent University"] * 10
    ):
        raw.append(
            RawPublication(id=f"w{i:02d}", year=2015, doctype=DocType.ARTICLE, addresses=(address,))
        )
    return snap, resolve_corpus(raw, snap)


def test_queue_filters_by_standalone_closure_output():
    snap, corpus = _queue_fixture()
    entries = build_queue(corpus, snap, threshold=2)
    assert [e.hospital for e in entries] == ["H1"]
    assert entries[0].standalone_output == Fraction(5)
    assert entries[0].label == "Ghent University Hospital"
    assert entries[0].status is QueueStatus.PENDING


def test_queue_sorts_by_output_then_id_and_carries_statuses():
    snap, corpus = _queue_fixture()
    entries = build_queue(
        corpus, snap, threshold=1, statuses={"HB": QueueStatus.DECIDED}
    )
    assert [e.hospital for e in entries] == ["H1", "HA", "HB"]
    assert entries[2].status is QueueStatus.DECIDED
    assert entries[1].standalone_output == entries[2].standalone_output == Fraction(1)


def test_queue_never_lists_non_hospitals():
    snap, corpus = _queue_fixture()
    listed = {e.hospital for e in build_queue(corpus, snap, threshold=1)}
    assert "U" not in listed and "LAB" not in listed


# ---- Sampling ----


def _zurich_corpus_for_sampling():
    registry = zurich_registry()
    snap = registry.snapshot(WINDOW)
    raw = []
    for i in range(30):
        raw.append(
            RawPublication(
                id=f"s{i:02d}",
                year=2015,
                doctype=DocType.ARTICLE,
                addresses=("Clinic for Surgery, University Hospital Zurich",),
            )
        )
    raw.append(
        RawPublication(
            id="mix",
            year=2015,
            doctype=DocType.ARTICLE,
            addresses=("University Hospital Zurich", "University of Zurich"),
        )
    )
    raw.append(
        RawPublication(
            id="old", year=2009, doctype=DocType.ARTICLE,
            addresses=("University Hospital Zurich",),
        )
    )
    raw.append(
        RawPublication(
            id="note", year=2015, doctype=DocType.OTHER,
            addresses=("University Hospital Zurich",),
        )
    )
    return snap, resolve_corpus(raw, snap)


def test_sample_is_seeded_sorted_and_hospital_only():
    snap, corpus = _zurich_corpus_for_sampling()
    first = sample_hospital_only(corpus, "UHZ", "UZ", 10, seed=7, snapshot=snap)
    again = sample_hospital_only(corpus, "UHZ", "UZ", 10, seed=7, snapshot=snap)
    assert [p.id for p in first] == [p.id for p in again]
    assert len(first) == 10
    assert [p.id for p in first] == sorted(p.id for p in first)
    for pub in first:
        assert hospital_only_ok(pub, "UHZ", frozenset({"UZ"}))
    drawn = {p.id for p in first}
    assert {"mix", "old", "note"}.isdisjoint(drawn)


def test_different_seeds_draw_different_samples():
    snap, corpus = _zurich_corpus_for_sampling()
    draws = {
        tuple(p.id for p in sample_hospital_only(corpus, "UHZ", "UZ", 10, seed=s, snapshot=snap))
        for s in range(5)
    }
    assert len(draws) > 1


def test_sample_returns_everything_when_pool_is_small():
    snap, corpus = _zurich_corpus_for_sampling()
    pool = sample_hospital_only(corpus, "UHZ", "UZ", 500, seed=1, snapshot=snap)
    assert [p.id for p in pool] == [f"s{i:02d}" for i in range(30)]
    with pytest.raises(InvalidEvidenceError):
        sample_hospital_only(corpus, "UHZ", "UZ", 0, seed=1, snapshot=snap)


def test_sampling_ignores_the_pair_edge_verdict():
    registry = zurich_registry()
    registry.supersede_pair("UHZ", "UZ", RelKind.COMPONENT, valid_from=2014, provenance="manual")
    snap = registry.snapshot(WINDOW)
    raw = [
        RawPublication(
            id="h1", year=2015, doctype=DocType.ARTICLE,
            addresses=("University Hospital Zurich",),
        )
    ]
    corpus = resolve_corpus(raw, snap)
    drawn = sample_hospital_only(corpus, "UHZ", "UZ", 5, seed=1, snapshot=snap)
    assert [p.id for p in drawn] == ["h1"]


def test_sampling_predicate_matches_oracle_on_random_corpora():
    for seed in range(6):
        registry, snap, corpus = resolved_random_instance(seed + 300, n_orgs=8, n_pubs=60)
        orgs = snap.organizations()
        hospitals = [o.id for o in orgs if o.kind is OrgKind.HOSPITAL]
        universities = [o.id for o in orgs if o.kind is OrgKind.UNIVERSITY]
        if not hospitals or not universities:
            continue
        hospital, university = hospitals[0], universities[0]
        drawn = sample_hospital_only(corpus, hospital, university, 10_000, seed=1, snapshot=snap)
        separate = snap.treating([(hospital, university)], RelKind.ASSOCIATE)
        members = closure_unit(university, separate).members
        start, end = snap.window
        expected = sorted(
            pub.id
            for pub in corpus
            if pub.doctype.value in ("article", "review")
            and start <= pub.year <= end
            and hospital_only_ok(pub, hospital, members)
        )
        assert [p.id for p in drawn] == expected


# ---- Overlap verdicts ----


def test_overlap_from_verdicts_computes_fraction():
    overlap, source = overlap_from_verdicts(
        ["a", "b", "c", "d", "e"],
        [("a", True), ("b", False), ("c", True), ("d", True), ("e", False)],
        at=AT,
    )
    assert overlap == AuthorOverlap(fraction=0.6, sample_size=5)
    assert source.field == "author_overlap"
    assert source.retrieved_at == AT


def test_overlap_verdict_errors():
    with pytest.raises(UnknownPublicationError):
        overlap_from_verdicts(["a"], [("zz", True)], at=AT)
    with pytest.raises(InvalidEvidenceError):
        overlap_from_verdicts(["a", "b"], [("a", True), ("a", False)], at=AT)
    with pytest.raises(InvalidEvidenceError):
        overlap_from_verdicts(["a"], [], at=AT)


def test_record_overlap_verdicts_folds_into_dossier():
    dossier = make_dossier()
    updated = record_overlap_verdicts(dossier, ["a", "b"], [("a", True), ("b", True)], at=AT)
    assert updated.author_overlap == AuthorOverlap(fraction=1.0, sample_size=2)
    assert updated.sources[-1].field == "author_overlap"
    assert dossier.author_overlap is None
    validate_dossier(updated)


# ---- Applying classifications ----


def _delta_fixture():
    registry = zurich_registry()
    raw = [
        RawPublication(id="p1", year=2015, doctype=DocType.ARTICLE,
                       addresses=("University of Zurich",)),
        RawPublication(id="p2", year=2015, doctype=DocType.ARTICLE,
                       addresses=("University Hospital Zurich",)),
    ]
    snap = registry.snapshot(WINDOW)
    return registry, resolve_corpus(raw, snap)


def test_apply_component_classification_flips_count_to_combined():
    registry, corpus = _delta_fixture()
    snap = registry.snapshot(WINDOW)
    report = delta_report(corpus, "UZ", "UHZ", Scheme.FULL, WINDOW, snap)
    before = count(corpus, closure_unit("UZ", snap), Scheme.FULL, WINDOW)
    assert before == report.separate_university == Fraction(1)

    result = classify(make_dossier(ownership=Ownership.UNIVERSITY), decided_at=AT)
    written = apply_classification(result, registry)
    assert written.kind is RelKind.COMPONENT
    assert written.valid_from == WINDOW[0]
    assert written.provenance == "assessment:UHZ~UZ"

    after_snap = registry.snapshot(WINDOW)
    after = count(corpus, closure_unit("UZ", after_snap), Scheme.FULL, WINDOW)
    assert after == report.combined == Fraction(2)


def test_apply_uses_the_override_verdict():
    registry, corpus = _delta_fixture()
    result = classify(make_dossier(ownership=Ownership.UNIVERSITY), decided_at=AT)
    overridden = replace(
        result,
        override=Override(verdict="associate", justification="sold", assessor="mw", at=AT),
    )
    written = apply_classification(overridden, registry)
    assert written.kind is RelKind.ASSOCIATE
    snap = registry.snapshot(WINDOW)
    assert count(corpus, closure_unit("UZ", snap), Scheme.FULL, WINDOW) == Fraction(1)


def test_apply_rejects_non_terminal_verdicts():
    registry, corpus = _delta_fixture()
    result = classify(make_dossier(ownership=Ownership.UNIVERSITY), decided_at=AT)
    broken = replace(result, verdict="proceed")
    with pytest.raises(WorkflowStateError):
        apply_classification(broken, registry)
