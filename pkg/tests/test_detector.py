import itertools
import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from cgrminer.code_model import Snapshot, build_snapshot
from cgrminer.detector import (
    CodeLocation,
    RefactoringInstance,
    RefactoringType as T,
    detect,
    ingest_external_detections,
    instance_to_record,
    match_entities,
    similarity,
    sorted_instances,
    validate_location,
)
from cgrminer.errors import SchemaError

from corpus import planted_scenarios, random_history
from conftest import fixture_pairs


# -- similarity ------------------------------------------------------------


def test_similarity_examples():
    assert similarity(["a", "b", "c"], ["a", "b", "d"]) == pytest.approx(2 / 3)
    assert similarity([], []) == 1.0
    assert similarity(["a"], []) == 0.0
    assert similarity(["a", "a", "b"], ["a", "b", "b"]) == pytest.approx(2 * 2 / 6)


_bag = st.lists(st.sampled_from("abcdefg"), max_size=12)


@given(_bag, _bag)
def test_similarity_symmetric_and_bounded(a, b):
    s = similarity(a, b)
    assert s == similarity(b, a)
    assert 0.0 <= s <= 1.0
    assert similarity(a, a) == 1.0


# -- matching --------------------------------------------------------------


def _snap(*classes, pkg="p"):
    return build_snapshot({f"src/{pkg}/{i}.java": f"package {pkg};\n{c}" for i, c in enumerate(classes)})


def test_identical_snapshots_match_exactly():
    s = _snap("class A { int x = 1; void f() { g(); } }", "class B { void h() {} }")
    pairs = match_entities(s, s)
    assert len(pairs) == 5
    assert all(p.phase == "exact" and p.similarity == 1.0 for p in pairs)


def test_moved_class_is_similarity_pair():
    before = build_snapshot({"src/a/A.java": "package a; class A { void f() { g(); } }"})
    after = build_snapshot({"src/b/A.java": "package b; class A { void f() { g(); } }"})
    class_pairs = [p for p in match_entities(before, after) if p.before_entity.kind == "class"]
    assert len(class_pairs) == 1
    assert class_pairs[0].phase == "similarity" and class_pairs[0].similarity == 1.0


def test_tie_breaks_on_smaller_before_name():
    before = _snap("class A { void one() { x(); y(); } void two() { x(); y(); } void keep() {} }")
    after = _snap("class A { void three() { x(); y(); } void keep() {} }")
    sim = [p for p in match_entities(before, after) if p.phase == "similarity"]
    assert [(p.before_entity.qualified_name, p.after_entity.qualified_name) for p in sim] == [
        ("p.A.one()", "p.A.three()")]


def _check_injective(before, after):
    pairs = match_entities(before, after)
    b = [(p.before_entity.kind, p.before_entity.qualified_name) for p in pairs]
    a = [(p.after_entity.kind, p.after_entity.qualified_name) for p in pairs]
    assert len(b) == len(set(b)) and len(a) == len(set(a))


def test_matching_injective_on_planted_corpus():
    for s in planted_scenarios():
        _check_injective(build_snapshot(s.before), build_snapshot(s.after))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_matching_injective_on_random_histories(seed):
    g = random_history(seed)
    ids = list(g.trees)
    for prev, cur in zip(ids, ids[1:]):
        _check_injective(build_snapshot(g.trees[prev]), build_snapshot(g.trees[cur]))


# exhaustive optimal assignment oracle ------------------------------------


def _bag(snap: Snapshot, kind: str, qname: str) -> Counter:
    if kind == "class":
        return Counter(snap.classes[qname].member_signatures())
    owner, _, member = qname.partition("(")[0].rpartition(".") if kind == "method" else qname.rpartition(".")
    for cls in (c for f in snap.files.values() for c in f.classes):
        if cls.qualified_name != owner:
            continue
        if kind == "method":
            for m in cls.methods:
                if f"{owner}.{m.signature}" == qname:
                    return Counter(m.body_tokens)
        else:
            for a in cls.attributes:
                if a.name == member:
                    return Counter((a.type_name,) + a.initializer_tokens)
    raise KeyError(qname)


def _names(snap: Snapshot, kind: str) -> set[str]:
    if kind == "class":
        return set(snap.classes)
    out = set()
    for f in snap.files.values():
        for c in f.classes:
            if kind == "method":
                out |= {f"{c.qualified_name}.{m.signature}" for m in c.methods}
            else:
                out |= {f"{c.qualified_name}.{a.name}" for a in c.attributes}
    return out


def _optimal(weights: list[list[float]]) -> float:
    rows = len(weights)
    cols = len(weights[0]) if rows else 0
    best = 0.0
    if rows <= cols:
        for perm in itertools.permutations(range(cols), rows):
            best = max(best, sum(weights[i][j] for i, j in enumerate(perm)))
    else:
        for perm in itertools.permutations(range(rows), cols):
            best = max(best, sum(weights[i][j] for j, i in enumerate(perm)))
    return best


def _greedy_vs_optimal(before: Snapshot, after: Snapshot, threshold=0.5) -> int:
    """Compare similarity-phase sums per entity kind; returns number of kinds checked."""
    pairs = match_entities(before, after, threshold)
    checked = 0
    for kind in ("class", "method", "attribute"):
        non_sim = [p for p in pairs if p.before_entity.kind == kind and p.phase != "similarity"]
        sim = [p for p in pairs if p.before_entity.kind == kind and p.phase == "similarity"]
        removed = sorted(_names(before, kind) - {p.before_entity.qualified_name for p in non_sim})
        added = sorted(_names(after, kind) - {p.after_entity.qualified_name for p in non_sim})
        if not removed or not added or len(removed) > 6 or len(added) > 6:
            continue
        w = []
        for b in removed:
            row = []
            for a in added:
                s = similarity(_bag(before, kind, b), _bag(after, kind, a))
                row.append(s if s >= threshold else 0.0)
            w.append(row)
        assert sum(p.similarity for p in sim) == pytest.approx(_optimal(w)), (kind, removed, added)
        checked += 1
    return checked


def test_greedy_matches_optimal_assignment_on_fixtures():
    checked = 0
    for before, after in fixture_pairs():
        checked += _greedy_vs_optimal(before, after)
        checked += _greedy_vs_optimal(after, before)
    assert checked > 20


# -- detect ----------------------------------------------------------------


def test_detect_identity_is_empty_on_fixtures():
    for before, after in fixture_pairs():
        assert detect(before, before) == frozenset()
        assert detect(after, after) == frozenset()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([0.1, 0.5, 0.9, 1.0]))
def test_detect_identity_is_empty_on_random_snapshots(seed, tau):
    g = random_history(seed)
    snap = build_snapshot(g.trees[max(g.trees)])
    assert detect(snap, snap, tau) == frozenset()


def test_planted_corpus_recall_and_precision():
    for s in planted_scenarios():
        got = Counter(str(i.type) for i in detect(build_snapshot(s.before), build_snapshot(s.after)))
        assert got == s.expected, s.name


_DUAL = {T.AddParameter: T.RemoveParameter, T.RemoveParameter: T.AddParameter,
         T.PushDownMethod: T.PullUpMethod, T.PullUpMethod: T.PushDownMethod,
         T.MoveClass: T.MoveClass, T.MoveMethod: T.MoveMethod, T.MoveAttribute: T.MoveAttribute}


def test_reversal_duality_on_planted_corpus():
    for s in planted_scenarios():
        b, a = build_snapshot(s.before), build_snapshot(s.after)
        backward = detect(a, b)
        for inst in detect(b, a):
            if inst.type not in _DUAL:
                continue
            dual = _DUAL[inst.type]
            if inst.type in (T.AddParameter, T.RemoveParameter):
                # parameter changes are located at the method, whose signature differs per side
                assert any(r.type == dual and r.before_locations == inst.after_locations
                           for r in backward), (s.name, inst)
            else:
                assert any(r.type == dual and r.before_locations == inst.after_locations
                           and r.after_locations == inst.before_locations for r in backward), (s.name, inst)


def test_push_down_uses_after_snapshot_chain():
    base = "class Shape { double area() { return w * h * 0.5 + bias; } }"
    sub = "class Tri extends Shape { int sides() { return 3; } }"
    sub_with = "class Tri extends Shape { int sides() { return 3; } double area() { return w * h * 0.5 + bias; } }"
    got = detect(_snap(base, sub), _snap("class Shape { }", sub_with))
    assert [i.type for i in got] == [T.PushDownMethod]
    got = detect(_snap("class Shape { }", sub_with), _snap(base, sub))
    assert [i.type for i in got] == [T.PullUpMethod]


def test_two_parameters_added_yields_two_instances():
    got = detect(_snap("class A { void f(int a) { a(); } }"), _snap("class A { void f(int a, long b, char c) { a(); } }"))
    assert Counter(i.type for i in got) == Counter({T.AddParameter: 2})


def test_default_package_never_forms_package_refactorings():
    before = build_snapshot({"A.java": "class A { void f() { x(); } }", "B.java": "class B { void g() { y(); } }"})
    after = build_snapshot({"src/n/A.java": "package n; class A { void f() { x(); } }",
                            "src/n/B.java": "package n; class B { void g() { y(); } }"})
    assert Counter(i.type for i in detect(before, after)) == Counter({T.MoveClass: 2})


def test_detect_output_deterministic():
    for s in planted_scenarios()[:10]:
        runs = {json.dumps([instance_to_record(i) for i in sorted_instances(
            detect(build_snapshot(s.before), build_snapshot(s.after)))]) for _ in range(3)}
        assert len(runs) == 1


# -- validate_location -----------------------------------------------------


def test_validate_location():
    snap = build_snapshot({"src/p/A.java": "package p; class A { int x; void f(int a) {} }"})
    assert validate_location(CodeLocation("src/p/A.java", "class", "p.A"), snap)
    assert validate_location(CodeLocation("src/p/A.java", "method", "p.A.f(int)"), snap)
    assert validate_location(CodeLocation("src/p/A.java", "attribute", "p.A.x"), snap)
    assert validate_location(CodeLocation("src/p", "package", "p"), snap)
    assert not validate_location(CodeLocation("src/p/A.java", "class", "p.Missing"), snap)
    assert not validate_location(CodeLocation("src/p/A.java", "method", "p.A.f()"), snap)
    assert not validate_location(CodeLocation("src/q", "package", "q"), snap)


def test_validate_location_stale_file():
    moved = build_snapshot({"src/p/B.java": "package p; class A { }"})
    assert not validate_location(CodeLocation("src/p/A.java", "class", "p.A"), moved)


# -- external detections ---------------------------------------------------


RECORD = {"type": "MoveClass", "description": "Move Class p.A moved to q.A",
          "before": [{"file": "src/p/A.java", "kind": "class", "name": "p.A"}],
          "after": [{"file": "src/q/A.java", "kind": "class", "name": "q.A"}]}


def test_ingest_examples():
    assert ingest_external_detections("[]") == frozenset()
    (inst,) = ingest_external_detections(json.dumps([RECORD]))
    assert inst.type is T.MoveClass
    assert instance_to_record(inst) == RECORD


def test_ingest_preserves_unknown_types_by_string():
    rec = dict(RECORD, type="ExtractMethod")
    (inst,) = ingest_external_detections(json.dumps([rec]).encode())
    assert inst.type == "ExtractMethod"
    assert inst.type != T.MoveClass


@pytest.mark.parametrize("doc", [
    "{}",
    "not json",
    json.dumps([{k: v for k, v in RECORD.items() if k != "type"}]),
    json.dumps([dict(RECORD, before=[])]),
    json.dumps([dict(RECORD, after=[{"file": "x", "kind": "module", "name": "y"}])]),
    json.dumps([dict(RECORD, description=3)]),
])
def test_ingest_schema_errors(doc):
    with pytest.raises(SchemaError):
        ingest_external_detections(doc)


def test_instance_requires_locations():
    with pytest.raises(ValueError):
        RefactoringInstance(T.MoveClass, "x", (), (CodeLocation("f", "class", "A"),))
