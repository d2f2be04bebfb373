"""Refactoring detection between two snapshots.

Entities (classes, methods, attributes) are matched in two phases: first by
identity, then greedily by Dice similarity over token multisets. Matched
pairs are classified against a fixed catalog of refactoring types, and
package-level moves, splits and merges are derived from the class pairs.
"""

from __future__ import annotations

import difflib
import enum
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Union

from .code_model import AttributeDecl, ClassDecl, MethodDecl, Snapshot
from .errors import SchemaError

DEFAULT_THRESHOLD = 0.5


class RefactoringType(str, enum.Enum):
    MoveClass = "MoveClass"
    RenameClass = "RenameClass"
    MoveAndRenameClass = "MoveAndRenameClass"
    ChangeClassAccessModifier = "ChangeClassAccessModifier"
    MovePackage = "MovePackage"
    SplitPackage = "SplitPackage"
    MergePackage = "MergePackage"
    MoveMethod = "MoveMethod"
    RenameMethod = "RenameMethod"
    PushDownMethod = "PushDownMethod"
    PullUpMethod = "PullUpMethod"
    AddParameter = "AddParameter"
    RemoveParameter = "RemoveParameter"
    ChangeMethodAccessModifier = "ChangeMethodAccessModifier"
    MoveAttribute = "MoveAttribute"
    RenameAttribute = "RenameAttribute"
    ChangeAttributeAccessModifier = "ChangeAttributeAccessModifier"

    def __str__(self) -> str:
        return self.value


# Types reported by an external detector that fall outside the catalog are
# carried as plain strings; str-valued enum members compare equal to them.
TypeName = Union[RefactoringType, str]


def coerce_type(name: str) -> TypeName:
    try:
        return RefactoringType(name)
    except ValueError:
        return name


ENTITY_KINDS = ("package", "class", "method", "attribute")


@dataclass(frozen=True, order=True)
class CodeLocation:
    file_path: str
    entity_kind: str
    qualified_entity_name: str

    def __post_init__(self):
        if self.entity_kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {self.entity_kind!r}")
        if not self.qualified_entity_name:
            raise ValueError("qualified_entity_name must be non-empty")

    def __str__(self) -> str:
        return f"{self.entity_kind}:{self.qualified_entity_name}@{self.file_path}"


@dataclass(frozen=True)
class RefactoringInstance:
    type: TypeName
    description: str
    before_locations: tuple[CodeLocation, ...]
    after_locations: tuple[CodeLocation, ...]

    def __post_init__(self):
        object.__setattr__(self, "before_locations", tuple(self.before_locations))
        object.__setattr__(self, "after_locations", tuple(self.after_locations))
        if not self.before_locations or not self.after_locations:
            raise ValueError("a refactoring needs before and after locations")

    def sort_key(self):
        return (str(self.type), self.description, self.before_locations, self.after_locations)

    def files(self) -> set[str]:
        return {loc.file_path for loc in self.before_locations + self.after_locations}


def sorted_instances(instances: Iterable[RefactoringInstance]) -> list[RefactoringInstance]:
    return sorted(instances, key=RefactoringInstance.sort_key)


@dataclass(frozen=True)
class EntityRef:
    kind: str
    qualified_name: str


@dataclass(frozen=True)
class MatchPair:
    before_entity: EntityRef
    after_entity: EntityRef
    similarity: float
    # "exact" (identity), "name" (same owner and name) or "similarity"
    phase: str = "exact"


def similarity(body_a: Iterable[str], body_b: Iterable[str]) -> float:
    """Dice coefficient over token multisets; two empty bags are identical."""
    a = body_a if isinstance(body_a, Counter) else Counter(body_a)
    b = body_b if isinstance(body_b, Counter) else Counter(body_b)
    total = sum(a.values()) + sum(b.values())
    if total == 0:
        return 1.0
    common = sum((a & b).values())
    return 2 * common / total


# -- entity extraction -----------------------------------------------------


def method_name(class_qname: str, method: MethodDecl) -> str:
    return f"{class_qname}.{method.signature}"


def attribute_name(class_qname: str, attribute: AttributeDecl) -> str:
    return f"{class_qname}.{attribute.name}"


@dataclass(frozen=True)
class _Entity:
    kind: str
    qname: str
    path: str
    owner: str  # declaring class qualified name (self for classes)
    decl: object
    bag: Counter

    @property
    def ref(self) -> EntityRef:
        return EntityRef(self.kind, self.qname)

    @property
    def location(self) -> CodeLocation:
        return CodeLocation(self.path, self.kind, self.qname)


@dataclass(frozen=True)
class _Pair:
    before: _Entity
    after: _Entity
    similarity: float
    phase: str


def _class_entity(path: str, decl: ClassDecl) -> _Entity:
    return _Entity("class", decl.qualified_name, path, decl.qualified_name, decl,
                   Counter(decl.member_signatures()))


def _first_by_name(entities: list[_Entity]) -> list[_Entity]:
    # a repeated member declaration does not compile; keep the first one
    seen, out = set(), []
    for e in entities:
        if e.qname not in seen:
            seen.add(e.qname)
            out.append(e)
    return out


def _member_entities(cls: _Entity) -> tuple[list[_Entity], list[_Entity]]:
    decl: ClassDecl = cls.decl
    methods = [_Entity("method", method_name(cls.qname, m), cls.path, cls.qname, m,
                       Counter(m.body_tokens)) for m in decl.methods]
    attrs = [_Entity("attribute", attribute_name(cls.qname, a), cls.path, cls.qname, a,
                     Counter((a.type_name,) + a.initializer_tokens)) for a in decl.attributes]
    return _first_by_name(methods), _first_by_name(attrs)


def _greedy(removed: list[_Entity], added: list[_Entity], threshold: float,
            allowed=None) -> list[_Pair]:
    """Greedy one-to-one matching by descending similarity.

    Ties break on (before name, after name). Pairs below ``threshold`` are
    never formed. ``allowed`` optionally restricts which pairs are candidates.
    """
    candidates = []
    for b in removed:
        nb = sum(b.bag.values())
        for a in added:
            if allowed is not None and not allowed(b, a):
                continue
            na = sum(a.bag.values())
            # Dice can be at most 2*min/(sum); skip pairs that cannot reach the cutoff
            if nb + na and 2 * min(nb, na) / (nb + na) < threshold:
                continue
            sim = similarity(b.bag, a.bag)
            if sim >= threshold:
                candidates.append((-sim, b.qname, a.qname, b, a))
    candidates.sort(key=lambda c: c[:3])
    used_b, used_a, pairs = set(), set(), []
    for neg_sim, bq, aq, b, a in candidates:
        if bq in used_b or aq in used_a:
            continue
        used_b.add(bq)
        used_a.add(aq)
        pairs.append(_Pair(b, a, -neg_sim, "similarity"))
    return pairs


class _Matching:
    """All entity pairs between two snapshots, plus the class mapping."""

    def __init__(self, before: Snapshot, after: Snapshot, threshold: float):
        if not 0 < threshold <= 1:
            raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
        self.before = before
        self.after = after
        self.class_pairs = self._match_classes(threshold)
        self.class_map = {p.before.qname: p.after.qname for p in self.class_pairs}
        b_classes = self._class_entities(before, {p.before.qname: p.before for p in self.class_pairs})
        a_classes = self._class_entities(after, {p.after.qname: p.after for p in self.class_pairs})
        b_methods, b_attrs, a_methods, a_attrs = [], [], [], []
        for ent in b_classes:
            m, a = _member_entities(ent)
            b_methods += m
            b_attrs += a
        for ent in a_classes:
            m, a = _member_entities(ent)
            a_methods += m
            a_attrs += a
        self.method_pairs = self._match_members(b_methods, a_methods, threshold, by_signature=True)
        self.attribute_pairs = self._match_members(b_attrs, a_attrs, threshold, by_signature=False)

    @staticmethod
    def _class_entities(snap: Snapshot, chosen: dict[str, _Entity]) -> list[_Entity]:
        out = []
        for q in sorted(snap.classes):
            out.append(chosen.get(q) or _class_entity(snap.class_paths[q], snap.classes[q]))
        return out

    def _match_classes(self, threshold: float) -> list[_Pair]:
        before, after = self.before, self.after
        pairs = []
        for q in sorted(before.classes.keys() & after.classes.keys()):
            b_paths = before.declaring_paths(q)
            a_paths = after.declaring_paths(q)
            common = sorted(set(b_paths) & set(a_paths))
            # a class still declared in one of its old files has not moved
            bp = ap = common[0] if common else None
            if bp is None:
                bp, ap = before.class_paths[q], after.class_paths[q]
            pairs.append(_Pair(_class_entity(bp, before.class_at(bp, q)),
                               _class_entity(ap, after.class_at(ap, q)), 1.0, "exact"))
        removed = [_class_entity(before.class_paths[q], before.classes[q])
                   for q in sorted(before.classes.keys() - after.classes.keys())]
        added = [_class_entity(after.class_paths[q], after.classes[q])
                 for q in sorted(after.classes.keys() - before.classes.keys())]
        return pairs + _greedy(removed, added, threshold)

    def _match_members(self, removed: list[_Entity], added: list[_Entity], threshold: float,
                       by_signature: bool) -> list[_Pair]:
        cmap = self.class_map

        def key(e: _Entity, owner: str | None):
            name = e.decl.signature if by_signature else e.decl.name
            return (owner, name)

        after_index = {}
        for a in added:
            after_index.setdefault(key(a, a.owner), a)
        pairs, rest_b, taken = [], [], set()
        for b in removed:
            owner = cmap.get(b.owner)
            hit = after_index.get(key(b, owner)) if owner is not None else None
            if hit is not None and id(hit) not in taken:
                pairs.append(_Pair(b, hit, 1.0, "exact"))
                taken.add(id(hit))
            else:
                rest_b.append(b)
        rest_a = [a for a in added if id(a) not in taken]

        if by_signature:
            # same owner and name but different parameters; no similarity cutoff
            name_pairs = _greedy(
                rest_b, rest_a, threshold=0.0,
                allowed=lambda b, a: cmap.get(b.owner) == a.owner and b.decl.name == a.decl.name)
            pairs += [_Pair(p.before, p.after, p.similarity, "name") for p in name_pairs]
            used_b = {id(p.before) for p in name_pairs}
            used_a = {id(p.after) for p in name_pairs}
            rest_b = [b for b in rest_b if id(b) not in used_b]
            rest_a = [a for a in rest_a if id(a) not in used_a]

        return pairs + _greedy(rest_b, rest_a, threshold)

    def all_pairs(self) -> list[_Pair]:
        return self.class_pairs + self.method_pairs + self.attribute_pairs


def match_entities(before: Snapshot, after: Snapshot,
                   threshold: float = DEFAULT_THRESHOLD) -> list[MatchPair]:
    m = _Matching(before, after, threshold)
    return [MatchPair(p.before.ref, p.after.ref, p.similarity, p.phase) for p in m.all_pairs()]


# -- classification --------------------------------------------------------


def _split(qname: str) -> tuple[str, str]:
    pkg, _, name = qname.rpartition(".")
    return pkg, name


def _chain_reaches(snap: Snapshot, start: ClassDecl, target_simple_name: str) -> bool:
    """Follow raw superclass names from ``start`` looking for ``target_simple_name``."""
    seen = set()
    current = start
    while current is not None and current.superclass_name:
        raw = current.superclass_name.split("<", 1)[0]
        simple = raw.rsplit(".", 1)[-1]
        if simple == target_simple_name:
            return True
        if simple in seen:
            return False
        seen.add(simple)
        current = snap.find_by_simple_name(simple)
    return False


def _class_refactorings(pair: _Pair) -> list[RefactoringInstance]:
    b, a = pair.before, pair.after
    bl, al = [b.location], [a.location]
    out = []
    if pair.phase == "exact":
        if b.path != a.path:
            out.append(RefactoringInstance(
                RefactoringType.MoveClass,
                f"Move Class {b.qname} from file {b.path} to file {a.path}", bl, al))
        if b.decl.access_modifier != a.decl.access_modifier:
            out.append(RefactoringInstance(
                RefactoringType.ChangeClassAccessModifier,
                f"Change Class Access Modifier {b.decl.access_modifier} to "
                f"{a.decl.access_modifier} in class {a.qname}", bl, al))
        return out
    (bp, bn), (ap, an) = _split(b.qname), _split(a.qname)
    if bp != ap and bn == an:
        kind, verb = RefactoringType.MoveClass, "Move Class"
    elif bp == ap:
        kind, verb = RefactoringType.RenameClass, "Rename Class"
    else:
        kind, verb = RefactoringType.MoveAndRenameClass, "Move And Rename Class"
    out.append(RefactoringInstance(kind, f"{verb} {b.qname} moved to {a.qname}"
                                   if kind is not RefactoringType.RenameClass
                                   else f"{verb} {b.qname} renamed to {a.qname}", bl, al))
    return out


def _parameter_changes(b: _Entity, a: _Entity) -> list[RefactoringInstance]:
    old, new = list(b.decl.parameter_types), list(a.decl.parameter_types)
    delta = len(new) - len(old)
    if delta == 0:
        return []
    sm = difflib.SequenceMatcher(a=old, b=new, autojunk=False)
    kept_old, kept_new = set(), set()
    for block in sm.get_matching_blocks():
        kept_old.update(range(block.a, block.a + block.size))
        kept_new.update(range(block.b, block.b + block.size))
    bl, al = [b.location], [a.location]
    if delta > 0:
        positions = [i for i in range(len(new)) if i not in kept_new][:delta]
        return [RefactoringInstance(
            RefactoringType.AddParameter,
            f"Add Parameter #{i + 1} of type {new[i]} in method {a.qname}", bl, al)
            for i in positions]
    positions = [i for i in range(len(old)) if i not in kept_old][:-delta]
    return [RefactoringInstance(
        RefactoringType.RemoveParameter,
        f"Remove Parameter #{i + 1} of type {old[i]} in method {b.qname}", bl, al)
        for i in positions]


def _member_refactorings(pair: _Pair, class_map: dict, before: Snapshot,
                         after: Snapshot) -> list[RefactoringInstance]:
    b, a = pair.before, pair.after
    is_method = b.kind == "method"
    label = "Method" if is_method else "Attribute"
    bl, al = [b.location], [a.location]
    out = []
    if pair.phase in ("exact", "name"):
        if is_method and pair.phase == "name":
            out += _parameter_changes(b, a)
        if b.decl.access_modifier != a.decl.access_modifier:
            kind = (RefactoringType.ChangeMethodAccessModifier if is_method
                    else RefactoringType.ChangeAttributeAccessModifier)
            out.append(RefactoringInstance(
                kind, f"Change {label} Access Modifier {b.decl.access_modifier} to "
                      f"{a.decl.access_modifier} in {label.lower()} {a.qname}", bl, al))
        return out

    if class_map.get(b.owner) == a.owner:
        if b.decl.name != a.decl.name:
            kind = RefactoringType.RenameMethod if is_method else RefactoringType.RenameAttribute
            out.append(RefactoringInstance(
                kind, f"Rename {label} {b.qname} renamed to {a.qname}", bl, al))
        return out

    if is_method:
        b_cls, a_cls = before.classes.get(b.owner), after.classes.get(a.owner)
        if a_cls is not None and _chain_reaches(after, a_cls, _split(b.owner)[1]):
            out.append(RefactoringInstance(
                RefactoringType.PushDownMethod,
                f"Push Down Method {b.qname} from class {b.owner} to class {a.owner}", bl, al))
            return out
        if b_cls is not None and _chain_reaches(before, b_cls, _split(a.owner)[1]):
            out.append(RefactoringInstance(
                RefactoringType.PullUpMethod,
                f"Pull Up Method {b.qname} from class {b.owner} to class {a.owner}", bl, al))
            return out
    kind = RefactoringType.MoveMethod if is_method else RefactoringType.MoveAttribute
    out.append(RefactoringInstance(
        kind, f"Move {label} {b.qname} from class {b.owner} to class {a.owner}", bl, al))
    return out


def _package_location(snap: Snapshot, package: str) -> CodeLocation:
    return CodeLocation(snap.package_directory(package), "package", package)


def _package_refactorings(m: _Matching) -> tuple[list[RefactoringInstance], set]:
    """Derive package moves, splits and merges from class pairs.

    Returns the instances and the set of (before, after) class names whose
    MoveClass instances a MovePackage subsumes.
    """
    before, after = m.before, m.after
    pkgs_before, pkgs_after = before.packages, after.packages
    targets: dict[str, set[str]] = defaultdict(set)
    sources: dict[str, set[str]] = defaultdict(set)
    unpaired: set[str] = set()
    paired = {p.before.qname: p.after.qname for p in m.class_pairs}
    for q, decl in before.classes.items():
        if q in paired:
            target = after.classes[paired[q]].package_name
            targets[decl.package_name].add(target)
            sources[target].add(decl.package_name)
        else:
            unpaired.add(decl.package_name)

    out: list[RefactoringInstance] = []
    subsumed: set[tuple[str, str]] = set()
    for p in sorted(targets):
        if not p or p in pkgs_after:
            continue
        tgt = targets[p]
        if len(tgt) == 1 and p not in unpaired:
            (q,) = tgt
            if q and q not in pkgs_before and sources[q] == {p}:
                out.append(RefactoringInstance(
                    RefactoringType.MovePackage, f"Move Package {p} to {q}",
                    [_package_location(before, p)], [_package_location(after, q)]))
                subsumed.update((bq, aq) for bq, aq in paired.items()
                                if before.classes[bq].package_name == p)
        elif len(tgt) >= 2 and any(t not in pkgs_before for t in tgt if t):
            tgt_sorted = sorted(t for t in tgt if t)
            if len(tgt_sorted) < 2:
                continue
            out.append(RefactoringInstance(
                RefactoringType.SplitPackage, f"Split Package {p} to [{', '.join(tgt_sorted)}]",
                [_package_location(before, p)], [_package_location(after, t) for t in tgt_sorted]))
    for q in sorted(sources):
        src = sorted(s for s in sources[q] if s)
        if not q or q in pkgs_before or len(src) < 2 or len(src) != len(sources[q]):
            continue
        if any(s in pkgs_after for s in src):
            continue
        out.append(RefactoringInstance(
            RefactoringType.MergePackage, f"Merge Package [{', '.join(src)}] to {q}",
            [_package_location(before, s) for s in src], [_package_location(after, q)]))
    return out, subsumed


def validate_location(loc: CodeLocation, snap: Snapshot) -> bool:
    """Whether ``loc`` names an existing entity of its kind, in its file."""
    name = loc.qualified_entity_name
    if loc.entity_kind == "package":
        return name in snap.packages
    source = snap.files.get(loc.file_path)
    if source is None:
        return False
    for cls in source.classes:
        if loc.entity_kind == "class" and cls.qualified_name == name:
            return True
        if loc.entity_kind == "method" and any(
                method_name(cls.qualified_name, mt) == name for mt in cls.methods):
            return True
        if loc.entity_kind == "attribute" and any(
                attribute_name(cls.qualified_name, at) == name for at in cls.attributes):
            return True
    return False


def detect(before: Snapshot, after: Snapshot,
           threshold: float = DEFAULT_THRESHOLD) -> frozenset[RefactoringInstance]:
    m = _Matching(before, after, threshold)
    package_level, subsumed = _package_refactorings(m)
    found: list[RefactoringInstance] = list(package_level)
    for pair in m.class_pairs:
        for inst in _class_refactorings(pair):
            if inst.type is RefactoringType.MoveClass and (pair.before.qname, pair.after.qname) in subsumed:
                continue
            found.append(inst)
    for pair in m.method_pairs + m.attribute_pairs:
        found += _member_refactorings(pair, m.class_map, before, after)
    return frozenset(
        inst for inst in found
        if all(validate_location(loc, before) for loc in inst.before_locations)
        and all(validate_location(loc, after) for loc in inst.after_locations)
    )


# -- external detections ---------------------------------------------------


def _location_from_record(rec, where: str) -> CodeLocation:
    if not isinstance(rec, dict):
        raise SchemaError("location must be an object", where)
    for key in ("file", "kind", "name"):
        if key not in rec:
            raise SchemaError(f"missing field {key!r}", where)
        if not isinstance(rec[key], str):
            raise SchemaError(f"field {key!r} must be a string", where)
    try:
        return CodeLocation(rec["file"], rec["kind"], rec["name"])
    except ValueError as exc:
        raise SchemaError(str(exc), where) from None


def location_to_record(loc: CodeLocation) -> dict:
    return {"file": loc.file_path, "kind": loc.entity_kind, "name": loc.qualified_entity_name}


def instance_to_record(inst: RefactoringInstance) -> dict:
    return {
        "type": str(inst.type),
        "description": inst.description,
        "before": [location_to_record(x) for x in inst.before_locations],
        "after": [location_to_record(x) for x in inst.after_locations],
    }


def instance_from_record(rec, where: str = "$") -> RefactoringInstance:
    if not isinstance(rec, dict):
        raise SchemaError("record must be an object", where)
    for key, kind in (("type", str), ("description", str), ("before", list), ("after", list)):
        if key not in rec:
            raise SchemaError(f"missing field {key!r}", where)
        if not isinstance(rec[key], kind):
            raise SchemaError(f"field {key!r} must be a {kind.__name__}", where)
    if not rec["type"]:
        raise SchemaError("field 'type' must be non-empty", where)
    before = [_location_from_record(x, f"{where}.before[{i}]") for i, x in enumerate(rec["before"])]
    after = [_location_from_record(x, f"{where}.after[{i}]") for i, x in enumerate(rec["after"])]
    if not before or not after:
        raise SchemaError("before and after must be non-empty", where)
    return RefactoringInstance(coerce_type(rec["type"]), rec["description"], before, after)


def ingest_external_detections(document: str | bytes) -> frozenset[RefactoringInstance]:
    """Parse a JSON list of refactoring records produced by another detector.

    Type names outside the catalog are kept verbatim as strings.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, f"line {exc.lineno}") from None
    if not isinstance(data, list):
        raise SchemaError("document must be a list of records", "$")
    return frozenset(instance_from_record(rec, f"$[{i}]") for i, rec in enumerate(data))
