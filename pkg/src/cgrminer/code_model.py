"""Structural model of Java-like sources and a lenient parser that builds it.

Only top-level classes, their methods and their attributes are modelled.
Nested types, interfaces, enums, records, constructors and initializer
blocks are consumed and dropped.
"""

from __future__ import annotations

import posixpath
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import TokenizeError, UnterminatedComment, UnterminatedString

DEFAULT_EXTENSION = ".java"

PUBLIC = "public"
PROTECTED = "protected"
PRIVATE = "private"
PACKAGE_PRIVATE = "package-private"

_ACCESS = {PUBLIC, PROTECTED, PRIVATE}
_MODIFIERS = _ACCESS | {
    "static", "final", "abstract", "synchronized", "native", "transient",
    "volatile", "strictfp", "default", "sealed", "non-sealed",
}
_SKIPPED_TYPES = {"interface", "enum", "record"}


# -- tokenizer -------------------------------------------------------------


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch in "_$"


def _is_ident_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_$"


def _scan(text: str) -> Iterator[tuple[str, int]]:
    """Yield (token, line) pairs."""
    i, n, line = 0, len(text), 1
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
        elif ch.isspace():
            i += 1
        elif text.startswith("//", i):
            end = text.find("\n", i)
            i = n if end < 0 else end
        elif text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise UnterminatedComment(line)
            line += text.count("\n", i, end)
            i = end + 2
        elif ch in "\"'":
            start, j = i, i + 1
            while True:
                if j >= n or text[j] == "\n":
                    raise UnterminatedString(line)
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == ch:
                    break
                j += 1
            yield text[start:j + 1], line
            i = j + 1
        elif _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_part(text[j]):
                j += 1
            yield text[i:j], line
            i = j
        elif ch.isdigit():
            j = i + 1
            while j < n and (_is_ident_part(text[j]) or text[j] == "."):
                j += 1
            yield text[i:j], line
            i = j
        else:
            yield ch, line
            i += 1


def tokenize(source_text: str) -> list[str]:
    """Split source text into tokens, dropping comments and whitespace.

    Identifiers, keywords and numeric literals are single tokens; string and
    char literals are single tokens including their quotes; every other
    character is its own token.

    >>> tokenize("int x = 1; // c")
    ['int', 'x', '=', '1', ';']
    """
    return [tok for tok, _ in _scan(source_text)]


# -- model -----------------------------------------------------------------


@dataclass(frozen=True)
class MethodDecl:
    name: str
    parameter_types: tuple[str, ...]
    return_type: str
    access_modifier: str = PACKAGE_PRIVATE
    body_tokens: tuple[str, ...] = ()

    @property
    def signature(self) -> str:
        return f"{self.name}({','.join(self.parameter_types)})"


@dataclass(frozen=True)
class AttributeDecl:
    name: str
    type_name: str
    access_modifier: str = PACKAGE_PRIVATE
    initializer_tokens: tuple[str, ...] = ()

    @property
    def signature(self) -> str:
        return f"{self.type_name} {self.name}"


@dataclass(frozen=True)
class ClassDecl:
    name: str
    qualified_name: str
    access_modifier: str = PACKAGE_PRIVATE
    superclass_name: str | None = None
    attributes: tuple[AttributeDecl, ...] = ()
    methods: tuple[MethodDecl, ...] = ()

    @property
    def package_name(self) -> str:
        head, _, _ = self.qualified_name.rpartition(".")
        return head

    def member_signatures(self) -> list[str]:
        return [m.signature for m in self.methods] + [a.signature for a in self.attributes]


@dataclass(frozen=True)
class ParseWarning:
    path: str
    message: str


@dataclass(frozen=True)
class SourceFile:
    path: str
    package_name: str = ""
    classes: tuple[ClassDecl, ...] = ()
    warnings: tuple[ParseWarning, ...] = field(default=(), compare=False)


def qualify(package_name: str, name: str) -> str:
    return f"{package_name}.{name}" if package_name else name


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Parsed source tree at one commit.

    ``classes`` maps each qualified class name to its canonical declaration.
    When several files declare the same name, the lexicographically smallest
    path wins and a warning is recorded; the other declarations stay in their
    :class:`SourceFile` and remain visible through :meth:`declaring_paths`.
    """

    files: Mapping[str, SourceFile]
    classes: Mapping[str, ClassDecl]
    class_paths: Mapping[str, str]
    warnings: tuple[ParseWarning, ...] = ()

    @classmethod
    def from_source_files(cls, files: Iterable[SourceFile]) -> "Snapshot":
        by_path = {f.path: f for f in sorted(files, key=lambda f: f.path)}
        classes: dict[str, ClassDecl] = {}
        class_paths: dict[str, str] = {}
        warnings = [w for f in by_path.values() for w in f.warnings]
        for path, source in by_path.items():
            for decl in source.classes:
                q = decl.qualified_name
                if q in classes:
                    warnings.append(ParseWarning(
                        path, f"class {q} already declared in {class_paths[q]}; ignoring this declaration"))
                    continue
                classes[q] = decl
                class_paths[q] = path
        warnings.sort(key=lambda w: w.path)  # stable: per-file order is kept
        return cls(MappingProxyType(by_path), MappingProxyType(classes),
                   MappingProxyType(class_paths), tuple(warnings))

    @classmethod
    def empty(cls) -> "Snapshot":
        return cls.from_source_files(())

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        return dict(self.files) == dict(other.files)

    __hash__ = None

    def __len__(self) -> int:
        return len(self.files)

    @property
    def packages(self) -> frozenset[str]:
        return frozenset(d.package_name for d in self.classes.values())

    def declaring_paths(self, qualified_name: str) -> list[str]:
        return [p for p, f in self.files.items()
                if any(c.qualified_name == qualified_name for c in f.classes)]

    def class_at(self, path: str, qualified_name: str) -> ClassDecl | None:
        source = self.files.get(path)
        if source is None:
            return None
        for decl in source.classes:
            if decl.qualified_name == qualified_name:
                return decl
        return None

    def package_directory(self, package_name: str) -> str:
        paths = sorted(p for q, p in self.class_paths.items()
                       if self.classes[q].package_name == package_name)
        return posixpath.dirname(paths[0]) if paths else ""

    def find_by_simple_name(self, simple_name: str) -> ClassDecl | None:
        """Canonical class whose simple name matches; smallest qualified name wins."""
        hits = sorted(q for q, d in self.classes.items() if d.name == simple_name)
        return self.classes[hits[0]] if hits else None


# -- parser ----------------------------------------------------------------


class _ParseFailure(Exception):
    pass


_OPEN = {"(": ")", "[": "]", "{": "}"}


class _Parser:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.i = 0

    def peek(self, k: int = 0) -> str | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise _ParseFailure("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise _ParseFailure(f"expected {tok!r}, found {got!r}")

    def ident(self) -> str:
        tok = self.next()
        if not _is_ident_start(tok[0]):
            raise _ParseFailure(f"expected identifier, found {tok!r}")
        return tok

    def balanced(self) -> list[str]:
        """Consume a bracketed group starting at the current token; return its interior."""
        opener = self.next()
        if opener not in _OPEN:
            raise _ParseFailure(f"expected bracket, found {opener!r}")
        stack = [_OPEN[opener]]
        start = self.i
        while stack:
            tok = self.next()
            if tok in _OPEN:
                stack.append(_OPEN[tok])
            elif tok in (")", "]", "}"):
                if tok != stack.pop():
                    raise _ParseFailure(f"mismatched {tok!r}")
        return self.toks[start:self.i - 1]

    def angle_group(self) -> list[str]:
        """Consume ``<...>`` allowing nesting; return all tokens including brackets."""
        start = self.i
        depth = 0
        while True:
            tok = self.next()
            if tok == "<":
                depth += 1
            elif tok == ">":
                depth -= 1
                if depth == 0:
                    return self.toks[start:self.i]
            elif tok in ";{}":
                raise _ParseFailure("unterminated type arguments")

    def skip_annotations(self) -> None:
        while self.peek() == "@" and self.peek(1) != "interface":
            self.next()
            self.ident()
            while self.peek() == "." and self.peek(1) is not None:
                self.next()
                self.ident()
            if self.peek() == "(":
                self.balanced()

    def modifiers(self) -> list[str]:
        mods = []
        while True:
            self.skip_annotations()
            tok = self.peek()
            if tok in _MODIFIERS:
                mods.append(self.next())
            elif tok == "non" and self.peek(1) == "-" and self.peek(2) == "sealed":
                self.i += 3
            else:
                return mods

    def type_name(self) -> str:
        parts = [self.ident()]
        while True:
            tok = self.peek()
            if tok == "." and self.peek(1) not in (None, "."):
                parts.append(self.next())
                parts.append(self.ident())
            elif tok == "<":
                parts.extend(self.angle_group())
            elif tok == "[" and self.peek(1) == "]":
                parts.extend((self.next(), self.next()))
            elif tok == "." and self.peek(1) == "." and self.peek(2) == ".":
                parts.extend((self.next(), self.next(), self.next()))
            else:
                return "".join(parts)

    def skip_to_body(self) -> None:
        """Skip a type header up to and including its brace-balanced body."""
        while self.peek() != "{":
            if self.peek() == "(":
                self.balanced()  # record components
            else:
                self.next()
        self.balanced()


def _access(mods: list[str]) -> str:
    for m in mods:
        if m in _ACCESS:
            return m
    return PACKAGE_PRIVATE


def _split_top_level(tokens: list[str], sep: str = ",") -> list[list[str]]:
    parts, cur, depth = [], [], 0
    for tok in tokens:
        if tok in "([{<":
            depth += 1
        elif tok in ")]}>":
            depth -= 1
        if tok == sep and depth == 0:
            parts.append(cur)
            cur = []
        else:
            cur.append(tok)
    if cur:
        parts.append(cur)
    return parts


def _parameter_types(tokens: list[str]) -> tuple[str, ...]:
    types = []
    for param in _split_top_level(tokens):
        p = _Parser(param)
        p.modifiers()  # final, annotations
        t = p.type_name()
        p.ident()  # parameter name
        while p.peek() == "[":  # C-style array suffix on the name
            p.expect("[")
            p.expect("]")
            t += "[]"
        if p.peek() is not None:
            raise _ParseFailure(f"malformed parameter {' '.join(param)!r}")
        types.append(t)
    return tuple(types)


def _parse_class_body(p: _Parser, class_name: str):
    attributes: list[AttributeDecl] = []
    methods: list[MethodDecl] = []
    while True:
        tok = p.peek()
        if tok is None:
            raise _ParseFailure(f"class {class_name} is not closed")
        if tok == "}":
            p.next()
            return tuple(attributes), tuple(methods)
        if tok == ";":
            p.next()
            continue
        mods = p.modifiers()
        tok = p.peek()
        if tok == "{":  # initializer block
            p.balanced()
            continue
        if tok in ("class", "@") or tok in _SKIPPED_TYPES:
            p.skip_to_body()
            continue
        if tok == "<":  # generic method type parameters
            p.angle_group()
        if p.peek(1) == "(" and p.peek() == class_name:  # constructor
            p.next()
            p.balanced()
            while p.peek() not in ("{", ";"):
                p.next()
            if p.next() == "{":
                p.i -= 1
                p.balanced()
            continue
        type_name = p.type_name()
        name = p.ident()
        if p.peek() == "(":
            params = _parameter_types(p.balanced())
            while p.peek() == "[":  # legacy array return syntax
                p.balanced()
            if p.peek() == "throws":
                while p.peek() not in ("{", ";"):
                    p.next()
            if p.peek() == "default":  # annotation element default
                while p.peek() != ";":
                    p.next()
            if p.peek() == "{":
                body = tuple(p.balanced())
            else:
                p.expect(";")
                body = ()
            methods.append(MethodDecl(name, params, type_name, _access(mods), body))
            continue
        # field declaration, possibly with several declarators
        decl_tokens = [name]
        depth = 0
        while True:
            t = p.next()
            if t in "([{":
                depth += 1
            elif t in ")]}":
                depth -= 1
            elif t == ";" and depth == 0:
                break
            decl_tokens.append(t)
        for declarator in _split_top_level(decl_tokens):
            if not declarator or not _is_ident_start(declarator[0][0]):
                raise _ParseFailure("malformed field declaration")
            attr_type = type_name
            rest = declarator[1:]
            while rest[:2] == ["[", "]"]:
                attr_type += "[]"
                rest = rest[2:]
            init: tuple[str, ...] = ()
            if rest:
                if rest[0] != "=":
                    raise _ParseFailure("malformed field declaration")
                init = tuple(rest[1:])
            attributes.append(AttributeDecl(declarator[0], attr_type, _access(mods), init))


def _parse_compilation_unit(tokens: list[str]) -> tuple[str, list[ClassDecl]]:
    p = _Parser(tokens)
    package = ""
    p.skip_annotations()
    if p.peek() == "package":
        p.next()
        parts = [p.ident()]
        while p.peek() == ".":
            p.next()
            parts.append(p.ident())
        p.expect(";")
        package = ".".join(parts)
    classes = []
    while p.peek() is not None:
        if p.peek() == "import":
            while p.next() != ";":
                pass
            continue
        if p.peek() == ";":
            p.next()
            continue
        mods = p.modifiers()
        tok = p.peek()
        if tok == "class":
            p.next()
            name = p.ident()
            if p.peek() == "<":
                p.angle_group()
            superclass = None
            while p.peek() != "{":
                tok = p.next()
                if tok == "extends":
                    superclass = p.type_name()
                elif tok in ("implements", "permits", ","):
                    p.type_name()
                else:
                    raise _ParseFailure(f"unexpected {tok!r} in class header")
            p.next()
            attrs, meths = _parse_class_body(p, name)
            classes.append(ClassDecl(name, qualify(package, name), _access(mods),
                                     superclass, attrs, meths))
        elif tok in _SKIPPED_TYPES or tok == "@":
            p.skip_to_body()
        else:
            raise _ParseFailure(f"unexpected {tok!r} at top level")
    return package, classes


def parse_source_file(path: str, source_text: str) -> SourceFile:
    """Parse one compilation unit; never raises on malformed input.

    Anything the grammar does not recognise yields a file with no classes and
    a single warning describing the first problem.
    """
    try:
        tokens = tokenize(source_text)
        package, classes = _parse_compilation_unit(tokens)
    except (TokenizeError, _ParseFailure) as exc:
        return SourceFile(path, "", (), (ParseWarning(path, str(exc)),))
    warnings = []
    seen = set()
    kept = []
    for decl in classes:
        if decl.qualified_name in seen:
            warnings.append(ParseWarning(path, f"duplicate class {decl.qualified_name}"))
            continue
        seen.add(decl.qualified_name)
        kept.append(decl)
    return SourceFile(path, package, tuple(kept), tuple(warnings))


def is_source_path(path: str, extension: str = DEFAULT_EXTENSION) -> bool:
    return path.endswith(extension)


def build_snapshot(files: Mapping[str, str], extension: str = DEFAULT_EXTENSION) -> Snapshot:
    return Snapshot.from_source_files(
        parse_source_file(path, text)
        for path, text in files.items()
        if is_source_path(path, extension)
    )
