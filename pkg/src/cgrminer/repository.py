"""Loading commit graphs and snapshots from git or from history scripts.

History-script grammar (UTF-8, line oriented)::

    # comment (only outside fenced content)
    commit <id>
    parent <id>          # zero or more; default is the previous block
    file <path>
    <<<
    ...content lines...
    >>>
    delete <path>

A block runs until the next ``commit`` line or end of file. Content lines
are kept verbatim (a trailing newline is added to each); a content line
reading exactly ``>>>`` cannot be represented.
"""

from __future__ import annotations

import hashlib
import logging
import os
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .code_model import DEFAULT_EXTENSION, Snapshot, SourceFile, is_source_path, parse_source_file
from ._memo import OnceCache
from .errors import NotARepository, ScriptParseError, SnapshotUnavailable, UnknownCommit
from .history import Commit, CommitGraph, CommitId, build_graph

log = logging.getLogger(__name__)

FENCE_OPEN = "<<<"
FENCE_CLOSE = ">>>"


# -- history scripts -------------------------------------------------------


@dataclass(frozen=True)
class FileOp:
    path: str
    content: str | None  # None means delete

    @property
    def is_delete(self) -> bool:
        return self.content is None


@dataclass(frozen=True)
class CommitBlock:
    id: CommitId
    parents: tuple[CommitId, ...] = ()  # as written; empty means "previous block"
    ops: tuple[FileOp, ...] = ()


@dataclass(frozen=True)
class HistoryScript:
    blocks: tuple[CommitBlock, ...] = ()

    def resolved_parents(self) -> dict[CommitId, tuple[CommitId, ...]]:
        out, prev = {}, None
        for block in self.blocks:
            if block.parents:
                out[block.id] = block.parents
            else:
                out[block.id] = (prev,) if prev is not None else ()
            prev = block.id
        return out


def parse_script(text: str) -> HistoryScript:
    blocks: list[CommitBlock] = []
    seen: set[str] = set()
    cur_id = None
    cur_parents: list[str] = []
    cur_ops: list[FileOp] = []
    # split on "\n" only, so content lines keep any other control characters verbatim
    lines = text.split("\n")

    def finish():
        if cur_id is not None:
            blocks.append(CommitBlock(cur_id, tuple(cur_parents), tuple(cur_ops)))

    i = 0
    while i < len(lines):
        lineno = i + 1
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        keyword, _, arg = line.partition(" ")
        arg = arg.strip()
        if keyword == "commit":
            if not arg or " " in arg:
                raise ScriptParseError("commit needs exactly one id", lineno)
            if arg in seen:
                raise ScriptParseError(f"duplicate commit id {arg!r}", lineno)
            finish()
            seen.add(arg)
            cur_id, cur_parents, cur_ops = arg, [], []
            continue
        if cur_id is None:
            raise ScriptParseError(f"{keyword!r} before any commit", lineno)
        if keyword == "parent":
            if not arg or " " in arg:
                raise ScriptParseError("parent needs exactly one id", lineno)
            if arg not in seen or arg == cur_id:
                raise ScriptParseError(f"parent {arg!r} is not an earlier commit", lineno)
            if arg in cur_parents:
                raise ScriptParseError(f"parent {arg!r} listed twice", lineno)
            cur_parents.append(arg)
        elif keyword == "delete":
            if not arg:
                raise ScriptParseError("delete needs a path", lineno)
            cur_ops.append(FileOp(arg, None))
        elif keyword == "file":
            if not arg:
                raise ScriptParseError("file needs a path", lineno)
            if i >= len(lines) or lines[i].strip() != FENCE_OPEN:
                raise ScriptParseError(f"expected {FENCE_OPEN!r} after file line", lineno + 1)
            i += 1
            body = []
            while True:
                if i >= len(lines):
                    raise ScriptParseError("unterminated content fence", lineno)
                if lines[i].removesuffix("\r") == FENCE_CLOSE:
                    i += 1
                    break
                body.append(lines[i])
                i += 1
            cur_ops.append(FileOp(arg, "".join(ln + "\n" for ln in body)))
        else:
            raise ScriptParseError(f"unknown directive {keyword!r}", lineno)
    finish()
    return HistoryScript(tuple(blocks))


def dump_script(script: HistoryScript) -> str:
    out = []
    for block in script.blocks:
        out.append(f"commit {block.id}")
        out.extend(f"parent {p}" for p in block.parents)
        for op in block.ops:
            if op.is_delete:
                out.append(f"delete {op.path}")
                continue
            out.append(f"file {op.path}")
            out.append(FENCE_OPEN)
            content = op.content
            if content.endswith("\n"):
                content = content[:-1]
            if op.content:
                out.extend(content.split("\n"))
            out.append(FENCE_CLOSE)
        out.append("")
    return "\n".join(out)


# -- repositories ----------------------------------------------------------


class Repository:
    """A commit graph plus lazy, cached access to parsed snapshots."""

    def __init__(self, graph: CommitGraph, extension: str = DEFAULT_EXTENSION):
        self.graph = graph
        self.extension = extension
        self._snapshots = OnceCache()
        self._parsed = OnceCache()

    def read_snapshot(self, commit_id: CommitId | None) -> Snapshot:
        """Parsed snapshot at ``commit_id``; ``None`` yields the empty snapshot."""
        if commit_id is None:
            return Snapshot.empty()
        if commit_id not in self.graph:
            raise UnknownCommit(commit_id)
        return self._snapshots.get(commit_id, lambda: self._load(commit_id))

    def _parse(self, path: str, text: str) -> SourceFile:
        digest = hashlib.sha1(text.encode("utf-8", "surrogatepass")).hexdigest()
        return self._parsed.get((path, digest), lambda: parse_source_file(path, text))

    def _load(self, commit_id: CommitId) -> Snapshot:
        files = self.source_files(commit_id)
        return Snapshot.from_source_files(self._parse(p, t) for p, t in sorted(files.items()))

    def source_files(self, commit_id: CommitId) -> dict[str, str]:
        raise NotImplementedError


class ScriptRepository(Repository):
    def __init__(self, script: HistoryScript, extension: str = DEFAULT_EXTENSION):
        self.script = script
        parents = script.resolved_parents()
        graph = build_graph(Commit(b.id, parents[b.id], snapshot_ref=b.id) for b in script.blocks)
        super().__init__(graph, extension)
        self._blocks = {b.id: b for b in script.blocks}
        self._trees = OnceCache()

    def _tree(self, commit_id: CommitId) -> dict[str, str]:
        # iterative replay along first parents; blocks are topologically ordered
        chain = []
        cid = commit_id
        while cid is not None:
            chain.append(cid)
            cid = self.graph.first_parent(cid)
        tree: dict[str, str] = {}
        for cid in reversed(chain):
            for op in self._blocks[cid].ops:
                if op.is_delete:
                    tree.pop(op.path, None)
                else:
                    tree[op.path] = op.content
        return tree

    def source_files(self, commit_id: CommitId) -> dict[str, str]:
        tree = self._trees.get(commit_id, lambda: self._tree(commit_id))
        return {p: t for p, t in tree.items() if is_source_path(p, self.extension)}


class GitRepository(Repository):
    """Reads history through the ``git`` executable."""

    def __init__(self, path: Path, extension: str = DEFAULT_EXTENSION):
        self.path = Path(path)
        super().__init__(build_graph(self._read_commits()), extension)

    def _git(self, *args: str, input: bytes | None = None) -> bytes:
        proc = subprocess.run(["git", "-C", str(self.path), *args], input=input,
                              capture_output=True, check=False)
        if proc.returncode != 0:
            raise subprocess.CalledProcessError(proc.returncode, args, proc.stdout, proc.stderr)
        return proc.stdout

    def _read_commits(self) -> list[Commit]:
        raw = self._git("log", "--all", "--format=%H%x1f%P%x1f%s%x1e")
        commits = []
        for record in raw.decode("utf-8", "replace").split("\x1e"):
            record = record.strip("\n")
            if not record:
                continue
            sha, parents, subject = record.split("\x1f", 2)
            commits.append(Commit(sha, tuple(parents.split()), subject, snapshot_ref=sha))
        return commits

    def source_files(self, commit_id: CommitId) -> dict[str, str]:
        try:
            listing = self._git("ls-tree", "-r", "-z", "--full-tree", commit_id)
        except subprocess.CalledProcessError as exc:
            raise SnapshotUnavailable(commit_id, exc.stderr.decode(errors="replace").strip()) from None
        entries = []
        for item in listing.split(b"\0"):
            if not item:
                continue
            meta, path = item.split(b"\t", 1)
            mode, kind, sha = meta.split()
            path_s = path.decode("utf-8", "replace")
            # regular files only: skips submodules (commit) and symlinks (120000)
            if kind == b"blob" and mode != b"120000" and is_source_path(path_s, self.extension):
                entries.append((path_s, sha.decode()))
        if not entries:
            return {}
        blobs = self._cat_blobs([sha for _, sha in entries])
        files = {}
        for path, sha in entries:
            data = blobs[sha]
            if b"\0" in data:
                continue  # binary
            files[path] = data.decode("utf-8", "replace")
        return files

    def _cat_blobs(self, shas: Iterable[str]) -> dict[str, bytes]:
        wanted = sorted(set(shas))
        out = self._git("cat-file", "--batch", input="".join(s + "\n" for s in wanted).encode())
        blobs, pos = {}, 0
        for sha in wanted:
            nl = out.index(b"\n", pos)
            header = out[pos:nl].split()
            size = int(header[2])
            blobs[sha] = out[nl + 1:nl + 1 + size]
            pos = nl + 1 + size + 1
        return blobs


@dataclass(frozen=True)
class RepositorySource:
    kind: str  # "vcs-directory" or "history-script"
    location: Path

    def __post_init__(self):
        if self.kind not in ("vcs-directory", "history-script"):
            raise ValueError(f"unknown repository source kind {self.kind!r}")
        object.__setattr__(self, "location", Path(self.location))


def open_repository(source: RepositorySource, extension: str = DEFAULT_EXTENSION) -> Repository:
    location = source.location
    if source.kind == "history-script":
        try:
            data = location.read_bytes()
        except OSError as exc:
            raise NotARepository(f"{location} ({exc.strerror})") from None
        try:
            text = data.decode("utf-8")  # no newline translation: content stays verbatim
        except UnicodeDecodeError as exc:
            raise ScriptParseError(f"not UTF-8 ({exc.reason})", data.count(b"\n", 0, exc.start) + 1) from None
        return ScriptRepository(parse_script(text), extension)
    if not location.is_dir():
        raise NotARepository(location)
    probe = subprocess.run(["git", "-C", str(location), "rev-parse", "--git-dir"],
                           capture_output=True, check=False)
    if probe.returncode != 0:
        raise NotARepository(location)
    log.info("reading git history from %s", os.fspath(location))
    return GitRepository(location, extension)
