"""Exception hierarchy shared by all cgrminer modules."""

from __future__ import annotations


class CgrMinerError(Exception):
    """Base class for every error raised by cgrminer."""


# -- history model ---------------------------------------------------------


class GraphError(CgrMinerError):
    pass


class UnresolvedParent(GraphError):
    def __init__(self, commit_id: str, parent_id: str):
        super().__init__(f"commit {commit_id!r} references unknown parent {parent_id!r}")
        self.commit_id = commit_id
        self.parent_id = parent_id


class CycleDetected(GraphError):
    def __init__(self, commit_ids):
        self.commit_ids = tuple(sorted(commit_ids))
        super().__init__(f"commit graph contains a cycle through {', '.join(self.commit_ids)}")


class DuplicateCommit(GraphError):
    def __init__(self, commit_id: str):
        super().__init__(f"duplicate commit id {commit_id!r}")
        self.commit_id = commit_id


# -- code model ------------------------------------------------------------


class TokenizeError(CgrMinerError):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


class UnterminatedComment(TokenizeError):
    def __init__(self, line: int):
        super().__init__("unterminated block comment", line)


class UnterminatedString(TokenizeError):
    def __init__(self, line: int):
        super().__init__("unterminated string literal", line)


# -- repositories ----------------------------------------------------------


class RepositoryError(CgrMinerError):
    pass


class NotARepository(RepositoryError):
    def __init__(self, location):
        super().__init__(f"{location} is not a version-controlled directory")
        self.location = location


class ScriptParseError(RepositoryError):
    def __init__(self, message: str, line: int):
        super().__init__(f"history script line {line}: {message}")
        self.line = line


class SnapshotUnavailable(RepositoryError):
    def __init__(self, commit_id: str, reason: str = ""):
        msg = f"snapshot of commit {commit_id!r} is unavailable"
        super().__init__(f"{msg}: {reason}" if reason else msg)
        self.commit_id = commit_id


class UnknownCommit(RepositoryError):
    def __init__(self, commit_id: str):
        super().__init__(f"unknown commit {commit_id!r}")
        self.commit_id = commit_id


# -- analysis / reporting --------------------------------------------------


class MissingDetection(CgrMinerError):
    def __init__(self, commit_id: str):
        super().__init__(f"no fine-grained detection result for commit {commit_id!r}")
        self.commit_id = commit_id


class NoUnits(CgrMinerError):
    """A level produced no squash units, so its frequency is undefined (not zero)."""

    def __init__(self, level: int):
        super().__init__(f"no squash units at level {level}")
        self.level = level


class SchemaError(CgrMinerError):
    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
