"""Embedded versioned file store with update/commit/lock semantics.

Layout on disk: ``journal/`` holds one record per revision (line
oriented header plus the commit message), ``blobs/`` holds content
addressed file bodies.  History is append-only; a commit either lands
completely or not at all.  Readers always see the last fully committed
revision.
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
import time
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .fragments import FragmentId

__all__ = [
    "Revision",
    "Repository",
    "LockToken",
    "Conflict",
    "LockHeld",
    "EmptyCommit",
    "NotFound",
    "NoSuchRevision",
    "BadRepoPath",
    "build_log_message",
    "check_repo_path",
]

_PATH_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9._/-]*\.(ocd|sts|ntn)$")


class BadRepoPath(ValueError):
    pass


class Conflict(Exception):
    def __init__(self, path: str, head_revision: int):
        super().__init__(f"{path} changed in r{head_revision}, update first")
        self.path = path
        self.head_revision = head_revision


class LockHeld(Exception):
    def __init__(self, path: str, user: str):
        super().__init__(f"{path} is locked by {user}")
        self.path = path
        self.user = user


class EmptyCommit(ValueError):
    pass


class NotFound(KeyError):
    def __init__(self, path: str):
        super().__init__(path)
        self.path = path


class NoSuchRevision(KeyError):
    def __init__(self, number: int):
        super().__init__(str(number))
        self.number = number


def check_repo_path(path: str) -> str:
    if ".." in path.split("/") or path.startswith("/") or not _PATH_RE.match(path):
        raise BadRepoPath(f"bad repository path {path!r}")
    return path


def build_log_message(user: str, summary: str, fragment: FragmentId | str) -> str:
    """The two-line commit message: attribution line, then the pointer
    to the one fragment that actually changed."""
    if not summary:
        raise ValueError("summary must not be empty")
    return f"[{user}@SWiM] {summary}\nActually changed fragment {fragment}"


@dataclass(frozen=True)
class Revision:
    number: int
    author: str
    timestamp: datetime
    message: str
    changed_paths: tuple[str, ...]

    def header_line(self) -> str:
        # generated at display time, never stored
        stamp = self.timestamp.strftime("%Y-%m-%d %H:%M:%S +0000 (%a, %d %b %Y)")
        n = self.message.count("\n") + 1
        return f"r{self.number} | {self.author} | {stamp} | {n} lines"

    def display(self) -> str:
        return f"{self.header_line()}\n{self.message}"


@dataclass(frozen=True)
class LockToken:
    token: str
    path: str
    user: str
    expires_at: float


@dataclass(frozen=True)
class _Snapshot:
    head: int
    # path -> ordered list of (revision, blob sha); append-only
    files: dict[str, tuple[tuple[int, str], ...]]
    revisions: tuple[Revision, ...]


class Repository:
    """Single-writer append-only store; ``clock`` is injectable so lock
    expiry is testable."""

    def __init__(self, root: str | Path, clock: Callable[[], float] | None = None,
                 lock_ttl: float = 30 * 60):
        self.root = Path(root)
        self.clock = clock or time.time
        self.lock_ttl = lock_ttl
        self._write_lock = threading.Lock()
        self._locks: dict[str, LockToken] = {}
        (self.root / "journal").mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(parents=True, exist_ok=True)
        self._snapshot = self._load()

    # -- loading ---------------------------------------------------------

    def _load(self) -> _Snapshot:
        files: dict[str, tuple[tuple[int, str], ...]] = {}
        revisions: list[Revision] = []
        journal = sorted((self.root / "journal").glob("r*.rec"))
        for rec in journal:
            rev, changes = self._read_record(rec)
            revisions.append(rev)
            for path, sha in changes:
                files[path] = files.get(path, ()) + ((rev.number, sha),)
        head = revisions[-1].number if revisions else 0
        return _Snapshot(head, files, tuple(revisions))

    def _read_record(self, rec: Path) -> tuple[Revision, list[tuple[str, str]]]:
        lines = rec.read_text("utf-8").split("\n")
        number = int(lines[0].split(": ", 1)[1])
        author = lines[1].split(": ", 1)[1]
        timestamp = datetime.fromisoformat(lines[2].split(": ", 1)[1])
        nfiles = int(lines[3].split(": ", 1)[1])
        changes = []
        for i in range(4, 4 + nfiles):
            path, sha = lines[i].rsplit(" ", 1)
            changes.append((path, sha))
        nmsg = int(lines[4 + nfiles].split(": ", 1)[1])
        message = "\n".join(lines[5 + nfiles : 5 + nfiles + nmsg])
        return Revision(number, author, timestamp, message, tuple(p for p, _ in changes)), changes

    # -- queries ---------------------------------------------------------

    @property
    def head_revision(self) -> int:
        return self._snapshot.head

    def paths(self) -> list[str]:
        return sorted(self._snapshot.files)

    def update(self, path: str, at: int | None = None) -> tuple[bytes, int]:
        """Content of ``path`` at revision ``at`` (head when omitted)."""
        check_repo_path(path)
        snap = self._snapshot
        if at is not None and (at < 1 or at > snap.head):
            raise NoSuchRevision(at if at is not None else 0)
        entries = snap.files.get(path)
        if not entries:
            raise NotFound(path)
        wanted = snap.head if at is None else at
        chosen = None
        for rev_no, sha in entries:
            if rev_no <= wanted:
                chosen = (rev_no, sha)
        if chosen is None:
            raise NotFound(path)
        return self._read_blob(chosen[1]), chosen[0]

    def history(self, path: str) -> list[Revision]:
        check_repo_path(path)
        snap = self._snapshot
        if path not in snap.files:
            raise NotFound(path)
        touched = {rev_no for rev_no, _ in snap.files[path]}
        return [r for r in reversed(snap.revisions) if r.number in touched]

    def log(self) -> list[Revision]:
        return list(reversed(self._snapshot.revisions))

    def revision(self, number: int) -> Revision:
        for r in self._snapshot.revisions:
            if r.number == number:
                return r
        raise NoSuchRevision(number)

    # -- locks -----------------------------------------------------------

    def _live_lock(self, path: str) -> LockToken | None:
        token = self._locks.get(path)
        if token is None:
            return None
        if token.expires_at <= self.clock():
            del self._locks[path]
            return None
        return token

    def lock(self, path: str, user: str) -> LockToken:
        check_repo_path(path)
        with self._write_lock:
            if path not in self._snapshot.files:
                raise NotFound(path)
            held = self._live_lock(path)
            if held is not None and held.user != user:
                raise LockHeld(path, held.user)
            token = LockToken(uuid.uuid4().hex, path, user, self.clock() + self.lock_ttl)
            self._locks[path] = token
            return token

    def unlock(self, token: LockToken) -> None:
        with self._write_lock:
            held = self._locks.get(token.path)
            if held is not None and held.token == token.token:
                del self._locks[token.path]

    # -- commits ---------------------------------------------------------

    def commit(
        self,
        paths: list[tuple[str, bytes]],
        author: str,
        message: str,
        base_revision: int | None = None,
    ) -> Revision:
        """Store all ``paths`` under one new revision.

        ``base_revision`` is the optimistic-concurrency check: if any
        path changed after it, the commit is refused unless the author
        holds that path's lock.
        """
        if not paths:
            raise EmptyCommit("nothing to commit")
        if not message.strip():
            raise ValueError("commit message must not be empty")
        for path, _ in paths:
            check_repo_path(path)
        with self._write_lock:
            snap = self._snapshot
            base = snap.head if base_revision is None else base_revision
            for path, _ in paths:
                held = self._live_lock(path)
                if held is not None and held.user != author:
                    raise LockHeld(path, held.user)
                entries = snap.files.get(path, ())
                last_changed = entries[-1][0] if entries else 0
                if last_changed > base and (held is None or held.user != author):
                    raise Conflict(path, last_changed)

            number = snap.head + 1
            timestamp = datetime.fromtimestamp(self.clock(), tz=timezone.utc)
            changes = []
            for path, content in paths:
                sha = hashlib.sha256(content).hexdigest()
                blob = self.root / "blobs" / sha
                if not blob.exists():
                    tmp = blob.with_suffix(".tmp")
                    tmp.write_bytes(content)
                    os.replace(tmp, blob)
                changes.append((path, sha))

            rev = Revision(number, author, timestamp, message,
                           tuple(p for p, _ in paths))
            record = self._format_record(rev, changes)
            rec_path = self.root / "journal" / f"r{number:06d}.rec"
            tmp = rec_path.with_suffix(".tmp")
            tmp.write_text(record, "utf-8")
            os.replace(tmp, rec_path)

            files = dict(snap.files)
            for path, sha in changes:
                files[path] = files.get(path, ()) + ((number, sha),)
            self._snapshot = _Snapshot(number, files, snap.revisions + (rev,))
            return rev

    def _format_record(self, rev: Revision, changes: list[tuple[str, str]]) -> str:
        lines = [
            f"revision: {rev.number}",
            f"author: {rev.author}",
            f"timestamp: {rev.timestamp.isoformat()}",
            f"files: {len(changes)}",
        ]
        lines += [f"{path} {sha}" for path, sha in changes]
        msg_lines = rev.message.split("\n")
        lines.append(f"message: {len(msg_lines)}")
        lines += msg_lines
        return "\n".join(lines)

    def _read_blob(self, sha: str) -> bytes:
        return (self.root / "blobs" / sha).read_bytes()

    # -- export ----------------------------------------------------------

    def export(self, target: str | Path) -> list[str]:
        """Write the head tree as plain files under ``target``."""
        target = Path(target)
        written = []
        for path in self.paths():
            content, _ = self.update(path)
            dest = target / path
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes(content)
            written.append(path)
        return written
