"""Per-page discussion forums with argumentation-typed posts.

A thread starts with an Issue (or Question, or an untyped post); Ideas
answer Issues, Positions take sides on Ideas, and a single Decision per
thread records the Idea that settled it.  Question and Untyped replies
are allowed everywhere so conversations never get stuck.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Callable

from .fragments import FragmentId
from .graph import NAMESPACES, RDF_TYPE, Triple

__all__ = [
    "PostType",
    "Polarity",
    "Post",
    "Forums",
    "StatsReport",
    "TypeNotAllowed",
    "MissingPolarity",
    "MissingDecidedIdea",
    "AlreadyDecided",
    "UnknownPost",
    "corpus_stats",
]


class PostType(str, Enum):
    ISSUE = "Issue"
    IDEA = "Idea"
    POSITION = "Position"
    DECISION = "Decision"
    QUESTION = "Question"
    UNTYPED = "Untyped"


class Polarity(str, Enum):
    SUPPORT = "support"
    OBJECT = "object"


class TypeNotAllowed(ValueError):
    def __init__(self, parent_type: PostType | None, ptype: PostType):
        where = f"a {parent_type.value} post" if parent_type else "the top level"
        super().__init__(f"{ptype.value} cannot reply to {where}")
        self.parent_type = parent_type
        self.ptype = ptype


class MissingPolarity(ValueError):
    pass


class MissingDecidedIdea(ValueError):
    pass


class AlreadyDecided(ValueError):
    pass


class UnknownPost(KeyError):
    pass


@dataclass(frozen=True)
class Post:
    id: str
    forum: str
    parent: str | None
    author: str
    timestamp: datetime
    ptype: PostType
    polarity: Polarity | None
    decided_idea: str | None
    body: str


@dataclass(frozen=True)
class StatsReport:
    by_type: dict[str, int]
    cd_level: int
    symbol_level: int
    item_level: int
    unclassified: int
    total: int


class Forums:
    """All discussion state; insertion is serialized per store."""

    def __init__(self, clock: Callable[[], datetime] | None = None):
        self._posts: dict[str, Post] = {}
        self._order: list[str] = []
        self._lock = threading.Lock()
        self._clock = clock or (lambda: datetime.now(timezone.utc))

    # -- reads -------------------------------------------------------------

    def post(self, post_id: str) -> Post:
        try:
            return self._posts[post_id]
        except KeyError:
            raise UnknownPost(post_id) from None

    def all_posts(self) -> list[Post]:
        return [self._posts[i] for i in self._order]

    def forum_posts(self, forum: FragmentId | str) -> list[Post]:
        forum = str(forum)
        return [p for p in self.all_posts() if p.forum == forum]

    def thread_root(self, post: Post) -> Post:
        while post.parent is not None:
            post = self.post(post.parent)
        return post

    def thread_posts(self, root: Post) -> list[Post]:
        members = {root.id}
        out = [root]
        for p in self.forum_posts(root.forum):
            if p.parent in members:
                members.add(p.id)
                out.append(p)
        return out

    def thread_decision(self, root: Post) -> Post | None:
        for p in self.thread_posts(root):
            if p.ptype == PostType.DECISION:
                return p
        return None

    # -- the reply-type state machine ---------------------------------------

    def allowed_reply_types(self, parent: Post | None) -> set[PostType]:
        """Which typed reply buttons a composer may offer under ``parent``."""
        if parent is None:
            return {PostType.ISSUE, PostType.QUESTION, PostType.UNTYPED}
        if parent.ptype == PostType.ISSUE:
            out = {PostType.IDEA, PostType.QUESTION, PostType.UNTYPED}
        elif parent.ptype == PostType.IDEA:
            out = {PostType.POSITION, PostType.QUESTION, PostType.UNTYPED}
        else:
            out = {PostType.QUESTION, PostType.UNTYPED}
        root = self.thread_root(parent)
        if root.ptype == PostType.ISSUE and self.thread_decision(root) is None:
            out.add(PostType.DECISION)
        return out

    # -- writes --------------------------------------------------------------

    def add_post(
        self,
        forum: FragmentId | str,
        parent: str | None,
        ptype: PostType,
        body: str,
        author: str,
        polarity: Polarity | None = None,
        decided_idea: str | None = None,
        now: datetime | None = None,
        post_id: str | None = None,
    ) -> Post:
        forum = str(forum)
        with self._lock:
            parent_post: Post | None = None
            if parent is not None:
                parent_post = self.post(parent)
                if parent_post.forum != forum:
                    raise TypeNotAllowed(parent_post.ptype, ptype)
            if ptype == PostType.DECISION and parent_post is not None:
                root = self.thread_root(parent_post)
                if root.ptype == PostType.ISSUE and self.thread_decision(root) is not None:
                    raise AlreadyDecided(f"thread {root.id} already has a decision")
            if ptype not in self.allowed_reply_types(parent_post):
                raise TypeNotAllowed(parent_post.ptype if parent_post else None, ptype)
            if ptype == PostType.POSITION:
                if polarity is None:
                    raise MissingPolarity("a Position must support or object")
            elif polarity is not None:
                raise TypeNotAllowed(parent_post.ptype if parent_post else None, ptype)
            if ptype == PostType.DECISION:
                if decided_idea is None:
                    raise MissingDecidedIdea("a Decision must name the agreed Idea")
                assert parent_post is not None
                root = self.thread_root(parent_post)
                thread_ids = {p.id: p for p in self.thread_posts(root)}
                idea = thread_ids.get(decided_idea)
                if idea is None or idea.ptype != PostType.IDEA:
                    raise MissingDecidedIdea(
                        f"{decided_idea!r} is not an Idea in this thread"
                    )
            post = Post(
                post_id or uuid.uuid4().hex,
                forum,
                parent,
                author,
                now or self._clock(),
                ptype,
                polarity,
                decided_idea if ptype == PostType.DECISION else None,
                body,
            )
            if post.id in self._posts:
                raise ValueError(f"post id {post.id!r} already used")
            self._posts[post.id] = post
            self._order.append(post.id)
            return post

    # -- graph projection ------------------------------------------------------

    def to_triples(self, namespaces: dict[str, str] | None = None) -> list[Triple]:
        ns = namespaces or NAMESPACES
        arguonto = ns["arguonto"]
        sioc = ns["sioc"]
        ikewiki = ns["ikewiki"]
        out: list[Triple] = []
        seen_forums: set[str] = set()
        for post in self.all_posts():
            if post.forum not in seen_forums:
                seen_forums.add(post.forum)
                out.append(
                    Triple(f"page:{post.forum}", ikewiki + "hasDiscussion", f"forum:{post.forum}")
                )
            subject = f"post:{post.id}"
            out.append(Triple(subject, RDF_TYPE, arguonto + post.ptype.value))
            out.append(Triple(subject, sioc + "has_container", f"forum:{post.forum}"))
            if post.parent is not None:
                out.append(Triple(subject, sioc + "reply_of", f"post:{post.parent}"))
            if post.polarity is not None:
                out.append(Triple(subject, arguonto + "polarity", post.polarity.value, literal=True))
            if post.ptype == PostType.DECISION:
                root = self.thread_root(post)
                out.append(Triple(subject, arguonto + "decides", f"post:{root.id}"))
        return out

    # -- the line-delimited corpus format --------------------------------------

    def export_lines(self) -> str:
        lines = []
        for p in self.all_posts():
            lines.append(
                json.dumps(
                    {
                        "id": p.id,
                        "forum": p.forum,
                        "parent": p.parent,
                        "type": p.ptype.value,
                        "polarity": p.polarity.value if p.polarity else None,
                        "decided_idea": p.decided_idea,
                        "author": p.author,
                        "timestamp": p.timestamp.isoformat(),
                        "body": p.body,
                    },
                    ensure_ascii=False,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def import_lines(self, text: str) -> int:
        count = 0
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            self.add_post(
                rec["forum"],
                rec.get("parent"),
                PostType(rec["type"]),
                rec.get("body", ""),
                rec.get("author", "unknown"),
                Polarity(rec["polarity"]) if rec.get("polarity") else None,
                rec.get("decided_idea"),
                datetime.fromisoformat(rec["timestamp"]),
                post_id=rec["id"],
            )
            count += 1
        return count


def corpus_stats(forums: Forums) -> StatsReport:
    """Counts by post type and by page granularity."""
    by_type: dict[str, int] = {t.value: 0 for t in PostType}
    cd_level = symbol_level = item_level = 0
    posts = forums.all_posts()
    for p in posts:
        by_type[p.ptype.value] += 1
        fid = FragmentId.parse(p.forum)
        if fid.item is not None:
            item_level += 1
        elif fid.symbol is not None:
            symbol_level += 1
        else:
            cd_level += 1
    return StatsReport(
        by_type,
        cd_level,
        symbol_level,
        item_level,
        by_type[PostType.UNTYPED.value],
        len(posts),
    )
