"""Rendered-page cache with graph-driven notation invalidation.

Entries are keyed by fragment id and validated against a fingerprint of
the page's own input bytes, so content edits invalidate themselves.
Notation edits leave the bytes alone; for those the cache is told which
symbol changed and evicts every page whose formulas use it, plus the
enclosing fragments, by querying the triple graph.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable

from typing import Mapping

from .fragments import FragmentId, InvalidName
from .graph import NAMESPACES, Iri, Triple, eval_query, parse_query
from .notation import RenderedPage

__all__ = ["CacheEntry", "RenderCache", "users_of_symbol"]


@dataclass(frozen=True)
class CacheEntry:
    page: FragmentId
    rendered: RenderedPage
    fingerprint: str
    built_at_revision: int


class RenderCache:
    """Thread-safe render memo.

    ``render`` produces the page, ``fingerprint`` captures everything
    the rendering reads from the page's own sources (a hash of the
    reassembled fragment bytes); a stale fingerprint forces a fresh
    render.
    """

    def __init__(
        self,
        render: Callable[[FragmentId], RenderedPage],
        fingerprint: Callable[[FragmentId], str],
        head_revision: Callable[[], int] = lambda: 0,
    ):
        self._render = render
        self._fingerprint = fingerprint
        self._head_revision = head_revision
        self._entries: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.renders = 0
        self.evictions = 0

    def get_rendered(self, page: FragmentId) -> RenderedPage:
        key = str(page)
        fingerprint = self._fingerprint(page)
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None and entry.fingerprint == fingerprint:
                self.hits += 1
                return entry.rendered
            self.misses += 1
        rendered = self._render(page)
        with self._lock:
            self.renders += 1
            self._entries[key] = CacheEntry(
                page, rendered, fingerprint, self._head_revision()
            )
        return rendered

    def invalidate_for_symbol(
        self, sym: tuple[str, str], store: Iterable[Triple],
        namespaces: Mapping[str, str] | None = None,
    ) -> set[FragmentId]:
        """Evict the pages whose output may change when ``sym``'s
        notation does: every fragment with a formula using the symbol,
        closed upward over part-whole edges."""
        evicted = users_of_symbol(sym, store, namespaces)
        with self._lock:
            for fid in evicted:
                if self._entries.pop(str(fid), None) is not None:
                    self.evictions += 1
        return evicted

    def counters(self) -> dict[str, int]:
        with self._lock:
            return {
                "hits": self.hits,
                "misses": self.misses,
                "renders": self.renders,
                "evictions": self.evictions,
                "entries": len(self._entries),
            }

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


_USES_QUERY = "SELECT ?F WHERE {{ ?F omo:usesSymbol page:{target} . }}"


def users_of_symbol(sym: tuple[str, str], store: Iterable[Triple],
                    namespaces: Mapping[str, str] | None = None) -> set[FragmentId]:
    """Holders of formulas using ``sym`` plus their part-whole ancestors."""
    ns = namespaces or NAMESPACES
    triples = list(store)
    try:
        target = FragmentId(sym[0], sym[1])
    except InvalidName:
        return set()
    rows = eval_query(parse_query(_USES_QUERY.format(target=target), ns), triples)

    has_part = ns["omo"] + "hasPart"
    parents: dict[str, str] = {}
    for t in triples:
        if t.predicate == has_part:
            parents[t.obj] = t.subject

    out: set[FragmentId] = set()
    for row in rows:
        term = row.get("F")
        if not isinstance(term, Iri) or not term.value.startswith("page:"):
            continue
        node = term.value
        while node is not None and node.startswith("page:"):
            try:
                out.add(FragmentId.parse(node[len("page:"):]))
            except InvalidName:
                break
            node = parents.get(node)
    return out
