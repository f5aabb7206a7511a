"""Glue between the store, the fragmenter, the graph, the renderer,
the cache, and the forums: one object the HTTP layer and the CLI both
drive.

All reads go against an immutable snapshot built from the head
revision; every successful commit swaps in a fresh snapshot.  Failed
edits never touch the store, the snapshot, or the cache.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .cache import RenderCache
from .fragments import (
    FragmentId,
    FragmentKind,
    FragmentNode,
    FragmentTree,
    UnknownFragment,
    apply_fragment_edit,
    reassemble,
    split_cd,
)
from .forum import Forums, Polarity, Post, PostType
from .graph import NAMESPACES, Triple, eval_query, extract_triples, open_issues, parse_query
from .notation import (
    El,
    NotationDef,
    NotationTable,
    RenderedPage,
    parse_ntn,
    render_page,
)
from .om import ContentDictionary, Diagnostic, parse_cd, parse_sts, validate_cd
from .store import Repository, Revision, build_log_message
from .xmlscan import escape_text

__all__ = ["WikiConfig", "CdWiki", "WikiSnapshot", "ROLES_ORDER"]

ROLES_ORDER = {"visitor": 0, "cd-editor": 1, "administrator": 2}


@dataclass
class WikiConfig:
    tokens: dict[str, tuple[str, str]] = field(default_factory=dict)  # token -> (user, role)
    lock_ttl: float = 30 * 60
    port: int = 8080
    namespaces: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "WikiConfig":
        raw = json.loads(Path(path).read_text("utf-8"))
        tokens = {
            tok: (entry["user"], entry["role"]) for tok, entry in raw.get("tokens", {}).items()
        }
        for _, role in tokens.values():
            if role not in ROLES_ORDER:
                raise ValueError(f"unknown role {role!r}")
        return cls(
            tokens,
            float(raw.get("lock_ttl", 30 * 60)),
            int(raw.get("port", 8080)),
            dict(raw.get("namespaces", {})),
        )

    def identify(self, token: str | None) -> tuple[str, str] | None:
        """(user, role) for a token; None when unknown.  With no tokens
        configured the wiki runs open and every caller is an
        administrator."""
        if not self.tokens:
            return ("anonymous", "administrator")
        if token is None:
            return None
        return self.tokens.get(token)


@dataclass(frozen=True)
class WikiSnapshot:
    revision: int
    cds: dict[str, ContentDictionary]
    trees: dict[str, FragmentTree]
    table: NotationTable
    structural_triples: tuple[Triple, ...]
    diagnostics: tuple[Diagnostic, ...]

    def node(self, fid: FragmentId) -> FragmentNode:
        tree = self.trees.get(fid.cd)
        if tree is None:
            raise UnknownFragment(fid)
        return tree.node(fid)

    def expanded_source(self, fid: FragmentId) -> bytes:
        """Fragment bytes with include links expanded; the render input."""
        tree = self.trees.get(fid.cd)
        if tree is None:
            raise UnknownFragment(fid)
        node = tree.node(fid)

        def expand(n: FragmentNode) -> bytes:
            if n.kind in (FragmentKind.PROPERTY, FragmentKind.EXAMPLE):
                return n.source
            out = n.source
            for child in n.children():
                out = out.replace(
                    f'<xi:include href="{child}"/>'.encode("utf-8"),
                    expand(tree.node(child)),
                )
            return out

        return expand(node)


class CdWiki:
    def __init__(self, repo: Repository, forums: Forums | None = None,
                 config: WikiConfig | None = None):
        self.repo = repo
        self.forums = forums or Forums()
        self.config = config or WikiConfig()
        self.namespaces = {**NAMESPACES, **self.config.namespaces}
        self._swap = threading.Lock()
        self._snapshot = self._build_snapshot()
        self.cache = RenderCache(
            self._render_page, self._fingerprint, lambda: self.repo.head_revision
        )

    # -- snapshot ----------------------------------------------------------

    @property
    def snapshot(self) -> WikiSnapshot:
        return self._snapshot

    def _build_snapshot(self) -> WikiSnapshot:
        cds: dict[str, ContentDictionary] = {}
        trees: dict[str, FragmentTree] = {}
        defs: list[NotationDef] = []
        diagnostics: list[Diagnostic] = []
        for path in self.repo.paths():
            content, _ = self.repo.update(path)
            if path.startswith("cd/") and path.endswith(".ocd"):
                cd = parse_cd(content)
                stem = path[len("cd/") : -len(".ocd")]
                if cd.name != stem:
                    raise ValueError(f"{path}: CDName {cd.name!r} does not match file stem")
                cds[cd.name] = cd
                trees[cd.name] = split_cd(cd)
            elif path.startswith("ntn/") and path.endswith(".ntn"):
                defs.extend(parse_ntn(content, Path(path).stem))
        for cd in cds.values():
            diagnostics.extend(validate_cd(cd, tuple(p for p in cds.values() if p is not cd)))
            sts_path = f"sts/{cd.name}.sts"
            if sts_path in self.repo.paths():
                content, _ = self.repo.update(sts_path)
                _, sts_diags = parse_sts(content, cd)
                diagnostics.extend(sts_diags)
        triples: list[Triple] = []
        for name, tree in trees.items():
            triples.extend(extract_triples(tree, cds[name], self.namespaces))
        return WikiSnapshot(
            self.repo.head_revision,
            cds,
            trees,
            NotationTable(defs),
            tuple(triples),
            tuple(diagnostics),
        )

    def _rebuild(self) -> None:
        with self._swap:
            self._snapshot = self._build_snapshot()

    def triples(self) -> list[Triple]:
        seen: set[Triple] = set()
        out: list[Triple] = []
        for t in list(self._snapshot.structural_triples) + self.forums.to_triples(self.namespaces):
            if t not in seen:
                seen.add(t)
                out.append(t)
        return out

    # -- rendering -----------------------------------------------------------

    def _render_page(self, fid: FragmentId) -> RenderedPage:
        snap = self._snapshot
        return render_page(fid, snap.cds, snap.table)

    def _fingerprint(self, fid: FragmentId) -> str:
        return hashlib.sha256(self._snapshot.expanded_source(fid)).hexdigest()

    def page_html(self, fid: FragmentId) -> str:
        """Full page: navigation chrome around the rendered fragment."""
        snap = self._snapshot
        tree = snap.trees.get(fid.cd)
        if tree is None:
            raise UnknownFragment(fid)
        node = tree.node(fid)
        rendered = self.cache.get_rendered(fid)

        nav = El("nav", {"class": "fragment-nav"})
        if fid.parent is not None:
            nav.append(El("a", {"class": "up", "href": f"/page/{fid.parent}"}, [str(fid.parent)]))
        children = El("ul", {"class": "children"})
        for child in node.children():
            item = El("li")
            item.append(El("a", {"href": f"/page/{child}"}, [str(child)]))
            children.append(item)
        if node.children():
            nav.append(children)
        nav.append(
            El("a", {"class": "discussion", "href": f"/page/{fid}/discussion"}, ["discussion"])
        )

        return (
            "<!DOCTYPE html>\n"
            f'<html><head><meta charset="utf-8"/><title>{escape_text(str(fid))}</title>'
            '<link rel="stylesheet" href="/app.css"/></head>\n'
            f"<body>{nav.to_xml()}<main>{rendered.xml}</main>"
            '<script type="module" src="/app.js"></script></body></html>\n'
        )

    def page_om(self, fid: FragmentId) -> str:
        """Every object of the fragment, as plain OpenMath XML."""
        from .om import serialize_om_object

        snap = self._snapshot
        cd = snap.cds.get(fid.cd)
        if cd is None:
            raise UnknownFragment(fid)
        self._snapshot.node(fid)  # existence check
        objects = []
        for sym in cd.symbols:
            if fid.symbol is not None and sym.name != fid.symbol:
                continue
            for item in sym.items:
                if hasattr(item, "obj") and item.obj is not None:
                    objects.append(item.obj)
                elif hasattr(item, "segments"):
                    objects.extend(item.objects())
        body = "\n".join(serialize_om_object(o, indent=1) for o in objects)
        return f"<objects>\n{body}\n</objects>" if objects else "<objects/>"

    # -- editing ---------------------------------------------------------------

    def page_source(self, fid: FragmentId) -> bytes:
        return self._snapshot.node(fid).source

    def edit_fragment(
        self,
        fid: FragmentId,
        new_source: bytes,
        author: str,
        summary: str,
        base_revision: int | None = None,
    ) -> Revision | None:
        """Apply one fragment edit: reassemble the whole CD, commit it
        with the two-line log message, refresh the snapshot.  Returns
        None for a byte-identical no-op."""
        snap = self._snapshot
        tree = snap.trees.get(fid.cd)
        if tree is None:
            raise UnknownFragment(fid)
        edited = apply_fragment_edit(tree, fid, new_source)
        if edited is tree:
            return None
        merged = reassemble(edited)
        rev = self.repo.commit(
            [(f"cd/{fid.cd}.ocd", merged)],
            author,
            build_log_message(author, summary, fid),
            base_revision,
        )
        self._rebuild()
        return rev

    def update_notation(
        self,
        cd_name: str,
        content: bytes,
        author: str,
        summary: str,
        base_revision: int | None = None,
    ) -> tuple[Revision, set[FragmentId]]:
        """Replace one notation dictionary; evicts the dependency
        closure of every definition that changed."""
        new_defs = {d.pair: d for d in parse_ntn(content, cd_name)}
        old_defs = self._notation_file_defs(cd_name)
        changed = {
            pair
            for pair in set(new_defs) | set(old_defs)
            if new_defs.get(pair) != old_defs.get(pair)
        }
        # validate the combined table before committing anything
        merged = {d.pair: d for d in self._snapshot.table.defs.values() if d.pair not in old_defs}
        merged.update(new_defs)
        NotationTable(merged.values())

        rev = self.repo.commit(
            [(f"ntn/{cd_name}.ntn", content)],
            author,
            build_log_message(author, summary, FragmentId(cd_name)),
            base_revision,
        )
        self._rebuild()
        evicted: set[FragmentId] = set()
        triples = self.triples()
        for pair in changed:
            evicted |= self.cache.invalidate_for_symbol(pair, triples, self.namespaces)
        return rev, evicted

    def _notation_file_defs(self, cd_name: str) -> dict[tuple[str, str], NotationDef]:
        path = f"ntn/{cd_name}.ntn"
        if path not in self.repo.paths():
            return {}
        content, _ = self.repo.update(path)
        return {d.pair: d for d in parse_ntn(content, cd_name)}

    def create_cd(self, name: str, description: str, author: str) -> Revision:
        fid = FragmentId(name)  # validates the NCName
        if name in self._snapshot.cds:
            raise ValueError(f"CD {name!r} already exists")
        skeleton = (
            '<CD xmlns="http://www.openmath.org/OpenMathCD">\n'
            f" <CDName>{escape_text(name)}</CDName>\n"
            " <CDStatus>experimental</CDStatus>\n"
            f" <Description>{escape_text(description)}</Description>\n"
            "</CD>\n"
        ).encode("utf-8")
        rev = self.repo.commit(
            [(f"cd/{name}.ocd", skeleton)],
            author,
            build_log_message(author, f"created CD {name}", fid),
        )
        self._rebuild()
        return rev

    # -- queries and discussions --------------------------------------------------

    def run_query(self, text: str) -> list[dict[str, object]]:
        rows = eval_query(parse_query(text, self.namespaces), self.triples())
        out = []
        for row in rows:
            rec: dict[str, object] = {}
            for var, term in row.items():
                value = getattr(term, "value", "")
                entry: dict[str, object] = {
                    "value": value,
                    "literal": term.__class__.__name__ == "Lit",
                }
                if isinstance(value, str) and value.startswith("page:"):
                    entry["href"] = f"/page/{value[len('page:'):]}"
                rec[var] = entry
            out.append(rec)
        return out

    def open_issue_pages(self, symbols_only: bool = False) -> list[FragmentId]:
        return open_issues(self.triples(), symbols_only, self.namespaces)

    def reply_types(self, fid: FragmentId, parent: str | None) -> list[str]:
        self._snapshot.node(fid)
        parent_post: Post | None = self.forums.post(parent) if parent else None
        return sorted(t.value for t in self.forums.allowed_reply_types(parent_post))

    def add_post(
        self,
        fid: FragmentId,
        parent: str | None,
        ptype: PostType,
        body: str,
        author: str,
        polarity: Polarity | None = None,
        decided_idea: str | None = None,
    ) -> Post:
        self._snapshot.node(fid)
        return self.forums.add_post(
            fid, parent, ptype, body, author, polarity, decided_idea
        )

    # -- corpus I/O -----------------------------------------------------------------

    def import_dir(self, directory: str | Path, author: str = "importer") -> Revision:
        """Bulk-load .ocd/.sts/.ntn files from a directory tree."""
        directory = Path(directory)
        files: list[tuple[str, bytes]] = []
        for ext, prefix in (("ocd", "cd"), ("sts", "sts"), ("ntn", "ntn")):
            for path in sorted(directory.rglob(f"*.{ext}")):
                files.append((f"{prefix}/{path.stem}.{ext}", path.read_bytes()))
        if not files:
            raise FileNotFoundError(f"no .ocd/.sts/.ntn files under {directory}")
        rev = self.repo.commit(files, author, f"[{author}@SWiM] imported {len(files)} files")
        self._rebuild()
        return rev

    def export_dir(self, directory: str | Path) -> list[str]:
        return self.repo.export(directory)

    def check(self) -> list[Diagnostic]:
        return list(self._snapshot.diagnostics)

    def render_all(self, directory: str | Path) -> list[str]:
        """Static site export: one file per fragment page."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for tree in self._snapshot.trees.values():
            for fid in tree.nodes:
                name = re.sub(r"[^A-Za-z0-9_.+-]", "_", str(fid)) + ".xhtml"
                (directory / name).write_text(self.page_html(fid), "utf-8")
                written.append(name)
        return sorted(written)

    def metrics(self) -> dict[str, int]:
        counters = self.cache.counters()
        counters["revision"] = self.repo.head_revision
        counters["posts"] = len(self.forums.all_posts())
        return counters
