"""Wiki orchestration: edit flow, notation updates, rebuilds."""

from __future__ import annotations

import pytest

from cdforge import corpus_dir
from cdforge.fragments import FragmentId, UnknownFragment
from cdforge.forum import PostType
from cdforge.store import Conflict, Repository
from cdforge.wiki import CdWiki, WikiConfig


@pytest.fixture
def wiki(tmp_path):
    repo = Repository(tmp_path / "repo")
    w = CdWiki(repo)
    w.import_dir(corpus_dir())
    return w


class TestEditFlow:
    def test_description_edit_commits_paper_message(self, wiki):
        fid = FragmentId.parse("cd:transc1+sin")
        source = wiki.page_source(fid)
        edited = source.replace(
            b"This symbol represents the sin function",
            b"This symbol stands for the sine function",
        )
        rev = wiki.edit_fragment(
            fid, edited, "Administrator", "replaced metadata field dc:description"
        )
        assert rev.message == (
            "[Administrator@SWiM] replaced metadata field dc:description\n"
            "Actually changed fragment cd:transc1+sin"
        )
        assert wiki.snapshot.cds["transc1"].symbol("sin").description.startswith(
            "This symbol stands for"
        )

    def test_noop_edit_creates_no_revision(self, wiki):
        fid = FragmentId.parse("cd:transc1+sin")
        head = wiki.repo.head_revision
        assert wiki.edit_fragment(fid, wiki.page_source(fid), "u", "nothing") is None
        assert wiki.repo.head_revision == head

    def test_failed_edit_changes_nothing(self, wiki):
        fid = FragmentId.parse("cd:transc1+sin")
        head = wiki.repo.head_revision
        before = wiki.page_html(fid)
        snap = wiki.snapshot
        with pytest.raises(Exception):
            wiki.edit_fragment(fid, b"<CDDefinition><Name>sin", "u", "broken")
        assert wiki.repo.head_revision == head
        assert wiki.snapshot is snap
        assert wiki.page_html(fid) == before

    def test_stale_base_conflicts(self, wiki):
        fid = FragmentId.parse("cd:transc1+sin")
        base = wiki.repo.head_revision
        source = wiki.page_source(fid)
        wiki.edit_fragment(fid, source.replace(b"sin function", b"sine function"),
                           "alice", "first", base)
        with pytest.raises(Conflict):
            wiki.edit_fragment(fid, source.replace(b"sin function", b"other function"),
                               "bob", "second", base)

    def test_self_invalidation_on_edit(self, wiki):
        fid = FragmentId.parse("cd:transc1+sin")
        wiki.page_html(fid)
        wiki.page_html(fid)
        counters = wiki.cache.counters()
        assert counters["hits"] >= 1
        renders_before = counters["renders"]
        wiki.edit_fragment(
            fid,
            wiki.page_source(fid).replace(b"sin function", b"sine function"),
            "u",
            "edit",
        )
        wiki.page_html(fid)
        assert wiki.cache.counters()["renders"] == renders_before + 1

    def test_unrelated_page_stays_cached(self, wiki):
        other = FragmentId.parse("cd:arith1+plus")
        sin = FragmentId.parse("cd:transc1+sin")
        wiki.page_html(other)
        wiki.edit_fragment(
            sin,
            wiki.page_source(sin).replace(b"sin function", b"sine function"),
            "u",
            "edit",
        )
        renders_before = wiki.cache.counters()["renders"]
        wiki.page_html(other)
        assert wiki.cache.counters()["renders"] == renders_before


class TestNotation:
    def test_update_notation_evicts_closure(self, wiki):
        # warm the cache for every arith1-related page
        for tree in wiki.snapshot.trees.values():
            for fid in tree.nodes:
                wiki.page_html(fid)
        old = (corpus_dir() / "arith1.ntn").read_bytes()
        changed = old.replace(b'glyph="+"', b'glyph="&#x2295;"')
        rev, evicted = wiki.update_notation("arith1", changed, "editor", "new plus glyph")
        assert rev.number == wiki.repo.head_revision
        names = {str(f) for f in evicted}
        # plus occurs in its own FMP and in transc1's sine FMP
        assert "cd:arith1+plus+prop1" in names
        assert "cd:arith1+plus" in names and "cd:arith1" in names
        assert "cd:transc1+sin+prop1" in names and "cd:transc1" in names
        html = wiki.page_html(FragmentId.parse("cd:arith1+plus"))
        assert "⊕" in html

    def test_unchanged_notation_evicts_nothing(self, wiki):
        old = (corpus_dir() / "arith1.ntn").read_bytes()
        _, evicted = wiki.update_notation("arith1", old, "editor", "touch")
        assert evicted == set()

    def test_invalid_table_rejected_before_commit(self, wiki):
        head = wiki.repo.head_revision
        bad = b'<notations cd="arith1"><notation name="plus" fixity="infix" glyph="=" precedence="500" associativity="left"/></notations>'
        with pytest.raises(Exception):
            wiki.update_notation("arith1", bad, "editor", "collides with eq glyph")
        assert wiki.repo.head_revision == head


class TestCreateAndCheck:
    def test_create_cd_skeleton(self, wiki):
        rev = wiki.create_cd("fresh1", "a brand new CD", "admin")
        assert "cd/fresh1.ocd" in rev.changed_paths
        assert "fresh1" in wiki.snapshot.cds
        assert wiki.page_html(FragmentId("fresh1"))
        fid = FragmentId("fresh1")
        outline = wiki.page_source(fid)
        new_def = (
            b"<CDDefinition><Name>thing</Name>"
            b"<Description>a thing</Description></CDDefinition></CD>"
        )
        wiki.edit_fragment(fid, outline.replace(b"</CD>", new_def), "admin", "added thing")
        assert FragmentId("fresh1", "thing") in wiki.snapshot.trees["fresh1"].nodes

    def test_duplicate_cd_rejected(self, wiki):
        with pytest.raises(ValueError):
            wiki.create_cd("arith1", "again", "admin")

    def test_check_reports_known_unresolved(self, wiki):
        diags = wiki.check()
        assert any(d.code == "unresolved-symbol" and "nums1" in d.message for d in diags)
        assert not [d for d in diags if d.severity == "error"]

    def test_render_all_writes_every_page(self, wiki, tmp_path):
        out = tmp_path / "site"
        written = wiki.render_all(out)
        total = sum(len(t.nodes) for t in wiki.snapshot.trees.values())
        assert len(written) == total
        sample = out / "cd_arith1+plus.xhtml"
        assert sample.exists()
        assert "math" in sample.read_text("utf-8")

    def test_export_round_trip(self, wiki, tmp_path):
        out = tmp_path / "export"
        wiki.export_dir(out)
        for f in corpus_dir().glob("*.ocd"):
            assert (out / "cd" / f.name).read_bytes() == f.read_bytes()


class TestQueriesAndForums:
    def test_open_issue_lifecycle(self, wiki):
        fid = FragmentId.parse("cd:arith1+plus")
        issue = wiki.add_post(fid, None, PostType.ISSUE, "FMP misleading", "alice")
        assert fid in wiki.open_issue_pages()
        idea = wiki.add_post(fid, issue.id, PostType.IDEA, "reword it", "bob")
        wiki.add_post(fid, idea.id, PostType.DECISION, "agreed", "carol",
                      decided_idea=idea.id)
        assert fid not in wiki.open_issue_pages()

    def test_reply_types_endpoint_logic(self, wiki):
        fid = FragmentId.parse("cd:arith1+plus")
        assert wiki.reply_types(fid, None) == ["Issue", "Question", "Untyped"]
        issue = wiki.add_post(fid, None, PostType.ISSUE, "x", "alice")
        assert wiki.reply_types(fid, issue.id) == ["Decision", "Idea", "Question", "Untyped"]

    def test_posts_on_unknown_page_rejected(self, wiki):
        with pytest.raises(UnknownFragment):
            wiki.add_post(FragmentId.parse("cd:nope"), None, PostType.ISSUE, "x", "a")

    def test_run_query_href_fields(self, wiki):
        fid = FragmentId.parse("cd:arith1+plus")
        wiki.add_post(fid, None, PostType.ISSUE, "x", "alice")
        rows = wiki.run_query(
            "SELECT DISTINCT ?P WHERE { ?P ikewiki:hasDiscussion ?D . "
            "?C a arguonto:Issue; sioc:has_container ?D . "
            "OPTIONAL { ?Dec arguonto:decides ?C . } FILTER (!bound(?Dec)) }"
        )
        assert rows == [
            {"P": {"value": "page:cd:arith1+plus", "literal": False,
                   "href": "/page/cd:arith1+plus"}}
        ]


class TestConfig:
    def test_load_and_roles(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(
            '{"tokens": {"t1": {"user": "clange", "role": "administrator"}},'
            ' "lock_ttl": 60, "port": 9999}'
        )
        config = WikiConfig.load(cfg)
        assert config.identify("t1") == ("clange", "administrator")
        assert config.identify("nope") is None
        assert config.lock_ttl == 60 and config.port == 9999

    def test_open_mode(self):
        config = WikiConfig()
        assert config.identify(None) == ("anonymous", "administrator")
