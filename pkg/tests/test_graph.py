"""Triple extraction and query evaluation."""

from __future__ import annotations

import random

import pytest

from cdforge.fragments import FragmentKind, split_cd
from cdforge.graph import (
    NAMESPACES,
    OPEN_ISSUES_QUERY,
    RDF_TYPE,
    Iri,
    NotBoundFilter,
    OptionalBlock,
    ParseError,
    Triple,
    TriplePattern,
    UnknownPrefix,
    UnsupportedFeature,
    Var,
    dump_ntriples,
    eval_query,
    extract_triples,
    open_issues,
    parse_query,
    pretty_print,
)
from cdforge.om import iter_symbols, parse_cd, parse_om_object
from cdforge.xmlscan import scan

from oracles import brute_force_eval, engine_rows_as_text, random_store

OMO = NAMESPACES["omo"]
IKEWIKI = NAMESPACES["ikewiki"]
SIOC = NAMESPACES["sioc"]
ARGUONTO = NAMESPACES["arguonto"]


class TestParseQuery:
    def test_open_issues_query_shape(self):
        q = parse_query(OPEN_ISSUES_QUERY)
        assert q.distinct is True
        assert q.select == ("P",)
        required = q.required()
        assert len(required) == 3  # the ';' line expands to a second pattern
        assert required[0] == TriplePattern(Var("P"), Iri(IKEWIKI + "hasDiscussion"), Var("D"))
        assert required[1] == TriplePattern(Var("C"), Iri(RDF_TYPE), Iri(ARGUONTO + "Issue"))
        assert required[2] == TriplePattern(Var("C"), Iri(SIOC + "has_container"), Var("D"))
        assert q.optionals() == [
            OptionalBlock((TriplePattern(Var("Dec"), Iri(ARGUONTO + "decides"), Var("C")),))
        ]
        assert q.filters() == [NotBoundFilter("Dec")]

    def test_single_pattern(self):
        q = parse_query("SELECT ?X WHERE { ?X a arguonto:Issue . }")
        assert q.distinct is False
        assert q.required() == [TriplePattern(Var("X"), Iri(RDF_TYPE), Iri(ARGUONTO + "Issue"))]

    def test_unknown_prefix(self):
        with pytest.raises(UnknownPrefix):
            parse_query("SELECT ?X WHERE { ?X a foo:Thing . }")

    def test_unsupported_features_rejected(self):
        with pytest.raises(UnsupportedFeature):
            parse_query("SELECT ?X WHERE { { ?X a arguonto:Issue } UNION { ?X a arguonto:Idea } }")
        with pytest.raises(UnsupportedFeature):
            parse_query("SELECT ?X WHERE { ?X a arguonto:Issue . FILTER regex(?X) }")
        with pytest.raises(UnsupportedFeature):
            parse_query("SELECT ?X WHERE { ?X a arguonto:Issue . FILTER (bound(?X)) }")

    def test_parse_error_has_position(self):
        with pytest.raises(ParseError) as exc:
            parse_query("SELECT ?X WHERE { ?X a }")
        assert exc.value.line >= 1 and exc.value.column >= 1

    def test_filter_var_needs_preceding_optional(self):
        with pytest.raises(ParseError):
            parse_query("SELECT ?X WHERE { ?X a arguonto:Issue . FILTER (!bound(?Y)) }")

    def test_select_var_must_occur(self):
        with pytest.raises(ParseError):
            parse_query("SELECT ?Z WHERE { ?X a arguonto:Issue . }")

    def test_direct_page_iris(self):
        q = parse_query("SELECT ?T WHERE { page:cd:arith1+plus a ?T . }")
        assert q.required()[0].s == Iri("page:cd:arith1+plus")

    def test_pretty_print_identity(self):
        samples = [
            OPEN_ISSUES_QUERY,
            "SELECT ?X WHERE { ?X a arguonto:Issue . }",
            'SELECT DISTINCT ?P ?D WHERE { ?P ikewiki:hasDiscussion ?D . ?P dc:description "x" . }',
            "SELECT ?T WHERE { page:cd:arith1+plus a ?T . }",
            "SELECT ?X WHERE { ?X <http://example.org/unprefixed#p> ?X . }",
        ]
        for text in samples:
            q = parse_query(text)
            assert parse_query(pretty_print(q)) == q


class TestEvalQuery:
    def _store(self, *triples: Triple) -> list[Triple]:
        return list(triples)

    def test_decided_issue_excluded(self):
        store = self._store(
            Triple("page:cd:arith1", IKEWIKI + "hasDiscussion", "forum:cd:arith1"),
            Triple("post:i1", RDF_TYPE, ARGUONTO + "Issue"),
            Triple("post:i1", SIOC + "has_container", "forum:cd:arith1"),
            Triple("post:d1", ARGUONTO + "decides", "post:i1"),
        )
        assert eval_query(parse_query(OPEN_ISSUES_QUERY), store) == []

    def test_undecided_issue_returned(self):
        store = self._store(
            Triple("page:cd:arith1", IKEWIKI + "hasDiscussion", "forum:cd:arith1"),
            Triple("post:i1", RDF_TYPE, ARGUONTO + "Issue"),
            Triple("post:i1", SIOC + "has_container", "forum:cd:arith1"),
        )
        rows = eval_query(parse_query(OPEN_ISSUES_QUERY), store)
        assert rows == [{"P": Iri("page:cd:arith1")}]

    def test_random_stores_match_brute_force(self):
        rng = random.Random(42)
        q = parse_query(OPEN_ISSUES_QUERY)
        for _ in range(100):
            store, _ = random_store(rng, max_pages=12, max_posts=40)
            got = engine_rows_as_text(eval_query(q, store))
            want = brute_force_eval(q, store)
            assert got == want

    def test_random_generic_queries_match_brute_force(self):
        rng = random.Random(7)
        queries = [
            "SELECT ?P ?T WHERE { ?P a ?T . }",
            "SELECT DISTINCT ?C ?D WHERE { ?C sioc:has_container ?D . ?C a arguonto:Idea . }",
            "SELECT ?P ?Dec WHERE { ?P ikewiki:hasDiscussion ?D . "
            "OPTIONAL { ?C sioc:has_container ?D . ?Dec arguonto:decides ?C . } }",
        ]
        for _ in range(30):
            store, _ = random_store(rng, max_pages=10, max_posts=30)
            for text in queries:
                q = parse_query(text)
                assert engine_rows_as_text(eval_query(q, store)) == brute_force_eval(q, store)

    def test_nested_loop_equivalence_without_optional(self):
        rng = random.Random(3)
        q = parse_query("SELECT ?P ?C WHERE { ?P ikewiki:hasDiscussion ?D . ?C sioc:has_container ?D . }")
        for _ in range(20):
            store, _ = random_store(rng, max_pages=8, max_posts=24)
            naive = []
            for t1 in store:
                if t1.predicate != IKEWIKI + "hasDiscussion":
                    continue
                for t2 in store:
                    if t2.predicate != SIOC + "has_container":
                        continue
                    if t2.obj == t1.obj:
                        naive.append({"P": t1.subject, "C": t2.subject})
            naive.sort(key=lambda r: (r["P"], r["C"]))
            got = [
                {"P": row["P"].value, "C": row["C"].value}
                for row in eval_query(q, store)
            ]
            assert got == naive

    def test_literals_distinguished_from_iris(self):
        store = [
            Triple("page:cd:a", NAMESPACES["dc"] + "description", "page:cd:b", literal=True),
            Triple("page:cd:b", NAMESPACES["dc"] + "description", "other", literal=True),
        ]
        q = parse_query('SELECT ?P WHERE { ?P dc:description "page:cd:b" . }')
        assert eval_query(q, store) == [{"P": Iri("page:cd:a")}]


class TestOpenIssues:
    def test_matches_generator_bookkeeping(self):
        rng = random.Random(99)
        for _ in range(50):
            store, expected = random_store(rng, max_pages=15, max_posts=50)
            got = {f"page:{fid}" for fid in open_issues(store)}
            assert got == expected

    def test_decision_removes_exactly_that_issue(self):
        store = [
            Triple("page:cd:a", IKEWIKI + "hasDiscussion", "forum:cd:a"),
            Triple("page:cd:b", IKEWIKI + "hasDiscussion", "forum:cd:b"),
            Triple("post:i1", RDF_TYPE, ARGUONTO + "Issue"),
            Triple("post:i1", SIOC + "has_container", "forum:cd:a"),
            Triple("post:i2", RDF_TYPE, ARGUONTO + "Issue"),
            Triple("post:i2", SIOC + "has_container", "forum:cd:b"),
        ]
        before = open_issues(store)
        assert {str(f) for f in before} == {"cd:a", "cd:b"}
        after = open_issues(store + [Triple("post:d", ARGUONTO + "decides", "post:i1")])
        assert {str(f) for f in after} == {"cd:b"}

    def test_symbols_only_restriction(self):
        store = [
            Triple("page:cd:a", IKEWIKI + "hasDiscussion", "forum:cd:a"),
            Triple("page:cd:a+s", IKEWIKI + "hasDiscussion", "forum:cd:a+s"),
            Triple("page:cd:a+s", RDF_TYPE, OMO + "CDDefinition"),
            Triple("post:i1", RDF_TYPE, ARGUONTO + "Issue"),
            Triple("post:i1", SIOC + "has_container", "forum:cd:a"),
            Triple("post:i2", RDF_TYPE, ARGUONTO + "Issue"),
            Triple("post:i2", SIOC + "has_container", "forum:cd:a+s"),
        ]
        assert {str(f) for f in open_issues(store)} == {"cd:a", "cd:a+s"}
        assert {str(f) for f in open_issues(store, symbols_only=True)} == {"cd:a+s"}


class TestExtractTriples:
    def test_fig1_uses_symbol_edges(self, corpus_cds):
        cd = corpus_cds["arith1"]
        triples = extract_triples(split_cd(cd), cd)
        uses = {
            (t.subject, t.obj) for t in triples if t.predicate == OMO + "usesSymbol"
        }
        source = "page:cd:arith1+plus+prop1"
        assert (source, "page:cd:quant1+forall") in uses
        assert (source, "page:cd:relation1+eq") in uses
        assert (source, "page:cd:arith1+plus") in uses

    def test_no_formulas_no_uses_edges(self):
        cd = parse_cd(
            b"<CD><CDName>c1</CDName>"
            b"<CDDefinition><Name>k</Name><Description>d</Description></CDDefinition></CD>"
        )
        triples = extract_triples(split_cd(cd), cd)
        assert not [t for t in triples if t.predicate == OMO + "usesSymbol"]

    def test_uses_edges_match_independent_scan(self, corpus_cds):
        # oracle: reparse each property/example fragment's bytes and walk
        # every object for symbol leaves
        for cd in corpus_cds.values():
            tree = split_cd(cd)
            expected: set[tuple[str, str]] = set()
            for fid, node in tree.nodes.items():
                if node.kind not in (FragmentKind.PROPERTY, FragmentKind.EXAMPLE):
                    continue
                root = scan(b"<wrap>" + node.source + b"</wrap>")
                for el in _walk(root):
                    if el.local == "OMOBJ":
                        obj = parse_om_object(node.source[el.start - 6 : el.end - 6])
                        for ref in iter_symbols(obj):
                            expected.add((f"page:{fid}", f"page:cd:{ref.cd}+{ref.name}"))
            got = {
                (t.subject, t.obj)
                for t in extract_triples(tree, cd)
                if t.predicate == OMO + "usesSymbol"
            }
            assert got == expected, cd.name

    def test_structural_triples_complete(self, corpus_cds):
        cd = corpus_cds["arith1"]
        tree = split_cd(cd)
        triples = extract_triples(tree, cd)
        pages = {f"page:{fid}" for fid in tree.nodes}
        typed = {t.subject for t in triples if t.predicate == RDF_TYPE}
        discussed = {t.subject for t in triples if t.predicate == IKEWIKI + "hasDiscussion"}
        assert typed == pages and discussed == pages
        parts = {(t.subject, t.obj) for t in triples if t.predicate == OMO + "hasPart"}
        assert ("page:cd:arith1", "page:cd:arith1+plus") in parts
        assert ("page:cd:arith1+plus", "page:cd:arith1+plus+prop1") in parts
        descs = [t for t in triples if t.predicate == NAMESPACES["dc"] + "description"]
        assert all(t.literal for t in descs)
        assert any(t.subject == "page:cd:arith1" for t in descs)

    def test_symbol_order_permutation_keeps_triple_set(self):
        a = (
            b"<CD><CDName>p1</CDName>"
            b"<CDDefinition><Name>x</Name><Description>dx</Description></CDDefinition>"
            b"<CDDefinition><Name>y</Name><Description>dy</Description></CDDefinition></CD>"
        )
        b = (
            b"<CD><CDName>p1</CDName>"
            b"<CDDefinition><Name>y</Name><Description>dy</Description></CDDefinition>"
            b"<CDDefinition><Name>x</Name><Description>dx</Description></CDDefinition></CD>"
        )
        cda, cdb = parse_cd(a), parse_cd(b)
        ta = set(extract_triples(split_cd(cda), cda))
        tb = set(extract_triples(split_cd(cdb), cdb))
        assert ta == tb

    def test_ntriples_dump(self):
        lines = dump_ntriples(
            [
                Triple("page:cd:a", RDF_TYPE, OMO + "ContentDictionary"),
                Triple("page:cd:a", NAMESPACES["dc"] + "description", 'say "hi"', literal=True),
            ]
        )
        assert lines.splitlines() == [
            f'<page:cd:a> <{NAMESPACES["dc"]}description> "say \\"hi\\"" .',
            f"<page:cd:a> <{RDF_TYPE}> <{OMO}ContentDictionary> .",
        ]


def _walk(el):
    yield el
    for c in el.elements():
        yield from _walk(c)
