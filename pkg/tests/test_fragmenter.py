"""Splitting, reassembly, and fragment-level edits."""

from __future__ import annotations

import re

import pytest

from cdforge import corpus_dir
from cdforge.fragments import (
    DanglingInclude,
    FragmentId,
    FragmentKind,
    FragmentParseError,
    GranularityViolation,
    InvalidName,
    UnknownFragment,
    apply_fragment_edit,
    fragment_for_symbol,
    include_link,
    reassemble,
    split_cd,
)
from cdforge.om import parse_cd


def load(name: str):
    data = (corpus_dir() / f"{name}.ocd").read_bytes()
    return data, parse_cd(data)


class TestSplit:
    def test_fig1_style_fragments(self):
        data = (
            b"<CD><CDName>arith1</CDName>"
            b"<CDDefinition><Name>plus</Name><Description>d</Description>"
            b"<CMP>commutative</CMP>"
            b'<FMP><OMOBJ><OMS cd="arith1" name="plus"/></OMOBJ></FMP>'
            b"</CDDefinition></CD>"
        )
        tree = split_cd(parse_cd(data))
        ids = {str(f) for f in tree.nodes}
        assert ids == {"cd:arith1", "cd:arith1+plus", "cd:arith1+plus+prop1"}
        # the CMP/FMP pair versions together as one property fragment
        prop = tree.node(FragmentId.parse("cd:arith1+plus+prop1"))
        assert b"<CMP>" in prop.source and b"<FMP>" in prop.source

    def test_zero_symbol_cd(self):
        tree = split_cd(parse_cd(b"<CD><CDName>e1</CDName></CD>"))
        assert list(tree.nodes) == [FragmentId("e1")]
        assert b"xi:include" not in tree.node(FragmentId("e1")).source

    def test_node_count_equality(self, corpus_files):
        for f in corpus_files:
            data = f.read_bytes()
            tree = split_cd(parse_cd(data))
            s = data.count(b"<CDDefinition>")
            e = data.count(b"<Example>")
            p = _count_property_groups(data)
            assert len(tree.nodes) == 1 + s + p + e, f.name

    def test_outlines_hold_links_not_content(self, corpus_cds):
        tree = split_cd(corpus_cds["arith1"])
        outline = tree.node(FragmentId("arith1")).source
        assert b"<CDDefinition>" not in outline
        assert outline.count(b"<xi:include") == len(corpus_cds["arith1"].symbols)
        sym_outline = tree.node(FragmentId("arith1", "plus")).source
        assert b"<FMP>" not in sym_outline
        assert b'<xi:include href="cd:arith1+plus+prop1"/>' in sym_outline

    def test_every_include_resolves(self, corpus_cds):
        for cd in corpus_cds.values():
            tree = split_cd(cd)
            for node in tree.nodes.values():
                for child in node.children():
                    assert child in tree.nodes


def _count_property_groups(data: bytes) -> int:
    """Independent scan for CMP-run + FMP-run grouping, per symbol."""
    total = 0
    for block in re.findall(rb"<CDDefinition>.*?</CDDefinition>", data, re.S):
        kinds = re.findall(rb"<(CMP|FMP|Example)[ >]", block)
        kinds = [k for k in kinds if k != b"Example"]
        i = 0
        while i < len(kinds):
            if kinds[i] == b"CMP":
                j = i
                while j < len(kinds) and kinds[j] == b"CMP":
                    j += 1
                if j < len(kinds) and kinds[j] == b"FMP":
                    while j < len(kinds) and kinds[j] == b"FMP":
                        j += 1
                    total += 1
                else:
                    total += j - i
                i = j
            else:
                total += 1
                i += 1
    return total


class TestReassemble:
    def test_identity_on_clean_trees(self, corpus_files):
        for f in corpus_files:
            data = f.read_bytes()
            assert reassemble(split_cd(parse_cd(data))) == data

    def test_edit_stays_inside_symbol_span(self):
        data, cd = load("transc1")
        tree = split_cd(cd)
        fid = FragmentId.parse("cd:transc1+sin")
        sym = cd.symbol("sin")
        new_source = tree.node(fid).source.replace(
            b"This symbol represents the sin function",
            b"This symbol is the fixed sin function",
        )
        merged = reassemble(apply_fragment_edit(tree, fid, new_source))
        assert merged != data
        start, end = sym.span
        assert merged[:start] == data[:start]
        shift = len(merged) - len(data)
        assert merged[end + shift :] == data[end:]

    def test_deleting_an_include_drops_the_symbol(self, corpus_cds):
        cd = corpus_cds["relation1"]
        tree = split_cd(cd)
        root = FragmentId("relation1")
        outline = tree.node(root).source
        link = include_link(FragmentId("relation1", "gt"))
        assert link in outline
        edited = apply_fragment_edit(tree, root, outline.replace(link, b""))
        merged = reassemble(edited)
        reparsed = parse_cd(merged)
        assert reparsed.symbol("gt") is None
        assert len(reparsed.symbols) == len(cd.symbols) - 1

    def test_dangling_include(self, corpus_cds):
        tree = split_cd(corpus_cds["quant1"])
        root = FragmentId("quant1")
        outline = tree.node(root).source + include_link(FragmentId("quant1", "nope"))
        # keep it inside the CD element
        outline = outline.replace(
            b"</CD>" + include_link(FragmentId("quant1", "nope")),
            include_link(FragmentId("quant1", "nope")) + b"</CD>",
        )
        edited = apply_fragment_edit(tree, root, outline)
        with pytest.raises(DanglingInclude):
            reassemble(edited)


class TestApplyFragmentEdit:
    def test_description_edit_marks_only_that_fragment_dirty(self, corpus_cds):
        tree = split_cd(corpus_cds["transc1"])
        fid = FragmentId.parse("cd:transc1+sin")
        src = tree.node(fid).source.replace(b"sin function", b"sine function")
        edited = apply_fragment_edit(tree, fid, src)
        assert edited.dirty_set() == {fid}
        assert edited.changed == (fid,)

    def test_identical_source_is_noop(self, corpus_cds):
        tree = split_cd(corpus_cds["transc1"])
        fid = FragmentId.parse("cd:transc1+sin")
        edited = apply_fragment_edit(tree, fid, tree.node(fid).source)
        assert edited is tree
        assert edited.dirty_set() == set()

    def test_new_symbol_two_step_flow(self, corpus_cds):
        cd = corpus_cds["quant1"]
        tree = split_cd(cd)
        root = FragmentId("quant1")
        outline = tree.node(root).source
        new_def = (
            b"<CDDefinition><Name>unique</Name><Role>binder</Role>"
            b"<Description>the unique-existence quantifier</Description></CDDefinition>"
        )
        edited = apply_fragment_edit(tree, root, outline.replace(b"</CD>", new_def + b"</CD>"))
        merged = reassemble(edited)
        reparsed = parse_cd(merged)
        assert reparsed.symbol("unique") is not None
        # saving re-splits the fresh symbol into a page of its own
        resplit = split_cd(reparsed)
        fresh = FragmentId("quant1", "unique")
        assert fresh in resplit.nodes
        sym_src = resplit.node(fresh).source.replace(b"quantifier", b"binder")
        assert reassemble(apply_fragment_edit(resplit, fresh, sym_src))

    def test_unknown_fragment(self, corpus_cds):
        tree = split_cd(corpus_cds["quant1"])
        with pytest.raises(UnknownFragment):
            apply_fragment_edit(tree, FragmentId("quant1", "nope"), b"<x/>")

    def test_malformed_fragment_source(self, corpus_cds):
        tree = split_cd(corpus_cds["transc1"])
        fid = FragmentId.parse("cd:transc1+sin")
        with pytest.raises(FragmentParseError):
            apply_fragment_edit(tree, fid, b"<CDDefinition><Name>sin</Name>")

    def test_granularity_violation(self, corpus_cds):
        tree = split_cd(corpus_cds["arith1"])
        prop = FragmentId.parse("cd:arith1+plus+prop1")
        with pytest.raises(GranularityViolation):
            apply_fragment_edit(
                tree,
                prop,
                b"<CDDefinition><Name>x</Name><Description>d</Description></CDDefinition>",
            )
        ex = FragmentId.parse("cd:arith1+abs+ex1")
        with pytest.raises(GranularityViolation):
            apply_fragment_edit(tree, ex, b"<CMP>now I am a property</CMP>")


class TestFragmentForSymbol:
    def test_transc1_sin(self):
        assert str(fragment_for_symbol("transc1", "sin")) == "cd:transc1+sin"

    def test_arith1_plus(self):
        assert str(fragment_for_symbol("arith1", "plus")) == "cd:arith1+plus"

    def test_invalid_name(self):
        with pytest.raises(InvalidName):
            fragment_for_symbol("bad name", "x")


class TestFragmentId:
    def test_grammar_round_trip(self):
        for text in ["cd:a1", "cd:a1+s", "cd:a1+s+prop3", "cd:a1+s+ex1"]:
            assert str(FragmentId.parse(text)) == text

    def test_levels(self):
        assert FragmentId.parse("cd:a").level == FragmentKind.CD_OUTLINE
        assert FragmentId.parse("cd:a+s").level == FragmentKind.SYMBOL_OUTLINE
        assert FragmentId.parse("cd:a+s+prop1").level == FragmentKind.PROPERTY
        assert FragmentId.parse("cd:a+s+ex2").level == FragmentKind.EXAMPLE

    def test_bad_ids(self):
        for text in ["cd:", "x:a", "cd:a+s+prop0", "cd:a+s+blah1", "cd:a+b c"]:
            with pytest.raises(InvalidName):
                FragmentId.parse(text)

    def test_parent_chain(self):
        fid = FragmentId.parse("cd:a1+s+ex1")
        assert str(fid.parent) == "cd:a1+s"
        assert str(fid.parent.parent) == "cd:a1"
        assert fid.parent.parent.parent is None
