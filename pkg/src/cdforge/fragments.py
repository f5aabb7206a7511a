"""Split content dictionaries into editable fragments and put them back.

Three levels: whole CD, symbol definition, and properties/examples.
Outline fragments replace each split-away child with an include link;
splicing the links back is a byte-exact inverse as long as nothing was
edited.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum

from .om import ContentDictionary, ExampleItem, PropertyItem, SymbolDef, is_ncname, parse_cd
from .xmlscan import XmlError, scan

__all__ = [
    "FragmentId",
    "FragmentKind",
    "FragmentNode",
    "FragmentTree",
    "InvalidName",
    "UnknownFragment",
    "FragmentParseError",
    "GranularityViolation",
    "DanglingInclude",
    "ReassemblyParseError",
    "split_cd",
    "reassemble",
    "apply_fragment_edit",
    "fragment_for_symbol",
    "include_link",
    "XINCLUDE_NS",
]

XINCLUDE_NS = "http://www.w3.org/2001/XInclude"

_INCLUDE_RE = re.compile(rb'<xi:include href="([^"]+)"/>')

_ID_RE = re.compile(
    r"^cd:(?P<cd>[^+]+)"
    r"(?:\+(?P<symbol>[^+]+)"
    r"(?:\+(?P<item>(?:prop|ex)[1-9][0-9]*))?)?$"
)


class InvalidName(ValueError):
    pass


class UnknownFragment(KeyError):
    def __init__(self, fid: "FragmentId | str"):
        super().__init__(str(fid))
        self.fid = str(fid)


class FragmentParseError(ValueError):
    def __init__(self, kind: "FragmentKind | str", reason: str, line: int = 0, column: int = 0):
        super().__init__(f"{kind}: {reason} (line {line}, column {column})")
        self.kind = str(kind)
        self.reason = reason
        self.line = line
        self.column = column


class GranularityViolation(ValueError):
    """Edited source smuggles elements of another fragment level."""


class DanglingInclude(KeyError):
    def __init__(self, fid: str):
        super().__init__(fid)
        self.fid = fid


class ReassemblyParseError(ValueError):
    pass


class FragmentKind(str, Enum):
    CD_OUTLINE = "cd-outline"
    SYMBOL_OUTLINE = "symbol-outline"
    PROPERTY = "property"
    EXAMPLE = "example"


@dataclass(frozen=True, slots=True)
class FragmentId:
    """Address of one fragment: ``cd:<cd>``, ``cd:<cd>+<symbol>``,
    ``cd:<cd>+<symbol>+prop<k>`` or ``...+ex<k>``."""

    cd: str
    symbol: str | None = None
    item: str | None = None  # "prop3" / "ex1"

    def __lt__(self, other: "FragmentId") -> bool:
        return str(self) < str(other)

    def __post_init__(self) -> None:
        if not is_ncname(self.cd):
            raise InvalidName(f"CD name {self.cd!r} is not an NCName")
        if self.symbol is not None and not is_ncname(self.symbol):
            raise InvalidName(f"symbol name {self.symbol!r} is not an NCName")
        if self.item is not None and self.symbol is None:
            raise InvalidName("item fragment needs a symbol")

    def __str__(self) -> str:
        out = f"cd:{self.cd}"
        if self.symbol is not None:
            out += f"+{self.symbol}"
        if self.item is not None:
            out += f"+{self.item}"
        return out

    @classmethod
    def parse(cls, text: str) -> "FragmentId":
        m = _ID_RE.match(text)
        if not m:
            raise InvalidName(f"not a fragment id: {text!r}")
        return cls(m.group("cd"), m.group("symbol"), m.group("item"))

    @property
    def level(self) -> FragmentKind:
        if self.symbol is None:
            return FragmentKind.CD_OUTLINE
        if self.item is None:
            return FragmentKind.SYMBOL_OUTLINE
        return FragmentKind.PROPERTY if self.item.startswith("prop") else FragmentKind.EXAMPLE

    @property
    def parent(self) -> "FragmentId | None":
        if self.item is not None:
            return FragmentId(self.cd, self.symbol)
        if self.symbol is not None:
            return FragmentId(self.cd)
        return None


def fragment_for_symbol(cd_name: str, symbol: str) -> FragmentId:
    """Purely syntactic symbol-page address; no existence check."""
    return FragmentId(cd_name, symbol)


def include_link(fid: FragmentId) -> bytes:
    return f'<xi:include href="{fid}"/>'.encode("utf-8")


@dataclass(frozen=True, slots=True)
class FragmentNode:
    fid: FragmentId
    kind: FragmentKind
    source: bytes
    dirty: bool = False

    def children(self) -> list[FragmentId]:
        if self.kind in (FragmentKind.PROPERTY, FragmentKind.EXAMPLE):
            return []
        return [FragmentId.parse(m.group(1).decode("utf-8")) for m in _INCLUDE_RE.finditer(self.source)]


@dataclass(frozen=True)
class FragmentTree:
    root: FragmentId
    nodes: dict[FragmentId, FragmentNode]
    changed: tuple[FragmentId, ...] = ()

    def node(self, fid: FragmentId) -> FragmentNode:
        try:
            return self.nodes[fid]
        except KeyError:
            raise UnknownFragment(fid) from None

    def dirty_set(self) -> set[FragmentId]:
        return {fid for fid, n in self.nodes.items() if n.dirty}


def _property_groups(sym: SymbolDef) -> list[tuple[int, int]]:
    """Spans of property fragments: a run of CMPs directly followed by
    FMPs versions as one unit; leftovers stand alone."""
    items = list(sym.items)
    groups: list[tuple[int, int]] = []
    i = 0
    while i < len(items):
        item = items[i]
        if isinstance(item, ExampleItem):
            i += 1
            continue
        if item.kind == "CMP":
            j = i
            while j < len(items) and isinstance(items[j], PropertyItem) and items[j].kind == "CMP":
                j += 1
            if j < len(items) and isinstance(items[j], PropertyItem) and items[j].kind == "FMP":
                k = j
                while k < len(items) and isinstance(items[k], PropertyItem) and items[k].kind == "FMP":
                    k += 1
                groups.append((items[i].span[0], items[k - 1].span[1]))
                i = k
            else:
                for idx in range(i, j):
                    groups.append(items[idx].span)
                i = j
        else:  # FMP without preceding CMP
            groups.append(item.span)
            i += 1
    return groups


def split_cd(cd: ContentDictionary) -> FragmentTree:
    """Decompose a parsed CD into its fragment tree.

    One node for the CD outline, one per symbol outline, one per
    property group and example; outline sources carry include links
    where their children used to be.
    """
    if not cd.source:
        raise ValueError("split_cd needs a CD parsed from source bytes")
    root_id = FragmentId(cd.name)
    nodes: dict[FragmentId, FragmentNode] = {}
    symbol_entries: list[tuple[FragmentId, tuple[int, int]]] = []

    sym_nodes: list[tuple[FragmentId, FragmentNode]] = []
    for sym in cd.symbols:
        sym_id = FragmentId(cd.name, sym.name)
        symbol_entries.append((sym_id, sym.span))
        assert sym.raw is not None
        base = sym.span[0]

        child_entries: list[tuple[FragmentId, tuple[int, int]]] = []
        for k, span in enumerate(_property_groups(sym), start=1):
            child_entries.append((FragmentId(cd.name, sym.name, f"prop{k}"), span))
        for k, ex in enumerate(sym.examples(), start=1):
            child_entries.append((FragmentId(cd.name, sym.name, f"ex{k}"), ex.span))
        child_entries.sort(key=lambda e: e[1][0])

        outline = bytearray(sym.raw)
        for fid, (start, end) in reversed(child_entries):
            outline[start - base : end - base] = include_link(fid)
        children = [
            (
                fid,
                FragmentNode(
                    fid,
                    FragmentKind.PROPERTY if fid.level == FragmentKind.PROPERTY else FragmentKind.EXAMPLE,
                    cd.source[start:end],
                ),
            )
            for fid, (start, end) in child_entries
        ]
        sym_nodes.append((sym_id, FragmentNode(sym_id, FragmentKind.SYMBOL_OUTLINE, bytes(outline))))
        sym_nodes.extend(children)

    cd_outline = bytearray(cd.source)
    for sym_id, (start, end) in reversed(symbol_entries):
        cd_outline[start:end] = include_link(sym_id)
    nodes[root_id] = FragmentNode(root_id, FragmentKind.CD_OUTLINE, bytes(cd_outline))
    for fid, node in sym_nodes:
        nodes[fid] = node
    return FragmentTree(root_id, nodes)


def reassemble(tree: FragmentTree) -> bytes:
    """Expand include links from the CD outline down; the merged file
    must parse again."""

    def expand(node: FragmentNode) -> bytes:
        if node.kind in (FragmentKind.PROPERTY, FragmentKind.EXAMPLE):
            return node.source

        def sub(m: re.Match[bytes]) -> bytes:
            fid = FragmentId.parse(m.group(1).decode("utf-8"))
            child = tree.nodes.get(fid)
            if child is None:
                raise DanglingInclude(str(fid))
            return expand(child)

        return _INCLUDE_RE.sub(sub, node.source)

    merged = expand(tree.node(tree.root))
    try:
        parse_cd(merged)
    except Exception as exc:
        raise ReassemblyParseError(f"merged document does not parse: {exc}") from exc
    return merged


_LEVEL_BLOCKLIST = {
    FragmentKind.PROPERTY: {"CD", "CDDefinition", "Example"},
    FragmentKind.EXAMPLE: {"CD", "CDDefinition", "CMP", "FMP"},
    FragmentKind.SYMBOL_OUTLINE: {"CD"},
    FragmentKind.CD_OUTLINE: set(),
}


def _check_fragment_source(kind: FragmentKind, source: bytes) -> None:
    link_free = _INCLUDE_RE.sub(b"", source)
    try:
        if kind == FragmentKind.PROPERTY:
            root = scan(b"<wrap>" + link_free + b"</wrap>")
            tops = root.elements()
            if not tops:
                raise FragmentParseError(kind, "property fragment needs CMP or FMP content")
            for el in tops:
                if el.local in _LEVEL_BLOCKLIST[kind]:
                    raise GranularityViolation(
                        f"{el.local} does not belong inside a property fragment"
                    )
                if el.local not in ("CMP", "FMP"):
                    raise FragmentParseError(kind, f"unexpected element {el.local}")
        elif kind == FragmentKind.EXAMPLE:
            root = scan(link_free)
            if root.local in _LEVEL_BLOCKLIST[kind]:
                raise GranularityViolation(
                    f"{root.local} does not belong inside an example fragment"
                )
            if root.local != "Example":
                raise FragmentParseError(kind, f"expected Example, got {root.local}")
        elif kind == FragmentKind.SYMBOL_OUTLINE:
            root = scan(link_free)
            if root.local == "CD":
                raise GranularityViolation("a whole CD cannot replace a symbol fragment")
            if root.local != "CDDefinition":
                raise FragmentParseError(kind, f"expected CDDefinition, got {root.local}")
            for el in root.elements():
                if el.local == "CDDefinition":
                    raise GranularityViolation("nested CDDefinition inside a symbol fragment")
        else:
            root = scan(link_free)
            if root.local != "CD":
                raise FragmentParseError(kind, f"expected CD, got {root.local}")
    except XmlError as exc:
        raise FragmentParseError(kind, exc.message, exc.line, exc.column) from exc

    # deep check: embedded objects must be valid, so run the CD parser
    # over a synthetic wrapper where that is possible
    if kind == FragmentKind.PROPERTY:
        wrapper = (
            b"<CD><CDName>x</CDName><CDDefinition><Name>x</Name>"
            + link_free
            + b"</CDDefinition></CD>"
        )
        try:
            parse_cd(wrapper)
        except XmlError as exc:
            raise FragmentParseError(kind, exc.message, exc.line, exc.column) from exc
        except Exception as exc:
            raise FragmentParseError(kind, str(exc)) from exc
    elif kind == FragmentKind.EXAMPLE:
        wrapper = (
            b"<CD><CDName>x</CDName><CDDefinition><Name>x</Name>"
            + link_free
            + b"</CDDefinition></CD>"
        )
        try:
            parse_cd(wrapper)
        except XmlError as exc:
            raise FragmentParseError(kind, exc.message, exc.line, exc.column) from exc
        except Exception as exc:
            raise FragmentParseError(kind, str(exc)) from exc


def apply_fragment_edit(tree: FragmentTree, fid: FragmentId, new_source: bytes) -> FragmentTree:
    """Replace one fragment's source, returning a new tree.

    Identical bytes are a no-op.  The replacement must parse as the
    fragment's own kind; content belonging to other levels is refused.
    """
    node = tree.node(fid)
    if node.source == new_source:
        return tree
    _check_fragment_source(node.kind, new_source)
    nodes = dict(tree.nodes)
    nodes[fid] = replace(node, source=new_source, dirty=True)
    changed = tree.changed if fid in tree.changed else tree.changed + (fid,)
    return FragmentTree(tree.root, nodes, changed)
