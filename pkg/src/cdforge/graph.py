"""Structural triple graph and the query language evaluated over it.

The query language is the subset needed by the open-issues dashboard:
basic graph patterns with ``;`` lists and the ``a`` keyword, OPTIONAL
blocks, ``FILTER (!bound(?V))`` and DISTINCT.  Everything else is
refused loudly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .fragments import FragmentId, FragmentKind, FragmentTree, InvalidName
from .om import ContentDictionary, OMObject, iter_symbols

__all__ = [
    "Triple",
    "Var",
    "Iri",
    "Lit",
    "TriplePattern",
    "OptionalBlock",
    "NotBoundFilter",
    "Query",
    "ParseError",
    "UnknownPrefix",
    "UnsupportedFeature",
    "NAMESPACES",
    "RDF_TYPE",
    "OPEN_ISSUES_QUERY",
    "parse_query",
    "pretty_print",
    "eval_query",
    "extract_triples",
    "open_issues",
    "dump_ntriples",
]

NAMESPACES: dict[str, str] = {
    "ikewiki": "http://ikewiki.example/ns#",
    "sioc": "http://rdfs.org/sioc/ns#",
    "arguonto": "http://arguonto.example/ns#",
    "omo": "http://omo.example/ns#",
    "dc": "http://purl.org/dc/elements/1.1/",
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
}

RDF_TYPE = NAMESPACES["rdf"] + "type"

# fragment ids contain ':' and '+', so wiki entities are addressed by
# dedicated IRI schemes instead of prefixed names
_DIRECT_SCHEMES = ("page:", "forum:", "post:")

OPEN_ISSUES_QUERY = """SELECT DISTINCT ?P WHERE {
  ?P ikewiki:hasDiscussion ?D .
  ?C a arguonto:Issue;
     sioc:has_container ?D .
  OPTIONAL { ?Dec arguonto:decides ?C . }
  FILTER (!bound(?Dec)) }"""


@dataclass(frozen=True, slots=True)
class Triple:
    subject: str
    predicate: str
    obj: str
    literal: bool = False


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True, slots=True)
class Iri:
    value: str


@dataclass(frozen=True, slots=True)
class Lit:
    value: str


Term = Var | Iri | Lit


@dataclass(frozen=True, slots=True)
class TriplePattern:
    s: Term
    p: Term
    o: Term


@dataclass(frozen=True, slots=True)
class OptionalBlock:
    patterns: tuple[TriplePattern, ...]


@dataclass(frozen=True, slots=True)
class NotBoundFilter:
    var: str


Pattern = TriplePattern | OptionalBlock | NotBoundFilter


@dataclass(frozen=True)
class Query:
    select: tuple[str, ...]
    distinct: bool
    where: tuple[Pattern, ...]

    def required(self) -> list[TriplePattern]:
        return [p for p in self.where if isinstance(p, TriplePattern)]

    def optionals(self) -> list[OptionalBlock]:
        return [p for p in self.where if isinstance(p, OptionalBlock)]

    def filters(self) -> list[NotBoundFilter]:
        return [p for p in self.where if isinstance(p, NotBoundFilter)]


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        hint = f", expected one of {', '.join(expected)}" if expected else ""
        super().__init__(f"{message} at {line}:{column}{hint}")
        self.line = line
        self.column = column
        self.expected = expected


class UnknownPrefix(ParseError):
    def __init__(self, prefix: str, line: int, column: int):
        super().__init__(f"unknown prefix {prefix!r}", line, column)
        self.prefix = prefix


class UnsupportedFeature(ParseError):
    def __init__(self, feature: str, line: int, column: int):
        super().__init__(f"unsupported feature: {feature}", line, column)
        self.feature = feature


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
      | (?P<iri><[^<>\s]*>)
      | (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<direct>(?:page|forum|post):[^\s;.,{}()"]+)
      | (?P<pname>[A-Za-z_][A-Za-z0-9_-]*:[A-Za-z_][A-Za-z0-9_.-]*)
      | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<punct>[{}();.!])
    """,
    re.VERBOSE,
)

_UNSUPPORTED_KEYWORDS = {"UNION", "REGEX", "GRAPH", "ORDER", "LIMIT", "OFFSET", "ASK",
                         "CONSTRUCT", "DESCRIBE", "MINUS", "BIND", "VALUES"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    column: int


def _lex(text: str) -> list[_Tok]:
    tokens: list[_Tok] = []
    line = 1
    bol = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"cannot read {text[pos]!r}", line, pos - bol + 1)
        kind = m.lastgroup or ""
        tok_text = m.group(0)
        if kind != "ws":
            tokens.append(_Tok(kind, tok_text, line, m.start() - bol + 1))
        newlines = tok_text.count("\n")
        if newlines:
            line += newlines
            bol = m.start() + tok_text.rfind("\n") + 1
        pos = m.end()
    tokens.append(_Tok("eof", "", line, pos - bol + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Tok], prefixes: Mapping[str, str]):
        self.tokens = tokens
        self.pos = 0
        self.prefixes = prefixes

    def peek(self) -> _Tok:
        return self.tokens[self.pos]

    def next(self) -> _Tok:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text.upper() != text.upper():
            raise ParseError(f"got {tok.text!r}", tok.line, tok.column, (text,))
        return tok

    def fail(self, tok: _Tok, *expected: str) -> ParseError:
        if tok.text.upper() in _UNSUPPORTED_KEYWORDS:
            return UnsupportedFeature(tok.text, tok.line, tok.column)
        return ParseError(f"got {tok.text or 'end of input'!r}", tok.line, tok.column, expected)

    # grammar ------------------------------------------------------------

    def query(self) -> Query:
        self.expect("SELECT")
        distinct = False
        if self.peek().text.upper() == "DISTINCT":
            self.next()
            distinct = True
        select: list[str] = []
        while self.peek().kind == "var":
            select.append(self.next().text[1:])
        if not select:
            raise self.fail(self.peek(), "?variable")
        self.expect("WHERE")
        self.expect("{")
        where = self.block(allow_nested=True)
        self.expect("}")
        tok = self.peek()
        if tok.kind != "eof":
            raise self.fail(tok, "end of input")
        q = Query(tuple(select), distinct, tuple(where))
        _check_query(q)
        return q

    def block(self, allow_nested: bool) -> list[Pattern]:
        out: list[Pattern] = []
        while True:
            tok = self.peek()
            if tok.text == "}":
                return out
            if tok.kind == "eof":
                raise self.fail(tok, "}")
            upper = tok.text.upper()
            if upper == "OPTIONAL":
                if not allow_nested:
                    raise UnsupportedFeature("nested OPTIONAL", tok.line, tok.column)
                self.next()
                self.expect("{")
                inner = self.block(allow_nested=False)
                self.expect("}")
                out.append(OptionalBlock(tuple(p for p in inner if isinstance(p, TriplePattern))))
                continue
            if upper == "FILTER":
                self.next()
                out.append(self.not_bound())
                continue
            if tok.text.upper() in _UNSUPPORTED_KEYWORDS:
                raise UnsupportedFeature(tok.text, tok.line, tok.column)
            if tok.text == "{":
                raise UnsupportedFeature("group graph pattern", tok.line, tok.column)
            out.extend(self.triple_lines())

    def not_bound(self) -> NotBoundFilter:
        tok = self.peek()
        if tok.text != "(":
            raise UnsupportedFeature(f"FILTER {tok.text}", tok.line, tok.column)
        self.next()
        tok = self.peek()
        if tok.text != "!":
            raise UnsupportedFeature(f"FILTER {tok.text}", tok.line, tok.column)
        self.next()
        bound = self.next()
        if bound.text != "bound":
            raise UnsupportedFeature(f"FILTER !{bound.text}", bound.line, bound.column)
        self.expect("(")
        var = self.next()
        if var.kind != "var":
            raise self.fail(var, "?variable")
        self.expect(")")
        self.expect(")")
        return NotBoundFilter(var.text[1:])

    def triple_lines(self) -> list[TriplePattern]:
        subject = self.term(position="subject")
        patterns = []
        while True:
            predicate = self.predicate()
            obj = self.term(position="object")
            patterns.append(TriplePattern(subject, predicate, obj))
            tok = self.peek()
            if tok.text == ";":
                self.next()
                continue
            if tok.text == ".":
                self.next()
            return patterns

    def predicate(self) -> Term:
        tok = self.peek()
        if tok.kind == "word" and tok.text == "a":
            self.next()
            return Iri(RDF_TYPE)
        return self.term(position="predicate")

    def term(self, position: str) -> Term:
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.text[1:])
        if tok.kind == "iri":
            return Iri(tok.text[1:-1])
        if tok.kind == "direct":
            return Iri(tok.text)
        if tok.kind == "pname":
            prefix, local = tok.text.split(":", 1)
            ns = self.prefixes.get(prefix)
            if ns is None:
                raise UnknownPrefix(prefix, tok.line, tok.column)
            return Iri(ns + local)
        if tok.kind == "string" and position == "object":
            return Lit(_unescape(tok.text[1:-1]))
        raise self.fail(tok, "term")


def _unescape(text: str) -> str:
    return text.replace('\\"', '"').replace("\\n", "\n").replace("\\\\", "\\")


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _check_query(q: Query) -> None:
    def pattern_vars(patterns: Iterable[TriplePattern]) -> set[str]:
        out = set()
        for p in patterns:
            for t in (p.s, p.p, p.o):
                if isinstance(t, Var):
                    out.add(t.name)
        return out

    where_vars = pattern_vars(q.required())
    optional_vars: set[str] = set()
    seen_optionals: set[str] = set()
    for item in q.where:
        if isinstance(item, OptionalBlock):
            seen_optionals |= pattern_vars(item.patterns)
            optional_vars |= pattern_vars(item.patterns)
        elif isinstance(item, NotBoundFilter):
            if item.var not in seen_optionals:
                raise ParseError(
                    f"filter variable ?{item.var} must come from a preceding OPTIONAL", 0, 0
                )
    for v in q.select:
        if v not in where_vars and v not in optional_vars:
            raise ParseError(f"selected variable ?{v} never occurs in WHERE", 0, 0)


def parse_query(text: str, prefixes: Mapping[str, str] | None = None) -> Query:
    return _Parser(_lex(text), prefixes or NAMESPACES).query()


def pretty_print(q: Query, prefixes: Mapping[str, str] | None = None) -> str:
    """Render a query so that parsing it again yields the same AST."""
    ns = prefixes or NAMESPACES
    by_len = sorted(ns.items(), key=lambda kv: -len(kv[1]))

    def term(t: Term, position: str = "object") -> str:
        if isinstance(t, Var):
            return f"?{t.name}"
        if isinstance(t, Lit):
            return f'"{_escape(t.value)}"'
        if position == "predicate" and t.value == RDF_TYPE:
            return "a"
        if t.value.startswith(_DIRECT_SCHEMES):
            return t.value
        for prefix, base in by_len:
            if t.value.startswith(base):
                local = t.value[len(base):]
                if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.-]*", local):
                    return f"{prefix}:{local}"
        return f"<{t.value}>"

    lines = []
    head = "SELECT " + ("DISTINCT " if q.distinct else "") + " ".join(f"?{v}" for v in q.select)
    lines.append(head + " WHERE {")
    for item in q.where:
        if isinstance(item, TriplePattern):
            lines.append(f"  {term(item.s, 's')} {term(item.p, 'predicate')} {term(item.o)} .")
        elif isinstance(item, OptionalBlock):
            inner = " ".join(
                f"{term(p.s, 's')} {term(p.p, 'predicate')} {term(p.o)} ." for p in item.patterns
            )
            lines.append(f"  OPTIONAL {{ {inner} }}")
        else:
            lines.append(f"  FILTER (!bound(?{item.var}))")
    lines.append("}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# evaluation

Row = dict[str, Term]


def _term_matches(t: Term, value: str, literal: bool, row: Row) -> Row | None:
    if isinstance(t, Var):
        bound = row.get(t.name)
        actual: Term = Lit(value) if literal else Iri(value)
        if bound is None:
            new = dict(row)
            new[t.name] = actual
            return new
        return row if bound == actual else None
    if isinstance(t, Lit):
        return row if literal and t.value == value else None
    return row if not literal and t.value == value else None


def _match_pattern(p: TriplePattern, triples: Sequence[Triple], row: Row) -> Iterator[Row]:
    for t in triples:
        r = _term_matches(p.s, t.subject, False, row)
        if r is None:
            continue
        r = _term_matches(p.p, t.predicate, False, r)
        if r is None:
            continue
        r = _term_matches(p.o, t.obj, t.literal, r)
        if r is not None:
            yield r


def _eval_bgp(patterns: Sequence[TriplePattern], triples: Sequence[Triple], rows: list[Row]) -> list[Row]:
    for p in patterns:
        rows = [r2 for r in rows for r2 in _match_pattern(p, triples, r)]
    return rows


def eval_query(q: Query, store: Iterable[Triple]) -> list[Row]:
    """Join semantics: required patterns, then each OPTIONAL as a left
    join in textual order, then the not-bound filters; rows are the
    projected bindings, ordered lexicographically."""
    triples = list(store)
    rows: list[Row] = [{}]
    rows = _eval_bgp(q.required(), triples, rows)
    for opt in q.optionals():
        next_rows: list[Row] = []
        for row in rows:
            extended = _eval_bgp(list(opt.patterns), triples, [row])
            next_rows.extend(extended if extended else [row])
        rows = next_rows
    for f in q.filters():
        rows = [r for r in rows if f.var not in r]

    def sort_key(row: Row) -> tuple[str, ...]:
        return tuple(_term_text(row.get(v)) for v in q.select)

    projected = [{v: row[v] for v in q.select if v in row} for row in rows]
    if q.distinct:
        seen = set()
        unique = []
        for row in projected:
            key = tuple(sorted((k, _term_text(v)) for k, v in row.items()))
            if key not in seen:
                seen.add(key)
                unique.append(row)
        projected = unique
    projected.sort(key=sort_key)
    return projected


def _term_text(t: Term | None) -> str:
    if t is None:
        return ""
    if isinstance(t, Lit):
        return f'"{t.value}"'
    return t.value  # type: ignore[union-attr]


# ---------------------------------------------------------------------------
# triple extraction

_KIND_CLASS = {
    FragmentKind.CD_OUTLINE: "ContentDictionary",
    FragmentKind.SYMBOL_OUTLINE: "CDDefinition",
    FragmentKind.PROPERTY: "Property",
    FragmentKind.EXAMPLE: "Example",
}

_CD_METADATA_PREDICATES = {
    "Description": NAMESPACES["dc"] + "description",
    "CDDate": NAMESPACES["dc"] + "date",
    "CDStatus": NAMESPACES["omo"] + "status",
    "CDVersion": NAMESPACES["omo"] + "version",
}


def extract_triples(tree: FragmentTree, cd: ContentDictionary,
                    namespaces: Mapping[str, str] | None = None) -> list[Triple]:
    """Structural triples for one split CD: fragment types, part-whole
    edges, symbol-use edges, metadata literals, and the per-page
    discussion hook."""
    ns = namespaces or NAMESPACES
    omo = ns["omo"]
    out: list[Triple] = []

    for fid, node in tree.nodes.items():
        page = f"page:{fid}"
        out.append(Triple(page, RDF_TYPE, omo + _KIND_CLASS[node.kind]))
        out.append(Triple(page, ns["ikewiki"] + "hasDiscussion", f"forum:{fid}"))
        for child in node.children():
            out.append(Triple(page, omo + "hasPart", f"page:{child}"))

    for key, value in cd.metadata.items():
        predicate = _CD_METADATA_PREDICATES.get(key)
        if predicate:
            out.append(Triple(f"page:{FragmentId(cd.name)}", predicate, value.strip(), literal=True))

    for sym in cd.symbols:
        sym_id = FragmentId(cd.name, sym.name)
        out.append(
            Triple(f"page:{sym_id}", ns["dc"] + "description", sym.description.strip(), literal=True)
        )

    # usesSymbol: emitted from the property/example fragment that holds
    # the formula, one edge per distinct referenced symbol
    for fid, node in tree.nodes.items():
        if node.kind not in (FragmentKind.PROPERTY, FragmentKind.EXAMPLE):
            continue
        assert fid.symbol is not None
        sym = cd.symbol(fid.symbol)
        if sym is None:
            continue
        refs: set[tuple[str, str]] = set()
        for obj in _fragment_objects(sym, fid.item or ""):
            for ref in iter_symbols(obj):
                refs.add(ref.pair)
        for ref_cd, ref_name in sorted(refs):
            try:
                target = FragmentId(ref_cd, ref_name)
            except InvalidName:
                continue
            out.append(Triple(f"page:{fid}", omo + "usesSymbol", f"page:{target}"))
    return out


def _fragment_objects(sym, item: str) -> list[OMObject]:
    """Objects inside one prop/ex fragment, mirroring the splitter's
    grouping rule."""
    from .fragments import _property_groups  # same grouping as split_cd

    if item.startswith("ex"):
        k = int(item[2:])
        examples = sym.examples()
        if k <= len(examples):
            return examples[k - 1].objects()
        return []
    k = int(item[4:])
    groups = _property_groups(sym)
    if k > len(groups):
        return []
    start, end = groups[k - 1]
    out = []
    for prop in sym.properties():
        if prop.span[0] >= start and prop.span[1] <= end and prop.obj is not None:
            out.append(prop.obj)
    return out


def open_issues(store: Iterable[Triple], symbols_only: bool = False,
                namespaces: Mapping[str, str] | None = None) -> list[FragmentId]:
    """Pages whose forum holds an Issue no Decision has settled."""
    text = OPEN_ISSUES_QUERY
    if symbols_only:
        text = text.replace("?P ikewiki:hasDiscussion ?D .",
                            "?P a omo:CDDefinition .\n  ?P ikewiki:hasDiscussion ?D .")
    rows = eval_query(parse_query(text, namespaces), store)
    out = []
    for row in rows:
        term = row.get("P")
        if isinstance(term, Iri) and term.value.startswith("page:"):
            try:
                out.append(FragmentId.parse(term.value[len("page:"):]))
            except InvalidName:
                continue
    return out


def dump_ntriples(triples: Iterable[Triple]) -> str:
    lines = []
    for t in sorted(triples, key=lambda t: (t.subject, t.predicate, t.obj)):
        obj = f'"{_escape(t.obj)}"' if t.literal else f"<{t.obj}>"
        lines.append(f"<{t.subject}> <{t.predicate}> {obj} .")
    return "\n".join(lines) + ("\n" if lines else "")
