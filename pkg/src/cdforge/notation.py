"""Declarative notation definitions, rendering, and the linear oracle.

Objects render through per-symbol definitions (fixity, glyph,
precedence, associativity) into either Presentation MathML with
parallel markup or a linear text form.  The linear form is exact: a
precedence-climbing reparser maps it back to the object, and the
renderer emits the minimum set of brackets for which that inversion
holds.

Bracketing uses two numbers per rendered subexpression:

* ``head_prec``: the precedence of its top-level operator (atoms and
  fenced expressions count as infinitely tight).  A child is fenced
  when its head_prec lies below the floor the reparser would impose at
  that position.
* ``right_open``: the lowest loop floor still live at the expression's
  right edge.  A following operator token at or above it would be
  captured inside the expression by the reparser, so the expression is
  fenced when the actual follower reaches it.  Fencing closes the right
  edge.
"""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .fragments import FragmentId, FragmentKind, UnknownFragment, fragment_for_symbol
from .om import (
    ContentDictionary,
    ExampleItem,
    OMApplication,
    OMBinding,
    OMBytes,
    OMFloat,
    OMInteger,
    OMObject,
    OMString,
    OMSymbol,
    OMVariable,
    PropertyItem,
    SymbolDef,
    float_bits,
    float_from_bits,
    is_ncname,
)
from .xmlscan import escape_attr, escape_text, scan, xml_representable

__all__ = [
    "Fixity",
    "Associativity",
    "NotationDef",
    "NotationTable",
    "AmbiguousTable",
    "LinearParseError",
    "RenderedPage",
    "UnknownFragment",
    "render_object",
    "linearize",
    "parse_linear",
    "render_page",
    "parse_ntn",
    "serialize_ntn",
    "MATHML_NS",
]

MATHML_NS = "http://www.w3.org/1998/Math/MathML"

INF = 10**9
CALL_PREC = 1000

_RESERVED_GLYPH_CHARS = set('()[]{},."#')
_RESERVED_WORDS = {"bind", "b"}


class Fixity(str, Enum):
    INFIX = "infix"
    PREFIX = "prefix"
    POSTFIX = "postfix"
    FUNCTION = "function"
    BINDER = "binder"


class Associativity(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    NONE = "none"


class AmbiguousTable(ValueError):
    pass


class LinearParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


@dataclass(frozen=True, slots=True)
class NotationDef:
    cd: str
    name: str
    fixity: Fixity
    glyph: str
    precedence: int = 500
    assoc: Associativity | None = None
    arity: int | None = None

    def __post_init__(self) -> None:
        if not self.glyph:
            raise AmbiguousTable(f"{self.cd}#{self.name}: empty glyph")
        if not 0 <= self.precedence <= 1000:
            raise AmbiguousTable(f"{self.cd}#{self.name}: precedence outside 0..1000")
        if self.fixity == Fixity.INFIX and self.assoc is None:
            raise AmbiguousTable(f"{self.cd}#{self.name}: infix needs an associativity")
        if self.fixity != Fixity.INFIX and self.assoc is not None:
            raise AmbiguousTable(f"{self.cd}#{self.name}: only infix takes associativity")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.cd, self.name)


_IDENTIFIERISH = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_NAME_CHAR = re.compile(r"[A-Za-z0-9_]")


class NotationTable:
    """Validated glyph table.  Glyphs must be pairwise distinct, free of
    reserved characters, and no glyph may be a prefix of another, so
    that longest-match lexing of the linear form is unambiguous."""

    def __init__(self, defs: Iterable[NotationDef]):
        self.defs: dict[tuple[str, str], NotationDef] = {}
        self.by_glyph: dict[str, NotationDef] = {}
        for d in defs:
            if d.pair in self.defs:
                raise AmbiguousTable(f"duplicate definition for {d.cd}#{d.name}")
            self.defs[d.pair] = d
        by_prec: dict[int, Associativity] = {}
        for d in self.defs.values():
            if d.glyph in self.by_glyph:
                raise AmbiguousTable(f"glyph {d.glyph!r} defined twice")
            if d.glyph in _RESERVED_WORDS:
                raise AmbiguousTable(f"glyph {d.glyph!r} is reserved")
            if any(c.isspace() or c in _RESERVED_GLYPH_CHARS for c in d.glyph):
                raise AmbiguousTable(f"glyph {d.glyph!r} contains reserved characters")
            if d.glyph[0].isdigit():
                raise AmbiguousTable(f"glyph {d.glyph!r} may not start with a digit")
            self.by_glyph[d.glyph] = d
            if d.fixity == Fixity.INFIX:
                assert d.assoc is not None
                if by_prec.setdefault(d.precedence, d.assoc) != d.assoc:
                    raise AmbiguousTable(
                        f"infix glyphs at precedence {d.precedence} mix associativities"
                    )
        glyphs = sorted(self.by_glyph)
        for a, b in zip(glyphs, glyphs[1:]):
            if b.startswith(a):
                raise AmbiguousTable(f"glyph {a!r} is a prefix of {b!r}")
        self._glyphs_by_len = sorted(self.by_glyph, key=len, reverse=True)

    def get(self, obj: OMObject) -> NotationDef | None:
        if isinstance(obj, OMSymbol):
            return self.defs.get(obj.pair)
        return None

    def merged_with(self, other: "NotationTable") -> "NotationTable":
        return NotationTable(list(self.defs.values()) + list(other.defs.values()))


# ---------------------------------------------------------------------------
# tokens

@dataclass(frozen=True, slots=True)
class Token:
    text: str
    kind: str  # mn | mi | mo | ms
    content_id: str | None = None
    symbol: tuple[str, str] | None = None
    pair: int | None = None  # fence pair index, on '(' and ')' only


@dataclass(frozen=True, slots=True)
class _Rendered:
    tokens: tuple[Token, ...]
    head_prec: int
    right_open: int


class _Namer:
    def __init__(self) -> None:
        self.n = 0
        self.fences = 0

    def content_id(self) -> str:
        out = f"c{self.n}"
        self.n += 1
        return out

    def fence_pair(self) -> int:
        out = self.fences
        self.fences += 1
        return out


def _fence(r: _Rendered, namer: _Namer) -> _Rendered:
    pair = namer.fence_pair()
    tokens = (Token("(", "mo", pair=pair),) + r.tokens + (Token(")", "mo", pair=pair),)
    return _Rendered(tokens, INF, INF)


def _float_text(value: float) -> str:
    if value != value or value in (float("inf"), float("-inf")):
        return f"0x{float_bits(value):016x}"
    return repr(value)


def _render(obj: OMObject, table: NotationTable, namer: _Namer) -> _Rendered:
    nid = namer.content_id()

    if isinstance(obj, OMInteger):
        return _Rendered((Token(str(obj.value), "mn", nid),), INF, INF)
    if isinstance(obj, OMFloat):
        return _Rendered((Token(_float_text(obj.value), "mn", nid),), INF, INF)
    if isinstance(obj, OMString):
        return _Rendered((Token(json.dumps(obj.value, ensure_ascii=False), "ms", nid),), INF, INF)
    if isinstance(obj, OMBytes):
        text = 'b"' + base64.b64encode(obj.value).decode("ascii") + '"'
        return _Rendered((Token(text, "ms", nid),), INF, INF)
    if isinstance(obj, OMVariable):
        return _Rendered((Token(obj.name, "mi", nid),), INF, INF)
    if isinstance(obj, OMSymbol):
        return _Rendered(
            (Token(f"{obj.cd}#{obj.name}", "mi", nid, obj.pair),), INF, INF
        )
    if isinstance(obj, OMApplication):
        return _render_application(obj, table, namer, nid)
    if isinstance(obj, OMBinding):
        return _render_binding(obj, table, namer, nid)
    raise TypeError(f"not an OMObject: {obj!r}")


def _render_application(
    obj: OMApplication, table: NotationTable, namer: _Namer, nid: str
) -> _Rendered:
    head = obj.head
    args = obj.arguments
    d = table.get(head)

    # a stated arity that does not match sends the application to the
    # default form, except for function glyphs, whose shape is the same
    if d is not None and d.arity is not None and len(args) != d.arity and d.fixity != Fixity.FUNCTION:
        d = None

    if d is not None and d.fixity == Fixity.INFIX and len(args) == 2:
        head_id = namer.content_id()
        P = d.precedence
        left_floor = P if d.assoc == Associativity.LEFT else P + 1
        right_floor = P if d.assoc == Associativity.RIGHT else P + 1

        lhs = _render(args[0], table, namer)
        if lhs.head_prec < left_floor or P >= lhs.right_open:
            lhs = _fence(lhs, namer)
        rhs = _render(args[1], table, namer)
        if rhs.head_prec < right_floor:
            rhs = _fence(rhs, namer)
        op = Token(d.glyph, "mo", head_id, d.pair)
        return _Rendered(
            lhs.tokens + (op,) + rhs.tokens, P, min(right_floor, rhs.right_open)
        )

    if d is not None and d.fixity == Fixity.PREFIX and len(args) == 1:
        head_id = namer.content_id()
        P = d.precedence
        arg = _render(args[0], table, namer)
        if arg.head_prec < P:
            arg = _fence(arg, namer)
        op = Token(d.glyph, "mo", head_id, d.pair)
        # prefix forms parse from primary position, so no floor ever
        # excludes them; only right-edge capture can force a fence
        return _Rendered((op,) + arg.tokens, INF, min(P, arg.right_open))

    if d is not None and d.fixity == Fixity.POSTFIX and len(args) == 1:
        head_id = namer.content_id()
        P = d.precedence
        arg = _render(args[0], table, namer)
        if arg.head_prec < P or P >= arg.right_open:
            arg = _fence(arg, namer)
        op = Token(d.glyph, "mo", head_id, d.pair)
        return _Rendered(arg.tokens + (op,), P, INF)

    if d is not None and d.fixity == Fixity.FUNCTION:
        head_id = namer.content_id()
        name_tok = Token(d.glyph, "mi", head_id, d.pair)
        return _Rendered(_call_tokens((name_tok,), args, table, namer), INF, INF)

    # default notation: cd#name(...) for symbol heads, expr(...) otherwise
    if isinstance(head, OMSymbol):
        head_id = namer.content_id()
        head_tokens: tuple[Token, ...] = (
            Token(f"{head.cd}#{head.name}", "mi", head_id, head.pair),
        )
    else:
        rendered = _render(head, table, namer)
        if rendered.head_prec < CALL_PREC or CALL_PREC >= rendered.right_open:
            rendered = _fence(rendered, namer)
        head_tokens = rendered.tokens
    return _Rendered(_call_tokens(head_tokens, args, table, namer), INF, INF)


def _call_tokens(
    head_tokens: tuple[Token, ...],
    args: tuple[OMObject, ...],
    table: NotationTable,
    namer: _Namer,
) -> tuple[Token, ...]:
    out = list(head_tokens)
    out.append(Token("(", "mo"))
    for i, a in enumerate(args):
        if i:
            out.append(Token(",", "mo"))
        out.extend(_render(a, table, namer).tokens)
    out.append(Token(")", "mo"))
    return tuple(out)


def _render_binding(
    obj: OMBinding, table: NotationTable, namer: _Namer, nid: str
) -> _Rendered:
    d = table.get(obj.binder)
    if d is not None and d.fixity == Fixity.BINDER:
        binder_id = namer.content_id()
        var_tokens: list[Token] = []
        for i, v in enumerate(obj.bvars):
            if i:
                var_tokens.append(Token(",", "mo"))
            var_tokens.append(Token(v.name, "mi", namer.content_id()))
        P = d.precedence
        body = _render(obj.body, table, namer)
        if body.head_prec < P:
            body = _fence(body, namer)
        tokens = (
            (Token(d.glyph, "mo", binder_id, d.pair),)
            + tuple(var_tokens)
            + (Token(".", "mo"),)
            + body.tokens
        )
        # like prefix forms, binders are primaries: floor-exempt
        return _Rendered(tokens, INF, min(P, body.right_open))

    # total fallback for binders without a binder-fixity definition
    out = [Token("bind", "mi"), Token("(", "mo")]
    out.extend(_render(obj.binder, table, namer).tokens)
    for v in obj.bvars:
        out.append(Token(",", "mo"))
        out.append(Token(v.name, "mi", namer.content_id()))
    out.append(Token(",", "mo"))
    out.extend(_render(obj.body, table, namer).tokens)
    out.append(Token(")", "mo"))
    return _Rendered(tuple(out), INF, INF)


def _tokens(obj: OMObject, table: NotationTable) -> tuple[Token, ...]:
    return _render(obj, table, _Namer()).tokens


def linearize(obj: OMObject, table: NotationTable) -> str:
    """Deterministic text form with minimal bracketing."""
    return "".join(t.text for t in _tokens(obj, table))


# ---------------------------------------------------------------------------
# linear reparser (the oracle)

_NUMBER_RE = re.compile(r"0x[0-9a-f]{16}|\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_BYTES_RE = re.compile(r'b"([A-Za-z0-9+/=]*)"')
_STRING_RE = re.compile(r'"(?:[^"\\]|\\.)*"')


@dataclass(frozen=True, slots=True)
class _LTok:
    kind: str  # number | ident | string | bytes | glyph | punct | bind | eof
    text: str
    pos: int


def _lex_linear(text: str, table: NotationTable) -> list[_LTok]:
    tokens: list[_LTok] = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _BYTES_RE.match(text, pos)
        if m:
            tokens.append(_LTok("bytes", m.group(0), pos))
            pos = m.end()
            continue
        m = _STRING_RE.match(text, pos)
        if m:
            tokens.append(_LTok("string", m.group(0), pos))
            pos = m.end()
            continue
        m = _NUMBER_RE.match(text, pos)
        if m:
            tokens.append(_LTok("number", m.group(0), pos))
            pos = m.end()
            continue
        glyph = _match_glyph(text, pos, table)
        if glyph is not None:
            tokens.append(_LTok("glyph", glyph, pos))
            pos += len(glyph)
            continue
        m = _IDENT_RE.match(text, pos)
        if m:
            word = m.group(0)
            tokens.append(_LTok("bind" if word == "bind" else "ident", word, pos))
            pos = m.end()
            continue
        if ch in "(),.#-":
            tokens.append(_LTok("punct", ch, pos))
            pos += 1
            continue
        raise LinearParseError(f"cannot read {ch!r}", pos)
    tokens.append(_LTok("eof", "", n))
    return tokens


def _match_glyph(text: str, pos: int, table: NotationTable) -> str | None:
    for glyph in table._glyphs_by_len:
        if text.startswith(glyph, pos):
            if _IDENTIFIERISH.match(glyph):
                after = pos + len(glyph)
                if after < len(text) and _NAME_CHAR.match(text[after]):
                    continue  # part of a longer identifier
            return glyph
    return None


class _LinearParser:
    def __init__(self, tokens: list[_LTok], table: NotationTable):
        self.tokens = tokens
        self.pos = 0
        self.table = table

    def peek(self) -> _LTok:
        return self.tokens[self.pos]

    def next(self) -> _LTok:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> _LTok:
        t = self.next()
        if t.text != text:
            raise LinearParseError(f"expected {text!r}, got {t.text!r}", t.pos)
        return t

    def parse(self) -> OMObject:
        obj = self.expr(0)
        t = self.peek()
        if t.kind != "eof":
            raise LinearParseError(f"trailing input {t.text!r}", t.pos)
        return obj

    def expr(self, min_prec: int) -> OMObject:
        lhs = self.primary()
        while True:
            t = self.peek()
            if t.text == "(" and CALL_PREC >= min_prec:
                self.next()
                lhs = OMApplication((lhs,) + tuple(self.call_args()))
                continue
            if t.kind == "glyph":
                d = self.table.by_glyph[t.text]
                if d.fixity == Fixity.INFIX and d.precedence >= min_prec:
                    self.next()
                    nxt = d.precedence if d.assoc == Associativity.RIGHT else d.precedence + 1
                    rhs = self.expr(nxt)
                    lhs = OMApplication((OMSymbol(d.cd, d.name), lhs, rhs))
                    if d.assoc == Associativity.NONE:
                        follow = self.peek()
                        if follow.kind == "glyph":
                            nd = self.table.by_glyph[follow.text]
                            if nd.fixity == Fixity.INFIX and nd.precedence == d.precedence:
                                raise LinearParseError(
                                    f"{d.glyph!r} does not chain; add brackets", follow.pos
                                )
                    continue
                if d.fixity == Fixity.POSTFIX and d.precedence >= min_prec:
                    self.next()
                    lhs = OMApplication((OMSymbol(d.cd, d.name), lhs))
                    continue
            return lhs

    def call_args(self) -> list[OMObject]:
        args: list[OMObject] = []
        if self.peek().text == ")":
            self.next()
            return args
        while True:
            args.append(self.expr(0))
            t = self.next()
            if t.text == ")":
                return args
            if t.text != ",":
                raise LinearParseError(f"expected ',' or ')', got {t.text!r}", t.pos)

    def primary(self) -> OMObject:
        t = self.next()
        if t.text == "(":
            inner = self.expr(0)
            self.expect(")")
            return inner
        if t.kind == "number":
            return _number_value(t.text)
        if t.text == "-" and self.peek().kind == "number":
            num = self.next()
            value = _number_value(num.text)
            if isinstance(value, OMInteger):
                return OMInteger(-value.value)
            return OMFloat(-value.value)
        if t.kind == "string":
            return OMString(json.loads(t.text))
        if t.kind == "bytes":
            m = _BYTES_RE.fullmatch(t.text)
            assert m is not None
            return OMBytes(base64.b64decode(m.group(1)))
        if t.kind == "bind":
            return self.bind_form(t)
        if t.kind == "ident":
            if self.peek().text == "#":
                self.next()
                name = self.next()
                if name.kind not in ("ident", "glyph"):
                    raise LinearParseError("expected a symbol name after '#'", name.pos)
                return OMSymbol(t.text, name.text)
            return OMVariable(t.text)
        if t.kind == "glyph":
            d = self.table.by_glyph[t.text]
            if d.fixity == Fixity.PREFIX:
                arg = self.expr(d.precedence)
                return OMApplication((OMSymbol(d.cd, d.name), arg))
            if d.fixity == Fixity.BINDER:
                return self.binder_form(d)
            if d.fixity == Fixity.FUNCTION:
                self.expect("(")
                return OMApplication(
                    (OMSymbol(d.cd, d.name),) + tuple(self.call_args())
                )
        raise LinearParseError(f"unexpected {t.text or 'end of input'!r}", t.pos)

    def binder_form(self, d: NotationDef) -> OMObject:
        bvars: list[OMVariable] = []
        if self.peek().kind == "ident":
            bvars.append(OMVariable(self.next().text))
            while self.peek().text == ",":
                self.next()
                name = self.next()
                if name.kind != "ident":
                    raise LinearParseError("expected a bound variable", name.pos)
                bvars.append(OMVariable(name.text))
        self.expect(".")
        body = self.expr(d.precedence)
        return OMBinding(OMSymbol(d.cd, d.name), tuple(bvars), body)

    def bind_form(self, t: _LTok) -> OMObject:
        self.expect("(")
        items = self.call_args()
        if len(items) < 2:
            raise LinearParseError("bind(...) needs a binder and a body", t.pos)
        bvars = []
        for item in items[1:-1]:
            if not isinstance(item, OMVariable):
                raise LinearParseError("bind(...) middle arguments must be variables", t.pos)
            bvars.append(item)
        return OMBinding(items[0], tuple(bvars), items[-1])


def _number_value(text: str) -> OMInteger | OMFloat:
    if text.startswith("0x"):
        return OMFloat(float_from_bits(int(text[2:], 16)))
    if "." in text or "e" in text or "E" in text:
        return OMFloat(float(text))
    return OMInteger(int(text))


def parse_linear(text: str, table: NotationTable) -> OMObject:
    """Inverse of linearize over the table's symbols.

    Variable names are plain identifiers here (no '.' or '-', and none
    may collide with a glyph or the reserved word ``bind``); symbols
    without a glyph read back through the ``cd#name`` form.
    """
    return _LinearParser(_lex_linear(text, table), table).parse()


# ---------------------------------------------------------------------------
# MathML / page rendering

@dataclass
class El:
    tag: str
    attrs: dict[str, str] = field(default_factory=dict)
    children: list["El | str"] = field(default_factory=list)

    def append(self, child: "El | str") -> "El":
        self.children.append(child)
        return self

    def to_xml(self) -> str:
        attrs = "".join(
            f' {k}="{escape_attr(v)}"' for k, v in sorted(self.attrs.items())
        )
        if not self.children:
            return f"<{self.tag}{attrs}/>"
        inner = "".join(
            c.to_xml() if isinstance(c, El) else escape_text(c) for c in self.children
        )
        return f"<{self.tag}{attrs}>{inner}</{self.tag}>"

    def iter(self):
        yield self
        for c in self.children:
            if isinstance(c, El):
                yield from c.iter()


@dataclass(frozen=True)
class RenderedPage:
    presentation: El
    content_ids: dict[str, str]

    @property
    def xml(self) -> str:
        return self.presentation.to_xml()


def _annotated_om(obj: OMObject, depth: int, counter: list[int], prefix: str) -> str:
    """Canonical object XML with id attributes assigned in the same
    pre-order as the token renderer."""
    nid = f"{prefix}c{counter[0]}"
    counter[0] += 1
    pad = " " * depth
    if isinstance(obj, OMInteger):
        return f'{pad}<OMI id="{nid}">{obj.value}</OMI>'
    if isinstance(obj, OMFloat):
        v = obj.value
        if v != v or v in (float("inf"), float("-inf")):
            return f'{pad}<OMF hex="{float_bits(v):016X}" id="{nid}"/>'
        return f'{pad}<OMF dec="{v!r}" id="{nid}"/>'
    if isinstance(obj, OMString):
        if not xml_representable(obj.value):
            raise ValueError("string contains characters XML cannot carry")
        return f'{pad}<OMSTR id="{nid}">{escape_text(obj.value)}</OMSTR>'
    if isinstance(obj, OMBytes):
        return f'{pad}<OMB id="{nid}">{base64.b64encode(obj.value).decode("ascii")}</OMB>'
    if isinstance(obj, OMVariable):
        return f'{pad}<OMV id="{nid}" name="{escape_attr(obj.name)}"/>'
    if isinstance(obj, OMSymbol):
        extra = f' cdbase="{escape_attr(obj.cdbase)}"' if obj.cdbase else ""
        return (
            f'{pad}<OMS cd="{escape_attr(obj.cd)}"{extra} id="{nid}" '
            f'name="{escape_attr(obj.name)}"/>'
        )
    if isinstance(obj, OMApplication):
        inner = "\n".join(_annotated_om(e, depth + 1, counter, prefix) for e in obj.elements)
        return f'{pad}<OMA id="{nid}">\n{inner}\n{pad}</OMA>'
    if isinstance(obj, OMBinding):
        binder = _annotated_om(obj.binder, depth + 1, counter, prefix)
        bpad = " " * (depth + 1)
        if obj.bvars:
            bvars = "\n".join(_annotated_om(v, depth + 2, counter, prefix) for v in obj.bvars)
            bvar_el = f"{bpad}<OMBVAR>\n{bvars}\n{bpad}</OMBVAR>"
        else:
            bvar_el = f"{bpad}<OMBVAR/>"
        body = _annotated_om(obj.body, depth + 1, counter, prefix)
        return f'{pad}<OMBIND id="{nid}">\n{binder}\n{bvar_el}\n{body}\n{pad}</OMBIND>'
    raise TypeError(f"not an OMObject: {obj!r}")


def render_object(
    obj: OMObject,
    table: NotationTable,
    known: set[tuple[str, str]] | None = None,
    id_prefix: str = "",
) -> RenderedPage:
    """Presentation MathML with parallel markup.

    Every token that came from a symbol carries ``xref`` (its content
    node) and ``href`` (the symbol's page); the content_ids map relates
    each content node to the first presentation token it produced.
    """
    namer = _Namer()
    rendered = _render(obj, table, namer)

    row = El("mrow")
    content_ids: dict[str, str] = {}
    for i, tok in enumerate(rendered.tokens):
        el = El(tok.kind, {"id": f"{id_prefix}p{i}"})
        el.append(tok.text)
        if tok.symbol is not None:
            cd, name = tok.symbol
            el.attrs["href"] = f"/page/{fragment_for_symbol(cd, name)}"
            if known is not None and tok.symbol not in known:
                el.attrs["data-unresolved"] = "true"
        if tok.content_id is not None:
            cid = id_prefix + tok.content_id
            el.attrs["xref"] = cid
            if tok.symbol is not None and cid not in content_ids:
                content_ids[cid] = f"{id_prefix}p{i}"
        row.append(el)

    counter = [0]
    om_xml = _annotated_om(obj, 0, counter, id_prefix)
    annotation = El("annotation-xml", {"encoding": "OpenMath"})
    annotation.append(_RawXml(om_xml))

    semantics = El("semantics")
    semantics.append(row)
    semantics.append(annotation)
    math = El("math", {"xmlns": MATHML_NS})
    math.append(semantics)
    return RenderedPage(math, content_ids)


class _RawXml(El):
    """Pre-serialized subtree; embedded verbatim."""

    def __init__(self, xml: str):
        super().__init__("raw")
        self.raw = xml

    def to_xml(self) -> str:
        return self.raw

    def iter(self):
        return iter(())


# ---------------------------------------------------------------------------
# page composition

def render_page(
    fid: FragmentId,
    cds: Mapping[str, ContentDictionary],
    table: NotationTable,
) -> RenderedPage:
    """One wiki page: CD pages show the metadata header and every
    symbol section; symbol pages show description, properties, and
    examples; property/example pages show just their own block."""
    cd = cds.get(fid.cd)
    if cd is None:
        raise UnknownFragment(str(fid))
    known = {
        (peer.name, sym.name) for peer in cds.values() for sym in peer.symbols
    }

    page = El("div", {"class": "page", "data-fragment": str(fid)})
    content_ids: dict[str, str] = {}
    formula_no = [0]

    def math_for(obj: OMObject) -> El:
        sub = render_object(obj, table, known, id_prefix=f"m{formula_no[0]}-")
        formula_no[0] += 1
        content_ids.update(sub.content_ids)
        return sub.presentation

    def property_block(parent: El, items: list[PropertyItem]) -> None:
        for item in items:
            if item.kind == "CMP":
                parent.append(El("p", {"class": "cmp"}, [item.text or ""]))
            else:
                assert item.obj is not None
                holder = El("div", {"class": "fmp"})
                holder.append(math_for(item.obj))
                parent.append(holder)

    def example_block(parent: El, ex: ExampleItem) -> None:
        holder = El("div", {"class": "example"})
        for kind, payload in ex.segments:
            if kind == "text":
                holder.append(El("p", {}, [payload]))  # type: ignore[list-item]
            else:
                holder.append(math_for(payload))  # type: ignore[arg-type]
        parent.append(holder)

    def symbol_section(sym: SymbolDef) -> El:
        sec = El("section", {"class": "symbol", "id": f"symbol-{sym.name}"})
        sec.append(El("h2", {}, [sym.name]))
        if sym.role:
            sec.append(El("p", {"class": "role"}, [sym.role]))
        sec.append(El("p", {"class": "description"}, [sym.description]))
        for item in sym.items:
            if isinstance(item, PropertyItem):
                property_block(sec, [item])
            else:
                example_block(sec, item)
        return sec

    if fid.level == FragmentKind.CD_OUTLINE:
        page.append(El("h1", {}, [cd.name]))
        meta = El("dl", {"class": "metadata"})
        for key, value in cd.metadata.items():
            meta.append(El("dt", {}, [key]))
            meta.append(El("dd", {}, [value.strip()]))
        page.append(meta)
        for sym in cd.symbols:
            page.append(symbol_section(sym))
        return RenderedPage(page, content_ids)

    assert fid.symbol is not None
    sym = cd.symbol(fid.symbol)
    if sym is None:
        raise UnknownFragment(str(fid))

    if fid.item is None:
        page.append(El("h1", {}, [f"{cd.name}#{sym.name}"]))
        page.append(symbol_section(sym))
        return RenderedPage(page, content_ids)

    from .fragments import _property_groups

    if fid.item.startswith("prop"):
        k = int(fid.item[4:])
        groups = _property_groups(sym)
        if k > len(groups):
            raise UnknownFragment(str(fid))
        start, end = groups[k - 1]
        items = [p for p in sym.properties() if start <= p.span[0] and p.span[1] <= end]
        page.append(El("h1", {}, [str(fid)]))
        property_block(page, items)
        return RenderedPage(page, content_ids)

    k = int(fid.item[2:])
    examples = sym.examples()
    if k > len(examples):
        raise UnknownFragment(str(fid))
    page.append(El("h1", {}, [str(fid)]))
    example_block(page, examples[k - 1])
    return RenderedPage(page, content_ids)


# ---------------------------------------------------------------------------
# notation dictionary files

def parse_ntn(xml_text: bytes | str, default_cd: str | None = None) -> list[NotationDef]:
    """Read an ``.ntn`` notation dictionary."""
    root = scan(xml_text)
    if root.local != "notations":
        raise AmbiguousTable(f"root element must be notations, got {root.local}")
    cd = root.get("cd") or default_cd
    out: list[NotationDef] = []
    for el in root.elements():
        if el.local != "notation":
            raise AmbiguousTable(f"unknown element {el.local} in notations")
        name = el.get("name")
        fixity = el.get("fixity")
        glyph = el.get("glyph")
        if not name or not fixity or glyph is None:
            raise AmbiguousTable("notation needs name, fixity, and glyph attributes")
        ncd = el.get("cd") or cd
        if not ncd or not is_ncname(ncd) or not is_ncname(name):
            raise AmbiguousTable(f"bad symbol reference {ncd}#{name}")
        assoc = el.get("associativity")
        arity = el.get("arity")
        out.append(
            NotationDef(
                ncd,
                name,
                Fixity(fixity),
                glyph,
                int(el.get("precedence") or 500),
                Associativity(assoc) if assoc else None,
                int(arity) if arity else None,
            )
        )
    return out


def serialize_ntn(cd: str, defs: Iterable[NotationDef]) -> bytes:
    lines = [f'<notations cd="{escape_attr(cd)}">']
    for d in sorted(defs, key=lambda d: (d.cd, d.name)):
        attrs = {
            "name": d.name,
            "fixity": d.fixity.value,
            "glyph": d.glyph,
            "precedence": str(d.precedence),
        }
        if d.cd != cd:
            attrs["cd"] = d.cd
        if d.assoc is not None:
            attrs["associativity"] = d.assoc.value
        if d.arity is not None:
            attrs["arity"] = str(d.arity)
        body = " ".join(f'{k}="{escape_attr(v)}"' for k, v in attrs.items())
        lines.append(f" <notation {body}/>")
    lines.append("</notations>")
    return ("\n".join(lines) + "\n").encode("utf-8")
