"""OpenMath object model plus content-dictionary and signature files.

Covers the XML encoding of objects (OMOBJ/OMS/OMV/OMI/OMF/OMSTR/OMB/
OMA/OMBIND), the ``.ocd`` content-dictionary vocabulary, and ``.sts``
signature files.  Parsed models keep the original bytes and the byte
span of every symbol definition, property, and example, so an
untouched model serializes back to the identical file.
"""

from __future__ import annotations

import base64
import re
import struct
from dataclasses import dataclass, replace
from typing import Iterator, Literal

from .xmlscan import XmlElement, XmlText, emit, escape_text, scan, xml_representable

__all__ = [
    "OMObject",
    "OMInteger",
    "OMFloat",
    "OMString",
    "OMBytes",
    "OMVariable",
    "OMSymbol",
    "OMApplication",
    "OMBinding",
    "ContentDictionary",
    "SymbolDef",
    "PropertyItem",
    "ExampleItem",
    "Signature",
    "Diagnostic",
    "SchemaError",
    "DuplicateSymbol",
    "UnsupportedKind",
    "EmptyApplication",
    "parse_cd",
    "serialize_cd",
    "parse_om_object",
    "serialize_om_object",
    "validate_cd",
    "parse_sts",
    "edit_symbol_description",
    "is_ncname",
]

NCNAME_RE = re.compile(r"^[^\W\d][-.\w]*$", re.UNICODE)

ROLES = frozenset(
    ["application", "binder", "constant", "attribution", "semantic-attribution", "error"]
)


def is_ncname(text: str) -> bool:
    return bool(text) and ":" not in text and NCNAME_RE.match(text) is not None


class SchemaError(Exception):
    """Input is well-formed XML but violates the CD/object vocabulary."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class DuplicateSymbol(SchemaError):
    def __init__(self, name: str):
        super().__init__(name, "symbol defined twice in one CD")
        self.name = name


class UnsupportedKind(SchemaError):
    """OMATTR and OME objects are rejected, never silently dropped."""

    def __init__(self, kind: str):
        super().__init__(kind, "object kind not supported")
        self.kind = kind


class EmptyApplication(SchemaError):
    def __init__(self) -> None:
        super().__init__("OMA", "application needs at least one element")


# ---------------------------------------------------------------------------
# objects


class OMObject:
    """Base of the object variants; all values are immutable."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class OMInteger(OMObject):
    value: int


@dataclass(frozen=True, slots=True)
class OMFloat(OMObject):
    value: float

    # structural equality is on the bit pattern so NaN payloads survive
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OMFloat):
            return NotImplemented
        return float_bits(self.value) == float_bits(other.value)

    def __hash__(self) -> int:
        return hash(float_bits(self.value))


@dataclass(frozen=True, slots=True)
class OMString(OMObject):
    value: str


@dataclass(frozen=True, slots=True)
class OMBytes(OMObject):
    value: bytes


@dataclass(frozen=True, slots=True)
class OMVariable(OMObject):
    name: str

    def __post_init__(self) -> None:
        if not is_ncname(self.name):
            raise SchemaError("OMV", f"variable name {self.name!r} is not an NCName")


@dataclass(frozen=True, slots=True)
class OMSymbol(OMObject):
    cd: str
    name: str
    cdbase: str | None = None

    def __post_init__(self) -> None:
        if not is_ncname(self.cd):
            raise SchemaError("OMS", f"cd {self.cd!r} is not an NCName")
        if not is_ncname(self.name):
            raise SchemaError("OMS", f"name {self.name!r} is not an NCName")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.cd, self.name)


@dataclass(frozen=True, slots=True)
class OMApplication(OMObject):
    elements: tuple[OMObject, ...]

    def __post_init__(self) -> None:
        if len(self.elements) == 0:
            raise EmptyApplication()

    @property
    def head(self) -> OMObject:
        return self.elements[0]

    @property
    def arguments(self) -> tuple[OMObject, ...]:
        return self.elements[1:]


@dataclass(frozen=True, slots=True)
class OMBinding(OMObject):
    binder: OMObject
    bvars: tuple[OMVariable, ...]
    body: OMObject

    def __post_init__(self) -> None:
        seen = set()
        for v in self.bvars:
            if not isinstance(v, OMVariable):
                raise SchemaError("OMBIND", "bound variables must be OMV")
            if v.name in seen:
                raise SchemaError("OMBIND", f"duplicate bound variable {v.name!r}")
            seen.add(v.name)


def float_bits(value: float) -> int:
    return struct.unpack(">Q", struct.pack(">d", value))[0]


def float_from_bits(bits: int) -> float:
    return struct.unpack(">d", struct.pack(">Q", bits))[0]


def iter_symbols(obj: OMObject) -> Iterator[OMSymbol]:
    """Every OMS leaf of ``obj`` in depth-first order."""
    if isinstance(obj, OMSymbol):
        yield obj
    elif isinstance(obj, OMApplication):
        for el in obj.elements:
            yield from iter_symbols(el)
    elif isinstance(obj, OMBinding):
        yield from iter_symbols(obj.binder)
        yield from iter_symbols(obj.body)


# ---------------------------------------------------------------------------
# object XML encoding

_OM_KINDS = {"OMOBJ", "OMS", "OMV", "OMI", "OMF", "OMSTR", "OMB", "OMA", "OMBIND", "OMBVAR"}


def parse_om_object(xml_text: bytes | str) -> OMObject:
    """Parse one object in the OpenMath 2 XML encoding.

    Accepts either an OMOBJ wrapper or a bare object element.  OMATTR
    and OME raise UnsupportedKind.
    """
    root = scan(xml_text)
    if root.local == "OMOBJ":
        children = root.elements()
        if len(children) != 1:
            raise SchemaError("OMOBJ", "expected exactly one object child")
        return _om_from_element(children[0])
    return _om_from_element(root)


def _om_from_element(el: XmlElement) -> OMObject:
    kind = el.local
    if kind in ("OMATTR", "OME"):
        raise UnsupportedKind(kind)
    if kind == "OMI":
        text = el.text_content().strip()
        try:
            if text.startswith("x") or text.startswith("-x"):
                sign = -1 if text.startswith("-") else 1
                return OMInteger(sign * int(text.lstrip("-x"), 16))
            return OMInteger(int(text))
        except ValueError as exc:
            raise SchemaError("OMI", f"bad integer literal {text!r}") from exc
    if kind == "OMF":
        dec = el.get("dec")
        hexa = el.get("hex")
        if dec is not None:
            try:
                return OMFloat(float(dec))
            except ValueError as exc:
                raise SchemaError("OMF", f"bad dec attribute {dec!r}") from exc
        if hexa is not None:
            if not re.fullmatch(r"[0-9A-Fa-f]{16}", hexa):
                raise SchemaError("OMF", f"bad hex attribute {hexa!r}")
            return OMFloat(float_from_bits(int(hexa, 16)))
        raise SchemaError("OMF", "needs a dec or hex attribute")
    if kind == "OMSTR":
        return OMString(el.text_content())
    if kind == "OMB":
        try:
            return OMBytes(base64.b64decode(el.text_content().strip(), validate=True))
        except Exception as exc:
            raise SchemaError("OMB", "bad base64 content") from exc
    if kind == "OMV":
        name = el.get("name")
        if name is None:
            raise SchemaError("OMV", "missing name attribute")
        return OMVariable(name)
    if kind == "OMS":
        cd = el.get("cd")
        name = el.get("name")
        if cd is None or name is None:
            raise SchemaError("OMS", "needs cd and name attributes")
        return OMSymbol(cd, name, el.get("cdbase"))
    if kind == "OMA":
        children = el.elements()
        if not children:
            raise EmptyApplication()
        return OMApplication(tuple(_om_from_element(c) for c in children))
    if kind == "OMBIND":
        children = el.elements()
        if len(children) != 3 or children[1].local != "OMBVAR":
            raise SchemaError("OMBIND", "expected binder, OMBVAR, body")
        bvars = []
        for v in children[1].elements():
            parsed = _om_from_element(v)
            if not isinstance(parsed, OMVariable):
                raise SchemaError("OMBVAR", "only OMV children allowed")
            bvars.append(parsed)
        return OMBinding(
            _om_from_element(children[0]), tuple(bvars), _om_from_element(children[2])
        )
    raise SchemaError(kind, "unknown object element")


def serialize_om_object(obj: OMObject, wrap: bool = True, indent: int = 0) -> str:
    """Canonical XML for an object: one-space indent steps, alphabetical
    attributes."""
    body = _om_to_xml(obj, indent + 1 if wrap else indent)
    if not wrap:
        return body
    pad = " " * indent
    return f"{pad}<OMOBJ>\n{body}\n{pad}</OMOBJ>"


def _om_to_xml(obj: OMObject, depth: int) -> str:
    pad = " " * depth
    attrs: dict[str, str] = {}
    if isinstance(obj, OMInteger):
        return pad + emit("OMI", attrs, str(obj.value))
    if isinstance(obj, OMFloat):
        v = obj.value
        if v != v or v in (float("inf"), float("-inf")):
            attrs["hex"] = f"{float_bits(v):016X}"
        else:
            attrs["dec"] = repr(v)
        return pad + emit("OMF", attrs)
    if isinstance(obj, OMString):
        if not xml_representable(obj.value):
            raise SchemaError("OMSTR", "string contains characters XML cannot carry")
        return pad + emit("OMSTR", attrs, escape_text(obj.value))
    if isinstance(obj, OMBytes):
        return pad + emit("OMB", attrs, base64.b64encode(obj.value).decode("ascii"))
    if isinstance(obj, OMVariable):
        attrs["name"] = obj.name
        return pad + emit("OMV", attrs)
    if isinstance(obj, OMSymbol):
        attrs["cd"] = obj.cd
        attrs["name"] = obj.name
        if obj.cdbase is not None:
            attrs["cdbase"] = obj.cdbase
        return pad + emit("OMS", attrs)
    if isinstance(obj, OMApplication):
        inner = "\n".join(_om_to_xml(e, depth + 1) for e in obj.elements)
        open_tag = emit("OMA", attrs, "")[: -len("</OMA>")]
        return f"{pad}{open_tag}\n{inner}\n{pad}</OMA>"
    if isinstance(obj, OMBinding):
        binder = _om_to_xml(obj.binder, depth + 1)
        bvars = "\n".join(_om_to_xml(v, depth + 2) for v in obj.bvars)
        bpad = " " * (depth + 1)
        bvar_el = f"{bpad}<OMBVAR>\n{bvars}\n{bpad}</OMBVAR>" if obj.bvars else f"{bpad}<OMBVAR/>"
        body = _om_to_xml(obj.body, depth + 1)
        open_tag = emit("OMBIND", attrs, "")[: -len("</OMBIND>")]
        return f"{pad}{open_tag}\n{binder}\n{bvar_el}\n{body}\n{pad}</OMBIND>"
    raise TypeError(f"not an OMObject: {obj!r}")


# ---------------------------------------------------------------------------
# content dictionaries

Span = tuple[int, int]


@dataclass(frozen=True, slots=True)
class PropertyItem:
    """One CMP (informal text) or FMP (formal object) of a symbol."""

    kind: Literal["CMP", "FMP"]
    text: str | None
    obj: OMObject | None
    span: Span
    raw: bytes | None = None


@dataclass(frozen=True, slots=True)
class ExampleItem:
    """Example block: interleaved prose and objects."""

    segments: tuple[tuple[Literal["text", "object"], str | OMObject], ...]
    span: Span
    raw: bytes | None = None

    def objects(self) -> list[OMObject]:
        return [seg[1] for seg in self.segments if seg[0] == "object"]  # type: ignore[misc]


@dataclass(frozen=True, slots=True)
class SymbolDef:
    name: str
    role: str | None
    description: str
    items: tuple[PropertyItem | ExampleItem, ...]
    span: Span
    raw: bytes | None = None

    def properties(self) -> list[PropertyItem]:
        return [i for i in self.items if isinstance(i, PropertyItem)]

    def examples(self) -> list[ExampleItem]:
        return [i for i in self.items if isinstance(i, ExampleItem)]


@dataclass(frozen=True)
class ContentDictionary:
    metadata: dict[str, str]
    symbols: tuple[SymbolDef, ...]
    source: bytes = b""

    @property
    def name(self) -> str:
        return self.metadata.get("CDName", "")

    def symbol(self, name: str) -> SymbolDef | None:
        for s in self.symbols:
            if s.name == name:
                return s
        return None


@dataclass(frozen=True)
class Signature:
    cd: str
    name: str
    type_object: OMObject


@dataclass(frozen=True)
class Diagnostic:
    severity: Literal["error", "warning"]
    code: str
    subject: str
    message: str


_SYMBOL_CHILDREN = {"Name", "Role", "Description", "CMP", "FMP", "Example"}


def parse_cd(xml_text: bytes | str, strict_roles: bool = False) -> ContentDictionary:
    """Parse an ``.ocd`` file, keeping byte spans for every fragment.

    ``strict_roles`` turns an unknown Role value into a SchemaError;
    by default it is left for validate_cd to flag.
    """
    data = xml_text.encode("utf-8") if isinstance(xml_text, str) else xml_text
    root = scan(data)
    if root.local != "CD":
        raise SchemaError(root.tag, "root element must be CD")
    metadata: dict[str, str] = {}
    symbols: list[SymbolDef] = []
    names: set[str] = set()
    for child in root.elements():
        if child.local == "CDDefinition":
            sym = _parse_symbol(child, data, strict_roles)
            if sym.name in names:
                raise DuplicateSymbol(sym.name)
            names.add(sym.name)
            symbols.append(sym)
        else:
            metadata[child.local] = child.text_content()
    return ContentDictionary(metadata, tuple(symbols), data)


def _parse_symbol(el: XmlElement, data: bytes, strict_roles: bool) -> SymbolDef:
    name: str | None = None
    role: str | None = None
    description = ""
    items: list[PropertyItem | ExampleItem] = []
    for child in el.elements():
        local = child.local
        if local not in _SYMBOL_CHILDREN:
            raise SchemaError(f"CDDefinition/{child.tag}", "unknown element")
        if local == "Name":
            name = child.text_content().strip()
        elif local == "Role":
            role = child.text_content().strip()
            if strict_roles and role not in ROLES:
                raise SchemaError("Role", f"unknown role {role!r}")
        elif local == "Description":
            description = child.text_content()
        elif local in ("CMP", "FMP"):
            items.append(_parse_property(child, data))
        elif local == "Example":
            items.append(_parse_example(child, data))
    if not name:
        raise SchemaError("CDDefinition", "missing Name")
    if not is_ncname(name):
        raise SchemaError("CDDefinition/Name", f"{name!r} is not an NCName")
    return SymbolDef(
        name,
        role,
        description,
        tuple(items),
        (el.start, el.end),
        data[el.start : el.end],
    )


def _parse_property(el: XmlElement, data: bytes) -> PropertyItem:
    span = (el.start, el.end)
    raw = data[el.start : el.end]
    if el.local == "CMP":
        return PropertyItem("CMP", el.text_content(), None, span, raw)
    children = el.elements()
    if len(children) != 1:
        raise SchemaError("FMP", "expected exactly one object")
    return PropertyItem("FMP", None, _om_from_element_checked(children[0]), span, raw)


def _om_from_element_checked(el: XmlElement) -> OMObject:
    if el.local == "OMOBJ":
        inner = el.elements()
        if len(inner) != 1:
            raise SchemaError("OMOBJ", "expected exactly one object child")
        return _om_from_element(inner[0])
    return _om_from_element(el)


def _parse_example(el: XmlElement, data: bytes) -> ExampleItem:
    segments: list[tuple[Literal["text", "object"], str | OMObject]] = []
    for child in el.children:
        if isinstance(child, XmlText):
            if child.text.strip():
                segments.append(("text", child.text))
        else:
            segments.append(("object", _om_from_element_checked(child)))
    if not segments:
        raise SchemaError("Example", "needs at least one text or object segment")
    return ExampleItem(tuple(segments), (el.start, el.end), data[el.start : el.end])


def serialize_cd(cd: ContentDictionary) -> bytes:
    """Emit the CD file.

    Symbols that still carry their original bytes are spliced back
    verbatim; anything without them (edited or synthesized) is emitted
    in canonical form.
    """
    if cd.source:
        out = bytearray()
        cursor = 0
        for sym in cd.symbols:
            start, end = sym.span
            out += cd.source[cursor:start]
            out += sym.raw if sym.raw is not None else _canonical_symbol(sym, 1).encode("utf-8")
            cursor = end
        out += cd.source[cursor:]
        return bytes(out)
    return _canonical_cd(cd).encode("utf-8")


def _canonical_cd(cd: ContentDictionary) -> str:
    lines = ['<CD xmlns="http://www.openmath.org/OpenMathCD">']
    for key, value in cd.metadata.items():
        lines.append(" " + emit(key, {}, escape_text(value)))
    for sym in cd.symbols:
        if sym.raw is not None:
            lines.append(sym.raw.decode("utf-8"))
        else:
            lines.append(_canonical_symbol(sym, 1))
    lines.append("</CD>")
    return "\n".join(lines) + "\n"


def _canonical_symbol(sym: SymbolDef, indent: int) -> str:
    pad = " " * indent
    inner = " " * (indent + 1)
    lines = [pad + "<CDDefinition>"]
    lines.append(inner + emit("Name", {}, escape_text(sym.name)))
    if sym.role is not None:
        lines.append(inner + emit("Role", {}, escape_text(sym.role)))
    lines.append(inner + emit("Description", {}, escape_text(sym.description)))
    for item in sym.items:
        lines.append(_canonical_item(item, indent + 1))
    lines.append(pad + "</CDDefinition>")
    return "\n".join(lines)


def _canonical_item(item: PropertyItem | ExampleItem, indent: int) -> str:
    pad = " " * indent
    if isinstance(item, PropertyItem):
        if item.kind == "CMP":
            return pad + emit("CMP", {}, escape_text(item.text or ""))
        assert item.obj is not None
        body = serialize_om_object(item.obj, wrap=True, indent=indent + 1)
        return f"{pad}<FMP>\n{body}\n{pad}</FMP>"
    parts = [f"{pad}<Example>"]
    for kind, payload in item.segments:
        if kind == "text":
            parts.append(escape_text(payload))  # type: ignore[arg-type]
        else:
            parts.append("\n" + serialize_om_object(payload, wrap=True, indent=indent + 1) + "\n" + pad)  # type: ignore[arg-type]
    parts.append("</Example>")
    return "".join(parts)


def edit_symbol_description(cd: ContentDictionary, symbol: str, new_text: str) -> ContentDictionary:
    """Replace one Description's content by byte surgery.

    Only the bytes inside that Description element change; the rest of
    the file, including the symbol's own formatting, stays put.
    """
    sym = cd.symbol(symbol)
    if sym is None or sym.raw is None:
        raise SchemaError(symbol, "symbol not present with source bytes")
    el = scan(sym.raw)
    desc = el.find("Description")
    if desc is None:
        raise SchemaError(symbol, "symbol has no Description element")
    new_raw = (
        sym.raw[: desc.content_start]
        + escape_text(new_text).encode("utf-8")
        + sym.raw[desc.content_end :]
    )
    new_sym = replace(sym, description=new_text, raw=new_raw)
    return replace(
        cd, symbols=tuple(new_sym if s.name == symbol else s for s in cd.symbols)
    )


def validate_cd(
    cd: ContentDictionary, peers: tuple[ContentDictionary, ...] | list[ContentDictionary] = ()
) -> list[Diagnostic]:
    """Structural diagnostics: mandatory description, role sanity, and
    symbol references that resolve to no known definition."""
    known: dict[str, set[str]] = {cd.name: {s.name for s in cd.symbols}}
    for peer in peers:
        known.setdefault(peer.name, set()).update(s.name for s in peer.symbols)

    out: list[Diagnostic] = []
    for sym in cd.symbols:
        subject = f"{cd.name}#{sym.name}"
        if not sym.description.strip():
            out.append(
                Diagnostic("error", "missing-description", subject, "description is mandatory")
            )
        if sym.role is None:
            out.append(Diagnostic("warning", "missing-role", subject, "no Role given"))
        elif sym.role not in ROLES:
            out.append(
                Diagnostic("warning", "unknown-role", subject, f"unknown role {sym.role!r}")
            )
        for obj in _symbol_objects(sym):
            for ref in iter_symbols(obj):
                names = known.get(ref.cd)
                if names is None or ref.name not in names:
                    out.append(
                        Diagnostic(
                            "warning",
                            "unresolved-symbol",
                            subject,
                            f"reference to unknown symbol ({ref.cd}, {ref.name})",
                        )
                    )
    return out


def _symbol_objects(sym: SymbolDef) -> Iterator[OMObject]:
    for item in sym.items:
        if isinstance(item, PropertyItem):
            if item.obj is not None:
                yield item.obj
        else:
            yield from item.objects()


def parse_sts(
    xml_text: bytes | str, cd: ContentDictionary
) -> tuple[list[Signature], list[Diagnostic]]:
    """Parse an ``.sts`` signature file against its sibling CD.

    Signatures for symbols the CD does not define are kept, with a
    warning diagnostic.
    """
    root = scan(xml_text)
    if root.local != "CDSignatures":
        raise SchemaError(root.tag, "root element must be CDSignatures")
    cd_name = root.get("cd") or cd.name
    sigs: list[Signature] = []
    diags: list[Diagnostic] = []
    for child in root.elements():
        if child.local != "Signature":
            raise SchemaError(child.tag, "unknown element in CDSignatures")
        name = child.get("name")
        if name is None:
            raise SchemaError("Signature", "missing name attribute")
        objects = child.elements()
        if len(objects) != 1:
            raise SchemaError("Signature", "expected exactly one type object")
        sigs.append(Signature(cd_name, name, _om_from_element_checked(objects[0])))
        if cd.symbol(name) is None:
            diags.append(
                Diagnostic(
                    "warning",
                    "signature-without-symbol",
                    f"{cd_name}#{name}",
                    "signature for a symbol the CD does not define",
                )
            )
    return sigs, diags
