from __future__ import annotations

import random

import pytest

from cdforge import corpus_dir
from cdforge.notation import NotationTable, parse_ntn
from cdforge.om import (
    OMApplication,
    OMBinding,
    OMBytes,
    OMFloat,
    OMInteger,
    OMObject,
    OMString,
    OMSymbol,
    OMVariable,
    parse_cd,
)


@pytest.fixture(scope="session")
def corpus_files():
    files = sorted(corpus_dir().glob("*.ocd"))
    assert len(files) >= 5
    return files


@pytest.fixture(scope="session")
def corpus_cds(corpus_files):
    return {f.stem: parse_cd(f.read_bytes()) for f in corpus_files}


@pytest.fixture(scope="session")
def notation_table():
    defs = []
    for f in sorted(corpus_dir().glob("*.ntn")):
        defs.extend(parse_ntn(f.read_bytes()))
    return NotationTable(defs)


VARIABLES = ["a", "b", "c", "x", "y", "z", "u", "v"]


def random_object(
    rng: random.Random,
    table: NotationTable | None = None,
    depth: int = 6,
    with_cdbase: bool = False,
    linear_safe: bool = True,
) -> OMObject:
    """Random object tree of bounded depth.

    ``linear_safe`` keeps it inside what the linear form round-trips:
    table symbols plus undefined two-part names, identifier variables,
    no cdbase.
    """
    table_symbols = [OMSymbol(cd, name) for (cd, name) in (table.defs if table else {})]
    extra_symbols = [OMSymbol("foo", "f"), OMSymbol("foo", "g"), OMSymbol("nums1", "pi")]
    if with_cdbase and not linear_safe:
        extra_symbols.append(OMSymbol("foo", "h", "http://example.org/cd"))

    def atom() -> OMObject:
        kind = rng.randrange(8)
        if kind == 0:
            return OMInteger(rng.randrange(-10**12, 10**12))
        if kind == 1:
            value = rng.choice(
                [0.0, -0.0, 1.5, -2.25, 3.141592653589793, 1e300, 5e-324,
                 float("inf"), float("-inf"), float("nan")]
            )
            return OMFloat(value)
        if kind == 2:
            return OMString("".join(rng.choice('ab "\\\né∀') for _ in range(rng.randrange(6))))
        if kind == 3:
            return OMBytes(bytes(rng.randrange(256) for _ in range(rng.randrange(8))))
        if kind in (4, 5):
            return OMVariable(rng.choice(VARIABLES))
        return rng.choice(table_symbols + extra_symbols)

    def build(d: int) -> OMObject:
        if d <= 0 or rng.random() < 0.3:
            return atom()
        if rng.random() < 0.25:
            binder = (
                rng.choice(table_symbols + extra_symbols)
                if rng.random() < 0.7
                else build(d - 1)
            )
            names = rng.sample(VARIABLES, rng.randrange(0, 3))
            return OMBinding(binder, tuple(OMVariable(n) for n in names), build(d - 1))
        head = rng.choice(table_symbols + extra_symbols) if rng.random() < 0.8 else build(d - 1)
        args = tuple(build(d - 1) for _ in range(rng.randrange(0, 4)))
        return OMApplication((head,) + args)

    return build(depth)
