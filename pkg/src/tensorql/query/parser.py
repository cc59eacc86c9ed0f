"""Recursive-descent parser for the supported SPARQL subset.

Grammar (keywords are case-insensitive)::

    Query   := (SELECT (DISTINCT|REDUCED)? (Var+ | '*') | ASK | CONSTRUCT '{' Template '}')
               WHERE? Body
    Body    := Element ('.'? Element)*          -- joined left to right
    Element := Triple | '{' Body '}' | OPTIONAL '{' Body '}' | UNION '{' Body '}'
    Triple  := (FROM <alias>)? Slot Slot Slot
    Slot    := ?name | $name | <iri> | "literal" | _:label

OPTIONAL takes everything to its left in the enclosing group as its left
operand; UNION takes the element immediately before it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    BGP,
    Group,
    Node,
    OptionalPattern,
    Query,
    Term,
    TriplePattern,
    UnionPattern,
    Var,
    node_variables,
)


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, pos: int | None = None):
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(f"{message}{where}")
        self.pos = pos


class UnsupportedFeatureError(QuerySyntaxError):
    """A recognised SPARQL feature outside the supported subset."""

    def __init__(self, feature: str, pos: int | None = None, detail: str = ""):
        msg = f"unsupported feature: {feature}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg, pos)
        self.feature = feature


UNSUPPORTED = {
    "FILTER", "ORDER", "LIMIT", "OFFSET", "PREFIX", "BASE", "BIND", "VALUES",
    "GRAPH", "MINUS", "SERVICE", "GROUP", "HAVING", "DESCRIBE", "NAMED",
    "EXISTS", "NOT", "AS",
}
_FEATURE_NAMES = {"ORDER": "ORDER BY", "GROUP": "GROUP BY"}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\s]*>)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<blank>_:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)
  | (?P<literal>"(?:[^"\\\n]|\\.)*"(?:@[A-Za-z]+(?:-[A-Za-z0-9]+)*|\^\^<[^<>"{}|^`\\\s]*>)?)
  | (?P<punct>[{}.*])
  | (?P<word>[A-Za-z][A-Za-z0-9_]*)
  | (?P<other>.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))  # type: ignore[arg-type]
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def is_word(self, *words: str) -> bool:
        return self.tok.kind == "word" and self.tok.text.upper() in words

    def expect_punct(self, ch: str) -> Token:
        if self.tok.kind != "punct" or self.tok.text != ch:
            self.fail(f"expected {ch!r}")
        return self.advance()

    def fail(self, message: str):
        t = self.tok
        if t.kind == "word" and t.text.upper() in UNSUPPORTED:
            name = t.text.upper()
            raise UnsupportedFeatureError(_FEATURE_NAMES.get(name, name), t.pos)
        found = "end of query" if t.kind == "eof" else repr(t.text)
        raise QuerySyntaxError(f"{message}, found {found}", t.pos)

    # -- top level ------------------------------------------------------

    def query(self) -> Query:
        projection: tuple[str, ...] | None = None
        modifier = "NONE"
        template: tuple[TriplePattern, ...] = ()
        if self.is_word("SELECT"):
            form = "SELECT"
            self.advance()
            if self.is_word("DISTINCT", "REDUCED"):
                modifier = self.advance().text.upper()
            if self.tok.kind == "punct" and self.tok.text == "*":
                self.advance()
            else:
                names = []
                while self.tok.kind == "var":
                    names.append(self.advance().text[1:])
                if not names:
                    self.fail("expected '*' or a variable list")
                projection = tuple(names)
        elif self.is_word("ASK"):
            form = "ASK"
            self.advance()
        elif self.is_word("CONSTRUCT"):
            form = "CONSTRUCT"
            self.advance()
            self.expect_punct("{")
            template = self.template()
            self.expect_punct("}")
        else:
            self.fail("expected SELECT, ASK or CONSTRUCT")
        if self.is_word("WHERE"):
            self.advance()
        where = self.body(top=True)
        if self.tok.kind != "eof":
            self.fail("unexpected trailing input")
        variables = tuple(node_variables(where))
        for name in projection or ():
            if name not in variables:
                raise QuerySyntaxError(f"projected variable ?{name} does not occur in WHERE")
        for tp in template:
            for name in tp.variables:
                if name not in variables:
                    raise QuerySyntaxError(f"template variable ?{name} does not occur in WHERE")
        return Query(form, where, projection, modifier, template, variables)

    def template(self) -> tuple[TriplePattern, ...]:
        out = []
        while not (self.tok.kind == "punct" and self.tok.text == "}"):
            out.append(self.triple())
            if self.tok.kind == "punct" and self.tok.text == ".":
                self.advance()
        if not out:
            self.fail("empty CONSTRUCT template")
        return tuple(out)

    # -- patterns -------------------------------------------------------

    def body(self, top: bool = False) -> Node:
        elements: list[Node] = []
        pending: list = []  # consecutive triples forming the current BGP

        def flush():
            if pending:
                elements.append(BGP(tuple(pending)))
                pending.clear()

        def closed() -> bool:
            t = self.tok
            return t.kind == "eof" if top else (t.kind == "punct" and t.text == "}")

        while not closed():
            t = self.tok
            if t.kind == "punct" and t.text == ".":
                self.advance()
                continue
            if t.kind == "punct" and t.text == "{":
                flush()
                elements.append(self.group())
            elif self.is_word("OPTIONAL"):
                self.advance()
                flush()
                if not elements:
                    self.fail("OPTIONAL needs a pattern on its left")
                right = self.group()
                left = elements[0] if len(elements) == 1 else Group(tuple(elements))
                elements = [OptionalPattern(left, right)]
            elif self.is_word("UNION"):
                self.advance()
                flush()
                if not elements:
                    self.fail("UNION needs a pattern on its left")
                right = self.group()
                elements[-1] = UnionPattern(elements[-1], right)
            else:
                pending.append(self.graph_triple())
        flush()
        if not elements:
            self.fail("empty group graph pattern")
        return elements[0] if len(elements) == 1 else Group(tuple(elements))

    def group(self) -> Group:
        self.expect_punct("{")
        inner = self.body()
        self.expect_punct("}")
        return inner if isinstance(inner, Group) else Group((inner,))

    def graph_triple(self) -> tuple[str | None, TriplePattern]:
        graph = None
        if self.is_word("FROM"):
            self.advance()
            if self.tok.kind != "iri":
                self.fail("expected <alias> after FROM")
            graph = self.advance().text[1:-1]
        return graph, self.triple()

    def triple(self) -> TriplePattern:
        s = self.slot()
        p = self.slot()
        o = self.slot()
        return TriplePattern(s, p, o)

    def slot(self):
        t = self.tok
        if t.kind == "var":
            self.advance()
            return Var(t.text[1:])
        if t.kind in ("iri", "blank", "literal"):
            self.advance()
            return Term(t.text)
        self.fail("expected a variable or an RDF term")


def parse(text: str) -> Query:
    """Parse query text into a :class:`Query`.

    Raises :class:`UnsupportedFeatureError` for FILTER, ORDER BY, LIMIT and
    other SPARQL features outside the subset, :class:`QuerySyntaxError`
    for anything else that does not fit the grammar.
    """
    return _Parser(text).query()
