"""Syntax tree for the supported SPARQL subset."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Term:
    """A fixed RDF term in N-Triples spelling, e.g. ``<http://x>``."""

    value: str

    def __str__(self) -> str:
        return self.value


Slot = Union[Var, Term]


@dataclass(frozen=True)
class TriplePattern:
    s: Slot
    p: Slot
    o: Slot

    @property
    def slots(self) -> tuple[Slot, Slot, Slot]:
        return (self.s, self.p, self.o)

    @property
    def variables(self) -> list[str]:
        seen: list[str] = []
        for x in self.slots:
            if isinstance(x, Var) and x.name not in seen:
                seen.append(x.name)
        return seen

    def __str__(self) -> str:
        return f"{self.s} {self.p} {self.o}"


@dataclass(frozen=True)
class BGP:
    """Conjunction of triple patterns, each tagged with a graph alias (None = default)."""

    triples: tuple[tuple[str | None, TriplePattern], ...]


@dataclass(frozen=True)
class Group:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class OptionalPattern:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class UnionPattern:
    left: "Node"
    right: "Node"


Node = Union[BGP, Group, OptionalPattern, UnionPattern]


@dataclass(frozen=True)
class Query:
    form: str  # SELECT | ASK | CONSTRUCT
    where: Node
    projection: tuple[str, ...] | None = None  # None means '*'
    modifier: str = "NONE"  # NONE | DISTINCT | REDUCED
    template: tuple[TriplePattern, ...] = ()
    variables: tuple[str, ...] = field(default=())

    @property
    def distinct(self) -> bool:
        return self.modifier in ("DISTINCT", "REDUCED")

    @property
    def output_vars(self) -> tuple[str, ...]:
        return self.variables if self.projection is None else self.projection


def iter_triples(node: Node) -> Iterator[tuple[str | None, TriplePattern]]:
    if isinstance(node, BGP):
        yield from node.triples
    elif isinstance(node, Group):
        for child in node.children:
            yield from iter_triples(child)
    else:
        yield from iter_triples(node.left)
        yield from iter_triples(node.right)


def node_variables(node: Node) -> list[str]:
    seen: list[str] = []
    for _, tp in iter_triples(node):
        for v in tp.variables:
            if v not in seen:
                seen.append(v)
    return seen
