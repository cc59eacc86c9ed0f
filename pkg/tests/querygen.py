"""Random graphs and queries covering every join case of the engine."""

from __future__ import annotations

import random

from tensorql import Graph

ENTITIES = [f"<e{i}>" for i in range(7)]
LITERALS = ['"a"', '"b"@en']
PREDICATES = [f"<p{i}>" for i in range(5)]


def random_triples(rng: random.Random, max_triples: int = 24) -> list[tuple[str, str, str]]:
    """Triples over a shared entity pool, so subjects also occur as objects.

    Dimensions stay within 7 x 5 x 8: seven entities, five predicates and
    at most one literal, which only appears as an object.
    """
    n = rng.randint(0, max_triples)
    objects = ENTITIES + LITERALS[: rng.randint(0, 1)]
    return [(rng.choice(ENTITIES), rng.choice(PREDICATES), rng.choice(objects)) for _ in range(n)]


def random_graphs(rng: random.Random) -> dict[str, list[tuple[str, str, str]]]:
    return {"T": random_triples(rng), "U": random_triples(rng, 16)}


def build(graphs: dict[str, list[tuple[str, str, str]]]) -> dict[str, Graph]:
    return {alias: Graph.from_triples(ts) for alias, ts in graphs.items()}


class _Terms:
    def __init__(self, rng, triples):
        self.rng = rng
        self.by_mode = [sorted({t[m] for t in triples}) for m in range(3)]

    def pick(self, mode: int) -> str:
        # mostly terms present in the graph, sometimes one that may be absent
        pool = self.by_mode[mode]
        if pool and self.rng.random() < 0.85:
            return self.rng.choice(pool)
        return self.rng.choice(PREDICATES if mode == 1 else ENTITIES)

    def s(self):
        return self.pick(0)

    def p(self):
        return self.pick(1)

    def o(self):
        return self.pick(2)


def _slice_pair(t: _Terms, orientation: str) -> str:
    """Two one-fixed patterns sharing ?a in the given positions."""
    def side(pos, free):
        if pos == "s":
            return f"?a {t.p()} ?{free}"
        return f"?{free} {t.p()} ?a"

    return f"{side(orientation[0], 'x')} . {side(orientation[1], 'y')}"


def _select(body: str, proj: str = "*", mod: str = "") -> str:
    return f"SELECT {mod} {proj} WHERE {{ {body} }}".replace("  ", " ")


def gen_case(case: str, rng: random.Random, t: _Terms) -> str:
    if case in ("ss", "oo", "so", "os"):
        return _select(_slice_pair(t, case))
    if case == "pred-slices":
        return _select(f"?a ?p {t.o()} . {t.s()} ?p ?b")
    if case == "two-fixed-vv":
        return _select(f"{t.s()} {t.p()} ?a . ?a {t.p()} {t.o()}")
    if case == "two-fixed-vm":
        return _select(f"{t.s()} {t.p()} ?a . ?a {t.p()} ?b")
    if case == "two-fixed-pred":
        return _select(f"{t.s()} ?p {t.o()} . ?a ?p ?b")
    if case == "matricized":
        return _select(rng.choice([
            f"?a {t.p()} ?b . ?b ?p ?c",
            f"?s ?p ?o . ?o {t.p()} ?z",
            f"?s ?p ?o . {t.s()} ?p ?z",
        ]))
    if case == "kronecker":
        return _select(rng.choice([
            f"?a {t.p()} ?b . ?c {t.p()} ?d",
            f"{t.s()} {t.p()} ?x . ?y {t.p()} {t.o()}",
            f"?a {t.p()} ?b . {t.s()} {t.p()} ?c",
        ]))
    if case == "bound3":
        return _select("?s ?p ?o . FROM <U> ?s ?p ?o")
    if case == "bound2":
        return _select(rng.choice([
            f"?s ?p {t.o()} . ?s ?p {t.o()}",
            f"?s ?p ?o . ?s ?p {t.o()}",
            f"?s {t.p()} ?o . FROM <U> ?s ?q ?o",
        ]))
    if case == "bound1":
        return _select(rng.choice(["?s ?p ?o . ?o ?q ?z", "?s ?p ?o . FROM <U> ?s ?q ?z"]))
    if case == "optional":
        return _select(rng.choice([
            f"?a {t.p()} ?b OPTIONAL {{ ?a {t.p()} ?c }}",
            f"?a {t.p()} ?b OPTIONAL {{ ?b {t.p()} ?c . ?c {t.p()} ?d }}",
            f"?a {t.p()} ?b OPTIONAL {{ ?a {t.p()} ?c }} OPTIONAL {{ ?b {t.p()} ?d }}",
            f"?a {t.p()} ?b OPTIONAL {{ ?c {t.p()} {t.o()} }}",
            "?a ?p ?b OPTIONAL { FROM <U> ?a ?p ?c }",
        ]))
    if case == "union":
        return _select(rng.choice([
            f"{{ ?a {t.p()} ?b }} UNION {{ ?a {t.p()} ?c }}",
            f"{{ ?a {t.p()} ?b }} UNION {{ FROM <U> ?a {t.p()} ?b }}",
            f"{{ {{ ?a {t.p()} ?b }} UNION {{ ?a {t.p()} ?b }} }} . ?b {t.p()} ?c",
            f"{{ ?a {t.p()} ?b }} UNION {{ ?x ?p {t.o()} }}",
        ]))
    if case in ("distinct-bound", "distinct-mixed", "distinct-product"):
        body = _slice_pair(t, rng.choice(["ss", "oo", "so", "os"]))
        proj = {"distinct-bound": "?a", "distinct-product": rng.choice(["?x ?y", "?y ?x"])}.get(case)
        if proj is None:
            proj = rng.choice(["?a ?x", "?x ?a", "?a ?y", "?y ?a"])
        return _select(body, proj, "DISTINCT")
    if case == "distinct-generic":
        return _select(f"?a {t.p()} ?b . ?b ?p ?c . ?c {t.p()} ?d", rng.choice(["?a", "?a ?d", "?p"]), "DISTINCT")
    if case == "projection":
        return _select(f"?a {t.p()} ?b . ?b ?p ?c", rng.choice(["?a", "?c ?a", "?p"]))
    if case == "ask":
        body = rng.choice([f"?a {t.p()} ?b . ?b {t.p()} ?c", f"{t.s()} {t.p()} {t.o()}", f"?a {t.p()} {t.o()}"])
        return f"ASK {{ {body} }}"
    if case == "construct":
        return rng.choice([
            f"CONSTRUCT {{ ?b <inv> ?a }} WHERE {{ ?a {t.p()} ?b }}",
            f"CONSTRUCT {{ ?a <r> ?c . ?c <s> {t.s()} }} WHERE {{ ?a {t.p()} ?b . ?b {t.p()} ?c }}",
            f"CONSTRUCT {{ ?a ?p ?c }} WHERE {{ ?a ?p ?b OPTIONAL {{ ?b {t.p()} ?c }} }}",
        ])
    if case == "chain":
        return _select(rng.choice([
            f"?a {t.p()} ?b . ?b {t.p()} ?c . ?c {t.p()} ?d",
            f"?a {t.p()} ?b . {{ ?b ?p ?c . ?c {t.p()} ?a }}",
            "?a ?p ?b . ?b ?q ?c . ?a ?q ?c",
        ]))
    if case == "repeated":
        return _select(rng.choice([f"?x {t.p()} ?x", "?x ?p ?x", f"?x ?p ?x . ?x {t.p()} ?y"]))
    if case == "ground":
        return _select(f"{t.s()} {t.p()} {t.o()} . ?a {t.p()} ?b")
    raise KeyError(case)


CASES = [
    "ss", "oo", "so", "os", "pred-slices",
    "two-fixed-vv", "two-fixed-vm", "two-fixed-pred",
    "matricized", "kronecker",
    "bound3", "bound2", "bound1",
    "optional", "union",
    "distinct-bound", "distinct-mixed", "distinct-product", "distinct-generic",
    "projection", "ask", "construct", "chain", "repeated", "ground",
]


def random_instance(rng: random.Random, case: str):
    graphs = random_graphs(rng)
    return graphs, gen_case(case, rng, _Terms(rng, graphs["T"]))
