"""Query evaluation over dictionary-encoded graphs.

Triple patterns become fibres, slices or the whole tensor; the pattern tree
is then folded with Khatri-Rao, Kronecker and element-wise products in the
order fixed by :mod:`tensorql.query.plan`. Solutions come out in row-major
order of the final payload, which is dictionary insertion order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from ..rdf_store import Graph, display_term, is_blank
from ..tensor_core import (
    BoolMatrix,
    BoolVector,
    boolean_matmul,
    elementwise,
    fibre,
    mask_columns,
    slice as tensor_slice,
    transpose,
)
from .algebra import (
    AlgebraicResult,
    AxisRole,
    PRESENT,
    Domain,
    align_keys,
    elementwise_join,
    key_matrix,
    khatri_rao_join,
    kronecker_join,
    project,
    restrict_equal,
    union,
)
from .ast import Node, Query, Term, TriplePattern, Var
from .parser import parse
from .plan import (
    DistinctShape,
    JoinCase,
    PlanStep,
    Shape,
    Walker,
    classify,
    distinct_shape,
    ground_var,
    leaf_shape,
    pattern_layout,
    predict,
    resolve_graph,
)

GraphSet = Union[Graph, Mapping[str, Graph]]


def eval_pattern(tp: TriplePattern, graph: Graph) -> AlgebraicResult:
    """Select the fibre, slice or tensor matched by one triple pattern.

    A fixed term missing from the graph gives an all-zero result of the
    right shape. Without variables the result is a length-1 vector over a hidden variable.
    """
    modes, repeats = pattern_layout(tp)
    fixed: dict[int, int | None] = {}
    for m, slot in enumerate(tp.slots):
        if isinstance(slot, Term):
            fixed[m] = graph.dictionary(m).lookup(slot.value)
    missing = None in fixed.values()
    t = graph.tensor
    dicts = graph.dictionaries
    axes = tuple((AxisRole(v, Domain(dicts[m]), 1),) for v, m in modes)
    if not modes:
        hit = not missing and tuple(fixed[m] for m in range(3)) in t
        payload = BoolVector(1, [0] if hit else [])
        axes = ((AxisRole(ground_var(tp), Domain(PRESENT), 1),),)
    elif len(modes) == 1:
        free = modes[0][1]
        if missing:
            payload = BoolVector.zeros(t.dims[free])
        else:
            payload = fibre(t, [(m, i) for m, i in fixed.items()])
    elif len(modes) == 2:
        (m, i), = fixed.items()
        if missing:
            r, c = (x for x in range(3) if x != m)
            payload = BoolMatrix.zeros(t.dims[r], t.dims[c])
        else:
            payload = tensor_slice(t, m, i)
    else:
        payload = t
    res = AlgebraicResult(payload, axes, origin=tp)
    for keep, drop in repeats:
        res = restrict_equal(res, keep, drop)
    return res


def apply_case(case: JoinCase, left: AlgebraicResult, right: AlgebraicResult) -> AlgebraicResult:
    if case.rule == "union":
        return union(left, right, case.branch or "#u")
    if case.rule == "kronecker":
        return kronecker_join(left, right)
    if case.rule == "elementwise-and":
        out = elementwise_join(left, right)
        if out is None:
            raise AssertionError("element-wise join on mismatched layouts")
        return out
    return khatri_rao_join(left, right, case.shared, outer=case.rule == "left-outer")


def eval_join(left: AlgebraicResult, right: AlgebraicResult) -> AlgebraicResult:
    """Join two results on their shared variables."""
    return apply_case(classify("join", Shape.of(left), Shape.of(right)), left, right)


def eval_optional(left: AlgebraicResult, right: AlgebraicResult) -> AlgebraicResult:
    """Left outer join: unmatched left solutions get no value for right-only variables."""
    return apply_case(classify("optional", Shape.of(left), Shape.of(right)), left, right)


def eval_union(left: AlgebraicResult, right: AlgebraicResult, branch: str = "#u") -> AlgebraicResult:
    return union(left, right, branch)


# ---------------------------------------------------------------------------
# solutions


@dataclass
class SolutionSequence:
    """Ordered solutions; ``None`` marks a variable without a value."""

    variables: tuple[str, ...]
    rows: list[tuple[str | None, ...]]

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[dict[str, str | None]]:
        for row in self.rows:
            yield dict(zip(self.variables, row))

    def to_tsv(self) -> str:
        lines = ["\t".join(f"?{v}" for v in self.variables)]
        for row in self.rows:
            lines.append("\t".join(_tsv_cell(x) for x in row))
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        out = []
        for row in self.rows:
            obj = {v: x for v, x in zip(self.variables, row) if x is not None}
            out.append(json.dumps(obj, ensure_ascii=False))
        return "".join(line + "\n" for line in out)


def _tsv_cell(term: str | None) -> str:
    # terms are already in N-Triples spelling; only raw control characters need escapes
    if term is None:
        return ""
    return term.replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")


def decode_solutions(res: AlgebraicResult, variables) -> SolutionSequence:
    """Enumerate nonzeros in row-major order as bindings of ``variables``."""
    variables = tuple(variables)
    domains = [res.domain(v) for v in variables]
    rows = []
    for a in res.assignments():
        row = []
        for v, dom in zip(variables, domains):
            term = dom.term(a[v])
            row.append(None if term is None else display_term(term))
        rows.append(tuple(row))
    return SolutionSequence(variables, rows)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class _Value:
    result: AlgebraicResult
    shape: Shape


class _EvalBackend:
    def __init__(self, graphs: Mapping[str, Graph], default: str | None):
        self.graphs = graphs
        self.default = default

    def scan(self, alias, tp):
        graph = resolve_graph(self.graphs, alias, self.default)
        return _Value(eval_pattern(tp, graph), leaf_shape(tp))

    def combine(self, case, left, right):
        return _Value(apply_case(case, left.result, right.result), predict(case, left.shape, right.shape))

    def shape(self, value):
        return value.shape

    def is_empty(self, value) -> bool:
        return value.result.nnz == 0

    def count(self, value) -> int:
        return value.result.nnz


def _graph_set(graphs: GraphSet, default: str | None) -> tuple[Mapping[str, Graph], str | None]:
    if isinstance(graphs, Graph):
        return {"default": graphs}, "default"
    if default is None and graphs:
        default = next(iter(graphs))
    return graphs, default


class Evaluator:
    """Runs queries against named graphs and keeps the executed steps.

    ``default`` names the graph used by triples without ``FROM <alias>``;
    it defaults to the first graph given.
    """

    def __init__(self, graphs: GraphSet, default: str | None = None):
        self.graphs, self.default = _graph_set(graphs, default)
        self.steps: list[PlanStep] = []

    def _walker(self, stop_when_empty: bool = False) -> Walker:
        walker = Walker(_EvalBackend(self.graphs, self.default), stop_when_empty)
        self.steps = walker.steps
        return walker

    def evaluate(self, node: Node, stop_when_empty: bool = False) -> AlgebraicResult:
        _, value = self._walker(stop_when_empty).walk(node)
        return value.result

    def distinct(self, query: Query) -> AlgebraicResult:
        """DISTINCT solutions as a result over exactly the projected variables."""
        fast = distinct_shape(query)
        if fast is None:
            res = self.evaluate(query.where)
            out = project(res, query.output_vars)
            detail = "generic: OR over unprojected axes"
            inputs = (len(self.steps) - 1,)
        else:
            walker = self._walker()
            (_, left), (_, right) = (walker.scan(alias, tp) for alias, tp in fast.triples)
            out = distinct_fast_path(fast, left.result, right.result)
            detail = f"{fast.path} on ?{fast.shared}"
            inputs = (0, 1)
        step = PlanStep(len(self.steps), "distinct", detail, Shape("vector", (tuple(query.output_vars),)), inputs=inputs)
        step.actual = out.nnz
        self.steps.append(step)
        return out

    def select(self, query: Query) -> SolutionSequence:
        if query.distinct:
            return decode_solutions(self.distinct(query), query.output_vars)
        return decode_solutions(self.evaluate(query.where), query.output_vars)

    def ask(self, query: Query) -> bool:
        """True iff the pattern has a solution; joins stop once an operand is empty."""
        return self.evaluate(query.where, stop_when_empty=True).nnz > 0

    def construct(self, query: Query) -> Graph:
        """Instantiate the template over the distinct solutions.

        Solutions leaving a template variable without a value, and
        instantiations that are not valid triples (literal subject,
        non-IRI predicate), are skipped.
        """
        res = self.evaluate(query.where)
        tvars: list[str] = []
        for tp in query.template:
            tvars.extend(v for v in tp.variables if v not in tvars)
        solutions = decode_solutions(project(res, tvars), tvars)
        out = Graph()
        for binding in solutions:
            for tp in query.template:
                triple = tuple(binding[x.name] if isinstance(x, Var) else x.value for x in tp.slots)
                if _valid_triple(triple):
                    out.add_triple(triple)  # type: ignore[arg-type]
        return out

    def execute(self, query: Query):
        if query.form == "ASK":
            return self.ask(query)
        if query.form == "CONSTRUCT":
            return self.construct(query)
        return self.select(query)


def _valid_triple(triple) -> bool:
    s, p, o = triple
    if s is None or p is None or o is None:
        return False
    return (s.startswith("<") or is_blank(s)) and p.startswith("<")


def distinct_fast_path(fast: DistinctShape, left: AlgebraicResult, right: AlgebraicResult) -> AlgebraicResult:
    """DISTINCT over two slices sharing one variable, without the Khatri-Rao product.

    Both slices are viewed with the shared variable on the columns. The
    shared variable alone is the AND of the two column supports; the
    shared variable with one free variable masks that side's columns by
    the other side's support; the two free variables are the Boolean
    product of one view with the transpose of the other.
    """
    v = fast.shared
    domains, lmaps, rmaps = align_keys(left, right, [v])
    lv = key_matrix(left, [v], domains, lmaps)
    rv = key_matrix(right, [v], domains, rmaps)
    if fast.path == "bound":
        vec = elementwise("and", lv.matrix.col_support(), rv.matrix.col_support())
        return AlgebraicResult(vec, ((AxisRole(v, domains[v], 1),),))
    if fast.path == "mixed-left":
        return AlgebraicResult(mask_columns(lv.matrix, rv.matrix.col_support()), (lv.rows, lv.cols))
    if fast.path == "mixed-right":
        return AlgebraicResult(mask_columns(rv.matrix, lv.matrix.col_support()), (rv.rows, rv.cols))
    return AlgebraicResult(boolean_matmul(lv.matrix, transpose(rv.matrix)), (lv.rows, rv.rows))


def _query(query: Query | str) -> Query:
    return parse(query) if isinstance(query, str) else query


def execute(query: Query | str, graphs: GraphSet, default: str | None = None):
    """Evaluate a query: a :class:`SolutionSequence` for SELECT, a bool for
    ASK, a new :class:`Graph` for CONSTRUCT."""
    return Evaluator(graphs, default).execute(_query(query))


def eval_distinct(query: Query | str, graphs: GraphSet, default: str | None = None) -> AlgebraicResult:
    return Evaluator(graphs, default).distinct(_query(query))


def eval_ask(query: Query | str, graphs: GraphSet, default: str | None = None) -> bool:
    return Evaluator(graphs, default).ask(_query(query))


def eval_construct(query: Query | str, graphs: GraphSet, default: str | None = None) -> Graph:
    return Evaluator(graphs, default).construct(_query(query))


def select(query: Query | str, graphs: GraphSet, default: str | None = None) -> SolutionSequence:
    return Evaluator(graphs, default).select(_query(query))
