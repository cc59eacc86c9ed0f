"""Join planning: case classification shared by the planner and the evaluator.

Patterns are combined in a fixed order: the triples of a group are joined
left to right, a nested group is evaluated as one operand, OPTIONAL and
UNION take the operands the parser gave them. :class:`Walker` implements
that order once; the symbolic :class:`Shape` backend below and the
evaluating backend in :mod:`tensorql.query.engine` both run through it, so
a plan always lists the steps the evaluator performs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from ..rdf_store import Graph
from .algebra import HIDDEN
from .ast import BGP, Group, Node, OptionalPattern, Query, Term, TriplePattern, Var
from .parser import QuerySyntaxError, UnsupportedFeatureError

MODE_NAMES = ("subject", "predicate", "object")
KINDS = {1: "vector", 2: "matrix", 3: "tensor"}


class UnknownGraphError(QuerySyntaxError):
    pass


@dataclass(frozen=True)
class Shape:
    """Layout of an intermediate result: payload kind and variables per axis.

    ``modes`` and ``fixed`` are only known for single triple patterns.
    """

    kind: str
    axes: tuple[tuple[str, ...], ...]
    unbound: frozenset = frozenset()
    modes: tuple[tuple[str, int], ...] | None = field(default=None, compare=False)
    fixed: tuple[int, ...] = field(default=(), compare=False)

    @classmethod
    def of(cls, res) -> "Shape":
        axes = tuple(tuple(r.var for r in axis) for axis in res.axes)
        unbound = frozenset(r.var for r in res.roles if r.domain.unbound)
        return cls(KINDS[len(axes)], axes, unbound)

    @property
    def variables(self) -> list[str]:
        return [v for axis in self.axes for v in axis]

    @property
    def visible(self) -> list[str]:
        return [v for v in self.variables if not v.startswith("#")]

    @property
    def single(self) -> bool:
        return all(len(axis) == 1 for axis in self.axes)

    def axis_of(self, var: str) -> int:
        for i, axis in enumerate(self.axes):
            if var in axis:
                return i
        raise KeyError(var)

    def describe(self) -> str:
        if self.modes is not None:
            name = {0: "scalar", 1: "fibre", 2: "slice", 3: "tensor"}[3 - len(self.fixed)]
            return f"{name}(" + ", ".join(f"?{v}:{MODE_NAMES[m]}" for v, m in self.modes) + ")"
        inner = " | ".join(",".join(f"?{v}" if not v.startswith("#") else v for v in axis) or "1" for axis in self.axes)
        return f"{self.kind}[{inner}]"


@dataclass(frozen=True)
class JoinCase:
    """How two operands are combined.

    ``rule`` is one of ``kronecker``, ``khatri-rao``, ``elementwise-and``,
    ``left-outer`` and ``union``; ``positions`` gives, per shared variable,
    its axis on the left and right operand (for patterns: its mode).
    """

    rule: str
    shared: tuple[str, ...]
    positions: tuple[tuple[str, str, str], ...] = ()
    detail: str = ""
    branch: str | None = None


def _position(shape: Shape, var: str) -> str:
    if shape.modes is not None:
        return MODE_NAMES[dict(shape.modes)[var]]
    return f"axis {shape.axis_of(var)}"


def classify(op: str, left: Shape, right: Shape, branch: str | None = None) -> JoinCase:
    """Pick the evaluation rule for ``op`` (join, optional or union)."""
    if op == "union":
        return JoinCase("union", (), detail=f"{left.describe()} ++ {right.describe()}", branch=branch)
    rv = set(right.visible)
    shared = tuple(v for v in left.visible if v in rv)
    for v in shared:
        if v in left.unbound or v in right.unbound:
            raise UnsupportedFeatureError("join on optional variable", detail=f"?{v} may be unbound on one side")
    positions = tuple((v, _position(left, v), _position(right, v)) for v in shared)
    on = " on " + ", ".join(f"?{v}" for v in shared) if shared else ""
    if op == "optional":
        rule = "left-outer"
        sym = "⟕"
    elif not shared:
        rule, sym = "kronecker", "⊗"
    elif left.kind == right.kind and left.single and right.single and left.axes == right.axes:
        rule, sym = "elementwise-and", "∧"
    else:
        rule, sym = "khatri-rao", "⊙"
    return JoinCase(rule, shared, positions, f"{left.describe()} {sym} {right.describe()}{on}")


# ---------------------------------------------------------------------------
# symbolic evaluation


def _natural(shape: Shape) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if shape.kind == "vector":
        return shape.axes[0], ()
    if shape.kind == "matrix":
        return shape.axes[0], shape.axes[1]
    return shape.axes[0], shape.axes[1] + shape.axes[2]


def key_rows(shape: Shape, keys: Sequence[str], extend: bool = False) -> tuple[tuple[str, ...], bool | None]:
    """Row variables of the key-column view and whether it was transposed."""
    generic = (tuple(v for v in shape.variables if v not in keys), None)
    if len(keys) != 1 or not shape.single:
        return generic
    v = keys[0]
    if shape.kind == "vector":
        rows, flag = (), None
    elif shape.kind == "matrix":
        if shape.axes[1] == (v,):
            rows, flag = shape.axes[0], False
        else:
            rows, flag = shape.axes[1], True
    else:
        mode = shape.axis_of(v)
        rows = tuple(shape.axes[m][0] for m in range(3) if m != mode)
        flag = mode == 0
    if extend and len(rows) > 1:
        return generic
    return rows, flag


def predict(case: JoinCase, left: Shape, right: Shape) -> Shape:
    """Layout of the result of combining ``left`` and ``right`` under ``case``."""
    unbound = left.unbound | right.unbound
    if case.rule == "union":
        lv = left.variables
        order = lv + [v for v in right.variables if v not in set(lv)]
        one_sided = set(lv) ^ set(right.variables)
        return Shape("vector", ((case.branch,) + tuple(order),), unbound | one_sided)
    if case.rule == "elementwise-and":
        return Shape(left.kind, left.axes, unbound)
    if case.rule == "kronecker":
        lr, lc = _natural(left)
        rr, rc = _natural(right)
        return Shape("matrix", (lr + rr, lc + rc), unbound)
    outer = case.rule == "left-outer"
    lrows, lflag = key_rows(left, case.shared)
    rrows, rflag = key_rows(right, case.shared, extend=outer)
    if outer:
        unbound = unbound | set(rrows)
    rows, cols = lrows + rrows, tuple(case.shared)
    if {lflag, rflag} - {None} == {True}:
        return Shape("matrix", (cols, rows), frozenset(unbound))
    return Shape("matrix", (rows, cols), frozenset(unbound))


def pattern_layout(tp: TriplePattern) -> tuple[list[tuple[str, int]], list[tuple[str, str]]]:
    """Variables with their modes, and (kept, dropped) pairs for repeated variables.

    A repeated variable is evaluated under a placeholder name first and
    then restricted to equal values.
    """
    modes: list[tuple[str, int]] = []
    repeats: list[tuple[str, str]] = []
    for m, slot in enumerate(tp.slots):
        if isinstance(slot, Var):
            if any(v == slot.name for v, _ in modes):
                placeholder = f"{HIDDEN}{slot.name}@{m}"
                modes.append((placeholder, m))
                repeats.append((slot.name, placeholder))
            else:
                modes.append((slot.name, m))
    return modes, repeats


def ground_var(tp: TriplePattern) -> str:
    """Hidden one-valued variable carrying the truth of a pattern without variables."""
    return f"{HIDDEN}{tp}"


def leaf_shape(tp: TriplePattern) -> Shape:
    modes, repeats = pattern_layout(tp)
    fixed = tuple(m for m, s in enumerate(tp.slots) if isinstance(s, Term))
    if not modes:
        return Shape("vector", ((ground_var(tp),),), modes=(), fixed=fixed)
    dropped = {d for _, d in repeats}
    axes = tuple((v,) for v, _ in modes if v not in dropped)
    kept = tuple((v, m) for v, m in modes if v not in dropped)
    return Shape(KINDS[len(axes)], axes, modes=kept, fixed=fixed)


# ---------------------------------------------------------------------------
# traversal


@dataclass
class PlanStep:
    index: int
    op: str  # scan | join | optional | union | distinct | project
    label: str
    shape: Shape
    case: JoinCase | None = None
    inputs: tuple[int, ...] = ()
    estimate: Any = None
    actual: int | None = None
    pattern: tuple[str | None, TriplePattern] | None = None

    def describe(self) -> str:
        if self.op == "scan":
            return f"#{self.index} scan {self.label}  -> {self.shape.describe()}"
        args = ", ".join(f"#{i}" for i in self.inputs)
        rule = f" [{self.case.rule}]" if self.case else ""
        return f"#{self.index} {self.op}({args}){rule} {self.label}  -> {self.shape.describe()}"


@dataclass
class JoinPlan:
    steps: list[PlanStep]
    query: Query

    def __iter__(self):
        return iter(self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def joins(self) -> list[PlanStep]:
        return [s for s in self.steps if s.op in ("join", "optional", "union")]


class Walker:
    """Evaluates a pattern tree in plan order with a pluggable backend.

    The backend provides ``scan(alias, tp)``, ``combine(case, left, right)``
    and ``shape(value)``; ``stop_when_empty`` lets ASK skip right operands
    of joins whose left side is already empty.
    """

    def __init__(self, backend, stop_when_empty: bool = False):
        self.backend = backend
        self.stop_when_empty = stop_when_empty
        self.steps: list[PlanStep] = []
        self._unions = 0

    def _record(self, step: PlanStep, value) -> tuple[int, Any]:
        step.actual = self.backend.count(value)
        self.steps.append(step)
        return step.index, value

    def walk(self, node: Node) -> tuple[int, Any]:
        if isinstance(node, BGP):
            return self._fold([("scan", item) for item in node.triples])
        if isinstance(node, Group):
            return self._fold([("node", child) for child in node.children])
        op = "optional" if isinstance(node, OptionalPattern) else "union"
        return self._combine(op, self.walk(node.left), lambda: self.walk(node.right))

    def _fold(self, items) -> tuple[int, Any]:
        acc = None
        for kind, item in items:
            thunk = (lambda item=item: self.scan(*item)) if kind == "scan" else (lambda item=item: self.walk(item))
            acc = thunk() if acc is None else self._combine("join", acc, thunk)
        return acc  # type: ignore[return-value]

    def scan(self, alias: str | None, tp: TriplePattern) -> tuple[int, Any]:
        value = self.backend.scan(alias, tp)
        label = (f"<{alias}> " if alias else "") + str(tp)
        step = PlanStep(len(self.steps), "scan", label, self.backend.shape(value), pattern=(alias, tp))
        return self._record(step, value)

    def _combine(self, op: str, left: tuple[int, Any], right_thunk: Callable) -> tuple[int, Any]:
        li, lval = left
        if self.stop_when_empty and op != "union" and self.backend.is_empty(lval):
            return left
        ri, rval = right_thunk()
        branch = None
        if op == "union":
            self._unions += 1
            branch = f"#u{self._unions}"
        case = classify(op, self.backend.shape(lval), self.backend.shape(rval), branch)
        value = self.backend.combine(case, lval, rval)
        step = PlanStep(len(self.steps), op, case.detail, self.backend.shape(value), case, (li, ri))
        return self._record(step, value)


class ShapeBackend:
    def __init__(self, graphs: Mapping[str | None, Graph] | None = None):
        self.graphs = graphs

    def scan(self, alias, tp):
        return leaf_shape(tp)

    def combine(self, case, left, right):
        return predict(case, left, right)

    def shape(self, value):
        return value

    def is_empty(self, value) -> bool:
        return False

    def count(self, value) -> int | None:
        return None


# ---------------------------------------------------------------------------
# DISTINCT fast paths


@dataclass(frozen=True)
class DistinctShape:
    """Two slices sharing one variable, projected onto a subset of their variables.

    ``path`` is ``bound`` (only the shared variable), ``mixed-left`` or
    ``mixed-right`` (shared plus one side's free variable) or ``product``
    (the two free variables).
    """

    path: str
    shared: str
    left_free: str
    right_free: str
    triples: tuple = ()


def distinct_shape(query: Query) -> DistinctShape | None:
    where = query.where
    while isinstance(where, Group) and len(where.children) == 1:
        where = where.children[0]
    if not query.distinct or query.form != "SELECT" or not isinstance(where, BGP):
        return None
    triples = where.triples
    if len(triples) != 2:
        return None
    shapes = [leaf_shape(tp) for _, tp in triples]
    if any(s.kind != "matrix" or len(s.fixed) != 1 for s in shapes):
        return None
    lv, rv = shapes[0].variables, shapes[1].variables
    shared = [v for v in lv if v in rv]
    if len(shared) != 1:
        return None
    v = shared[0]
    a = next(x for x in lv if x != v)
    c = next(x for x in rv if x != v)
    proj = set(query.projection if query.projection is not None else query.variables)
    paths = {
        frozenset({v}): "bound",
        frozenset({a, v}): "mixed-left",
        frozenset({c, v}): "mixed-right",
        frozenset({a, c}): "product",
    }
    path = paths.get(frozenset(proj))
    return DistinctShape(path, v, a, c, triples) if path else None


def plan(query: Query, graphs: Mapping[str, Graph] | None = None, default: str | None = None) -> JoinPlan:
    """Compile ``query`` into the ordered list of steps the evaluator runs.

    With ``graphs`` every join of two triple patterns and the DISTINCT
    fast paths get a cardinality estimate from the marginal statistics.
    """
    walker = Walker(ShapeBackend())
    top, shape = walker.walk(query.where)
    steps = walker.steps
    fast = distinct_shape(query)
    if fast is not None:
        detail = f"{fast.path} on ?{fast.shared}"
        steps = [s for s in steps if s.op == "scan"]
        out_vars = tuple(query.output_vars)
        steps.append(PlanStep(len(steps), "distinct", detail, Shape("vector", (out_vars,)), inputs=(0, 1)))
    elif query.form == "SELECT" and query.distinct:
        steps.append(PlanStep(len(steps), "distinct", "generic: OR over unprojected axes",
                              Shape("vector", (tuple(query.output_vars),), shape.unbound & set(query.output_vars)),
                              inputs=(top,)))
    if graphs is not None:
        from ..cardinality import annotate

        annotate(steps, query, graphs, default, fast)
    return JoinPlan(steps, query)


def resolve_graph(graphs: Mapping[str, Graph], alias: str | None, default: str | None) -> Graph:
    key = default if alias is None else alias
    if key is None or key not in graphs:
        known = ", ".join(sorted(graphs)) or "none"
        raise UnknownGraphError(f"unknown graph <{alias if alias else key}> (loaded: {known})")
    return graphs[key]


__all__ = [
    "DistinctShape", "JoinCase", "JoinPlan", "PlanStep", "Shape", "ShapeBackend", "UnknownGraphError",
    "Walker", "classify", "distinct_shape", "key_rows", "leaf_shape", "pattern_layout", "plan",
    "predict", "resolve_graph",
]
