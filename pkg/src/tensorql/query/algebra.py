"""Intermediate query results as Boolean arrays with block-decoded axes.

Each payload axis carries an ordered list of :class:`AxisRole` entries.
A composite index on an axis decomposes as ``sum(local(var) * stride)``
with the first role varying slowest, which is the row-block reading of
Khatri-Rao and Kronecker products. A variable whose value may be missing
(introduced by OPTIONAL or UNION) gets one extra "no value" index at the
end of its domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from ..rdf_store import Dictionary, union_dictionary
from ..tensor_core import (
    BoolArray,
    BoolMatrix,
    BoolTensor3,
    BoolVector,
    checked_product,
    elementwise,
    khatri_rao,
    kronecker,
    matricize,
    transpose,
)
from .parser import UnsupportedFeatureError

HIDDEN = "#"


def is_hidden(var: str) -> bool:
    return var.startswith(HIDDEN)


class Domain:
    """Index space of one variable: a dictionary plus an optional no-value slot."""

    __slots__ = ("dictionary", "unbound")

    def __init__(self, dictionary: Dictionary, unbound: bool = False):
        self.dictionary = dictionary
        self.unbound = unbound

    @property
    def size(self) -> int:
        return len(self.dictionary) + self.unbound

    @property
    def unbound_index(self) -> int:
        if not self.unbound:
            raise ValueError("domain has no unbound slot")
        return len(self.dictionary)

    def term(self, i: int) -> str | None:
        if i == len(self.dictionary):
            return None
        return self.dictionary[i]

    def extended(self) -> "Domain":
        return self if self.unbound else Domain(self.dictionary, True)

    def same(self, other: "Domain") -> bool:
        return self.dictionary is other.dictionary and self.unbound == other.unbound

    def __repr__(self) -> str:
        return f"Domain({len(self.dictionary)}{'+unbound' if self.unbound else ''})"


BRANCHES = Dictionary(["left", "right"], scope=0)
PRESENT = Dictionary(["true"], scope=0)


@dataclass(frozen=True)
class AxisRole:
    var: str
    domain: Domain
    stride: int

    def local(self, index: int) -> int:
        return (index // self.stride) % self.domain.size


def composite(variables: Sequence[str], domains: Mapping[str, Domain]) -> tuple[tuple[AxisRole, ...], int]:
    """Roles for a composite axis over ``variables`` (first one slowest) and its length."""
    sizes = [domains[v].size for v in variables]
    total = checked_product(*sizes) if sizes else 1
    roles = []
    stride = total
    for v, s in zip(variables, sizes):
        stride = stride // s if s else 0
        roles.append(AxisRole(v, domains[v], stride))
    return tuple(roles), total


def _rescale(roles: Iterable[AxisRole], factor: int) -> tuple[AxisRole, ...]:
    return tuple(AxisRole(r.var, r.domain, r.stride * factor) for r in roles)


def _coords(payload: BoolArray) -> Iterator[tuple[int, ...]]:
    if isinstance(payload, BoolVector):
        return ((i,) for i in payload.indices)
    return iter(payload.coords)


@dataclass(frozen=True, eq=False)
class AlgebraicResult:
    payload: BoolArray
    axes: tuple[tuple[AxisRole, ...], ...]
    origin: object = field(default=None, compare=False)

    @property
    def roles(self) -> list[AxisRole]:
        return [r for axis in self.axes for r in axis]

    @property
    def variables(self) -> list[str]:
        return [r.var for r in self.roles]

    @property
    def visible_variables(self) -> list[str]:
        return [v for v in self.variables if not is_hidden(v)]

    def domain(self, var: str) -> Domain:
        for r in self.roles:
            if r.var == var:
                return r.domain
        raise KeyError(var)

    def domains(self) -> dict[str, Domain]:
        return {r.var: r.domain for r in self.roles}

    @property
    def nnz(self) -> int:
        return self.payload.nnz

    def axis_of(self, var: str) -> int:
        for a, roles in enumerate(self.axes):
            if any(r.var == var for r in roles):
                return a
        raise KeyError(var)

    def single_roles(self) -> bool:
        """Every axis holds exactly one variable with stride 1."""
        return all(len(axis) == 1 and axis[0].stride == 1 for axis in self.axes)

    def assignments(self) -> Iterator[dict[str, int]]:
        """Local indices of every nonzero, in row-major order."""
        for coord in _coords(self.payload):
            out = {}
            for x, roles in zip(coord, self.axes):
                for r in roles:
                    out[r.var] = r.local(x)
            yield out


# ---------------------------------------------------------------------------
# builders


def from_assignments(
    assignments: Iterable[Mapping[str, int]],
    axes_vars: Sequence[Sequence[str]],
    domains: Mapping[str, Domain],
) -> AlgebraicResult:
    """Generic re-indexing: place each assignment on composite axes."""
    layouts = [composite(vs, domains) for vs in axes_vars]
    coords = set()
    for a in assignments:
        coords.add(tuple(sum(a[r.var] * r.stride for r in roles) for roles, _ in layouts))
    sizes = [n for _, n in layouts]
    axes = tuple(roles for roles, _ in layouts)
    if len(sizes) == 1:
        payload: BoolArray = BoolVector(sizes[0], (c[0] for c in coords))
    elif len(sizes) == 2:
        payload = BoolMatrix._trusted(sizes[0], sizes[1], coords)
    else:
        payload = BoolTensor3._trusted(tuple(sizes), coords)
    return AlgebraicResult(payload, axes)


def index_map(old: Domain, new: Domain, dict_map: Sequence[int] | None) -> list[int]:
    out = list(dict_map) if dict_map is not None else list(range(len(old.dictionary)))
    if old.unbound:
        out.append(new.unbound_index)
    return out


def remap(res: AlgebraicResult, targets: Mapping[str, tuple[Domain, Sequence[int] | None]]) -> list[dict[str, int]]:
    """Assignments of ``res`` with selected variables moved into new domains."""
    maps = {v: index_map(res.domain(v), dom, m) for v, (dom, m) in targets.items()}
    out = []
    for a in res.assignments():
        for v, mp in maps.items():
            a[v] = mp[a[v]]
        out.append(a)
    return out


# ---------------------------------------------------------------------------
# matrix views


@dataclass
class MatrixView:
    matrix: BoolMatrix
    rows: tuple[AxisRole, ...]
    cols: tuple[AxisRole, ...]
    # True when the key variable originally sat on rows, None if undetermined
    transposed: bool | None


def natural_matrix(res: AlgebraicResult) -> MatrixView:
    """Vectors become columns, tensors their mode-1 unfolding."""
    p = res.payload
    if isinstance(p, BoolVector):
        return MatrixView(p.as_column(), res.axes[0], (), None)
    if isinstance(p, BoolMatrix):
        return MatrixView(p, res.axes[0], res.axes[1], False)
    m = matricize(p, 0)
    cols = _rescale(res.axes[1], p.dims[2]) + res.axes[2]
    return MatrixView(m, res.axes[0], cols, False)


def key_matrix(
    res: AlgebraicResult,
    key_vars: Sequence[str],
    key_domains: Mapping[str, Domain],
    key_maps: Mapping[str, Sequence[int] | None],
    extend_rows: bool = False,
) -> MatrixView:
    """View ``res`` as a matrix whose columns enumerate the join key.

    Remaining variables form the rows (composite, in result order). With
    ``extend_rows`` each row variable gets a no-value slot, as the right
    side of a left outer join needs.
    """
    col_roles, n_cols = composite(key_vars, key_domains)
    fast = _fast_key_matrix(res, key_vars, key_domains, key_maps, extend_rows)
    if fast is not None:
        return fast
    row_vars = [v for v in res.variables if v not in key_vars]
    row_domains = {v: (res.domain(v).extended() if extend_rows else res.domain(v)) for v in row_vars}
    targets = {v: (key_domains[v], key_maps.get(v)) for v in key_vars}
    targets.update({v: (row_domains[v], None) for v in row_vars if row_domains[v] is not res.domain(v)})
    row_roles, n_rows = composite(row_vars, row_domains)
    coords = []
    for a in remap(res, targets):
        coords.append((
            sum(a[r.var] * r.stride for r in row_roles),
            sum(a[r.var] * r.stride for r in col_roles),
        ))
    return MatrixView(BoolMatrix._trusted(n_rows, n_cols, coords), row_roles, col_roles, None)


def _fast_key_matrix(res, key_vars, key_domains, key_maps, extend_rows) -> MatrixView | None:
    # single key variable over single-variable axes: transpose / unfold only
    if len(key_vars) != 1 or not res.single_roles():
        return None
    v = key_vars[0]
    p = res.payload
    dom = key_domains[v]
    col_role = (AxisRole(v, dom, 1),)
    if isinstance(p, BoolVector):
        m, rows, flag = p.as_row(), (), None
    elif isinstance(p, BoolMatrix):
        if res.axes[1][0].var == v:
            m, rows, flag = p, res.axes[0], False
        else:
            m, rows, flag = transpose(p), res.axes[1], True
    else:
        mode = res.axis_of(v)
        m = transpose(matricize(p, mode))
        p_mode, q_mode = [x for x in range(3) if x != mode]
        rows = _rescale(res.axes[p_mode], p.dims[q_mode]) + res.axes[q_mode]
        flag = mode == 0
    mp = key_maps.get(v)
    if mp is not None or m.cols != dom.size:
        mp = index_map(res.domain(v), dom, mp)
        m = BoolMatrix._trusted(m.rows, dom.size, ((i, mp[j]) for i, j in m.coords))
    if extend_rows and rows:
        if len(rows) != 1:
            return None
        r = rows[0]
        if not r.domain.unbound:
            ext = r.domain.extended()
            rows = (AxisRole(r.var, ext, 1),)
            m = BoolMatrix._trusted(ext.size, m.cols, m.coords)
    return MatrixView(m, tuple(rows), col_role, flag)


# ---------------------------------------------------------------------------
# operators


def align_keys(left: AlgebraicResult, right: AlgebraicResult, keys: Sequence[str]):
    """Common domains for join keys; rejects keys that may be unbound."""
    domains, lmaps, rmaps = {}, {}, {}
    for v in keys:
        ld, rd = left.domain(v), right.domain(v)
        if ld.unbound or rd.unbound:
            raise UnsupportedFeatureError(
                "join on optional variable", detail=f"?{v} may be unbound on one side"
            )
        u, lm, rm = union_dictionary(ld.dictionary, rd.dictionary)
        domains[v] = Domain(u)
        lmaps[v] = None if u is ld.dictionary else lm
        rmaps[v] = None if u is rd.dictionary else rm
    return domains, lmaps, rmaps


def shared_variables(left: AlgebraicResult, right: AlgebraicResult) -> list[str]:
    rv = set(right.visible_variables)
    return [v for v in left.visible_variables if v in rv]


def kronecker_join(left: AlgebraicResult, right: AlgebraicResult) -> AlgebraicResult:
    """Join without shared variables: all combinations via the Kronecker product."""
    lv, rv = natural_matrix(left), natural_matrix(right)
    out = kronecker(lv.matrix, rv.matrix)
    rows = _rescale(lv.rows, rv.matrix.rows) + rv.rows
    cols = _rescale(lv.cols, rv.matrix.cols) + rv.cols
    return AlgebraicResult(out, (rows, cols))


def khatri_rao_join(
    left: AlgebraicResult,
    right: AlgebraicResult,
    keys: Sequence[str],
    outer: bool = False,
) -> AlgebraicResult:
    """Equality join on ``keys`` as a Khatri-Rao product of key-column views.

    With ``outer`` the right view gets the extra "no value" row that keeps
    unmatched left solutions (left outer join).
    """
    domains, lmaps, rmaps = align_keys(left, right, keys)
    lv = key_matrix(left, keys, domains, lmaps)
    rv = key_matrix(right, keys, domains, rmaps, extend_rows=outer)
    rm = rv.matrix
    if outer:
        missing = set(lv.matrix.by_col()) - set(rm.by_col())
        if missing:
            row = sum(r.stride * r.domain.unbound_index for r in rv.rows)
            rm = BoolMatrix._trusted(rm.rows, rm.cols, list(rm.coords) + [(row, c) for c in missing])
    out = khatri_rao(lv.matrix, rm)
    rows = _rescale(lv.rows, rm.rows) + rv.rows
    cols = lv.cols
    flags = {lv.transposed, rv.transposed} - {None}
    if flags == {True}:
        return AlgebraicResult(transpose(out), (cols, rows))
    return AlgebraicResult(out, (rows, cols))


def elementwise_join(left: AlgebraicResult, right: AlgebraicResult) -> AlgebraicResult | None:
    """Both sides bind the same variables on the same axes: intersect.

    Returns None when the layouts differ.
    """
    if type(left.payload) is not type(right.payload) or not (left.single_roles() and right.single_roles()):
        return None
    if [a[0].var for a in left.axes] != [a[0].var for a in right.axes]:
        return None
    keys = [a[0].var for a in left.axes]
    domains, lmaps, rmaps = align_keys(left, right, keys)

    def padded(res, maps):
        if all(maps[v] is None for v in keys):
            return res.payload
        mp = [index_map(res.domain(v), domains[v], maps[v]) for v in keys]
        coords = [tuple(m[x] for m, x in zip(mp, c)) for c in _coords(res.payload)]
        return _payload_like(res.payload, [domains[v].size for v in keys], coords)

    out = elementwise("and", padded(left, lmaps), padded(right, rmaps))
    axes = tuple((AxisRole(v, domains[v], 1),) for v in keys)
    return AlgebraicResult(out, axes)


def _payload_like(template: BoolArray, sizes: Sequence[int], coords) -> BoolArray:
    if isinstance(template, BoolVector):
        return BoolVector(sizes[0], (c[0] for c in coords))
    if isinstance(template, BoolMatrix):
        return BoolMatrix._trusted(sizes[0], sizes[1], coords)
    return BoolTensor3._trusted(tuple(sizes), coords)


def union(left: AlgebraicResult, right: AlgebraicResult, branch_var: str) -> AlgebraicResult:
    """Concatenate solution sequences (left first) along a hidden branch index.

    Variables bound on one side only get a no-value slot; duplicates across
    the branches are kept.
    """
    order = left.variables + [v for v in right.variables if v not in set(left.variables)]
    domains: dict[str, Domain] = {branch_var: Domain(BRANCHES)}
    ltargets, rtargets = {}, {}
    lvars, rvars = set(left.variables), set(right.variables)
    for v in order:
        if v in lvars and v in rvars:
            ld, rd = left.domain(v), right.domain(v)
            u, lm, rm = union_dictionary(ld.dictionary, rd.dictionary)
            dom = Domain(u, ld.unbound or rd.unbound)
            ltargets[v] = (dom, lm)
            rtargets[v] = (dom, rm)
        else:
            side = left if v in lvars else right
            dom = side.domain(v).extended()
            (ltargets if v in lvars else rtargets)[v] = (dom, None)
        domains[v] = dom
    rows = []
    for branch, side, targets, own in ((0, left, ltargets, lvars), (1, right, rtargets, rvars)):
        for a in remap(side, targets):
            a[branch_var] = branch
            for v in order:
                if v not in own:
                    a[v] = domains[v].unbound_index
            rows.append(a)
    return from_assignments(rows, [[branch_var] + order], domains)


def project(res: AlgebraicResult, variables: Sequence[str]) -> AlgebraicResult:
    """OR out every axis except ``variables``: the distinct projected solutions."""
    domains = {v: res.domain(v) for v in variables}
    return from_assignments(res.assignments(), [list(variables)], domains)


def restrict_equal(res: AlgebraicResult, keep: str, drop: str) -> AlgebraicResult:
    """Keep nonzeros where ``keep`` and ``drop`` denote the same term; remove ``drop``."""
    dk, dd = res.domain(keep), res.domain(drop)
    rows = [a for a in res.assignments() if dk.term(a[keep]) == dd.term(a[drop])]
    axes_vars = [[r.var for r in axis if r.var != drop] for axis in res.axes]
    axes_vars = [vs for vs in axes_vars if vs]
    return from_assignments(rows, axes_vars, res.domains())
