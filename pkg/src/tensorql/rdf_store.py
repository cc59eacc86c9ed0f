"""Dictionary-encoded RDF graphs backed by a sparse Boolean 3-way tensor.

Terms are kept in their N-Triples spelling (``<iri>``, ``_:label``,
``"literal"`` with any language tag or datatype suffix) and are treated as
opaque strings. Each of the three modes has its own :class:`Dictionary`;
indices follow first-appearance order.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .tensor_core import Axis, BoolTensor3

_scope_ids = itertools.count(1)


class NTriplesError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Dictionary:
    """Bijection between terms and ``0..len-1`` in insertion order.

    ``scope`` identifies the file the terms came from; blank nodes from
    different scopes never denote the same node.
    """

    __slots__ = ("terms", "index", "scope")

    def __init__(self, terms: Iterable[str] = (), scope: int | None = None):
        self.terms: list[str] = []
        self.index: dict[str, int] = {}
        self.scope = next(_scope_ids) if scope is None else scope
        for t in terms:
            self.add(t)

    def add(self, term: str) -> int:
        idx = self.index.get(term)
        if idx is None:
            idx = len(self.terms)
            self.terms.append(term)
            self.index[term] = idx
        return idx

    def lookup(self, term: str) -> int | None:
        return self.index.get(term)

    def __getitem__(self, i: int) -> str:
        if i < 0:
            raise IndexError(i)
        return self.terms[i]

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[str]:
        return iter(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def __repr__(self) -> str:
        return f"Dictionary({len(self.terms)} terms, scope={self.scope})"

    def copy(self) -> "Dictionary":
        return Dictionary(self.terms, scope=self.scope)


def is_blank(term: str) -> bool:
    return term.startswith("_:")


def rescope(term: str, source: int, target: int) -> str:
    """Spelling of ``term`` from scope ``source`` inside a scope-``target`` dictionary.

    Foreign blank nodes carry their origin as ``_:label~scope`` so they never
    meet the target's own blank nodes, and come back unchanged on return.
    """
    if source == target or not is_blank(term):
        return term
    label, sep, origin = term.partition("~")
    origin_scope = int(origin) if sep else source
    return label if origin_scope == target else f"{label}~{origin_scope}"


def display_term(term: str) -> str:
    """Printable form of a term; scope-tagged blank nodes get a valid label."""
    if is_blank(term) and "~" in term:
        label, _, origin = term.partition("~")
        return f"{label}_s{origin}"
    return term


def union_dictionary(left: Dictionary, right: Dictionary) -> tuple[Dictionary, list[int], list[int]]:
    """Union of two dictionaries: ``left`` order, then unseen ``right`` terms.

    Returns the union and the index maps of both inputs into it. When
    ``right`` adds nothing, ``left`` itself is returned. Blank nodes of a
    foreign scope stay distinct (see :func:`rescope`).
    """
    left_map = list(range(len(left)))
    if left is right:
        return left, left_map, left_map
    keys = [rescope(t, right.scope, left.scope) for t in right.terms]
    found = [left.lookup(t) for t in keys]
    if None not in found:
        return left, left_map, found  # type: ignore[return-value]
    out = left.copy()
    return out, left_map, [out.add(t) for t in keys]


class CountMatrix:
    """Sparse integer matrix used for the marginal sums.

    Row and column squared norms are kept as exact integers and refreshed
    lazily after updates.
    """

    def __init__(self, rows: int = 0, cols: int = 0):
        self.rows = rows
        self.cols = cols
        self.counts: dict[tuple[int, int], int] = {}
        self._by_row: dict[int, dict[int, int]] = defaultdict(dict)
        self._by_col: dict[int, dict[int, int]] = defaultdict(dict)
        self._row_sq: dict[int, int] | None = None
        self._col_sq: dict[int, int] | None = None

    def bump(self, i: int, j: int, delta: int) -> None:
        v = self.counts.get((i, j), 0) + delta
        if v < 0:
            raise ValueError(f"negative marginal count at {(i, j)}")
        if v:
            self.counts[(i, j)] = v
            self._by_row[i][j] = v
            self._by_col[j][i] = v
        else:
            self.counts.pop((i, j), None)
            self._by_row[i].pop(j, None)
            self._by_col[j].pop(i, None)
            if not self._by_row[i]:
                del self._by_row[i]
            if not self._by_col[j]:
                del self._by_col[j]
        self._row_sq = self._col_sq = None

    def __getitem__(self, ij: tuple[int, int]) -> int:
        return self.counts.get(ij, 0)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return len(self.counts)

    def total(self) -> int:
        return sum(self.counts.values())

    def row(self, i: int) -> dict[int, int]:
        return dict(self._by_row.get(i, {}))

    def col(self, j: int) -> dict[int, int]:
        return dict(self._by_col.get(j, {}))

    def row_totals(self) -> dict[int, int]:
        return {i: sum(r.values()) for i, r in self._by_row.items()}

    def col_totals(self) -> dict[int, int]:
        return {j: sum(c.values()) for j, c in self._by_col.items()}

    def row_sumsq(self, i: int) -> int:
        if self._row_sq is None:
            self._row_sq = {r: sum(v * v for v in vals.values()) for r, vals in self._by_row.items()}
        return self._row_sq.get(i, 0)

    def col_sumsq(self, j: int) -> int:
        if self._col_sq is None:
            self._col_sq = {c: sum(v * v for v in vals.values()) for c, vals in self._by_col.items()}
        return self._col_sq.get(j, 0)

    def row_norm(self, i: int) -> float:
        return math.sqrt(self.row_sumsq(i))

    def col_norm(self, j: int) -> float:
        return math.sqrt(self.col_sumsq(j))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int64)
        for (i, j), v in self.counts.items():
            out[i, j] = v
        return out


class MarginalStats:
    """Sums of the data tensor along each mode.

    ``P`` (|P| x |O|) sums over subjects, ``Q`` (|S| x |O|) over predicates
    and ``R`` (|S| x |P|) over objects.
    """

    def __init__(self, dims: Sequence[int] = (0, 0, 0)):
        n, m, l = dims
        self.P = CountMatrix(m, l)
        self.Q = CountMatrix(n, l)
        self.R = CountMatrix(n, m)

    @classmethod
    def from_coords(cls, dims: Sequence[int], coords: Iterable[tuple[int, int, int]]) -> "MarginalStats":
        stats = cls(dims)
        for c in coords:
            stats.update(c, +1)
        return stats

    def update(self, coord: tuple[int, int, int], delta: int) -> None:
        i, j, k = coord
        self.P.bump(j, k, delta)
        self.Q.bump(i, k, delta)
        self.R.bump(i, j, delta)

    def resize(self, dims: Sequence[int]) -> None:
        n, m, l = dims
        self.P.rows, self.P.cols = m, l
        self.Q.rows, self.Q.cols = n, l
        self.R.rows, self.R.cols = n, m

    def matrix_for(self, summed: Axis | int) -> CountMatrix:
        """The marginal matrix obtained by summing out mode ``summed``."""
        return (self.P, self.Q, self.R)[Axis.coerce(summed)]

    def mode_totals(self, mode: Axis | int) -> dict[int, int]:
        """Number of triples per index of ``mode`` (sum over the other two)."""
        mode = Axis.coerce(mode)
        if mode == Axis.SUBJECT:
            return self.R.row_totals()
        if mode == Axis.PREDICATE:
            return self.P.row_totals()
        return self.P.col_totals()

    @property
    def totals(self) -> tuple[int, int, int]:
        return (self.P.total(), self.Q.total(), self.R.total())

    @property
    def nnz_total(self) -> int:
        return self.P.nnz + self.Q.nnz + self.R.nnz


class Graph:
    """An RDF graph as a sparse ``|S| x |P| x |O|`` Boolean tensor.

    Updates need exclusive access; readers should work on the immutable
    :attr:`tensor` snapshot.
    """

    def __init__(self, scope: int | None = None):
        self.scope = next(_scope_ids) if scope is None else scope
        self.subjects = Dictionary(scope=self.scope)
        self.predicates = Dictionary(scope=self.scope)
        self.objects = Dictionary(scope=self.scope)
        self._coords: set[tuple[int, int, int]] = set()
        self._tensor: BoolTensor3 | None = None
        self._stats: MarginalStats | None = None

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, str]], scope: int | None = None) -> "Graph":
        g = cls(scope=scope)
        for t in triples:
            g.add_triple(t)
        return g

    @property
    def dictionaries(self) -> tuple[Dictionary, Dictionary, Dictionary]:
        return (self.subjects, self.predicates, self.objects)

    def dictionary(self, mode: Axis | int) -> Dictionary:
        return self.dictionaries[Axis.coerce(mode)]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (len(self.subjects), len(self.predicates), len(self.objects))

    @property
    def nnz(self) -> int:
        return len(self._coords)

    def __len__(self) -> int:
        return len(self._coords)

    @property
    def tensor(self) -> BoolTensor3:
        if self._tensor is None:
            self._tensor = BoolTensor3._trusted(self.dims, self._coords)
        return self._tensor

    @property
    def stats(self) -> MarginalStats:
        if self._stats is None:
            self._stats = MarginalStats.from_coords(self.dims, self._coords)
        return self._stats

    def encode(self, triple: tuple[str, str, str]) -> tuple[int, int, int] | None:
        idx = tuple(d.lookup(t) for d, t in zip(self.dictionaries, triple))
        return None if None in idx else idx  # type: ignore[return-value]

    def add_triple(self, triple: tuple[str, str, str]) -> bool:
        """Insert a triple; returns False if it was already present."""
        s, p, o = triple
        coord = (self.subjects.add(s), self.predicates.add(p), self.objects.add(o))
        if coord in self._coords:
            return False
        self._coords.add(coord)
        self._tensor = None
        if self._stats is not None:
            self._stats.resize(self.dims)
            self._stats.update(coord, +1)
        return True

    def remove_triple(self, triple: tuple[str, str, str]) -> bool:
        """Delete a triple; returns False (and changes nothing) if absent.

        Dictionaries never shrink, so removed terms leave all-zero slices.
        """
        coord = self.encode(triple)
        if coord is None or coord not in self._coords:
            return False
        self._coords.remove(coord)
        self._tensor = None
        if self._stats is not None:
            self._stats.update(coord, -1)
        return True

    def __contains__(self, triple: tuple[str, str, str]) -> bool:
        coord = self.encode(triple)
        return coord is not None and coord in self._coords

    def decode(self, coords: Iterable[tuple[int, int, int]]) -> list[tuple[str, str, str]]:
        out = []
        for i, j, k in coords:
            if not (0 <= i < len(self.subjects) and 0 <= j < len(self.predicates) and 0 <= k < len(self.objects)):
                raise IndexError(f"coordinate {(i, j, k)} out of range for dims {self.dims}")
            out.append((self.subjects[i], self.predicates[j], self.objects[k]))
        return out

    def triples(self) -> list[tuple[str, str, str]]:
        """All triples in row-major tensor order."""
        return self.decode(self.tensor.coords)

    def triple_set(self) -> set[tuple[str, str, str]]:
        return set(self.triples())

    def marginals(self) -> MarginalStats:
        return self.stats

    def __repr__(self) -> str:
        n, m, l = self.dims
        return f"Graph({n}x{m}x{l}, nnz={self.nnz})"


# ---------------------------------------------------------------------------
# N-Triples

_IRI = r"<[^<>\"{}|^`\\\s]*>"
_BLANK = r"_:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?"
_LITERAL = r"\"(?:[^\"\\\n\r]|\\.)*\"(?:@[A-Za-z]+(?:-[A-Za-z0-9]+)*|\^\^" + _IRI + r")?"
_LINE = re.compile(
    rf"\s*(?P<s>{_IRI}|{_BLANK})\s*(?P<p>{_IRI})\s*(?P<o>{_IRI}|{_BLANK}|{_LITERAL})\s*\.\s*(?:#.*)?$"
)


def parse_ntriples_line(line: str, lineno: int = 0) -> tuple[str, str, str] | None:
    """Parse one line; ``None`` for blank and comment lines."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    m = _LINE.match(line.rstrip("\r\n"))
    if m is None:
        raise NTriplesError(lineno, f"malformed triple: {stripped[:80]!r}")
    return m.group("s"), m.group("p"), m.group("o")


def iter_ntriples(stream: IO) -> Iterator[tuple[str, str, str]]:
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise NTriplesError(lineno, f"invalid UTF-8: {exc}") from None
        triple = parse_ntriples_line(raw, lineno)
        if triple is not None:
            yield triple


def load_ntriples(stream: IO) -> Graph:
    """Read an N-Triples stream (bytes or text lines) into a new :class:`Graph`."""
    return Graph.from_triples(iter_ntriples(stream))


def load_ntriples_file(path) -> Graph:
    with open(path, "rb") as fh:
        return load_ntriples(fh)


def serialize(graph: Graph, stream: IO | None = None) -> str:
    text = "".join(f"{s} {p} {o} .\n" for s, p, o in graph.triples())
    if stream is not None:
        stream.write(text)
    return text


# ---------------------------------------------------------------------------
# alignment


@dataclass(frozen=True)
class Alignment:
    mode: Axis
    size: int
    left: tuple[int, ...]
    right: tuple[int, ...]


def _rebuild(graph: Graph, dicts: Sequence[Dictionary], maps: Sequence[Sequence[int] | None]) -> Graph:
    out = Graph.__new__(Graph)
    out.scope = graph.scope
    out.subjects, out.predicates, out.objects = (d.copy() for d in dicts)
    out._coords = {
        tuple(c if mp is None else mp[c] for c, mp in zip(coord, maps))  # type: ignore[misc]
        for coord in graph._coords
    }
    out._tensor = None
    out._stats = None
    return out


def align(g: Graph, h: Graph, modes: Iterable[Axis | int]) -> tuple[Graph, Graph, dict[Axis, Alignment]]:
    """Give ``g`` and ``h`` a common dictionary on each requested mode.

    The shared dictionary is ``g``'s order followed by ``h``'s unseen terms;
    both tensors are padded with all-zero slices, nonzeros are untouched.
    Aligning a graph with itself is the identity.
    """
    modes = sorted({Axis.coerce(m) for m in modes})
    if g is h:
        return g, h, {
            m: Alignment(m, len(g.dictionary(m)), tuple(range(len(g.dictionary(m)))), tuple(range(len(g.dictionary(m)))))
            for m in modes
        }
    g_dicts = list(g.dictionaries)
    h_dicts = list(h.dictionaries)
    g_maps: list[list[int] | None] = [None, None, None]
    h_maps: list[list[int] | None] = [None, None, None]
    alignments = {}
    for m in modes:
        shared, gm, hm = union_dictionary(g.dictionary(m), h.dictionary(m))
        g_dicts[m] = shared
        h_dicts[m] = shared
        g_maps[m], h_maps[m] = gm, hm
        alignments[m] = Alignment(m, len(shared), tuple(gm), tuple(hm))
    if all(x is None for x in h_maps):
        return g, h, alignments
    g2 = _rebuild(g, g_dicts, g_maps)
    h2 = _rebuild(h, h_dicts, h_maps)
    # h's terms now live in g's scope for the aligned modes
    return g2, h2, alignments
