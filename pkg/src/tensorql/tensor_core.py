"""Sparse Boolean vectors, matrices and 3-way tensors.

Every structure stores its nonzeros as a sorted tuple of coordinates
(plain ints for vectors, ``(row, col)`` for matrices, ``(i, j, k)`` for
tensors). Sorting is lexicographic, so iteration order is row-major. All
values are immutable once built and may be shared between threads.

Block numbering used by the products::

    kronecker(A, B)[i1 * B.rows + i2, j1 * B.cols + j2] = A[i1, j1] & B[i2, j2]
    khatri_rao(A, B)[i1 * B.rows + i2, c]             = A[i1, c] & B[i2, c]

Matricization along mode ``m`` puts mode ``m`` on the rows; the remaining
two modes index the columns with the earlier-numbered mode varying
slowest (see :class:`ColumnDecoder`).
"""

from __future__ import annotations

import enum
from collections import defaultdict
from typing import Iterable, Sequence, Union

import numpy as np

# Coordinates are exposed as signed 64-bit indices to external tools.
MAX_INDEX = 2**63 - 1


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class DimensionOverflowError(OverflowError):
    """A dimension product does not fit into a 64-bit index."""


class Axis(enum.IntEnum):
    MODE1 = 0
    MODE2 = 1
    MODE3 = 2

    # RDF names for the same modes
    SUBJECT = 0
    PREDICATE = 1
    OBJECT = 2

    @classmethod
    def coerce(cls, value: Union["Axis", int, str]) -> "Axis":
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(value)


def checked_product(*dims: int) -> int:
    result = 1
    for d in dims:
        result *= d
    if result > MAX_INDEX:
        raise DimensionOverflowError(f"dimension product {' x '.join(map(str, dims))} exceeds 2**63-1")
    return result


def _check_dim(d: int, name: str = "dimension") -> int:
    d = int(d)
    if d < 0:
        raise ValueError(f"{name} must be non-negative, got {d}")
    if d > MAX_INDEX:
        raise DimensionOverflowError(f"{name} {d} exceeds 2**63-1")
    return d


class BoolVector:
    __slots__ = ("dim", "indices", "_set")

    def __init__(self, dim: int, indices: Iterable[int] = ()):
        self.dim = _check_dim(dim)
        idx = sorted({int(i) for i in indices})
        if idx and (idx[0] < 0 or idx[-1] >= self.dim):
            raise IndexError(f"vector index out of range for dim {self.dim}")
        self.indices: tuple[int, ...] = tuple(idx)
        self._set: frozenset[int] | None = None

    @classmethod
    def zeros(cls, dim: int) -> "BoolVector":
        return cls(dim)

    @classmethod
    def ones(cls, dim: int) -> "BoolVector":
        return cls(dim, range(dim))

    @classmethod
    def from_dense(cls, values: Sequence) -> "BoolVector":
        arr = np.asarray(values, dtype=bool)
        return cls(arr.shape[0], np.flatnonzero(arr).tolist())

    @property
    def shape(self) -> tuple[int]:
        return (self.dim,)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def index_set(self) -> frozenset[int]:
        if self._set is None:
            self._set = frozenset(self.indices)
        return self._set

    def __contains__(self, i: int) -> bool:
        return i in self.index_set

    def __getitem__(self, i: int) -> bool:
        return i in self.index_set

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other) -> bool:
        return isinstance(other, BoolVector) and self.dim == other.dim and self.indices == other.indices

    def __hash__(self) -> int:
        return hash((self.dim, self.indices))

    def __repr__(self) -> str:
        return f"BoolVector(dim={self.dim}, indices={list(self.indices)})"

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=bool)
        out[list(self.indices)] = True
        return out

    def as_column(self) -> "BoolMatrix":
        """The vector as a ``dim x 1`` matrix."""
        return BoolMatrix(self.dim, 1, ((i, 0) for i in self.indices))

    def as_row(self) -> "BoolMatrix":
        """The vector as a ``1 x dim`` matrix."""
        return BoolMatrix(1, self.dim, ((0, i) for i in self.indices))


class BoolMatrix:
    __slots__ = ("rows", "cols", "coords", "_set", "_by_row", "_by_col")

    def __init__(self, rows: int, cols: int, coords: Iterable[tuple[int, int]] = ()):
        self.rows = _check_dim(rows, "rows")
        self.cols = _check_dim(cols, "cols")
        cs = sorted({(int(i), int(j)) for i, j in coords})
        for i, j in cs:
            if not (0 <= i < self.rows and 0 <= j < self.cols):
                raise IndexError(f"coordinate {(i, j)} out of range for {self.rows}x{self.cols} matrix")
        self.coords: tuple[tuple[int, int], ...] = tuple(cs)
        self._set = None
        self._by_row = None
        self._by_col = None

    @classmethod
    def _trusted(cls, rows: int, cols: int, coords: Iterable[tuple[int, int]]) -> "BoolMatrix":
        # Skip validation for coordinates produced by our own operators.
        m = cls.__new__(cls)
        m.rows, m.cols = rows, cols
        m.coords = tuple(sorted(set(coords)))
        m._set = m._by_row = m._by_col = None
        return m

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BoolMatrix":
        return cls(rows, cols)

    @classmethod
    def ones(cls, rows: int, cols: int) -> "BoolMatrix":
        return cls(rows, cols, ((i, j) for i in range(rows) for j in range(cols)))

    @classmethod
    def identity(cls, n: int) -> "BoolMatrix":
        return cls(n, n, ((i, i) for i in range(n)))

    @classmethod
    def from_dense(cls, values) -> "BoolMatrix":
        arr = np.asarray(values, dtype=bool)
        if arr.ndim != 2:
            raise ShapeError("expected a 2-D array")
        return cls(arr.shape[0], arr.shape[1], zip(*(a.tolist() for a in np.nonzero(arr))))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return len(self.coords)

    @property
    def coord_set(self) -> frozenset[tuple[int, int]]:
        if self._set is None:
            self._set = frozenset(self.coords)
        return self._set

    def __contains__(self, ij) -> bool:
        return tuple(ij) in self.coord_set

    def __getitem__(self, ij) -> bool:
        return tuple(ij) in self.coord_set

    def __iter__(self):
        return iter(self.coords)

    def __eq__(self, other) -> bool:
        return isinstance(other, BoolMatrix) and self.shape == other.shape and self.coords == other.coords

    def __hash__(self) -> int:
        return hash((self.shape, self.coords))

    def __repr__(self) -> str:
        return f"BoolMatrix({self.rows}x{self.cols}, nnz={self.nnz})"

    def by_row(self) -> dict[int, tuple[int, ...]]:
        """Nonzero column indices grouped per row (empty rows omitted)."""
        if self._by_row is None:
            acc = defaultdict(list)
            for i, j in self.coords:
                acc[i].append(j)
            self._by_row = {i: tuple(js) for i, js in acc.items()}
        return self._by_row

    def by_col(self) -> dict[int, tuple[int, ...]]:
        """Nonzero row indices grouped per column (empty columns omitted)."""
        if self._by_col is None:
            acc = defaultdict(list)
            for i, j in self.coords:
                acc[j].append(i)
            self._by_col = {j: tuple(sorted(is_)) for j, is_ in acc.items()}
        return self._by_col

    def row(self, i: int) -> BoolVector:
        return BoolVector(self.cols, self.by_row().get(i, ()))

    def col(self, j: int) -> BoolVector:
        return BoolVector(self.rows, self.by_col().get(j, ()))

    def column_sums(self) -> list[int]:
        sums = [0] * self.cols
        for j, is_ in self.by_col().items():
            sums[j] = len(is_)
        return sums

    def row_sums(self) -> list[int]:
        sums = [0] * self.rows
        for i, js in self.by_row().items():
            sums[i] = len(js)
        return sums

    def row_support(self) -> BoolVector:
        """OR across the columns: rows holding at least one nonzero."""
        return BoolVector(self.rows, self.by_row().keys())

    def col_support(self) -> BoolVector:
        """OR across the rows: columns holding at least one nonzero."""
        return BoolVector(self.cols, self.by_col().keys())

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        if self.coords:
            r, c = zip(*self.coords)
            out[list(r), list(c)] = True
        return out


class BoolTensor3:
    __slots__ = ("dims", "coords", "_set")

    def __init__(self, dims: Sequence[int], coords: Iterable[tuple[int, int, int]] = ()):
        if len(dims) != 3:
            raise ShapeError("a 3-way tensor needs exactly three dimensions")
        self.dims: tuple[int, int, int] = tuple(_check_dim(d) for d in dims)  # type: ignore[assignment]
        n, m, l = self.dims
        cs = sorted({(int(i), int(j), int(k)) for i, j, k in coords})
        for i, j, k in cs:
            if not (0 <= i < n and 0 <= j < m and 0 <= k < l):
                raise IndexError(f"coordinate {(i, j, k)} out of range for {n}x{m}x{l} tensor")
        self.coords: tuple[tuple[int, int, int], ...] = tuple(cs)
        self._set = None

    @classmethod
    def _trusted(cls, dims, coords) -> "BoolTensor3":
        t = cls.__new__(cls)
        t.dims = tuple(dims)
        t.coords = tuple(sorted(set(coords)))
        t._set = None
        return t

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "BoolTensor3":
        return cls(dims)

    @classmethod
    def from_dense(cls, values) -> "BoolTensor3":
        arr = np.asarray(values, dtype=bool)
        if arr.ndim != 3:
            raise ShapeError("expected a 3-D array")
        return cls(arr.shape, zip(*(a.tolist() for a in np.nonzero(arr))))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def nnz(self) -> int:
        return len(self.coords)

    @property
    def coord_set(self) -> frozenset[tuple[int, int, int]]:
        if self._set is None:
            self._set = frozenset(self.coords)
        return self._set

    def __contains__(self, ijk) -> bool:
        return tuple(ijk) in self.coord_set

    def __getitem__(self, ijk) -> bool:
        return tuple(ijk) in self.coord_set

    def __iter__(self):
        return iter(self.coords)

    def __eq__(self, other) -> bool:
        return isinstance(other, BoolTensor3) and self.dims == other.dims and self.coords == other.coords

    def __hash__(self) -> int:
        return hash((self.dims, self.coords))

    def __repr__(self) -> str:
        n, m, l = self.dims
        return f"BoolTensor3({n}x{m}x{l}, nnz={self.nnz})"

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dims, dtype=bool)
        if self.coords:
            i, j, k = zip(*self.coords)
            out[list(i), list(j), list(k)] = True
        return out


BoolArray = Union[BoolVector, BoolMatrix, BoolTensor3]


# ---------------------------------------------------------------------------
# products


def kronecker(a: BoolMatrix, b: BoolMatrix) -> BoolMatrix:
    rows = checked_product(a.rows, b.rows)
    cols = checked_product(a.cols, b.cols)
    coords = [
        (i1 * b.rows + i2, j1 * b.cols + j2)
        for i1, j1 in a.coords
        for i2, j2 in b.coords
    ]
    return BoolMatrix._trusted(rows, cols, coords)


def khatri_rao(a: BoolMatrix, b: BoolMatrix) -> BoolMatrix:
    """Column-wise Kronecker product of two matrices with equal column counts."""
    if a.cols != b.cols:
        raise ShapeError(f"Khatri-Rao needs equal column counts, got {a.cols} and {b.cols}")
    rows = checked_product(a.rows, b.rows)
    b_cols = b.by_col()
    coords = []
    for c, a_rows in a.by_col().items():
        b_rows = b_cols.get(c)
        if not b_rows:
            continue
        for i1 in a_rows:
            base = i1 * b.rows
            coords.extend((base + i2, c) for i2 in b_rows)
    return BoolMatrix._trusted(rows, a.cols, coords)


def boolean_matmul(a: BoolMatrix, b: BoolMatrix) -> BoolMatrix:
    """Matrix product over the Boolean semiring: OR of ANDs."""
    if a.cols != b.rows:
        raise ShapeError(f"inner dimensions differ: {a.shape} and {b.shape}")
    b_rows = b.by_row()
    coords = []
    for i, ks in a.by_row().items():
        hit: set[int] = set()
        for k in ks:
            hit.update(b_rows.get(k, ()))
        coords.extend((i, j) for j in hit)
    return BoolMatrix._trusted(a.rows, b.cols, coords)


def outer(a: BoolVector, b: BoolVector) -> BoolMatrix:
    """Outer product ``a b^T``."""
    return BoolMatrix._trusted(a.dim, b.dim, ((i, j) for i in a.indices for j in b.indices))


def outer3(a: BoolVector, b: BoolVector, c: BoolVector) -> BoolTensor3:
    return BoolTensor3._trusted(
        (a.dim, b.dim, c.dim),
        ((i, j, k) for i in a.indices for j in b.indices for k in c.indices),
    )


_OPS = {
    "and": lambda x, y: x & y,
    "or": lambda x, y: x | y,
    "andnot": lambda x, y: x - y,
}


def elementwise(op: str, x: BoolArray, y: BoolArray) -> BoolArray:
    """Coordinate-wise ``and``, ``or`` or ``andnot`` (x and not y)."""
    if op not in _OPS:
        raise ValueError(f"unknown elementwise op {op!r}")
    if type(x) is not type(y) or x.shape != y.shape:
        raise ShapeError(f"elementwise {op} on mismatched operands {x!r} and {y!r}")
    f = _OPS[op]
    if isinstance(x, BoolVector):
        return BoolVector(x.dim, f(x.index_set, y.index_set))
    if isinstance(x, BoolMatrix):
        return BoolMatrix._trusted(x.rows, x.cols, f(x.coord_set, y.coord_set))
    return BoolTensor3._trusted(x.dims, f(x.coord_set, y.coord_set))


def mask_columns(a: BoolMatrix, keep: BoolVector) -> BoolMatrix:
    """Zero every column ``j`` of ``a`` with ``keep[j] == 0``."""
    if keep.dim != a.cols:
        raise ShapeError(f"mask of length {keep.dim} for {a.cols} columns")
    kept = keep.index_set
    return BoolMatrix._trusted(a.rows, a.cols, (ij for ij in a.coords if ij[1] in kept))


def transpose(a: BoolMatrix) -> BoolMatrix:
    return BoolMatrix._trusted(a.cols, a.rows, ((j, i) for i, j in a.coords))


def vectorize(a: BoolMatrix) -> BoolVector:
    """Row-major vectorization: entry ``(i, j)`` lands at ``i * cols + j``."""
    n = checked_product(a.rows, a.cols)
    return BoolVector(n, (i * a.cols + j for i, j in a.coords))


# ---------------------------------------------------------------------------
# slices, fibres, unfoldings


def _free_modes(mode: int) -> tuple[int, int]:
    return tuple(m for m in range(3) if m != mode)  # type: ignore[return-value]


def slice(t: BoolTensor3, axis: Axis | int, index: int) -> BoolMatrix:  # noqa: A001 - mirrors the math name
    """Fix one mode; the other two keep their relative order (rows = earlier mode)."""
    axis = Axis.coerce(axis)
    if not 0 <= index < t.dims[axis]:
        raise IndexError(f"slice index {index} out of range for mode {axis.name}")
    r, c = _free_modes(axis)
    coords = [(x[r], x[c]) for x in t.coords if x[axis] == index]
    return BoolMatrix._trusted(t.dims[r], t.dims[c], coords)


def fibre(t: BoolTensor3, fixed: Sequence[tuple[Axis | int, int]]) -> BoolVector:
    """Fix two modes, e.g. ``fibre(T, [(Axis.SUBJECT, i), (Axis.PREDICATE, j)])``."""
    if len(fixed) != 2:
        raise ValueError("a fibre fixes exactly two modes")
    (a1, i1), (a2, i2) = ((Axis.coerce(a), i) for a, i in fixed)
    if a1 == a2:
        raise ValueError(f"duplicate axis {a1.name} in fibre selection")
    for a, i in ((a1, i1), (a2, i2)):
        if not 0 <= i < t.dims[a]:
            raise IndexError(f"fibre index {i} out of range for mode {a.name}")
    free = 3 - a1 - a2
    return BoolVector(t.dims[free], (x[free] for x in t.coords if x[a1] == i1 and x[a2] == i2))


class ColumnDecoder:
    """Maps columns of a mode-``m`` unfolding to the two free-mode indices.

    Column ``c`` covers free modes ``(p, q)`` with ``p < q`` and
    ``c = index_p * dims[q] + index_q``.
    """

    def __init__(self, dims: Sequence[int], mode: Axis | int):
        self.mode = Axis.coerce(mode)
        self.free = _free_modes(self.mode)
        self.dims = tuple(dims)
        self.inner = self.dims[self.free[1]]
        self.cols = checked_product(self.dims[self.free[0]], self.inner)

    def decode(self, col: int) -> tuple[int, int]:
        if not 0 <= col < self.cols:
            raise IndexError(f"column {col} out of range")
        return divmod(col, self.inner)

    def encode(self, first: int, second: int) -> int:
        return first * self.inner + second


def matricize(t: BoolTensor3, mode: Axis | int) -> BoolMatrix:
    mode = Axis.coerce(mode)
    dec = ColumnDecoder(t.dims, mode)
    p, q = dec.free
    coords = [(x[mode], x[p] * dec.inner + x[q]) for x in t.coords]
    return BoolMatrix._trusted(t.dims[mode], dec.cols, coords)


def fold(m: BoolMatrix, mode: Axis | int, dims: Sequence[int]) -> BoolTensor3:
    """Inverse of :func:`matricize`."""
    mode = Axis.coerce(mode)
    dec = ColumnDecoder(dims, mode)
    if m.shape != (dims[mode], dec.cols):
        raise ShapeError(f"matrix {m.shape} is not a mode-{mode + 1} unfolding of {tuple(dims)}")
    p, q = dec.free
    coords = []
    for r, c in m.coords:
        x = [0, 0, 0]
        x[mode] = r
        x[p], x[q] = divmod(c, dec.inner)
        coords.append(tuple(x))
    return BoolTensor3._trusted(tuple(dims), coords)


# ---------------------------------------------------------------------------
# counts


def nnz(x: BoolArray) -> int:
    return x.nnz


def size(x: BoolArray) -> int:
    return checked_product(*x.shape)


def density(x: BoolArray) -> float:
    """Fraction of nonzero cells; zero-size structures have density 0."""
    total = size(x)
    return x.nnz / total if total else 0.0


def sparsity(x: BoolArray) -> float:
    return 1.0 - density(x)
