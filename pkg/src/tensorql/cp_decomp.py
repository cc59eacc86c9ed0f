"""Boolean CP decompositions of 3-way binary tensors.

A decomposition is three binary factor matrices ``A`` (n x r), ``B``
(m x r) and ``C`` (l x r); column ``i`` of each gives one rank-1 block and
the tensor is the OR of the ``r`` blocks. With the unfolding convention of
:mod:`tensorql.tensor_core` the decomposition is exact iff::

    T(1) = A ∘ (B ⊙ C)ᵀ     T(2) = B ∘ (A ⊙ C)ᵀ     T(3) = C ∘ (A ⊙ B)ᵀ
"""

from __future__ import annotations

import os
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .tensor_core import (
    BoolMatrix,
    BoolTensor3,
    BoolVector,
    ShapeError,
    boolean_matmul,
    checked_product,
    khatri_rao,
    matricize,
    sparsity,
    transpose,
)


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class CPFactors:
    A: BoolMatrix
    B: BoolMatrix
    C: BoolMatrix

    def __post_init__(self):
        if not self.A.cols == self.B.cols == self.C.cols:
            raise ShapeError(f"factor ranks differ: {self.A.cols}, {self.B.cols}, {self.C.cols}")

    @property
    def rank(self) -> int:
        return self.A.cols

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.A.rows, self.B.rows, self.C.rows)

    @property
    def nnz(self) -> int:
        return self.A.nnz + self.B.nnz + self.C.nnz

    def component(self, i: int) -> tuple[BoolVector, BoolVector, BoolVector]:
        return self.A.col(i), self.B.col(i), self.C.col(i)

    def columns(self) -> list[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]]:
        a, b, c = self.A.by_col(), self.B.by_col(), self.C.by_col()
        return [(a.get(i, ()), b.get(i, ()), c.get(i, ())) for i in range(self.rank)]

    def select(self, keep: Sequence[int]) -> "CPFactors":
        """Factors restricted to the components in ``keep`` (renumbered in order)."""
        pos = {j: n for n, j in enumerate(keep)}

        def sub(m: BoolMatrix) -> BoolMatrix:
            return BoolMatrix._trusted(m.rows, len(keep), ((i, pos[j]) for i, j in m.coords if j in pos))

        return CPFactors(sub(self.A), sub(self.B), sub(self.C))

    @classmethod
    def from_blocks(cls, dims: Sequence[int], blocks) -> "CPFactors":
        """Factors from a list of ``(rows_a, rows_b, rows_c)`` index collections."""
        r = len(blocks)
        mats = []
        for mode in range(3):
            coords = [(i, j) for j, block in enumerate(blocks) for i in block[mode]]
            mats.append(BoolMatrix(dims[mode], r, coords))
        return cls(*mats)


def _block_cells(xs, ys, zs):
    return ((i, j, k) for i in xs for j in ys for k in zs)


def reconstruct(f: CPFactors) -> BoolTensor3:
    """OR of the rank-1 tensors ``A[:, i] ⊠ B[:, i] ⊠ C[:, i]``."""
    cells: set[tuple[int, int, int]] = set()
    for xs, ys, zs in f.columns():
        cells.update(_block_cells(xs, ys, zs))
    return BoolTensor3._trusted(f.dims, cells)


def unfold_identity_check(f: CPFactors, t: BoolTensor3) -> tuple[bool, bool, bool]:
    """Whether each mode-n unfolding of ``t`` equals its factor-product form."""
    if f.dims != t.dims:
        raise ShapeError(f"factors of shape {f.dims} against tensor {t.dims}")
    pairs = ((f.A, khatri_rao(f.B, f.C)), (f.B, khatri_rao(f.A, f.C)), (f.C, khatri_rao(f.A, f.B)))
    return tuple(  # type: ignore[return-value]
        matricize(t, mode) == boolean_matmul(factor, transpose(kr))
        for mode, (factor, kr) in enumerate(pairs)
    )


def rank_upper_bound(dims: Sequence[int]) -> int:
    n, m, l = dims
    return min(checked_product(n, m), checked_product(n, l), checked_product(m, l))


def naive_decomposition(t: BoolTensor3) -> CPFactors:
    """Exact decomposition of rank ``min{nm, nl, ml}``.

    The longest mode's unfolding becomes that mode's factor; the two
    other factors hold a single 1 per column, arranged so that their
    Khatri-Rao product is the identity. Columns of the unfolding that are
    all zero get all-zero indicator columns as well, which keeps
    ``|A| + |B| + |C| <= 3|T|``.
    """
    dims = t.dims
    mode = max(range(3), key=lambda m: (dims[m], -m))
    p, q = (m for m in range(3) if m != mode)
    r = checked_product(dims[p], dims[q])
    unfolded = matricize(t, mode)
    used = unfolded.col_support().index_set
    inner = dims[q]
    first = [(c // inner, c) for c in sorted(used)]
    second = [(c % inner, c) for c in sorted(used)]
    mats: list[BoolMatrix] = [None, None, None]  # type: ignore[list-item]
    mats[mode] = unfolded
    mats[p] = BoolMatrix._trusted(dims[p], r, first)
    mats[q] = BoolMatrix._trusted(dims[q], r, second)
    return CPFactors(*mats)


# ---------------------------------------------------------------------------
# greedy cover


def _grow(seed, cells: frozenset, uncovered: set, dims, overcover: bool = False) -> tuple[list[list[int]], int]:
    """Grow a block from one cell, adding the index with the largest gain.

    The gain of an index is the number of nonzeros it newly covers, minus
    the zeros it covers when ``overcover`` is set; without it, indices
    whose new cells include a zero are not eligible. Returns the block and
    its total gain.
    """
    block = [[seed[0]], [seed[1]], [seed[2]]]
    gain = 1 if seed in uncovered else 0
    while True:
        best = None
        for mode in range(3):
            others = [block[m] for m in range(3) if m != mode]
            members = set(block[mode])
            for x in range(dims[mode]):
                if x in members:
                    continue
                new = zeros = 0
                for y in others[0]:
                    for z in others[1]:
                        cell = (x, y, z) if mode == 0 else (y, x, z) if mode == 1 else (y, z, x)
                        if cell not in cells:
                            zeros += 1
                            if not overcover:
                                break
                        else:
                            new += cell in uncovered
                    if zeros and not overcover:
                        break
                if zeros and not overcover:
                    continue
                score = new - zeros
                if score > 0 and (best is None or score > best[0]):
                    best = (score, mode, x)
        if best is None:
            return block, gain
        score, mode, x = best
        block[mode].append(x)
        gain += score


def greedy_cp(t: BoolTensor3, r: int, seed: int = 0, max_seeds: int = 64,
              overcover: bool = False) -> tuple[CPFactors, "DecompReport"]:
    """Cover the nonzeros of ``t`` with at most ``r`` rank-1 blocks.

    Each round grows one block from each of up to ``max_seeds`` randomly
    chosen uncovered nonzeros and keeps the block with the largest gain.
    By default blocks never cover zeros of ``t``, so the result is exact or
    an under-cover; ``overcover=True`` trades covered zeros against newly
    covered nonzeros instead. Stops early once everything is covered.
    """
    if r < 0:
        raise ValueError("rank must be nonnegative")
    rng = random.Random(seed)
    cells = t.coord_set
    uncovered = set(cells)
    blocks = []
    for _ in range(r):
        if not uncovered:
            break
        pool = sorted(uncovered)
        rng.shuffle(pool)
        best = None
        for start in pool[:max_seeds]:
            block, gain = _grow(start, cells, uncovered, t.dims, overcover)
            if best is None or gain > best[1]:
                best = (block, gain)
        block = best[0]  # type: ignore[index]
        blocks.append(tuple(sorted(ix) for ix in block))
        uncovered.difference_update(_block_cells(*block))
    factors = CPFactors.from_blocks(t.dims, blocks)
    return factors, verify_sparsity(factors, t)


# ---------------------------------------------------------------------------
# irreducibility and sparsity


def _coverage(f: CPFactors) -> tuple[list[list[tuple[int, int, int]]], Counter]:
    comps = [list(_block_cells(*col)) for col in f.columns()]
    counts: Counter = Counter()
    for cells in comps:
        counts.update(cells)
    return comps, counts


def is_irreducible(f: CPFactors) -> bool:
    """No component can be dropped without changing the reconstruction."""
    comps, counts = _coverage(f)
    return all(any(counts[c] == 1 for c in cells) for cells in comps)


def residual_nnz(f: CPFactors, t: BoolTensor3) -> list[int]:
    """Nonzeros of ``R_1 = T`` and ``R_k = R_{k-1} AND NOT component_k`` for k = 2..r."""
    residual = set(t.coord_set)
    out = [len(residual)]
    for xs, ys, zs in f.columns()[1:]:
        residual.difference_update(_block_cells(xs, ys, zs))
        out.append(len(residual))
    return out


def reduce_to_irreducible(f: CPFactors, t: BoolTensor3) -> CPFactors:
    """Drop redundant components (first one found, repeatedly) until none is left."""
    if reconstruct(f) != t:
        raise DecompositionError("factors do not reconstruct the tensor")
    comps, counts = _coverage(f)
    keep = list(range(f.rank))
    changed = True
    while changed:
        changed = False
        for j in keep:
            if all(counts[c] >= 2 for c in comps[j]):
                counts.subtract(comps[j])
                keep.remove(j)
                changed = True
                break
    out = f.select(keep)
    residuals = residual_nnz(out, t)
    # every later component owns a cell no earlier one covers
    assert all(a > b for a, b in zip(residuals, residuals[1:])), residuals
    return out


@dataclass(frozen=True)
class DecompReport:
    exact: bool
    rank: int
    nnz_factors: int
    nnz_tensor: int
    sparsities: tuple[float, float, float, float]  # s(A), s(B), s(C), s(T)
    irreducible: bool

    @property
    def within_absolute_bound(self) -> bool:
        """``|A| + |B| + |C| <= 3|T|``."""
        return self.nnz_factors <= 3 * self.nnz_tensor

    @property
    def within_relative_bound(self) -> bool:
        """``s(A) + s(B) + s(C) >= s(T)``."""
        sa, sb, sc, st = self.sparsities
        return sa + sb + sc >= st

    def lines(self) -> list[str]:
        sa, sb, sc, st = self.sparsities
        return [
            f"rank: {self.rank}",
            f"exact: {str(self.exact).lower()}",
            f"irreducible: {str(self.irreducible).lower()}",
            f"nnz: |A|+|B|+|C| = {self.nnz_factors}, |T| = {self.nnz_tensor}",
            f"sparsity: s(A)={sa:.6f} s(B)={sb:.6f} s(C)={sc:.6f} s(T)={st:.6f}",
            f"|A|+|B|+|C| <= 3|T|: {str(self.within_absolute_bound).lower()}",
            f"s(A)+s(B)+s(C) >= s(T): {str(self.within_relative_bound).lower()}",
        ]


def verify_sparsity(f: CPFactors, t: BoolTensor3) -> DecompReport:
    return DecompReport(
        exact=reconstruct(f) == t,
        rank=f.rank,
        nnz_factors=f.nnz,
        nnz_tensor=t.nnz,
        sparsities=(sparsity(f.A), sparsity(f.B), sparsity(f.C), sparsity(t)),
        irreducible=is_irreducible(f),
    )


# ---------------------------------------------------------------------------
# files
#
# header.txt:  "dims n m l", "rank r", "seed s" (seed line optional)
# A.coo etc.:  first line "rows cols", then one "i j" line per nonzero


def _write_matrix(path: Path, m: BoolMatrix) -> None:
    lines = [f"{m.rows} {m.cols}"] + [f"{i} {j}" for i, j in m.coords]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _read_matrix(path: Path) -> BoolMatrix:
    rows = [line.split() for line in path.read_text(encoding="ascii").splitlines() if line.strip()]
    if not rows or len(rows[0]) != 2:
        raise DecompositionError(f"{path}: missing 'rows cols' header")
    n, r = map(int, rows[0])
    return BoolMatrix(n, r, (tuple(map(int, x)) for x in rows[1:]))


def write_factors(f: CPFactors, directory, seed: int | None = None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    header = [f"dims {' '.join(map(str, f.dims))}", f"rank {f.rank}"]
    if seed is not None:
        header.append(f"seed {seed}")
    (d / "header.txt").write_text("\n".join(header) + "\n", encoding="ascii")
    for name, m in (("A", f.A), ("B", f.B), ("C", f.C)):
        _write_matrix(d / f"{name}.coo", m)


def read_factors(directory: str | os.PathLike) -> tuple[CPFactors, int | None]:
    d = Path(directory)
    fields = {}
    for line in (d / "header.txt").read_text(encoding="ascii").splitlines():
        if line.strip():
            key, *vals = line.split()
            fields[key] = [int(v) for v in vals]
    f = CPFactors(*(_read_matrix(d / f"{name}.coo") for name in "ABC"))
    if tuple(fields.get("dims", ())) != f.dims or fields.get("rank", [None])[0] != f.rank:
        raise DecompositionError(f"{d}: header does not match factor files")
    seed = fields.get("seed", [None])[0]
    return f, seed
