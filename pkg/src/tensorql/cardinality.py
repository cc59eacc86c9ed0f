"""Join-size counts, bounds and expectations from marginal sums.

A join written as ``A ⊙ B`` has exactly ``sum_i sa[i] * sb[i]`` nonzeros,
where ``sa``/``sb`` are the column sums of ``A`` and ``B``. For triple
patterns those column sums are lines of the graph's marginal matrices, so
the count needs no materialization. DISTINCT over two free variables is a
Boolean product instead; for it only bounds and expectations are given,
plus a k-minimum-values sketch over the solution stream.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .query.ast import Term
from .rdf_store import Graph, is_blank
from .tensor_core import BoolMatrix, fibre

DEFAULT_SEED = 0x5EED
MIN_SKETCH = 16  # smallest k accepted for distinct-count estimates
MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class CardEstimate:
    """A cardinality figure: ``exact``, ``lowerBound``, ``upperBound`` or ``expectation``."""

    kind: str
    value: float
    cost: int = 0

    def __str__(self) -> str:
        v = self.value
        shown = str(v) if isinstance(v, int) else f"{v:.6g}"
        return f"{self.kind}={shown}"


class MarginalVector:
    """Sparse vector of column sums with a cached exact sum of squares."""

    __slots__ = ("dim", "entries", "sumsq")

    def __init__(self, values: Sequence[int] | Mapping[int, int], dim: int | None = None):
        if isinstance(values, Mapping):
            entries = {int(i): int(v) for i, v in values.items() if v}
            if dim is None:
                dim = max(entries, default=-1) + 1
        else:
            entries = {i: int(v) for i, v in enumerate(values) if v}
            dim = len(values) if dim is None else dim
        if any(v < 0 for v in entries.values()):
            raise ValueError("marginal counts must be nonnegative")
        self.dim = dim
        self.entries = entries
        self.sumsq = sum(v * v for v in entries.values())

    @classmethod
    def column_sums(cls, m: BoolMatrix) -> "MarginalVector":
        return cls({c: len(rows) for c, rows in m.by_col().items()}, m.cols)

    @property
    def values(self) -> list[int]:
        out = [0] * self.dim
        for i, v in self.entries.items():
            out[i] = v
        return out

    @property
    def norm(self) -> float:
        return math.sqrt(self.sumsq)

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"MarginalVector(dim={self.dim}, nonzero={len(self.entries)})"


def _check_lengths(sa: MarginalVector, sb: MarginalVector) -> None:
    if sa.dim != sb.dim:
        raise LengthMismatchError(f"marginal vectors of length {sa.dim} and {sb.dim}")


def _common(sa: MarginalVector, sb: MarginalVector):
    small, large = (sa, sb) if len(sa.entries) <= len(sb.entries) else (sb, sa)
    for i, v in small.entries.items():
        w = large.entries.get(i)
        if w:
            yield (v, w) if small is sa else (w, v)


def exact_kr_nnz(sa: MarginalVector, sb: MarginalVector) -> CardEstimate:
    """Nonzeros of ``A ⊙ B`` from the column sums: ``sum_i sa[i] * sb[i]``."""
    _check_lengths(sa, sb)
    total = cost = 0
    for a, b in _common(sa, sb):
        total += a * b
        cost += 1
    return CardEstimate("exact", total, cost)


def _sqrt_up(n: int) -> int | float:
    r = math.isqrt(n)
    if r * r == n:
        return r
    s = math.sqrt(n)
    while Fraction(s) ** 2 < n:
        s = math.nextafter(s, math.inf)
    return s


def kr_upper_cosine(sa: MarginalVector, sb: MarginalVector) -> CardEstimate:
    """``‖sa‖·‖sb‖ >= |A ⊙ B|`` (Cauchy-Schwarz), rounded up, exact when it is an integer."""
    return CardEstimate("upperBound", _sqrt_up(sa.sumsq * sb.sumsq), 1)


def bool_product_bounds(sa: MarginalVector, sb: MarginalVector) -> tuple[CardEstimate, CardEstimate]:
    """Bounds on nonzeros of the OR over the columns of ``A ⊙ B``."""
    _check_lengths(sa, sb)
    lo = hi = cost = 0
    for a, b in _common(sa, sb):
        lo = max(lo, a * b)
        hi += a * b
        cost += 1
    return CardEstimate("lowerBound", lo, cost), CardEstimate("upperBound", hi, cost)


def _check_prob(*ps: float) -> None:
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")


def expected_density_uniform(pa: float, pb: float, k: int) -> float:
    """Fill probability of one entry of ``A ∘ B`` (m x k times k x n) for uniform densities."""
    _check_prob(pa, pb)
    if k < 0:
        raise ValueError("inner dimension must be nonnegative")
    return 1.0 - (1.0 - pa * pb) ** k


def expected_density_rank1(pa: Sequence[float], pb: Sequence[float], form: str = "complement") -> float:
    """Fill probability of ``A ∘ B`` from per-column densities of ``A`` and per-row densities of ``B``.

    ``form="complement"`` is ``1 - prod(1 - pa[i] * pb[i])``, which treats
    the k rank-1 terms as independent and matches
    :func:`expected_density_uniform` for constant densities.
    ``form="printed"`` gives ``1 - prod(pa[i] * pb[i])`` for comparison.
    """
    if len(pa) != len(pb):
        raise LengthMismatchError(f"density lists of length {len(pa)} and {len(pb)}")
    _check_prob(*pa, *pb)
    if form == "complement":
        return 1.0 - math.prod(1.0 - a * b for a, b in zip(pa, pb))
    if form == "printed":
        return 1.0 - math.prod(a * b for a, b in zip(pa, pb))
    raise ValueError(f"unknown form {form!r}")


def expected_nnz_uniform(m: int, k: int, n: int, pa: float, pb: float) -> CardEstimate:
    return CardEstimate("expectation", m * n * expected_density_uniform(pa, pb, k), 1)


def expected_nnz_rank1(m: int, n: int, sa: MarginalVector, sb: MarginalVector, form: str = "complement") -> CardEstimate:
    """Expected nonzeros of ``A ∘ Bᵀ`` where ``A`` is m x k and ``B`` is n x k with column sums ``sa``/``sb``."""
    _check_lengths(sa, sb)
    if m == 0 or n == 0:
        return CardEstimate("expectation", 0.0, 0)
    if form == "printed":
        pa = [sa.entries.get(i, 0) / m for i in range(sa.dim)]
        pb = [sb.entries.get(i, 0) / n for i in range(sb.dim)]
        return CardEstimate("expectation", m * n * expected_density_rank1(pa, pb, form), sa.dim)
    pairs = list(_common(sa, sb))  # columns where either side is empty contribute a factor 1
    pa = [a / m for a, _ in pairs]
    pb = [b / n for _, b in pairs]
    return CardEstimate("expectation", m * n * expected_density_rank1(pa, pb), len(pairs))


# ---------------------------------------------------------------------------
# k minimum values


def splitmix64(x: int) -> int:
    x = (x + _GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _seed_offset(seed: int) -> int:
    return (seed * _GAMMA) & MASK64


def hash64(item, seed: int = DEFAULT_SEED) -> int:
    """Deterministic 64-bit hash: splitmix64 for ints, keyed BLAKE2b otherwise.

    Tuples hash their parts joined by a unit separator; ``None`` parts are
    kept distinct from empty strings.
    """
    if isinstance(item, (int, np.integer)) and not isinstance(item, bool):
        return splitmix64((int(item) + _seed_offset(seed)) & MASK64)
    if isinstance(item, tuple):
        item = "\x1f".join("\x00" if x is None else str(x) for x in item)
    if isinstance(item, str):
        item = item.encode("utf-8")
    key = (seed & MASK64).to_bytes(8, "little")
    return int.from_bytes(hashlib.blake2b(item, digest_size=8, key=key).digest(), "little")


def hash64_array(values: np.ndarray, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Vectorized :func:`hash64` for integer arrays (same values as the scalar form)."""
    with np.errstate(over="ignore"):
        x = values.astype(np.uint64) + np.uint64(_seed_offset(seed)) + np.uint64(_GAMMA)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


@dataclass
class KmvSketch:
    """The ``k`` smallest distinct hash values seen so far."""

    k: int
    seed: int = DEFAULT_SEED
    _heap: list[int] = field(default_factory=list, repr=False)  # negated, max-heap of kept minima
    _kept: set[int] = field(default_factory=set, repr=False)

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("sketch size must be at least 2")

    def add_hash(self, h: int) -> None:
        if h in self._kept:
            return
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, -h)
            self._kept.add(h)
        elif h < -self._heap[0]:
            dropped = -heapq.heapreplace(self._heap, -h)
            self._kept.discard(dropped)
            self._kept.add(h)

    def add(self, item) -> None:
        self.add_hash(hash64(item, self.seed))

    def update(self, items: Iterable) -> "KmvSketch":
        for item in items:
            self.add(item)
        return self

    def update_hashes(self, hashes: np.ndarray) -> "KmvSketch":
        """Add precomputed 64-bit hashes in bulk."""
        if len(hashes):
            smallest = np.unique(hashes)[: self.k]
            for h in smallest.tolist():
                self.add_hash(int(h))
        return self

    @property
    def minima(self) -> list[int]:
        return sorted(self._kept)

    @property
    def saturated(self) -> bool:
        return len(self._kept) >= self.k

    def estimate(self) -> float:
        """``(k-1) * 2^64 / kth_min`` once ``k`` values were seen, else the exact count."""
        if not self.saturated:
            return float(len(self._kept))
        kth = max(-self._heap[0], 1)
        return (self.k - 1) * 2.0**64 / kth

    def merge(self, other: "KmvSketch") -> "KmvSketch":
        if (self.k, self.seed) != (other.k, other.seed):
            raise ValueError("can only merge sketches with equal k and seed")
        out = KmvSketch(self.k, self.seed)
        for h in sorted(self._kept | other._kept)[: self.k]:
            out.add_hash(h)
        return out


def kmv_distinct(items: Iterable, k: int, seed: int = DEFAULT_SEED) -> CardEstimate:
    """Distinct-count estimate of a stream; relative standard error about ``1/sqrt(k-2)``."""
    if k < MIN_SKETCH:
        raise ValueError(f"sketch size must be at least {MIN_SKETCH}")
    sketch = KmvSketch(k, seed)
    n = 0
    for item in items:
        sketch.add(item)
        n += 1
    kind = "expectation" if sketch.saturated else "exact"
    value = sketch.estimate()
    return CardEstimate(kind, value if kind == "expectation" else int(value), n)


# ---------------------------------------------------------------------------
# triple patterns


def _key(graph_dict, index: int):
    term = graph_dict[index]
    return (term, graph_dict.scope) if is_blank(term) else term


@dataclass
class PatternSide:
    """A triple pattern over one graph: fixed modes, a join mode and the free modes."""

    graph: Graph
    fixed: dict[int, str]
    join_mode: int | None
    free_modes: tuple[int, ...]

    @classmethod
    def from_pattern(cls, graph: Graph, slots, join_var: str | None) -> "PatternSide | None":
        """Build from the three slots of a triple pattern; None for repeated variables."""
        fixed, free, join_mode = {}, [], None
        names = []
        for m, slot in enumerate(slots):
            if isinstance(slot, Term):
                fixed[m] = slot.value
                continue
            name = slot.name
            if name in names:
                return None
            names.append(name)
            free.append(m)
            if name == join_var:
                join_mode = m
        return cls(graph, fixed, join_mode, tuple(free))

    def _fixed_indices(self) -> dict[int, int] | None:
        out = {}
        for m, term in self.fixed.items():
            i = self.graph.dictionary(m).lookup(term)
            if i is None:
                return None
            out[m] = i
        return out

    def sigma(self) -> dict:
        """Matches per value of the join variable, keyed by term."""
        idx = self._fixed_indices()
        km = self.join_mode
        if idx is None or km is None:
            return {}
        d = self.graph.dictionary(km)
        stats = self.graph.stats
        if len(self.free_modes) == 1:
            vec = fibre(self.graph.tensor, list(idx.items()))
            return {_key(d, i): 1 for i in vec.indices}
        if len(self.free_modes) == 3:
            return {_key(d, i): c for i, c in stats.mode_totals(km).items()}
        (fm, fi), = idx.items()
        other = next(m for m in self.free_modes if m != km)
        mat = stats.matrix_for(other)
        line = mat.row(fi) if fm < km else mat.col(fi)
        return {_key(d, i): c for i, c in line.items()}

    def count(self) -> int:
        """Number of matching triples."""
        idx = self._fixed_indices()
        if idx is None:
            return 0
        if not self.free_modes:
            return int(tuple(idx[m] for m in range(3)) in self.graph.tensor)
        if self.join_mode is None:
            probe = PatternSide(self.graph, self.fixed, self.free_modes[0], self.free_modes)
            return sum(probe.sigma().values())
        return sum(self.sigma().values())

    def mode_size(self, mode: int) -> int:
        return len(self.graph.dictionary(mode))


def aligned_marginals(sa: Mapping, sb: Mapping) -> tuple[MarginalVector, MarginalVector]:
    """Put two term-keyed count maps on one index space (left keys first)."""
    keys = {k: i for i, k in enumerate(sa)}
    for k in sb:
        keys.setdefault(k, len(keys))
    n = len(keys)
    return (
        MarginalVector({keys[k]: v for k, v in sa.items()}, n),
        MarginalVector({keys[k]: v for k, v in sb.items()}, n),
    )


def estimate_join(rule: str, left: PatternSide, right: PatternSide) -> dict[str, CardEstimate] | None:
    """Estimates for joining two triple patterns; None for shapes without one."""
    if rule == "kronecker":
        a, b = left.count(), right.count()
        return {"exact": CardEstimate("exact", a * b, 2)}
    if left.join_mode is None or right.join_mode is None:
        return None
    sa, sb = aligned_marginals(left.sigma(), right.sigma())
    if rule == "khatri-rao":
        return {"exact": exact_kr_nnz(sa, sb), "cosine": kr_upper_cosine(sa, sb)}
    if rule == "left-outer":
        total = sum(a * max(sb.entries.get(i, 0), 1) for i, a in sa.entries.items())
        return {"exact": CardEstimate("exact", total, len(sa.entries))}
    return None


def estimate_distinct(path: str, left: PatternSide, right: PatternSide,
                      free_modes: tuple[int, int]) -> dict[str, CardEstimate]:
    """Estimates for the DISTINCT fast paths over two slices.

    ``free_modes`` are the modes of the left and right non-shared variables.
    """
    sa, sb = aligned_marginals(left.sigma(), right.sigma())
    if path == "bound":
        common = sum(1 for _ in _common(sa, sb))
        return {"exact": CardEstimate("exact", common, common)}
    if path in ("mixed-left", "mixed-right"):
        keep, mask = (sa, sb) if path == "mixed-left" else (sb, sa)
        total = sum(v for i, v in keep.entries.items() if i in mask.entries)
        return {"exact": CardEstimate("exact", total, len(mask.entries))}
    lower, upper = bool_product_bounds(sa, sb)
    m = left.mode_size(free_modes[0])
    n = right.mode_size(free_modes[1])
    k = _union_size(left.graph.dictionary(left.join_mode), right.graph.dictionary(right.join_mode))
    pa = sa.total / (m * k) if m * k else 0.0
    pb = sb.total / (n * k) if n * k else 0.0
    return {
        "lower": lower,
        "upper": upper,
        "uniform": expected_nnz_uniform(m, k, n, pa, pb),
        "rank1": expected_nnz_rank1(m, n, sa, sb),
    }


def _union_size(d1, d2) -> int:
    keys = {_key(d1, i) for i in range(len(d1))}
    keys.update(_key(d2, i) for i in range(len(d2)))
    return len(keys)


def _side(step, graphs, default, join_var):
    from .query.plan import resolve_graph  # plan imports this module

    alias, tp = step.pattern
    return PatternSide.from_pattern(resolve_graph(graphs, alias, default), tp.slots, join_var)


def annotate(steps, query, graphs, default=None, fast=None) -> None:
    """Attach estimate bundles to plan steps whose operands are triple patterns."""
    if default is None and graphs:
        default = next(iter(graphs))
    for step in steps:
        if step.op == "distinct" and fast is not None:
            scans = [steps[i] for i in step.inputs]
            left = _side(scans[0], graphs, default, fast.shared)
            right = _side(scans[1], graphs, default, fast.shared)
            free = (
                next(m for m in left.free_modes if m != left.join_mode),
                next(m for m in right.free_modes if m != right.join_mode),
            )
            step.estimate = estimate_distinct(fast.path, left, right, free)
            continue
        if step.op not in ("join", "optional") or step.case is None:
            continue
        inputs = [steps[i] for i in step.inputs]
        if any(s.op != "scan" for s in inputs) or len(step.case.shared) > 1:
            continue
        key = step.case.shared[0] if step.case.shared else None
        left, right = (_side(s, graphs, default, key) for s in inputs)
        if left is None or right is None:
            continue
        step.estimate = estimate_join(step.case.rule, left, right)


__all__ = [
    "CardEstimate", "DEFAULT_SEED", "KmvSketch", "LengthMismatchError", "MIN_SKETCH", "MarginalVector", "PatternSide",
    "aligned_marginals", "annotate", "bool_product_bounds", "estimate_distinct", "estimate_join",
    "exact_kr_nnz", "expected_density_rank1", "expected_density_uniform", "expected_nnz_rank1",
    "expected_nnz_uniform", "hash64", "hash64_array", "kmv_distinct", "kr_upper_cosine", "splitmix64",
]
