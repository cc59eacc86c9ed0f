"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line.

Reference values come from independent oracles: the nested-loop evaluator
in ``oracle.py``, dense numpy products and Monte Carlo simulation.
"""

import math
import random
import time
from collections import Counter

import numpy as np
import pytest

import oracle
import querygen
from tensorql import Graph
from tensorql.cardinality import (
    MarginalVector,
    bool_product_bounds,
    exact_kr_nnz,
    expected_nnz_rank1,
    expected_nnz_uniform,
    hash64_array,
    KmvSketch,
    kr_upper_cosine,
)
from tensorql.cp_decomp import (
    greedy_cp,
    naive_decomposition,
    reduce_to_irreducible,
    unfold_identity_check,
    verify_sparsity,
)
from tensorql.query import Evaluator, parse
from tensorql.tensor_core import (
    BoolMatrix,
    BoolTensor3,
    boolean_matmul,
    khatri_rao,
    sparsity,
    transpose,
    vectorize,
)

pytestmark = pytest.mark.acceptance


def random_matrix(rng: np.random.Generator, rows: int, cols: int, p: float) -> BoolMatrix:
    return BoolMatrix.from_dense(rng.random((rows, cols)) < p)


def random_tensor(rng: np.random.Generator, max_dim: int = 5) -> BoolTensor3:
    dims = tuple(int(d) for d in rng.integers(1, max_dim + 1, size=3))
    return BoolTensor3.from_dense(rng.random(dims) < rng.uniform(0.05, 0.7))


def dense_reconstruct(f) -> np.ndarray:
    a, b, c = (m.to_dense().astype(np.int64) for m in (f.A, f.B, f.C))
    return np.einsum("ir,jr,kr->ijk", a, b, c) > 0


def exact_decompositions():
    """Exact decompositions used by the sparsity checks: naive and greedy on random tensors."""
    rng = np.random.default_rng(7)
    out = []
    for _ in range(100):
        t = random_tensor(rng)
        out.append((naive_decomposition(t), t))
        out.append((greedy_cp(t, t.nnz, seed=1)[0], t))
    return out


# ---------------------------------------------------------------------------


def test_oracle_equivalence(report):
    start = time.perf_counter()
    per_case = 24
    done = Counter()
    failures = []
    for case in querygen.CASES:
        for i in range(per_case):
            rng = random.Random(f"{case}/{i}")
            graphs, text = querygen.random_instance(rng, case)
            query = parse(text)
            got = Evaluator(querygen.build(graphs), "T").execute(query)
            want = oracle.run(query, graphs, "T")
            if query.form == "CONSTRUCT":
                got = got.triple_set()
            elif query.form == "SELECT":
                got = Counter(got.rows)
            if got != want:
                failures.append(text)
            done[case] += 1
    elapsed = time.perf_counter() - start
    total = sum(done.values())
    ok = not failures and total >= 500 and set(done) == set(querygen.CASES) and elapsed < 60
    report("1 oracle equivalence", ok,
           f"{total} instances over {len(done)} cases, {len(failures)} mismatches, {elapsed:.1f} s")


def _kr_pairs(seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        k = int(rng.integers(1, 8))
        a = random_matrix(rng, int(rng.integers(1, 8)), k, rng.uniform(0, 0.8))
        b = random_matrix(rng, int(rng.integers(1, 8)), k, rng.uniform(0, 0.8))
        yield a, b


def _dense_kr_nnz(a: BoolMatrix, b: BoolMatrix) -> int:
    da, db = a.to_dense().astype(np.int64), b.to_dense().astype(np.int64)
    return int(np.count_nonzero(np.einsum("ik,jk->ijk", da, db)))


def test_exact_kr_count(report):
    bad = 0
    for a, b in _kr_pairs(11):
        exact = exact_kr_nnz(MarginalVector.column_sums(a), MarginalVector.column_sums(b)).value
        bad += not (exact == khatri_rao(a, b).nnz == _dense_kr_nnz(a, b))
    report("2 exact Khatri-Rao count", bad == 0, f"200 pairs, {bad} mismatches")


def test_cosine_upper_bound(report):
    bad = 0
    for a, b in _kr_pairs(11):
        sa, sb = MarginalVector.column_sums(a), MarginalVector.column_sums(b)
        bad += kr_upper_cosine(sa, sb).value < _dense_kr_nnz(a, b)
    # parallel marginals: sb = c * sa makes Cauchy-Schwarz tight
    rng = np.random.default_rng(12)
    not_tight = 0
    for _ in range(50):
        k = int(rng.integers(1, 6))
        base = rng.integers(0, 4, size=k)
        c = int(rng.integers(1, 3))
        a = BoolMatrix(4, k, [(i, j) for j in range(k) for i in range(base[j])])
        b = BoolMatrix(8, k, [(i, j) for j in range(k) for i in range(c * base[j])])
        sa, sb = MarginalVector.column_sums(a), MarginalVector.column_sums(b)
        not_tight += kr_upper_cosine(sa, sb).value != khatri_rao(a, b).nnz
    report("3 cosine upper bound", bad == 0 and not_tight == 0,
           f"200 pairs, {bad} violations; 50 parallel pairs, {not_tight} not tight")


def test_boolean_product_bounds(report):
    rng = np.random.default_rng(13)
    bad = 0
    for _ in range(200):
        k = int(rng.integers(1, 8))
        a = random_matrix(rng, int(rng.integers(1, 8)), k, rng.uniform(0, 0.8))
        b = random_matrix(rng, int(rng.integers(1, 8)), k, rng.uniform(0, 0.8))
        actual = int(np.count_nonzero(a.to_dense().astype(int) @ b.to_dense().astype(int).T))
        assert boolean_matmul(a, transpose(b)).nnz == actual
        lo, hi = bool_product_bounds(MarginalVector.column_sums(a), MarginalVector.column_sums(b))
        bad += not lo.value <= actual <= hi.value
    report("4 Boolean product bounds", bad == 0, f"200 pairs, {bad} violations")


UNIFORM_SETTINGS = [
    (4, 3, 5, 0.2, 0.3), (6, 6, 6, 0.1, 0.1), (8, 2, 3, 0.5, 0.5), (5, 10, 5, 0.05, 0.2),
    (3, 4, 7, 0.7, 0.1), (10, 5, 10, 0.15, 0.15), (2, 8, 2, 0.3, 0.3), (7, 1, 7, 0.4, 0.6),
    (5, 5, 5, 0.9, 0.05), (6, 12, 4, 0.08, 0.12),
]
RANK1_SETTINGS = [
    (5, 6, [1, 2, 0, 5], [3, 1, 2, 0]), (4, 4, [1, 1, 2], [1, 3, 2]), (8, 5, [2, 4, 6, 1, 0], [1, 1, 2, 5, 3]),
    (6, 6, [3, 3, 3], [3, 3, 3]), (3, 7, [1, 2, 3, 1, 2], [2, 1, 6, 3, 0]), (10, 10, [1] * 8, [2] * 8),
    (5, 4, [5, 0, 2], [4, 1, 1]), (7, 3, [2, 6, 1, 4], [1, 2, 3, 1]), (4, 9, [4, 3, 2, 1], [1, 3, 5, 7]),
    (6, 5, [1, 2, 3, 4, 5, 6], [0, 1, 1, 2, 2, 3]),
]


def _monte_carlo(rng, m, n, pa, pb, trials=10_000):
    """Mean and standard error of nnz(A ∘ Bᵀ) for independent entries with the given column densities."""
    k = len(pa)
    a = (rng.random((trials, m, k)) < np.asarray(pa)).astype(np.int64)
    b = (rng.random((trials, n, k)) < np.asarray(pb)).astype(np.int64)
    counts = np.count_nonzero(np.matmul(a, b.transpose(0, 2, 1)), axis=(1, 2))
    return counts.mean(), counts.std(ddof=1) / math.sqrt(trials)


def test_expected_product_density(report):
    start = time.perf_counter()
    rng = np.random.default_rng(14)
    worst = 0.0
    bad = 0
    for m, k, n, pa, pb in UNIFORM_SETTINGS:
        analytic = expected_nnz_uniform(m, k, n, pa, pb).value
        mean, se = _monte_carlo(rng, m, n, [pa] * k, [pb] * k)
        z = abs(analytic - mean) / se if se else float(analytic != mean) * math.inf
        worst = max(worst, z)
        bad += z > 3
    for m, n, ca, cb in RANK1_SETTINGS:
        sa, sb = MarginalVector(ca), MarginalVector(cb)
        analytic = expected_nnz_rank1(m, n, sa, sb).value
        mean, se = _monte_carlo(rng, m, n, [c / m for c in ca], [c / n for c in cb])
        z = abs(analytic - mean) / se if se else float(analytic != mean) * math.inf
        worst = max(worst, z)
        bad += z > 3
    # constant per-column densities reduce to the uniform formula
    rel = 0.0
    for m, k, n, _, _ in UNIFORM_SETTINGS:
        for ca in range(m + 1):
            for cb in range(n + 1):
                u = expected_nnz_uniform(m, k, n, ca / m, cb / n).value
                r = expected_nnz_rank1(m, n, MarginalVector([ca] * k), MarginalVector([cb] * k)).value
                rel = max(rel, abs(u - r) / max(abs(u), 1e-300))
    elapsed = time.perf_counter() - start
    ok = bad == 0 and rel <= 1e-12 and elapsed < 300
    report("5 expected product density", ok,
           f"20 settings x 10^4 pairs, max |z| = {worst:.2f}, rank-1 vs uniform rel. diff {rel:.1e}, {elapsed:.1f} s")


def test_distinct_product_chain(report):
    rng = np.random.default_rng(15)
    bad = 0
    for _ in range(100):
        left = random_matrix(rng, 5, 4, rng.uniform(0.1, 0.7))
        right = random_matrix(rng, 5, 4, rng.uniform(0.1, 0.7))
        kr = khatri_rao(left, right)
        or_over_columns = kr.row_support()
        product = vectorize(boolean_matmul(left, transpose(right)))
        dense = (left.to_dense().astype(int) @ right.to_dense().astype(int).T > 0).reshape(-1)
        bad += not (or_over_columns == product and list(product.to_dense().astype(bool)) == list(dense))
    report("6 OR of Khatri-Rao columns = vectorized Boolean product", bad == 0, f"100 pairs, {bad} mismatches")


def test_naive_decomposition_exact(report):
    rng = np.random.default_rng(16)
    bad = []
    for _ in range(100):
        t = random_tensor(rng)
        f = naive_decomposition(t)
        n, m, l = t.dims
        if not (np.array_equal(dense_reconstruct(f), t.to_dense().astype(bool))
                and f.rank == min(n * m, n * l, m * l)
                and all(unfold_identity_check(f, t))):
            bad.append(t.dims)
    report("7 naive decomposition exact", not bad, f"100 tensors up to 5x5x5, {len(bad)} failures")


def test_naive_decomposition_size(report):
    rng = np.random.default_rng(16)
    worst = 0.0
    bad = 0
    for _ in range(100):
        t = random_tensor(rng)
        f = naive_decomposition(t)
        bad += f.nnz > 3 * t.nnz
        if t.nnz:
            worst = max(worst, f.nnz / t.nnz)
    report("8 |A|+|B|+|C| <= 3|T| for naive decompositions", bad == 0,
           f"100 tensors, {bad} violations, max ratio {worst:.2f}")


def test_irreducible_sparsity(report):
    checked = bad = 0
    for f, t in exact_decompositions():
        g = reduce_to_irreducible(f, t)
        rep = verify_sparsity(g, t)
        checked += 1
        bad += not (rep.exact and rep.irreducible and rep.within_relative_bound)
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(200):
        dims = rng.integers(1, 9, size=3)
        vecs = [np.zeros(d, dtype=bool) for d in dims]
        for v in vecs:
            v[rng.integers(0, len(v))] = True
            v |= rng.random(len(v)) < rng.uniform(0, 1)
        mats = [BoolMatrix.from_dense(v.reshape(-1, 1)) for v in vecs]
        t = BoolTensor3.from_dense(np.einsum("i,j,k->ijk", *vecs))
        lhs = 1 - sparsity(t)
        rhs = math.prod(1 - sparsity(m) for m in mats)
        worst = max(worst, abs(lhs - rhs))
    ok = bad == 0 and worst <= 1e-12
    report("9 irreducible sparsity bound and rank-1 identity", ok,
           f"{checked} reduced decompositions, {bad} violations; 200 rank-1 tensors, max diff {worst:.1e}")


def planted_tensor(seed: int, rank: int = 3, dim: int = 8, p: float = 0.25) -> BoolTensor3:
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(rank):
        vecs = []
        for _ in range(3):
            v = rng.random(dim) < p
            v[rng.integers(0, dim)] = True  # no empty component
            vecs.append(v)
        blocks.append(np.einsum("i,j,k->ijk", *vecs))
    return BoolTensor3.from_dense(np.logical_or.reduce(blocks))


def test_planted_recovery(report):
    rank = 3
    covered = 0
    for seed in range(100):
        t = planted_tensor(seed, rank)
        factors, rep = greedy_cp(t, rank, seed=seed)
        covered += rep.exact and np.array_equal(dense_reconstruct(factors), t.to_dense().astype(bool))
    report("10 planted-factor recovery", covered >= 90, f"rank {rank}, 8x8x8: {covered}/100 seeds fully covered")


def test_kmv_accuracy(report):
    k, distinct = 256, 100_000
    tol = 3 / math.sqrt(k - 2)
    within = 0
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        values = rng.choice(2**40, size=distinct, replace=False)
        stream = np.concatenate([values, rng.choice(values, size=distinct // 2)])  # with repeats
        sketch = KmvSketch(k, seed).update_hashes(hash64_array(stream, seed))
        err = abs(sketch.estimate() - distinct) / distinct
        worst = max(worst, err)
        within += err <= tol
    report("11 KMV relative error", within >= 99,
           f"k={k}, 10^5 distinct: {within}/100 seeds within {tol:.4f}, worst {worst:.4f}")


def test_marginal_feasibility(report):
    rng = random.Random(18)
    entities = [f"<e{i}>" for i in range(6)]
    preds = [f"<p{i}>" for i in range(4)]
    bad = 0
    steps = 0
    for _ in range(50):
        g = Graph()
        present = set()
        for _ in range(200):
            triple = (rng.choice(entities), rng.choice(preds), rng.choice(entities))
            if rng.random() < 0.6:
                g.add_triple(triple)
                present.add(triple)
            else:
                g.remove_triple(triple)
                present.discard(triple)
            steps += 1
            stats, nnz = g.stats, g.nnz
            dense = g.tensor.to_dense().astype(np.int64)
            fresh = (dense.sum(axis=0), dense.sum(axis=1), dense.sum(axis=2))
            ok = (nnz == len(present)
                  and stats.nnz_total <= 3 * nnz
                  and stats.totals == (nnz, nnz, nnz)
                  and all(np.array_equal(m.to_dense(), f) for m, f in zip((stats.P, stats.Q, stats.R), fresh)))
            bad += not ok
    report("12 marginal feasibility", bad == 0, f"50 sequences, {steps} updates, {bad} violations")
