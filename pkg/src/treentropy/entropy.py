"""Certified bounds for dyadic entropy numbers of l1 -> lq column operators.

The image of the l1 unit ball is the absolutely convex hull of the columns.
``entropy_upper`` returns a radius r such that 2**(n-1) open r-balls cover
that hull; ``entropy_lower`` returns a delta such that 2**(n-1) + 1 hull
points are pairwise more than 2*delta apart.  Every method keeps a record of
how its value was obtained.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy import sparse

from .errors import InvariantViolation, MalformedInput
from .hull_cover import MASS_SPLITS, RadiusGrid, subtree_profile, tree_cover_exponent
from .weights import REL_SLACK, V_matrix, W_matrix, WeightedTree, dyadic_reduction

DEFAULT_BUDGET = 20000
POOL_SIZE = 2048
TINY = 1e-12


@dataclass(frozen=True, eq=False)
class ColumnOperator:
    """Operator given by its columns (images of unit vectors).

    ``matrix`` is a sparse ``rows x cols`` matrix.  When ``tree`` is set,
    rows and columns are tree nodes and column s is supported on the root
    path of s, which enables the subtree covering recursion.
    """

    matrix: sparse.csc_matrix
    q: float
    label: str = ""
    tree: object = field(default=None, repr=False)

    @classmethod
    def from_columns(cls, columns, q, label=""):
        cols = np.atleast_2d(np.asarray(columns, dtype=float))
        return cls(sparse.csc_matrix(cols.T), float(q), label)

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def column_norms(self) -> np.ndarray:
        A = abs(self.matrix).power(self.q)
        return np.asarray(A.sum(axis=0)).ravel() ** (1.0 / self.q)

    def scaled(self, lam: float) -> "ColumnOperator":
        return ColumnOperator(self.matrix * lam, self.q, self.label, self.tree)


def operator_W(lp, label="W") -> ColumnOperator:
    return ColumnOperator(W_matrix(lp), lp.q, label, lp.tree)


def operator_V(wt: WeightedTree, label="V") -> ColumnOperator:
    return ColumnOperator(V_matrix(wt), wt.q, label, wt.tree)


def operator_split(lp, light, parts=(1, 2, 3, 4), label=None) -> ColumnOperator:
    from .decomposition import split_columns

    A = sum(split_columns(lp, light, p) for p in parts)
    return ColumnOperator(sparse.csc_matrix(A), lp.q, label or f"W{''.join(map(str, parts))}", lp.tree)


@dataclass
class EntropyBound:
    value: float
    method: str
    certificate: dict = field(default_factory=dict)


@dataclass
class EntropyEstimate:
    n: int
    upper: float
    lower: float
    method_upper: str
    method_lower: str
    certificate: dict = field(default_factory=dict, repr=False)
    witnesses: dict = field(default_factory=dict, repr=False)


# -- upper bounds ------------------------------------------------------------


def _parallel_direction(A: np.ndarray):
    """Return ``(v, t)`` with every column equal to ``t_j * v`` or None."""
    norms = np.abs(A).max(axis=0)
    j = int(np.argmax(norms))
    v = A[:, j]
    i = int(np.argmax(np.abs(v)))
    if v[i] == 0:
        return None
    t = A[i, :] / v[i]
    resid = np.abs(A - np.outer(v, t)).max(axis=0)
    if np.all(resid <= TINY * np.maximum(norms, TINY)):
        return v, t
    return None


class TreeCoverCache:
    """Grid covering exponents keyed by operator identity."""

    def __init__(self):
        self._store = {}

    def get(self, op, grid_size, splits):
        key = (id(op), grid_size, splits)
        hit = self._store.get(key)
        if hit is not None and hit[0] is op:
            return hit[1]
        val = _tree_exponent(op, grid_size, splits)
        self._store[key] = (op, val)
        return val


_CACHE = TreeCoverCache()


def _tree_exponent(op, grid_size, splits):
    tree = op.tree
    norms = op.column_norms()
    scale = float(norms.max())
    grid = RadiusGrid(1e-4, 1.0, grid_size, op.q)
    G, diam = tree_cover_exponent(
        tree.parent, tree.levels, tree.children, op.matrix / scale, op.q, grid, splits
    )
    return grid, G, scale


def check_ancestor_supported(op) -> bool:
    tree = op.tree
    if tree is None or op.shape != (tree.node_count, tree.node_count):
        return False
    coo = op.matrix.tocoo()
    keep = coo.data != 0
    r, c = coo.row[keep], coo.col[keep]
    return bool(np.all((tree.tin[r] <= tree.tin[c]) & (tree.tin[c] < tree.tout[r])))


def upper_tree(op, n, grid_size=400, splits=MASS_SPLITS, cache=_CACHE):
    """Subtree recursion bound; requires an ancestor-supported operator."""
    if not check_ancestor_supported(op):
        return None
    grid, G, scale = cache.get(op, grid_size, tuple(splits))
    ok = np.nonzero(G <= (n - 1) - 1e-9)[0]
    if ok.size == 0:
        return None
    i = int(ok[0])
    return EntropyBound(
        float(grid.r[i] * scale * (1 + REL_SLACK)),
        "tree-recursion",
        {"grid_index": i, "log2_balls": float(G[i]), "scale": scale,
         "grid": [float(grid.r[0]), float(grid.r[-1]), len(grid.r)],
         "mass_splits": list(splits)},
    )


def maurey_error(max_norm: float, k: int, q: float) -> float:
    """Expected distance from a hull point to the average of k random atoms.

    Symmetrization and the type-q inequality of lq (constant 1 for q <= 2)
    give ``2 * max_norm * k**(1/q - 1)``; in l2 the variance identity gives
    ``max_norm / sqrt(k)``.
    """
    if q == 2.0:
        return max_norm / math.sqrt(k)
    return 2.0 * max_norm * k ** (1.0 / q - 1.0)


def _sparse_grid(A: np.ndarray, k: int):
    atoms = np.concatenate([A, -A, np.zeros((A.shape[0], 1))], axis=1).T
    idx = np.array(list(combinations_with_replacement(range(len(atoms)), k)), dtype=np.int64)
    return atoms[idx].mean(axis=1)


def farthest_point_order(X: np.ndarray, q: float, k: int, start=0):
    """Indices of a farthest-first traversal and the covering radius after each prefix."""
    m = len(X)
    k = min(k, m)
    chosen = [start]
    dist = np.sum(np.abs(X - X[start]) ** q, axis=1) ** (1.0 / q)
    radii = []
    for _ in range(1, k):
        radii.append(float(dist.max()))
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.sum(np.abs(X - X[nxt]) ** q, axis=1) ** (1.0 / q))
    radii.append(float(dist.max()))
    return chosen, radii


def upper_maurey(op, n, budget=DEFAULT_BUDGET):
    """Empirical-method bound: sparse grid within the Maurey error, then greedy centers."""
    A = op.dense()
    rows, N = A.shape
    if N == 0:
        return None
    max_norm = float(op.column_norms().max())
    atoms = 2 * N + 1
    k = 0
    while math.comb(atoms + k, k + 1) <= budget and k < 64:
        k += 1
    if k == 0:
        return None
    X = _sparse_grid(A, k)
    err = maurey_error(max_norm, k, op.q)
    K = 2 ** (n - 1)
    if len(X) <= K:
        rad, centers = 0.0, X
    else:
        idx, radii = farthest_point_order(X, op.q, K)
        rad, centers = radii[-1], X[idx]
    return EntropyBound(
        float((err + rad) * (1 + REL_SLACK)),
        "maurey",
        {"sparsity": k, "sparsification_error": err, "grid_radius": rad,
         "grid_points": len(X), "centers": centers},
    )


def entropy_upper(op: ColumnOperator, n: int, budget=DEFAULT_BUDGET, grid_size=400,
                  splits=MASS_SPLITS, use_tree=True) -> EntropyBound:
    """Smallest certified covering radius for ``2**(n-1)`` open balls."""
    if n < 1:
        raise MalformedInput("n must be >= 1")
    norms = op.column_norms()
    if norms.size == 0 or norms.max() == 0:
        return EntropyBound(0.0, "zero", {"centers": "origin"})
    top = float(norms.max())
    cands = [EntropyBound(top * (1 + REL_SLACK), "single-ball", {"centers": "origin"})]
    if op.shape[0] * op.shape[1] <= 4_000_000:
        par = _parallel_direction(op.dense())
        if par is not None:
            v, t = par
            half = float(np.max(np.abs(t)) * np.sum(np.abs(v) ** op.q) ** (1 / op.q))
            K = 2.0 ** (n - 1)
            cands.append(EntropyBound(
                half / K * (1 + REL_SLACK), "segment",
                {"centers": "evenly spaced on the segment", "count": K, "half_length": half},
            ))
    if use_tree and op.tree is not None:
        b = upper_tree(op, n, grid_size, tuple(splits))
        if b is not None:
            cands.append(b)
    if op.shape[1] <= 64 and op.shape[0] * op.shape[1] <= 100_000:
        b = upper_maurey(op, n, budget)
        if b is not None:
            cands.append(b)
    return min(cands, key=lambda b: b.value)


# -- lower bounds ------------------------------------------------------------


def _segment_lower(op, n):
    """Packing along the longest segment ``[x, y]`` with x, y signed columns."""
    norms = op.column_norms()
    j_top = np.argsort(-norms)[:32]
    A = op.matrix[:, j_top].toarray()
    q = op.q
    best, pair = 0.0, None
    for a in range(A.shape[1]):
        for b in range(a, A.shape[1]):
            for sign in (1.0, -1.0):
                if a == b and sign == 1.0:
                    d = 2 * norms[j_top[a]]
                    key = (int(j_top[a]), int(j_top[a]), -1.0)
                else:
                    d = float(np.sum(np.abs(A[:, a] - sign * A[:, b]) ** q) ** (1 / q))
                    key = (int(j_top[a]), int(j_top[b]), sign)
                if d > best:
                    best, pair = d, key
    K = 2.0 ** (n - 1)
    return EntropyBound(
        best / (2 * K) * (1 - REL_SLACK),
        "segment-packing",
        {"endpoints": pair, "points": K + 1, "length": best},
    )


def _explicit_lower(op, n, budget, seed):
    """Greedy packing among signed columns and random sparse hull points.

    The candidate pool does not depend on n and the farthest-first order is a
    prefix order, so the bound is non-increasing in n.  The smallest pairwise
    distance among the first K chosen points is the distance at which the
    K-th point was picked.
    """
    K = 2 ** (n - 1) + 1
    A = op.dense()
    rows, N = A.shape
    size = min(budget, POOL_SIZE)
    if K > size + 2 * N or rows * (size + 2 * N) > 20_000_000:
        return None
    rng = np.random.default_rng(seed)
    k = min(3, N)
    idx = rng.integers(0, N, size=(size, k))
    w = rng.dirichlet(np.ones(k), size=size) * rng.choice([-1.0, 1.0], size=(size, k))
    X = np.concatenate([A.T, -A.T, np.einsum("ek,rek->er", w, A[:, idx])], axis=0)
    norms = np.sum(np.abs(X) ** op.q, axis=1)
    order, radii = farthest_point_order(X, op.q, K, start=int(np.argmax(norms)))
    mind = radii[K - 2]
    return EntropyBound(mind / 2 * (1 - REL_SLACK), "explicit-packing",
                        {"points": X[order], "seed": seed, "min_distance": mind})


_BALLS = {}


def _ball_volumes(k):
    """Cumulative Hamming ball volumes ``vol[h] = sum_{j<=h} C(k, j)``, exact."""
    vol = _BALLS.get(k)
    if vol is None:
        vol, c, tot = [], 1, 0
        for j in range(k + 1):
            tot += c
            vol.append(tot)
            c = c * (k - j) // (j + 1)
        _BALLS[k] = vol
    return vol


def _gv_best_h(k, K):
    """Largest h such that a binary code of length k, size K and distance h exists.

    Uses the greedy (Gilbert-Varshamov) guarantee ``2**k >= K * vol(h - 1)``;
    returns 0 when even h = 1 is not guaranteed.
    """
    vol = _ball_volumes(k)
    full = 1 << k
    if full < K:
        return 0
    lo, hi = 1, k
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if full >= K * vol[mid - 1]:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _cube_vectors(op):
    """Disjointly supported hull vectors ``(col_a - col_b) / 2`` grouped by depth."""
    tree = op.tree
    _, diam, arg = subtree_profile(tree.parent, tree.levels, op.matrix, op.q)
    A = op.matrix
    groups = {}
    for k, nodes in enumerate(tree.levels):
        vecs = []
        for u in nodes:
            kids = sorted(tree.children[u], key=lambda c: -diam[c])
            if len(kids) < 2:
                continue
            a, b = int(arg[kids[0]]), int(arg[kids[1]])
            w = (A[:, a] - A[:, b]).toarray().ravel() / 2
            sup = np.nonzero(w)[0]
            inside = (tree.tin[u] < tree.tin[sup]) & (tree.tin[sup] < tree.tout[u])
            if sup.size and inside.all():
                vecs.append((float(np.sum(np.abs(w) ** op.q) ** (1 / op.q)), int(u), a, b))
        if vecs:
            groups[k] = sorted(vecs, reverse=True)
    return groups


def _cube_lower(op, n):
    """Gilbert-Varshamov packing of signed averages of disjoint hull vectors."""
    if op.tree is None:
        return None
    K = 2 ** (n - 1) + 1
    best = None
    for depth, vecs in _cube_vectors(op).items():
        sizes = sorted({len(vecs)} | {2 ** i for i in range(int(math.log2(len(vecs))) + 1)})
        for k in sizes:
            h = _gv_best_h(k, K)
            if h == 0:
                continue
            minnorm = vecs[k - 1][0]
            delta = h ** (1 / op.q) * minnorm / k
            if best is None or delta > best[0]:
                best = (delta, depth, k, h, [v[1:] for v in vecs[:k]])
    if best is None:
        return None
    delta, depth, k, h, used = best
    return EntropyBound(
        delta * (1 - REL_SLACK), "cube-packing",
        {"depth": depth, "dimension": k, "hamming_distance": h, "points": K, "vectors": used},
    )


def entropy_lower(op: ColumnOperator, n: int, budget=DEFAULT_BUDGET, seed=0) -> EntropyBound:
    """Largest certified packing radius among the available constructions."""
    if n < 1:
        raise MalformedInput("n must be >= 1")
    norms = op.column_norms()
    if norms.size == 0 or norms.max() == 0:
        return EntropyBound(0.0, "zero", {})
    cands = [_segment_lower(op, n)]
    if op.shape[0] * op.shape[1] <= 4_000_000:
        b = _explicit_lower(op, n, budget, seed)
        if b is not None:
            cands.append(b)
    b = _cube_lower(op, n)
    if b is not None:
        cands.append(b)
    return max(cands, key=lambda b: b.value)


def estimate(op, n, budget=DEFAULT_BUDGET, seed=0, **kw) -> EntropyEstimate:
    up = entropy_upper(op, n, budget, **kw)
    lo = entropy_lower(op, n, budget, seed)
    if lo.value > up.value:
        raise InvariantViolation("lower-le-upper", f"n={n}: lower {lo.value} > upper {up.value}")
    return EntropyEstimate(n, up.value, lo.value, up.method, lo.method, up.certificate, lo.certificate)


# -- combinators and shapes --------------------------------------------------


def combine_family(base_upper_per_gamma, approx_error, family_size, k):
    """Index shift for a finite approximating family: returns ``(k + M, bound)``."""
    if family_size < 1 or k < 1:
        raise MalformedInput("family_size and k must be >= 1")
    M = int(family_size).bit_length()  # floor(log2(size)) + 1
    return k + M, float(base_upper_per_gamma) + float(approx_error)


def dimension_bound_f(n, N, q):
    """Shape ``2**-max(n/N, 1) * min(1, max(ln(N/n + 1)/n, 1/N)**(1 - 1/q))``."""
    if n < 1 or N < 1:
        raise MalformedInput("n and N must be >= 1")
    inner = max(math.log(N / n + 1.0) / n, 1.0 / N) ** (1.0 - 1.0 / q)
    return 2.0 ** (-max(n / N, 1.0)) * min(1.0, inner)


def slope_fit(ns, values) -> float:
    """Least-squares slope of ``log2(values)`` against ``log2(ns)``."""
    x = np.log2(np.asarray(ns, dtype=float))
    y = np.log2(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# -- reports -----------------------------------------------------------------


@dataclass
class EntropyReport:
    rows: list
    slope_W: float
    slope_V: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["operator", "n", "lower", "upper", "method_lower", "method_upper", "slope_fit"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({c: r[c] for c in cols})
        return buf.getvalue()


def entropy_report(wt: WeightedTree, n_grid, budget=DEFAULT_BUDGET, seed=0, grid_size=400,
                   mapper=map) -> EntropyReport:
    """Bounds for W and V over ``n_grid`` with slope fits of the upper bounds.

    For V the upper bound is the direct recursion bound; when sigma is already
    dyadic it is also capped by twice the bound for W.  ``mapper`` may be a
    parallel map over the (operator, n) tasks.
    """
    lp = dyadic_reduction(wt)
    ops = {"W": operator_W(lp), "V": operator_V(wt)}
    dyadic = bool(np.all(lp.sigma_hat == wt.sigma))
    tasks = [(name, n) for name in ops for n in n_grid]
    est = dict(zip(tasks, mapper(
        lambda t: estimate(ops[t[0]], t[1], budget, seed, grid_size=grid_size), tasks)))
    rows = []
    uw, uv = [], []
    for n in n_grid:
        ew, ev = est[("W", n)], est[("V", n)]
        up, meth = ev.upper, ev.method_upper
        if dyadic and 2 * ew.upper < up:
            up, meth = 2 * ew.upper, "twice-W"
        rows.append({"operator": "W", "n": n, "lower": ew.lower, "upper": ew.upper,
                     "method_lower": ew.method_lower, "method_upper": ew.method_upper})
        rows.append({"operator": "V", "n": n, "lower": ev.lower, "upper": up,
                     "method_lower": ev.method_lower, "method_upper": meth})
        uw.append(ew.upper)
        uv.append(up)
    sw = slope_fit(n_grid, uw) if len(n_grid) > 1 else float("nan")
    sv = slope_fit(n_grid, uv) if len(n_grid) > 1 else float("nan")
    for r in rows:
        r["slope_fit"] = sw if r["operator"] == "W" else sv
    return EntropyReport(rows, sw, sv)


def hull_sequence_decay(norms, q, n_grid, budget=DEFAULT_BUDGET):
    """Exploratory: bounds for the hull of orthogonal vectors with the given norms."""
    cols = np.diag(np.asarray(norms, dtype=float))
    op = ColumnOperator.from_columns(cols, q, "sequence")
    return [estimate(op, n, budget) for n in n_grid]
