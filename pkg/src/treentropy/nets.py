"""Covering numbers, order nets and the epsilon schedule.

Exact covers for small trees use a bitmask branch-and-bound set cover; order
nets on larger trees use a dynamic program over root paths, since coverage by
an ancestor is monotone along the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedInput, SizeLimit
from .metrics import (
    DistanceContext,
    full_distance_matrix,
    localized_distance_many,
    localized_distance_matrix,
    order_distance_matrix,
)

EXACT_LIMIT = 64


@dataclass(frozen=True)
class CoveringResult:
    value: int
    exact: bool
    centers: tuple
    epsilon: float
    kind: str = "balls"


def epsilon_schedule(m, q: float):
    """``eps_m = (m ln 2) ** -(1 - 1/q)``; accepts scalars or arrays."""
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < 1):
        raise MalformedInput("m must be >= 1")
    out = (m_arr * math.log(2.0)) ** (-(1.0 - 1.0 / q))
    return float(out) if out.ndim == 0 else out


# -- set cover --------------------------------------------------------------


def _masks(cover: np.ndarray) -> list:
    """Row i of a boolean matrix as an int bitmask."""
    out = []
    for row in cover:
        m = 0
        for j in np.nonzero(row)[0]:
            m |= 1 << int(j)
        out.append(m)
    return out


class _SetCover:
    """Minimum set cover by depth-first branch-and-bound.

    Branches on the uncovered element with the fewest candidate sets; the
    bound is ``ceil(uncovered / largest remaining gain)``.
    """

    def __init__(self, sets, n_elems):
        self.sets = sets
        self.n = n_elems
        self.covering = [
            [c for c, s in enumerate(sets) if (s >> e) & 1] for e in range(n_elems)
        ]

    def solve(self, uncovered, allowed, limit):
        """Smallest cover of ``uncovered`` by ``allowed`` ids using at most ``limit`` sets."""
        self._best = None
        self._limit = limit
        allowed = sorted(allowed)
        self._rec(uncovered, [], allowed)
        return self._best

    def _rec(self, uncovered, chosen, pool):
        if uncovered == 0:
            self._best = list(chosen)
            self._limit = len(chosen) - 1
            return
        room = self._limit - len(chosen)
        if room <= 0:
            return
        gains = [(self.sets[c] & uncovered).bit_count() for c in pool]
        best_gain = max(gains) if gains else 0
        if best_gain == 0:
            return
        left = uncovered.bit_count()
        if -(-left // best_gain) > room:
            return
        pool = [c for c, g in zip(pool, gains) if g > 0]
        pool_set = set(pool)
        opts = None
        rest = uncovered
        while rest:
            low = rest & -rest
            e = low.bit_length() - 1
            rest ^= low
            cand = [c for c in self.covering[e] if c in pool_set]
            if opts is None or len(cand) < len(opts):
                opts = cand
                if len(cand) <= 1:
                    break
        if not opts:
            return
        opts.sort(key=lambda c: (-(self.sets[c] & uncovered).bit_count(), c))
        for c in opts:
            chosen.append(c)
            self._rec(uncovered & ~self.sets[c], chosen, pool)
            chosen.pop()
            if self._limit - len(chosen) <= 0:
                return


def greedy_cover(cover: np.ndarray) -> list:
    """Classic greedy set cover; ties go to the smallest id."""
    n_cand, n = cover.shape
    uncovered = np.ones(n, dtype=bool)
    chosen = []
    while uncovered.any():
        gain = (cover & uncovered[None, :]).sum(axis=1)
        c = int(np.argmax(gain))
        if gain[c] == 0:
            raise MalformedInput("candidate sets do not cover the ground set")
        chosen.append(c)
        uncovered &= ~cover[c]
    return sorted(chosen)


def exact_cover(cover: np.ndarray) -> list:
    """Minimum cover with the lexicographically smallest sorted id list.

    ``cover[c, e]`` states that candidate c covers element e.
    """
    n_cand, n = cover.shape
    sets = _masks(cover)
    full = (1 << n) - 1
    sc = _SetCover(sets, n)
    warm = greedy_cover(cover)
    best = sc.solve(full, range(n_cand), len(warm) - 1)
    k = len(warm) if best is None else len(best)
    chosen, uncovered, last = [], full, -1
    for slot in range(k):
        need = k - slot - 1
        for c in range(last + 1, n_cand):
            if not sets[c] & uncovered:
                continue
            rest = uncovered & ~sets[c]
            if rest == 0:
                ok = True
            elif need == 0:
                ok = False
            else:
                ok = sc.solve(rest, range(c + 1, n_cand), need) is not None
            if ok:
                chosen.append(c)
                uncovered = rest
                last = c
                break
        if uncovered == 0:
            break
    return chosen


def brute_force_cover(cover: np.ndarray) -> list:
    """Exhaustive oracle: first minimum cover in lexicographic order."""
    from itertools import combinations

    n_cand, n = cover.shape
    for k in range(1, n_cand + 1):
        for combo in combinations(range(n_cand), k):
            if cover[list(combo)].any(axis=0).all():
                return list(combo)
    raise MalformedInput("candidate sets do not cover the ground set")


# -- covering numbers -------------------------------------------------------


def _solve(cover, mode, limit, n):
    if mode == "exact":
        if n > limit:
            raise SizeLimit(f"exact covering limited to {limit} nodes, tree has {n}")
        return exact_cover(cover), True
    if mode == "greedy":
        return greedy_cover(cover), False
    raise MalformedInput(f"unknown mode {mode!r}")


def covering_number(ctx: DistanceContext, eps: float, mode="exact", limit=EXACT_LIMIT):
    """Fewest open eps-balls (extended distance) covering the tree."""
    if not eps > 0:
        raise MalformedInput("eps must be positive")
    n = ctx.tree.node_count
    if mode == "exact" and n > limit:
        raise SizeLimit(f"exact covering limited to {limit} nodes, tree has {n}")
    cover = full_distance_matrix(ctx) < eps
    centers, exact = _solve(cover, mode, limit, n)
    return CoveringResult(len(centers), exact, tuple(centers), float(eps), "balls")


def order_cover_matrix(ctx: DistanceContext, eps: float, metric: str) -> np.ndarray:
    if metric == "d":
        D = order_distance_matrix(ctx)
    elif metric in ("dI", "d_I"):
        D = localized_distance_matrix(ctx)
    else:
        raise MalformedInput(f"unknown metric {metric!r}")
    return D < eps


def order_net_number(ctx, eps, metric="d", mode="exact", limit=EXACT_LIMIT):
    """Smallest eps-order net: every node has a listed ancestor within eps."""
    if not eps > 0:
        raise MalformedInput("eps must be positive")
    n = ctx.tree.node_count
    if mode == "dp":
        sel = min_order_net(ctx.tree, coverage_depth(ctx, eps, metric))
        centers = tuple(int(v) for v in np.nonzero(sel)[0])
        return CoveringResult(len(centers), True, centers, float(eps), "order-net")
    if mode == "exact" and n > limit:
        raise SizeLimit(f"exact covering limited to {limit} nodes, tree has {n}")
    cover = order_cover_matrix(ctx, eps, metric)
    centers, exact = _solve(cover, mode, limit, n)
    return CoveringResult(len(centers), exact, tuple(centers), float(eps), "order-net")


def is_order_net(ctx: DistanceContext, nodes, eps: float, metric="dI") -> bool:
    """True iff every node has an ancestor in ``nodes`` at distance below eps."""
    return bool(np.all(order_net_gaps(ctx, nodes, metric) < eps))


def deepest_member(tree, member: np.ndarray) -> np.ndarray:
    """``out[s]`` = deepest node of the marked set on ``[root, s]``, or -1."""
    out = np.where(member, np.arange(tree.node_count), -1)
    for nodes in tree.levels[1:]:
        par = tree.parent[nodes]
        out[nodes] = np.where(member[nodes], nodes, out[par])
    return out


def order_net_gaps(ctx: DistanceContext, nodes, metric="dI") -> np.ndarray:
    """Distance from each node to its deepest ancestor in ``nodes``."""
    tree = ctx.tree
    member = np.zeros(tree.node_count, dtype=bool)
    member[np.asarray(list(nodes), dtype=np.int64)] = True
    owner = deepest_member(tree, member)
    s = np.arange(tree.node_count)
    out = np.full(tree.node_count, np.inf)
    ok = owner >= 0
    if metric in ("dI", "d_I"):
        out[ok] = localized_distance_many(ctx, owner[ok], s[ok])
    else:
        out[ok] = order_distance_many(ctx, owner[ok], s[ok])
    return out


def order_distance_many(ctx: DistanceContext, t, s) -> np.ndarray:
    """Vectorized ``d(t, s)`` for ancestor pairs, walking all paths together."""
    tree = ctx.tree
    t = np.asarray(t, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    P, q = ctx.prefix, ctx.q
    best = np.zeros(len(s))
    cur = s.copy()
    active = cur != t
    while active.any():
        i = np.nonzero(active)[0]
        v = cur[i]
        val = np.maximum(P[v] - P[t[i]], 0.0) ** (1.0 / q) * ctx.sigma[v]
        best[i] = np.maximum(best[i], val)
        cur[i] = tree.parent[v]
        active[i] = cur[i] != t[i]
    return best


def coverage_depth(ctx: DistanceContext, eps: float, metric="dI") -> np.ndarray:
    """Depth of the shallowest ancestor of each node lying within eps.

    Both distances shrink as the ancestor moves down the path, so the
    covering ancestors of s are exactly those at depth >= the returned value.
    """
    tree = ctx.tree
    s = np.arange(tree.node_count)
    lo = np.zeros(tree.node_count, dtype=np.int64)
    hi = tree.depth.copy()
    dist = localized_distance_many if metric in ("dI", "d_I") else order_distance_many
    while True:
        open_ = lo < hi
        if not open_.any():
            return hi
        i = np.nonzero(open_)[0]
        mid = (lo[i] + hi[i]) // 2
        anc = tree.ancestor_at_depth(s[i], mid)
        good = dist(ctx, anc, s[i]) < eps
        hi[i[good]] = mid[good]
        lo[i[~good]] = mid[~good] + 1


def min_order_net(tree, cdepth, forced=None) -> np.ndarray:
    """Minimum order net by dynamic programming over root paths.

    Node s is covered once some selected ancestor has depth >= ``cdepth[s]``.
    ``forced`` nodes are always selected at no cost.  Among free selections the
    count is minimized first, then the sum of depths, then the sum of ids.
    Returns a boolean selection mask.
    """
    n = tree.node_count
    forced = np.zeros(n, dtype=bool) if forced is None else np.asarray(forced, bool)
    depth = tree.depth
    D = tree.max_depth
    shift = float(n * (D + 1) + 1)
    w1 = np.where(forced, 0.0, shift + depth)
    w2 = np.where(forced, 0.0, np.arange(n, dtype=float))
    pos = np.zeros(n, dtype=np.int64)
    for nodes in tree.levels:
        pos[nodes] = np.arange(len(nodes))

    choices = [None] * (D + 1)
    child_g1 = child_g2 = None
    for k in range(D, -1, -1):
        nodes = tree.levels[k]
        m = len(nodes)
        S1 = np.zeros((m, k + 2))
        S2 = np.zeros((m, k + 2))
        if k < D:
            kids = tree.levels[k + 1]
            p = pos[tree.parent[kids]]
            np.add.at(S1, p, child_g1)
            np.add.at(S2, p, child_g2)
        sel1 = (w1[nodes] + S1[:, k + 1])[:, None]
        sel2 = (w2[nodes] + S2[:, k + 1])[:, None]
        a = np.arange(-1, k)[None, :]
        allowed = (a >= cdepth[nodes][:, None]) & ~forced[nodes][:, None]
        no1 = np.where(allowed, S1[:, : k + 1], np.inf)
        no2 = np.where(allowed, S2[:, : k + 1], np.inf)
        pick = (sel1 < no1) | ((sel1 == no1) & (sel2 < no2))
        child_g1 = np.where(pick, sel1, no1)
        child_g2 = np.where(pick, sel2, no2)
        choices[k] = pick

    selected = np.zeros(n, dtype=bool)
    above = np.full(n, -1, dtype=np.int64)
    for k in range(D + 1):
        nodes = tree.levels[k]
        take = choices[k][np.arange(len(nodes)), above[nodes] + 1]
        selected[nodes] = take
        if k < D:
            kids = tree.levels[k + 1]
            par = tree.parent[kids]
            above[kids] = np.where(selected[par], k, above[par])
    return selected


# -- covering relations -----------------------------------------------------


@dataclass
class CoveringReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["ok_lower"] and r["ok_upper"] for r in self.rows)


def verify_covering_relations(ctx, eps_grid, limit=EXACT_LIMIT) -> CoveringReport:
    """Check ``N(eps) <= N~(eps)`` and ``N~(2 eps) <= N(eps)`` on a grid."""
    rep = CoveringReport()
    for eps in eps_grid:
        N = covering_number(ctx, eps, "exact", limit)
        Nt = order_net_number(ctx, eps, "d", "exact", limit)
        Nt2 = order_net_number(ctx, 2 * eps, "d", "exact", limit)
        rep.rows.append(
            {
                "epsilon": float(eps),
                "N": N.value,
                "N_order": Nt.value,
                "N_order_2eps": Nt2.value,
                "ok_lower": N.value <= Nt.value,
                "ok_upper": Nt2.value <= N.value,
                "centers": N.centers,
                "net": Nt.centers,
            }
        )
    return rep
