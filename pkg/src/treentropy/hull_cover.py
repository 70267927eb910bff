"""Covering counts for the image of the l1 ball under ancestor-supported operators.

When column s is supported on the root path of s, the image restricted to
the subtree of v splits as ``[-a_v, a_v]`` times the mass-weighted union of the
child images.  Covering each factor on a fixed geometric radius grid and
adding exponents gives an upper bound ``G_v(r)`` on the log2 of the number
of open r-balls needed for the subtree.  All counts are rounded in the safe
direction, so ``2**G`` is always an honest ball count.
"""

from __future__ import annotations

import math

import numpy as np

MASS_SPLITS = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32)


class RadiusGrid:
    """Geometric grid ``r_0 < ... < r_{K-1}`` with table lookups that round down."""

    def __init__(self, r_min=1e-4, r_max=1.0, size=400, q=2.0):
        self.q = float(q)
        self.r = np.geomspace(r_min, r_max, size)
        self.log_r = np.log(self.r)
        self.step = (self.log_r[-1] - self.log_r[0]) / (size - 1)
        self.s = self.r ** self.q
        self.log_s = np.log(self.s)
        diff = self.s[:, None] - self.s[None, :]
        with np.errstate(divide="ignore"):
            # log of (s_i - s_j)^(1/q): radius left for the second factor
            self.log_rest = np.where(diff > 0, np.log(np.maximum(diff, 1e-300)) / self.q, -np.inf)
        self.lower = np.tril(np.ones((size, size), dtype=bool))

    def index(self, log_rad):
        """Largest grid index with ``r[idx] <= exp(log_rad)``; -1 below the grid."""
        lr = np.asarray(log_rad, dtype=float)
        with np.errstate(invalid="ignore"):
            raw = np.floor((lr - self.log_r[0]) / self.step)
        raw = np.where(np.isfinite(raw), raw, -1)
        idx = np.clip(raw, -1, len(self.r) - 1).astype(np.int64)
        safe = np.maximum(idx, 0)
        idx = np.where((idx >= 0) & (self.log_r[safe] > lr), idx - 1, idx)
        nxt = np.minimum(idx + 1, len(self.r) - 1)
        idx = np.where((idx + 1 < len(self.r)) & (self.log_r[nxt] <= lr), nxt, idx)
        return idx

    def lookup(self, G, diam, log_rad):
        """``G`` evaluated at a radius, rounding the radius down to the grid."""
        idx = self.index(log_rad)
        out = np.where(idx >= 0, G[np.maximum(idx, 0)], np.inf)
        log_diam = math.log(diam) if diam > 0 else -np.inf
        return np.where(log_rad > log_diam, 0.0, out)

    def interval(self, a):
        """log2 of the open balls of radius r covering ``[-a, a]``."""
        if a <= 0:
            return np.zeros(len(self.r))
        return np.log2(np.floor(a / self.r) + 1.0)


class HullCover:
    """Bottom-up evaluation of the covering exponent over a tree."""

    def __init__(self, grid: RadiusGrid, splits=MASS_SPLITS):
        self.grid = grid
        self.splits = splits
        self._pairs = {}

    def add_root(self, H, d_children, a, diam):
        """Cover ``[-a, a] x K`` given the exponent H of K."""
        g = self.grid
        if d_children <= 0:
            out = g.interval(a)
        else:
            head = g.interval(a)  # radius r_j spent on the root coordinate
            tail = g.lookup(H, d_children, g.log_rest)  # remaining radius for K
            tot = np.where(g.lower, head[None, :] + tail, np.inf)
            out = tot.min(axis=1)
        out = np.where(g.r > diam, 0.0, out)
        return np.minimum.accumulate(out)

    def combine(self, GA, dA, GB, dB):
        """Exponent for ``{(x, y) : x in tA*KA, y in tB*KB, tA + tB <= 1}``."""
        if dA <= 0:
            return GB, dB
        if dB <= 0:
            return GA, dA
        g = self.grid
        best = np.full(len(g.r), np.inf)
        for Q in self.splits:
            acc = np.full(len(g.r), -np.inf)
            for k in range(1, Q + 1):
                la, lb = k / Q, (Q + 1 - k) / Q
                # radius r_j^q on the A side, r_i^q - r_j^q on the B side
                ga = g.lookup(GA, dA, g.log_r - math.log(la))
                gb = g.lookup(GB, dB, g.log_rest - math.log(lb))
                tot = np.where(g.lower, ga[None, :] + gb, np.inf)
                acc = np.logaddexp2(acc, tot.min(axis=1))
            best = np.minimum(best, acc)
        d = max(dA, dB)
        best = np.where(g.r > d, 0.0, best)
        return np.minimum.accumulate(best), d


def subtree_profile(parent, levels, A, q):
    """Per-node ``a_v`` (largest entry of row v) and ``diam_v``.

    ``diam_v`` is the largest lq norm of a column restricted to the subtree
    of v, which is the radius of the restricted image.  Also returns, for
    each v, a column attaining it.
    """
    from scipy import sparse

    A = sparse.csc_matrix(A)
    n = A.shape[0]
    coo = A.tocoo()
    rows, cols, vals = coo.row, coo.col, np.abs(coo.data) ** q
    a = np.zeros(n)
    np.maximum.at(a, rows, np.abs(coo.data))
    # suffix sums of |entries|^q along each column, from the row down to s
    depth = np.zeros(n, dtype=np.int64)
    for k, nodes in enumerate(levels):
        depth[nodes] = k
    order = np.lexsort((-depth[rows], cols))
    rows, cols, vals = rows[order], cols[order], vals[order]
    csum = np.cumsum(vals)
    start = np.searchsorted(cols, cols, side="left")
    before = np.where(start > 0, csum[np.maximum(start - 1, 0)], 0.0)
    suffix = csum - before
    best = np.zeros(n)
    arg = np.arange(n)
    # best column per row among the entries of that row
    order2 = np.lexsort((cols, -suffix, rows))
    r2, c2, v2 = rows[order2], cols[order2], suffix[order2]
    first = np.ones(len(r2), dtype=bool)
    first[1:] = r2[1:] != r2[:-1]
    best[r2[first]] = v2[first]
    arg[r2[first]] = c2[first]
    for nodes in reversed(levels[1:]):
        par = parent[nodes]
        for v, p in zip(nodes, par):
            if best[v] > best[p]:
                best[p] = best[v]
                arg[p] = arg[v]
    return a, best ** (1.0 / q), arg


def tree_cover_exponent(parent, levels, children, A, q, grid: RadiusGrid, splits=MASS_SPLITS):
    """Covering exponent ``G_root`` on the grid for an ancestor-supported matrix."""
    a, diam, _ = subtree_profile(parent, levels, A, q)
    hc = HullCover(grid, splits)
    sig_id = {}
    table = []
    node_sig = np.zeros(len(parent), dtype=np.int64)
    pair_memo = {}
    for nodes in reversed(levels):
        for v in nodes:
            kids = tuple(sorted(int(node_sig[c]) for c in children[v]))
            key = (float(a[v]), float(diam[v]), kids)
            sid = sig_id.get(key)
            if sid is None:
                H, dH = None, 0.0
                for k in kids:
                    Gk, dk = table[k]
                    if H is None:
                        H, dH, hkey = Gk, dk, (k,)
                        continue
                    pk = (hkey, k)
                    if pk not in pair_memo:
                        pair_memo[pk] = hc.combine(H, dH, Gk, dk)
                    H, dH = pair_memo[pk]
                    hkey = pk
                if H is None:
                    H = np.zeros(len(grid.r))
                G = hc.add_root(H, dH, float(a[v]), float(diam[v]))
                sid = len(table)
                table.append((G, float(diam[v])))
                sig_id[key] = sid
            node_sig[v] = sid
    root = levels[0][0]
    return table[node_sig[root]][0], float(diam[root])
