"""Heavy/light decomposition of a partition tree for one measure, and the
four-way splitting of the localized operator along each light domain.

A domain ``B`` at level m is heavy for ``(mu, n)`` when ``|mu|(B) > m / n``.
Heavy domains form an ancestor-closed family; the light domains whose parent
domain is heavy partition the tree.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMeasure, InvariantViolation, MalformedInput, MismatchedPartition
from .metrics import DistanceContext
from .nets import epsilon_schedule
from .partitions import PartitionTree, crucial_lhs
from .weights import REL_SLACK, LevelPartition, as_vector, lq_norm

SPLIT_CONSTANT = 3


def _fingerprint(mu: np.ndarray, n: int) -> str:
    h = hashlib.sha1(np.ascontiguousarray(mu, dtype=float).tobytes())
    h.update(str(int(n)).encode())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class EssentialTree:
    """Heavy domains of a partition tree for one measure.

    ``heavy[m]`` lists the roots of heavy level-m domains; ``terminal`` holds
    the ``(m, r)`` heavy domains without heavy children.
    """

    heavy: tuple
    terminal: tuple
    n: int
    mass: tuple = field(repr=False)
    fingerprint: str = field(repr=False)

    @property
    def count(self) -> int:
        return sum(len(h) for h in self.heavy)

    @property
    def terminal_order_sum(self) -> int:
        return sum(m for m, _ in self.terminal)

    def is_heavy(self, m: int, r: int) -> bool:
        return m < len(self.heavy) and bool(np.isin(r, self.heavy[m]))

    def signature(self) -> tuple:
        return tuple(tuple(int(r) for r in h) for h in self.heavy)


def essential_tree(pt: PartitionTree, mu, n: int) -> EssentialTree:
    """Collect heavy domains; the chain must reach level n."""
    if n < 1:
        raise MalformedInput("n must be >= 1")
    tree_nodes = pt.owner.shape[1]
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (tree_nodes,):
        raise MalformedInput("measure does not match the tree")
    absmu = np.abs(mu)
    if not absmu.sum() > 0:
        raise EmptyMeasure("the zero measure has no heavy domains")
    if pt.M < n:
        raise MalformedInput(f"partition tree has {pt.M} levels, need at least n={n}")
    heavy, masses = [], []
    for m in range(n):
        mass = np.bincount(pt.owner[m], weights=absmu, minlength=tree_nodes)
        roots = pt.roots(m)
        hv = roots[mass[roots] > m / n]
        if hv.size == 0:
            break
        heavy.append(hv)
        masses.append(mass)
    terminal = []
    for m, hv in enumerate(heavy):
        if m + 1 < len(heavy):
            nxt = heavy[m + 1]
            parents = pt.owner[m, nxt]
            lone = hv[~np.isin(hv, parents)]
        else:
            lone = hv
        terminal.extend((m, int(r)) for r in lone)
    return EssentialTree(
        heavy=tuple(heavy),
        terminal=tuple(terminal),
        n=int(n),
        mass=tuple(masses),
        fingerprint=_fingerprint(mu, n),
    )


def check_essential(et: EssentialTree) -> list:
    """Counting bounds on the heavy family: at most n domains, terminal orders sum below n."""
    out = []
    if et.count > et.n:
        out.append(("heavy-count", et.count, et.n))
    if not et.terminal_order_sum < et.n:
        out.append(("terminal-sum", et.terminal_order_sum, et.n))
    return out


@dataclass(frozen=True, eq=False)
class LightPartition:
    """Extremal light domains with their split marks.

    Arrays are indexed by light domain: ``level`` (its order), ``root``
    (r_circ), ``top`` (root of the parent domain, r_bullet), ``below`` (parent
    node of r_circ, -1 for the tree root) and ``generic`` (top != root).
    ``domain_of[s]`` is the index of the light domain containing node s.
    """

    level: np.ndarray
    root: np.ndarray
    top: np.ndarray
    below: np.ndarray
    generic: np.ndarray
    domain_of: np.ndarray
    n: int
    fingerprint: str = field(repr=False)

    def __len__(self):
        return len(self.root)

    def members(self, i: int) -> np.ndarray:
        return np.nonzero(self.domain_of == i)[0]

    def signature(self) -> tuple:
        return tuple(sorted(zip(self.level.tolist(), self.root.tolist())))


def light_partition(pt: PartitionTree, et: EssentialTree) -> LightPartition:
    """For each node, the domain at the first light level along its chain."""
    n_nodes = pt.owner.shape[1]
    first_light = np.full(n_nodes, -1, dtype=np.int64)
    for m in range(1, len(et.heavy) + 1):
        own = pt.owner[m]
        if m < len(et.heavy):
            light_here = ~np.isin(own, et.heavy[m])
        else:
            light_here = np.ones(n_nodes, dtype=bool)
        first_light = np.where((first_light < 0) & light_here, m, first_light)
    lvl = first_light
    rt = pt.owner[lvl, np.arange(n_nodes)]
    key = lvl * n_nodes + rt
    uniq, inv = np.unique(key, return_inverse=True)
    level = uniq // n_nodes
    root = uniq % n_nodes
    top = pt.owner[level - 1, root]
    below = pt.tree.parent[root]
    return LightPartition(
        level=level.astype(np.int64),
        root=root.astype(np.int64),
        top=top.astype(np.int64),
        below=below.astype(np.int64),
        generic=top != root,
        domain_of=inv.astype(np.int64),
        n=et.n,
        fingerprint=et.fingerprint,
    )


def check_light_partition(pt: PartitionTree, et: EssentialTree, light: LightPartition) -> list:
    """Each light domain is light, has a heavy parent, and the lights tile the tree."""
    out = []
    n_nodes = pt.owner.shape[1]
    sizes = np.bincount(light.domain_of, minlength=len(light))
    for i, (m, r) in enumerate(zip(light.level, light.root)):
        m, r = int(m), int(r)
        members = pt.members(m, r)
        if len(members) != sizes[i] or np.any(light.domain_of[members] != i):
            out.append(("tile", m, r))
        if et.is_heavy(m, r):
            out.append(("light", m, r))
        pm, pr = pt.parent_domain(m, r)
        if not et.is_heavy(pm, pr):
            out.append(("parent-heavy", m, r))
    if sizes.sum() != n_nodes:
        out.append(("cover", int(sizes.sum()), n_nodes))
    return out


# -- four-way split -----------------------------------------------------------


def _part_ranges(lp: LevelPartition, light: LightPartition, part: int):
    """Depth range ``[lo, hi]`` on the root path of each column s for one part."""
    tree = lp.tree
    depth = tree.depth
    L = light.domain_of
    d_top = depth[light.top[L]]
    d_root = depth[light.root[L]]
    gen = light.generic[L]
    d_s = depth
    if part == 1:
        lo, hi = np.zeros_like(d_s), d_top
    elif part == 2:
        lo, hi = d_top + 1, np.where(gen, d_root - 1, -1)
    elif part == 3:
        lo, hi = d_root, np.where(gen, d_root, -1)
    elif part == 4:
        lo, hi = d_root + 1, d_s
    else:
        raise MalformedInput("part must be 1, 2, 3 or 4")
    lo = np.maximum(lo, depth[lp.lam])
    return lo, hi


def split_operator(lp: LevelPartition, light: LightPartition, mu, part: int) -> np.ndarray:
    """Apply one of the four pieces of W split along the light domains.

    Column s of W is ``sigma_hat(s) alpha`` on ``[lam(s), s]``; piece ``part``
    keeps the stretch of that branch at depths ``[0, |r_bullet|]``,
    ``(|r_bullet|, |r_minus|]``, ``{|r_circ|}`` or ``(|r_circ|, |s|]``.
    Pieces 2 and 3 vanish on degenerate domains.
    """
    tree = lp.tree
    mu = as_vector(tree, mu)
    lo, hi = _part_ranges(lp, light, part)
    s = np.arange(tree.node_count)
    ok = (lo <= hi) & (mu != 0)
    coef = lp.sigma_hat * mu
    acc = np.zeros(tree.node_count)
    s_ok = s[ok]
    bottom = tree.ancestor_at_depth(s_ok, hi[ok])
    np.add.at(acc, bottom, coef[ok])
    has_cut = lo[ok] > 0
    cut = tree.ancestor_at_depth(s_ok[has_cut], lo[ok][has_cut] - 1)
    np.add.at(acc, cut, -coef[ok][has_cut])
    return lp.alpha * tree.subtree_sums(acc)


def split_matrices(lp: LevelPartition, light: LightPartition):
    """The four pieces as explicit column matrices (dense, for checking)."""
    tree = lp.tree
    n = tree.node_count
    mats = []
    for part in (1, 2, 3, 4):
        lo, hi = _part_ranges(lp, light, part)
        A = np.zeros((n, n))
        for s in range(n):
            v = s
            while v >= 0:
                if lo[s] <= tree.depth[v] <= hi[s]:
                    A[v, s] = lp.alpha[v] * lp.sigma_hat[s]
                v = int(tree.parent[v])
        mats.append(A)
    return mats


def split_columns(lp: LevelPartition, light: LightPartition, part: int):
    """Sparse column matrix of one split piece."""
    from scipy import sparse

    tree = lp.tree
    n = tree.node_count
    lo, hi = _part_ranges(lp, light, part)
    rows, cols = [], []
    cur = np.arange(n)
    active = np.ones(n, dtype=bool)
    while active.any():
        i = np.nonzero(active)[0]
        v = cur[i]
        dv = tree.depth[v]
        keep = (dv >= lo[i]) & (dv <= hi[i])
        rows.append(v[keep])
        cols.append(i[keep])
        nxt = tree.parent[v]
        cur[i] = nxt
        active[i] = (nxt >= 0) & (dv > lo[i])
    r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    vals = lp.alpha[r] * lp.sigma_hat[c]
    return sparse.csc_matrix((vals, (r, c)), shape=(n, n))


# -- certificates -------------------------------------------------------------


def w4_bound(n: int, q: float) -> float:
    return (n * math.log(2.0)) ** (-(1.0 - 1.0 / q))


def w4_certificate(lp: LevelPartition, light: LightPartition, mu, n: int):
    """Return ``(norm, bound, passed)`` for the last split piece applied to mu."""
    mu = as_vector(lp.tree, mu)
    bound = w4_bound(n, lp.q)
    if not np.any(mu):
        return 0.0, bound, True
    if _fingerprint(mu, n) != light.fingerprint or light.n != n:
        raise MismatchedPartition("light partition was built for a different measure or n")
    norm = lq_norm(split_operator(lp, light, mu, 4), lp.q)
    return norm, bound, bool(norm <= bound * (1 + REL_SLACK))


@dataclass
class ComponentReport:
    """Per generic light domain: ``level``, ``x_norm``, ``gamma`` and checks."""

    rows: list = field(default_factory=list)
    counting: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        bad = [r for r in self.rows if not (r["ok_x"] and r["ok_gamma"])]
        return bad + [c for c in self.counting if not c["ok"]]

    @property
    def passed(self) -> bool:
        return not self.violations


def component_data(light: LightPartition, ctx: DistanceContext, M: int | None = None) -> ComponentReport:
    """Norms of the connecting pieces and root weights of generic light domains.

    For a generic domain of order m >= 2 checks
    ``x_norm**q <= eps_{m-1}**q - eps_m**q`` and ``gamma <= eps_{m-1}``, and
    counts, for every m, the domains with ``gamma >= eps_m`` against
    ``2**(m+3)``.  Order-1 domains have no ``eps_0`` and only enter the count.
    """
    lp, q = ctx.lp, ctx.q
    rep = ComponentReport()
    gen = np.nonzero(light.generic)[0]
    roots = light.root[gen]
    tops = light.top[gen]
    lvls = light.level[gen]
    xq = crucial_lhs(ctx, tops, roots)
    gamma = lp.sigma_hat[roots] * lp.alpha[roots]
    for r, t, m, x, g in zip(roots, tops, lvls, xq, gamma):
        m = int(m)
        row = {"level": m, "root": int(r), "top": int(t),
               "x_norm": float(x ** (1.0 / q)), "gamma": float(g)}
        if m >= 2:
            e0 = epsilon_schedule(m - 1, q)
            e1 = epsilon_schedule(m, q)
            row["ok_x"] = bool(x <= (e0 ** q - e1 ** q) * (1 + REL_SLACK))
            row["ok_gamma"] = bool(g <= e0 * (1 + REL_SLACK))
        else:
            row["ok_x"] = row["ok_gamma"] = True
        rep.rows.append(row)
    top_m = int(M) if M is not None else int(lvls.max(initial=1))
    for m in range(1, top_m + 1):
        cnt = int(np.sum(gamma >= epsilon_schedule(m, q)))
        rep.counting.append({"m": m, "count": cnt, "bound": 2 ** (m + 3), "ok": cnt <= 2 ** (m + 3)})
    return rep


# -- counting subtrees of the partition tree ----------------------------------


def _poly_mul(a, b, n):
    out = np.convolve(a, b)[:n]
    return np.pad(out, (0, n - len(out)))


def enumerate_partitions(pt: PartitionTree, n: int, max_domains: int = 4096) -> int:
    """Count root subtrees of the partition tree whose leaf orders sum below n.

    Uses truncated generating polynomials: a domain at level m contributes
    ``x**m`` as a leaf, or the product over its children of ``1 + f_child``
    minus 1 when it has kept children.
    """
    if n < 1:
        raise MalformedInput("n must be >= 1")
    if len(pt.domains) > max_domains:
        from .errors import SizeLimit

        raise SizeLimit(f"partition tree has {len(pt.domains)} domains")
    # subtrees reaching level >= n cannot satisfy the bound, so stop at n
    top = min(pt.M, n)
    polys = {}
    for m in range(top, -1, -1):
        for r in pt.roots(m):
            r = int(r)
            f = np.zeros(n, dtype=object)
            if m < n:
                f[m] = 1
            prod = np.zeros(n, dtype=object)
            prod[0] = 1
            if m < top:
                for child in pt.children(m, r):
                    g = polys[child]
                    one_plus = g.copy()
                    one_plus[0] += 1
                    prod = _poly_mul(prod, one_plus, n)
            prod[0] -= 1
            polys[(m, r)] = f + prod
    return int(sum(polys[(0, int(pt.roots(0)[0]))]))


def enumerate_partitions_brute(pt: PartitionTree, n: int, limit: int = 20) -> int:
    """Oracle for :func:`enumerate_partitions` by listing subsets of domains."""
    from itertools import combinations

    top = min(pt.M, n)
    doms = [(m, int(r)) for m in range(top + 1) for r in pt.roots(m)]
    if len(doms) > limit:
        from .errors import SizeLimit

        raise SizeLimit("too many domains for brute force")
    root = doms[0]
    rest = doms[1:]
    count = 0
    for k in range(len(rest) + 1):
        for combo in combinations(rest, k):
            chosen = set(combo) | {root}
            if any(pt.parent_domain(*d) not in chosen for d in combo):
                continue
            leaves = [d for d in chosen if not any(c in chosen for c in pt.children(*d))]
            if sum(m for m, _ in leaves) < n:
                count += 1
    return count


def subtree_count_bound(n: int) -> float:
    """``(8e)**n``, the bound on subtrees counted by :func:`enumerate_partitions`."""
    return (8 * math.e) ** n
