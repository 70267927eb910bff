"""Nested root sets and the refining tree partitions they induce.

Level m of the chain is built from level m-1 by adding the cheapest set of
new roots that turns it into an eps_m-order net for the localized distance:
fewest roots first, then smallest total depth.  The minimum is found exactly
by :func:`treentropy.nets.min_order_net`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InfeasibleNet, InvariantViolation, MalformedInput
from .metrics import DistanceContext, localized_distance_many
from .nets import (
    coverage_depth,
    deepest_member,
    epsilon_schedule,
    is_order_net,
    min_order_net,
    order_net_gaps,
)
from .weights import REL_SLACK


@dataclass(frozen=True, eq=False)
class RootChain:
    """Root sets ``R_0 = {root} <= R_1 <= ... <= R_M`` as sorted index arrays.

    ``eps[m]`` is the radius for level m (``eps[0]`` is ``nan``).
    ``property4`` is ``"verified"`` for exact builds and ``"unverified"`` for
    greedy ones.
    """

    levels: tuple
    q: float
    eps: np.ndarray
    mode: str
    property4: str

    @property
    def M(self) -> int:
        return len(self.levels) - 1

    def added(self, m: int) -> np.ndarray:
        """Roots new at level m."""
        if m == 0:
            return self.levels[0]
        return np.setdiff1d(self.levels[m], self.levels[m - 1])


def _greedy_net(ctx, cdepth, forced):
    """Shallowest uncovered node first; cover it by its highest covering ancestor."""
    tree = ctx.tree
    selected = forced.copy()
    for k in range(tree.max_depth + 1):
        owner = deepest_member(tree, selected)
        nodes = tree.levels[k]
        gap = tree.depth[np.maximum(owner[nodes], 0)]
        miss = (owner[nodes] < 0) | (gap < cdepth[nodes])
        if miss.any():
            s = nodes[miss]
            selected[tree.ancestor_at_depth(s, cdepth[s])] = True
    return selected


def construct_root_chain(ctx: DistanceContext, M: int, mode: str = "exact") -> RootChain:
    if M < 0:
        raise MalformedInput("M must be non-negative")
    if mode not in ("exact", "greedy"):
        raise MalformedInput(f"unknown mode {mode!r}")
    tree = ctx.tree
    q = ctx.q
    eps = np.concatenate([[np.nan], epsilon_schedule(np.arange(1, M + 1), q)]) if M else np.array([np.nan])
    current = np.zeros(tree.node_count, dtype=bool)
    current[tree.root] = True
    levels = [np.array([tree.root], dtype=np.int64)]
    for m in range(1, M + 1):
        e = float(eps[m])
        prev = current
        if not is_order_net(ctx, np.nonzero(prev)[0], e):
            cdepth = coverage_depth(ctx, e, "dI")
            if mode == "exact":
                current = min_order_net(tree, cdepth, forced=prev)
            else:
                current = _greedy_net(ctx, cdepth, prev)
            new = int(current.sum() - prev.sum())
            if new > 2 ** m:
                raise InfeasibleNet(
                    f"level {m}: {new} new roots needed, at most {2 ** m} allowed"
                    + (" (greedy)" if mode == "greedy" else "")
                )
        levels.append(np.nonzero(current)[0].astype(np.int64))
    return RootChain(
        levels=tuple(levels),
        q=q,
        eps=eps,
        mode=mode,
        property4="verified" if mode == "exact" else "unverified",
    )


@dataclass
class ChainReport:
    """Per-level results of the root chain checks."""

    rows: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_root_chain(ctx: DistanceContext, chain: RootChain, replacement=True) -> ChainReport:
    """Check nesting, size, the net property and (optionally) minimality.

    Minimality is tested literally: for each new root tau, the set with tau
    swapped for its parent must fail to be an order net.
    """
    tree = ctx.tree
    rep = ChainReport()
    if list(chain.levels[0]) != [tree.root]:
        rep.violations.append(("nested", 0, "R_0 is not the root"))
    for m in range(1, chain.M + 1):
        R, Rp = chain.levels[m], chain.levels[m - 1]
        e = float(chain.eps[m])
        nested = np.isin(Rp, R).all()
        size_ok = len(R) <= 2 ** (m + 1)
        net_ok = is_order_net(ctx, R, e)
        swaps_ok = None
        if replacement:
            swaps_ok = True
            Rset = set(R.tolist())
            for tau in chain.added(m):
                swapped = (Rset - {int(tau)}) | {int(tree.parent[tau])}
                if is_order_net(ctx, sorted(swapped), e):
                    swaps_ok = False
                    rep.violations.append(("minimal", m, int(tau)))
        if not nested:
            rep.violations.append(("nested", m, None))
        if not size_ok:
            rep.violations.append(("size", m, len(R)))
        if not net_ok:
            rep.violations.append(("net", m, None))
        rep.rows.append(
            {"m": m, "size": len(R), "nested": bool(nested), "size_ok": size_ok,
             "net": net_ok, "minimal": swaps_ok}
        )
    return rep


@dataclass(frozen=True, eq=False)
class PartitionTree:
    """Domains ``B_{r,m}`` of every level, with links to their parent domains.

    ``owner[m, s]`` is the root of the level-m domain containing s.  Domains
    are addressed as ``(m, r)`` pairs.
    """

    chain: RootChain
    owner: np.ndarray
    tree: object = field(repr=False, default=None)

    @property
    def M(self) -> int:
        return self.chain.M

    def roots(self, m: int) -> np.ndarray:
        return self.chain.levels[m]

    def members(self, m: int, r: int) -> np.ndarray:
        return np.nonzero(self.owner[m] == r)[0]

    def parent_domain(self, m: int, r: int):
        if m == 0:
            return None
        return (m - 1, int(self.owner[m - 1, r]))

    def domain_of(self, m: int, s: int):
        return (m, int(self.owner[m, s]))

    @cached_property
    def domains(self) -> list:
        return [(m, int(r)) for m in range(self.M + 1) for r in self.chain.levels[m]]

    def children(self, m: int, r: int) -> list:
        if m >= self.M:
            return []
        roots = self.chain.levels[m + 1]
        return [(m + 1, int(c)) for c in roots[self.owner[m, roots] == r]]

    def sizes(self, m: int) -> np.ndarray:
        """Node count of each domain at level m, indexed by root."""
        return np.bincount(self.owner[m], minlength=self.owner.shape[1])


def partition_from_roots(ctx: DistanceContext, chain: RootChain) -> PartitionTree:
    tree = ctx.tree
    owner = np.empty((chain.M + 1, tree.node_count), dtype=np.int64)
    for m, R in enumerate(chain.levels):
        member = np.zeros(tree.node_count, dtype=bool)
        member[R] = True
        owner[m] = deepest_member(tree, member)
    return PartitionTree(chain=chain, owner=owner, tree=tree)


def check_partition_tree(ctx: DistanceContext, pt: PartitionTree) -> list:
    """Violations of the partition invariants (empty list when all hold)."""
    out = []
    n = ctx.tree.node_count
    s = np.arange(n)
    for m in range(pt.M + 1):
        own = pt.owner[m]
        if np.any(own < 0):
            out.append(("cover", m))
        if m >= 1:
            # refinement: a node's level-(m-1) domain is its root's level-(m-1) domain
            if np.any(pt.owner[m - 1, own] != pt.owner[m - 1]):
                out.append(("refine", m))
            d = localized_distance_many(ctx, own, s)
            if np.any(~(d < pt.chain.eps[m])):
                out.append(("radius", m))
        if len(pt.chain.levels[m]) != len(np.unique(own)):
            out.append(("count", m))
    return out


@dataclass
class CrucialReport:
    rows: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [r for r in self.rows if not r["ok"]]

    @property
    def passed(self) -> bool:
        return not self.violations


def crucial_lhs(ctx: DistanceContext, r, tau) -> np.ndarray:
    """``sigma_hat(tau)^q * sum of alpha^q over v in (r, parent(tau)], v ~ tau``."""
    tree, lp = ctx.tree, ctx.lp
    r = np.asarray(r, dtype=np.int64)
    tau = np.asarray(tau, dtype=np.int64)
    P = ctx.prefix
    lam = lp.lam[tau]
    par = tree.parent[tau]
    hi = P[par]
    lam_par = tree.parent[lam]
    lo = np.where(
        tree.depth[r] >= tree.depth[lam],
        P[r],
        np.where(lam_par >= 0, P[np.maximum(lam_par, 0)], 0.0),
    )
    return lp.sigma_hat[tau] ** ctx.q * np.maximum(hi - lo, 0.0)


def check_crucial(ctx: DistanceContext, chain: RootChain, pt: PartitionTree) -> CrucialReport:
    """Check the subtraction inequality for every new root at levels m >= 2.

    Each new root tau at level m lies in the level-(m-1) domain of a unique
    earlier root r; the inequality bounds the localized mass strictly between
    r and tau by ``eps_{m-1}^q - eps_m^q``.
    """
    if chain.property4 != "verified":
        raise InvariantViolation("property4", "crucial check needs an exact root chain")
    q = ctx.q
    rep = CrucialReport()
    for m in range(2, chain.M + 1):
        taus = chain.added(m)
        if taus.size == 0:
            continue
        rs = pt.owner[m - 1, taus]
        lhs = crucial_lhs(ctx, rs, taus)
        rhs = chain.eps[m - 1] ** q - chain.eps[m] ** q
        ok = lhs <= rhs * (1 + REL_SLACK)
        for r, t, lv, good in zip(rs, taus, lhs, ok):
            rep.rows.append(
                {"m": m, "r": int(r), "tau": int(t), "lhs": float(lv),
                 "rhs": float(rhs), "slack": float(rhs - lv), "ok": bool(good)}
            )
    return rep
