"""Branch distances on weighted trees.

``d(t, s)`` for ``t <= s`` is ``max_{v in (t, s]} (P(v) - P(t))**(1/q) * sig(v)``
where ``P`` is the root-path prefix sum of ``alpha**q``.  The localized variant
keeps only the nodes of ``(t, s]`` in the same level set as ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NotComparable
from .tree import gca, is_ancestor, is_ancestor_many
from .weights import LevelPartition, WeightedTree, dyadic_reduction


@dataclass(frozen=True, eq=False)
class DistanceContext:
    """Distance queries over one level partition.

    ``sigma`` is the weight entering ``d``: ``sigma_hat`` by default, or the
    raw ``sigma`` of the base tree when built with ``reduced=False``.  The
    localized distance always uses ``sigma_hat``.
    """

    lp: LevelPartition
    sigma: np.ndarray

    @property
    def tree(self):
        return self.lp.tree

    @property
    def q(self):
        return self.lp.q

    @property
    def prefix(self) -> np.ndarray:
        return self.lp.prefix

    @cached_property
    def _lam_parent_prefix(self) -> np.ndarray:
        """``P(parent(lam(s)))``, zero when ``lam(s)`` is the root."""
        par = self.tree.parent[self.lp.lam]
        return np.where(par >= 0, self.prefix[np.maximum(par, 0)], 0.0)


def distance_context(source, reduced: bool = True) -> DistanceContext:
    """Build a context from a :class:`WeightedTree` or :class:`LevelPartition`."""
    lp = dyadic_reduction(source) if isinstance(source, WeightedTree) else source
    sigma = lp.sigma_hat if reduced else lp.base.sigma
    return DistanceContext(lp=lp, sigma=sigma)


def order_distance(ctx: DistanceContext, t, s) -> float:
    tree = ctx.tree
    if not is_ancestor(tree, t, s):
        raise NotComparable(f"{t} is not an ancestor of {s}")
    t, s = int(t), int(s)
    P, q = ctx.prefix, ctx.q
    best = 0.0
    v = s
    while v != t:
        best = max(best, (P[v] - P[t]) ** (1.0 / q) * ctx.sigma[v])
        v = int(tree.parent[v])
    return float(best)


def full_distance(ctx: DistanceContext, t, s) -> float:
    """Extension of ``d`` to all pairs through the greatest common ancestor."""
    w = gca(ctx.tree, t, s)
    return max(order_distance(ctx, w, t), order_distance(ctx, w, s))


def localized_distance(ctx: DistanceContext, t, s) -> float:
    t = ctx.tree.check_node(t)
    s = ctx.tree.check_node(s)
    return float(localized_distance_many(ctx, np.array([t]), np.array([s]))[0])


def localized_distance_many(ctx: DistanceContext, t, s) -> np.ndarray:
    """Vectorized localized distance; ``inf`` where t is not an ancestor of s."""
    t = np.asarray(t, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    tree, lp = ctx.tree, ctx.lp
    P = ctx.prefix
    lam = lp.lam[s]
    base = np.where(
        tree.depth[t] >= tree.depth[lam], P[t], ctx._lam_parent_prefix[s]
    )
    mass = np.maximum(P[s] - base, 0.0)
    out = lp.sigma_hat[s] * mass ** (1.0 / ctx.q)
    return np.where(is_ancestor_many(tree, t, s), out, np.inf)


def localized_distance_min_form(ctx: DistanceContext, t, s) -> float:
    """Cross-check of the localized distance as a minimum of two branch distances.

    Uses ``min(d(parent(lam(s)), s), d(t, s))`` with ``d`` built on
    ``sigma_hat``; when ``lam(s)`` is the root only ``d(t, s)`` remains.
    """
    if not is_ancestor(ctx.tree, t, s):
        return float("inf")
    hat = ctx if ctx.sigma is ctx.lp.sigma_hat else distance_context(ctx.lp)
    top = int(ctx.tree.parent[ctx.lp.lam[s]])
    direct = order_distance(hat, t, s)
    if top < 0:
        return direct
    return min(order_distance(hat, top, s), direct)


def equiv(lp: LevelPartition, t, s) -> bool:
    return bool(lp.level[lp.tree.check_node(t)] == lp.level[lp.tree.check_node(s)])


def order_distance_matrix(ctx: DistanceContext) -> np.ndarray:
    """``D[t, s] = d(t, s)`` for ``t <= s`` and ``inf`` elsewhere."""
    tree = ctx.tree
    n = tree.node_count
    P, q = ctx.prefix, ctx.q
    D = np.full((n, n), np.inf)
    D[np.arange(n), np.arange(n)] = 0.0
    nodes_all = np.arange(n)
    for nodes in tree.levels[1:]:
        par = tree.parent[nodes]
        gap = np.clip(P[nodes][None, :] - P[:, None], 0.0, None)
        step = gap ** (1.0 / q) * ctx.sigma[nodes][None, :]
        cand = np.maximum(D[:, par], step)
        strict = is_ancestor_many(tree, nodes_all[:, None], nodes[None, :])
        strict &= nodes_all[:, None] != nodes[None, :]
        D[:, nodes] = np.where(strict, cand, D[:, nodes])
    return D


def full_distance_matrix(ctx: DistanceContext) -> np.ndarray:
    """All-pairs extended distance through greatest common ancestors."""
    tree = ctx.tree
    n = tree.node_count
    D = order_distance_matrix(ctx)
    # gca[t, s]: walk the deeper argument up until comparable
    anc = is_ancestor_many(tree, np.arange(n)[:, None], np.arange(n)[None, :])
    up = np.broadcast_to(np.arange(n)[:, None], (n, n)).copy()
    other = np.broadcast_to(np.arange(n)[None, :], (n, n))
    while True:
        done = anc[up, other]
        if done.all():
            break
        up = np.where(done, up, tree.parent[up])
    w = up
    idx = np.arange(n)
    left = D[w, np.broadcast_to(idx[:, None], (n, n))]
    right = D[w, np.broadcast_to(idx[None, :], (n, n))]
    return np.maximum(left, right)


def localized_distance_matrix(ctx: DistanceContext) -> np.ndarray:
    n = ctx.tree.node_count
    t, s = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return localized_distance_many(ctx, t.ravel(), s.ravel()).reshape(n, n)
