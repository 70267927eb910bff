"""Weights on trees, the summation operator V and its dyadic localization W."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import InvariantViolation, MalformedInput
from .tree import RootedTree

REL_SLACK = 1e-9


def conjugate_exponent(q: float) -> float:
    """Return ``1 - 1/q``, the reciprocal of the conjugate exponent q'."""
    return 1.0 - 1.0 / q


def as_vector(tree: RootedTree, mu) -> np.ndarray:
    """Dense float vector from an array or a ``{node: value}`` mapping."""
    n = tree.node_count
    if isinstance(mu, dict):
        out = np.zeros(n)
        for k, v in mu.items():
            out[tree.check_node(k)] += float(v)
        return out
    out = np.asarray(mu, dtype=float)
    if out.shape != (n,):
        raise MalformedInput(f"vector has shape {out.shape}, tree has {n} nodes")
    return out


def lq_norm(v, q: float) -> float:
    v = np.abs(np.asarray(v, dtype=float))
    if q == 1:
        return float(v.sum())
    return float(np.sum(v ** q) ** (1.0 / q))


def l1_norm(v) -> float:
    return float(np.abs(np.asarray(v, dtype=float)).sum())


@dataclass(frozen=True, eq=False)
class WeightedTree:
    """A rooted tree with positive weights ``alpha`` and ``sigma``.

    ``sigma`` must be non-increasing along every branch and ``q`` must lie in
    ``(1, 2]``.  Violations raise :class:`InvariantViolation` naming the
    broken invariant.
    """

    tree: RootedTree
    alpha: np.ndarray
    sigma: np.ndarray
    q: float

    def __post_init__(self):
        n = self.tree.node_count
        a = np.asarray(self.alpha, dtype=float)
        s = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "q", float(self.q))
        if a.shape != (n,) or s.shape != (n,):
            raise MalformedInput("weight arrays must have one entry per node")
        if not (1.0 < self.q <= 2.0):
            raise InvariantViolation("q-range", f"q={self.q} is outside (1, 2]")
        if not (np.all(np.isfinite(a)) and np.all(a > 0)):
            raise InvariantViolation("alpha-positive", "alpha must be finite and > 0")
        if not (np.all(np.isfinite(s)) and np.all(s > 0)):
            raise InvariantViolation("sigma-positive", "sigma must be finite and > 0")
        par = self.tree.parent
        kids = np.nonzero(par >= 0)[0]
        bad = kids[s[kids] > s[par[kids]]]
        if bad.size:
            v = int(bad[0])
            raise InvariantViolation(
                "sigma-non-increasing",
                f"sigma({self.tree.labels[v]})={s[v]} exceeds its parent's "
                f"{s[par[v]]}",
            )

    @cached_property
    def prefix(self) -> np.ndarray:
        """``P(s) = sum of alpha^q over [root, s]``."""
        return self.tree.root_path_sums(self.alpha ** self.q)


def kappa(wt: WeightedTree) -> float:
    """Norm bound ``max_v P(v)^(1/q) sigma(v)`` for V from l1 to lq."""
    return float(np.max(wt.prefix ** (1.0 / wt.q) * wt.sigma))


def apply_V(wt: WeightedTree, mu) -> np.ndarray:
    """``(V mu)(t) = alpha(t) * sum_{s >= t} sigma(s) mu(s)``."""
    mu = as_vector(wt.tree, mu)
    return wt.alpha * wt.tree.subtree_sums(wt.sigma * mu)


def normalize_c0(wt: WeightedTree, c0: float) -> WeightedTree:
    """Rescale alpha by ``c0**(-(1 - 1/q))``; distances scale by the same factor."""
    if not c0 > 0:
        raise MalformedInput("c0 must be positive")
    factor = c0 ** (-conjugate_exponent(wt.q))
    return WeightedTree(wt.tree, wt.alpha * factor, wt.sigma, wt.q)


def dyadic_level(sigma) -> np.ndarray:
    """Integer ``k`` with ``2**(-k-1) < sigma <= 2**(-k)``, computed exactly.

    The dyadic weight ``2**-k`` then satisfies ``sigma <= 2**-k < 2 * sigma``.
    """
    mant, expo = np.frexp(np.asarray(sigma, dtype=float))
    # sigma = mant * 2**expo with mant in [0.5, 1)
    return np.where(mant == 0.5, 1 - expo, -expo).astype(np.int64)


@dataclass(frozen=True, eq=False)
class LevelPartition:
    """Dyadic reduction of a weighted tree.

    ``level[t] = k`` places t in the level set ``I_k``; ``sigma_hat = 2**-k``.
    ``lam[s]`` is the topmost node of ``I_k`` on the root path of s.
    """

    base: WeightedTree
    level: np.ndarray
    sigma_hat: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)

    @property
    def tree(self) -> RootedTree:
        return self.base.tree

    @property
    def alpha(self) -> np.ndarray:
        return self.base.alpha

    @property
    def q(self) -> float:
        return self.base.q

    def level_sets(self) -> dict:
        return {int(k): np.nonzero(self.level == k)[0] for k in np.unique(self.level)}

    def hat_tree(self) -> WeightedTree:
        """The weighted tree with sigma replaced by ``sigma_hat``."""
        return WeightedTree(self.tree, self.alpha, self.sigma_hat, self.q)

    @cached_property
    def prefix(self) -> np.ndarray:
        return self.base.prefix


def dyadic_reduction(wt: WeightedTree) -> LevelPartition:
    level = dyadic_level(wt.sigma)
    sigma_hat = np.ldexp(1.0, -level)
    tree = wt.tree
    lam = np.arange(tree.node_count, dtype=np.int64)
    for nodes in tree.levels[1:]:
        par = tree.parent[nodes]
        same = level[nodes] == level[par]
        lam[nodes] = np.where(same, lam[par], nodes)
    return LevelPartition(base=wt, level=level, sigma_hat=sigma_hat, lam=lam)


def lambda_of(lp: LevelPartition, s) -> int:
    return int(lp.lam[lp.tree.check_node(s)])


def same_level_subtree_sums(lp: LevelPartition, values) -> np.ndarray:
    """``out[t] = sum of values over s >= t with level(s) == level(t)``."""
    tree = lp.tree
    acc = np.array(values, dtype=float, copy=True)
    for nodes in reversed(tree.levels[1:]):
        par = tree.parent[nodes]
        keep = lp.level[nodes] == lp.level[par]
        np.add.at(acc, par[keep], acc[nodes[keep]])
    return acc


def apply_W(lp: LevelPartition, mu) -> np.ndarray:
    """Localized operator: ``(W mu)(t) = alpha(t) sigma_hat(t) sum_{s >= t, s ~ t} mu(s)``."""
    mu = as_vector(lp.tree, mu)
    return lp.alpha * lp.sigma_hat * same_level_subtree_sums(lp, mu)


def _path_entries(tree: RootedTree, top):
    """Row/column index pairs ``(t, s)`` for t on ``[top[s], s]``."""
    rows, cols = [], []
    cur = np.arange(tree.node_count, dtype=np.int64)
    active = np.ones(tree.node_count, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        rows.append(cur[idx])
        cols.append(idx)
        stop = cur[idx] == top[idx]
        active[idx[stop]] = False
        cur[idx[~stop]] = tree.parent[cur[idx[~stop]]]
    return np.concatenate(rows), np.concatenate(cols)


def V_matrix(wt: WeightedTree) -> sparse.csc_matrix:
    """Column matrix of V: column s is ``alpha * sigma(s)`` on ``[root, s]``."""
    tree = wt.tree
    top = np.full(tree.node_count, tree.root, dtype=np.int64)
    r, c = _path_entries(tree, top)
    vals = wt.alpha[r] * wt.sigma[c]
    n = tree.node_count
    return sparse.csc_matrix((vals, (r, c)), shape=(n, n))


def W_matrix(lp: LevelPartition) -> sparse.csc_matrix:
    """Column matrix of W: column s is ``alpha * sigma_hat(s)`` on ``[lam(s), s]``."""
    tree = lp.tree
    r, c = _path_entries(tree, lp.lam)
    vals = lp.alpha[r] * lp.sigma_hat[c]
    n = tree.node_count
    return sparse.csc_matrix((vals, (r, c)), shape=(n, n))
