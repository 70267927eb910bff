"""Finite rooted trees with the ancestor order used throughout the package.

Nodes are dense integer indices ``0..n-1``.  Input ids are kept in
``RootedTree.labels`` so file round trips preserve them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import MalformedTree, NotComparable, UnknownNode

CLOSED = "closed"
LEFT_OPEN = "left-open"


@dataclass(frozen=True, eq=False)
class RootedTree:
    """Immutable rooted tree.

    ``parent[v]`` is ``-1`` for the root.  ``children[v]`` keeps input order,
    and ``preorder`` is the root-first traversal with children in that order.
    ``tin``/``tout`` bracket each subtree in ``preorder`` so ancestor tests
    are O(1).
    """

    parent: np.ndarray
    children: tuple
    root: int
    labels: tuple
    preorder: np.ndarray = field(repr=False)
    depth: np.ndarray = field(repr=False)
    tin: np.ndarray = field(repr=False)
    tout: np.ndarray = field(repr=False)

    @property
    def node_count(self) -> int:
        return len(self.parent)

    def __len__(self):
        return len(self.parent)

    @cached_property
    def max_depth(self) -> int:
        return int(self.depth.max())

    @cached_property
    def levels(self) -> list:
        """Nodes grouped by depth; each group in preorder."""
        order = self.preorder
        d = self.depth[order]
        return [order[d == k] for k in range(self.max_depth + 1)]

    @cached_property
    def index_of(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    def check_node(self, v) -> int:
        v = int(v)
        if not 0 <= v < len(self.parent):
            raise UnknownNode(v)
        return v

    def ancestors_table(self):
        """Binary lifting table ``up[k][v]`` = 2**k-th ancestor (or -1)."""
        return self._lifting

    @cached_property
    def _lifting(self):
        up = [self.parent.copy()]
        span = 1
        while span < self.max_depth:
            prev = up[-1]
            nxt = np.where(prev >= 0, prev[np.maximum(prev, 0)], -1)
            up.append(nxt)
            span *= 2
        return up

    def ancestor_at_depth(self, v, d):
        """Vectorised level-ancestor query; ``d`` must not exceed ``depth[v]``."""
        v = np.asarray(v, dtype=np.int64).copy()
        jump = self.depth[v] - np.asarray(d)
        if np.any(jump < 0):
            raise NotComparable("requested depth below node")
        for k, up in enumerate(self._lifting):
            bit = (jump >> k) & 1
            if not bit.any():
                continue
            v = np.where(bit == 1, up[v], v)
        return v

    def subtree_sums(self, values):
        """Return ``out[t] = sum of values over the subtree rooted at t``."""
        acc = np.array(values, dtype=float, copy=True)
        for nodes in reversed(self.levels[1:]):
            np.add.at(acc, self.parent[nodes], acc[nodes])
        return acc

    def root_path_sums(self, values):
        """Return ``out[s] = sum of values over [root, s]``."""
        acc = np.array(values, dtype=float, copy=True)
        for nodes in self.levels[1:]:
            acc[nodes] += acc[self.parent[nodes]]
        return acc


def build_tree(parent_list) -> RootedTree:
    """Build a validated tree from ``(node, parent_or_None)`` pairs.

    Ids that already form ``0..n-1`` are kept as indices; otherwise nodes are
    numbered in input order and the original ids are stored as labels.
    """
    entries = [(node, par) for node, par in parent_list]
    if not entries:
        raise MalformedTree("empty tree")
    ids = [node for node, _ in entries]
    if len(set(ids)) != len(ids):
        raise MalformedTree("duplicate node ids")
    n = len(ids)
    if set(ids) == set(range(n)) and all(isinstance(i, (int, np.integer)) for i in ids):
        index = {i: int(i) for i in ids}
        labels = tuple(range(n))
    else:
        index = {node: i for i, node in enumerate(ids)}
        labels = tuple(ids)

    parent = np.full(n, -1, dtype=np.int64)
    roots = []
    kids = [[] for _ in range(n)]
    for node, par in entries:
        v = index[node]
        if par is None:
            roots.append(v)
            continue
        if par not in index:
            raise MalformedTree(f"parent {par!r} of {node!r} is not a node")
        p = index[par]
        if p == v:
            raise MalformedTree(f"node {node!r} is its own parent")
        parent[v] = p
        kids[p].append(v)
    if len(roots) != 1:
        raise MalformedTree(f"expected exactly one root, found {len(roots)}")
    root = roots[0]

    order = []
    depth = np.zeros(n, dtype=np.int64)
    tin = np.zeros(n, dtype=np.int64)
    tout = np.zeros(n, dtype=np.int64)
    stack = [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            tout[v] = len(order)
            continue
        tin[v] = len(order)
        order.append(v)
        stack.append((v, True))
        for c in reversed(kids[v]):
            depth[c] = depth[v] + 1
            stack.append((c, False))
    if len(order) != n:
        raise MalformedTree("cycle detected or nodes unreachable from the root")

    return RootedTree(
        parent=parent,
        children=tuple(tuple(k) for k in kids),
        root=root,
        labels=labels,
        preorder=np.asarray(order, dtype=np.int64),
        depth=depth,
        tin=tin,
        tout=tout,
    )


def tree_from_parents(parents) -> RootedTree:
    """Shorthand: ``parents[i]`` is the parent index of node ``i`` (``-1``/None for root)."""
    return build_tree(
        (i, None if (p is None or p < 0) else int(p)) for i, p in enumerate(parents)
    )


def order_of(tree: RootedTree, s) -> int:
    return int(tree.depth[tree.check_node(s)])


def is_ancestor(tree: RootedTree, t, s) -> bool:
    """True iff ``t`` lies on the root path of ``s`` (``t == s`` included)."""
    t = tree.check_node(t)
    s = tree.check_node(s)
    return bool(tree.tin[t] <= tree.tin[s] < tree.tout[t])


def is_ancestor_many(tree: RootedTree, t, s):
    t = np.asarray(t)
    s = np.asarray(s)
    return (tree.tin[t] <= tree.tin[s]) & (tree.tin[s] < tree.tout[t])


def order_interval(tree: RootedTree, t, s, kind=CLOSED) -> list:
    """Nodes of ``[t, s]`` (or ``(t, s]``) listed from ``t`` down to ``s``."""
    if not is_ancestor(tree, t, s):
        raise NotComparable(f"{t} is not an ancestor of {s}")
    if kind not in (CLOSED, LEFT_OPEN):
        raise ValueError(f"unknown interval kind {kind!r}")
    path = []
    v = int(s)
    while v != t:
        path.append(v)
        v = int(tree.parent[v])
    if kind == CLOSED:
        path.append(int(t))
    return path[::-1]


def gca(tree: RootedTree, t, s) -> int:
    """Greatest common ancestor."""
    t = tree.check_node(t)
    s = tree.check_node(s)
    while not (tree.tin[t] <= tree.tin[s] < tree.tout[t]):
        t = int(tree.parent[t])
    return t
