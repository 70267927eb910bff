"""Instance generators, random measures and the text file formats.

Tree files hold one ``<id> <parent>`` pair per line with ``-`` for the root;
weight files hold ``<id> <alpha> <sigma>``; measure files ``<id> <value>``.
Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedInput, MalformedTree
from .metrics import distance_context
from .nets import order_distance_many
from .tree import RootedTree, build_tree, tree_from_parents
from .weights import WeightedTree

GENERATORS = ("binary", "chain", "random")
PROFILES = ("corollary", "constant", "random")


@dataclass(frozen=True)
class InstanceSpec:
    generator: str = "binary"
    depth: int = 3
    size: int = 16
    profile: str = "corollary"
    q: float = 2.0
    seed: int = 0
    max_children: int = 3
    tree_file: str | None = None
    weights_file: str | None = None


def binary_tree(depth: int) -> RootedTree:
    n = 2 ** (depth + 1) - 1
    return tree_from_parents([-1] + [(i - 1) // 2 for i in range(1, n)])


def chain_tree(size: int) -> RootedTree:
    return tree_from_parents([-1] + list(range(size - 1)))


def random_tree(size: int, rng, max_children: int = 3) -> RootedTree:
    """Uniform attachment to nodes that still have fewer than ``max_children`` children."""
    parents = [-1]
    kids = [0]
    open_nodes = [0]
    for v in range(1, size):
        p = open_nodes[int(rng.integers(len(open_nodes)))]
        parents.append(p)
        kids[p] += 1
        kids.append(0)
        if kids[p] >= max_children:
            open_nodes.remove(p)
        open_nodes.append(v)
    return tree_from_parents(parents)


def corollary_weights(tree: RootedTree, q: float = 2.0) -> WeightedTree:
    """``sigma = 1`` and ``alpha(t) = 1 / (|t| + 1)``."""
    return WeightedTree(tree, 1.0 / (tree.depth + 1.0), np.ones(tree.node_count), q)


def random_weights(tree: RootedTree, rng, q: float = 2.0) -> WeightedTree:
    """alpha uniform on [0.2, 1]; sigma shrinks by a factor in [0.6, 1] per edge."""
    n = tree.node_count
    alpha = rng.uniform(0.2, 1.0, n)
    factor = rng.uniform(0.6, 1.0, n)
    sigma = np.ones(n)
    for nodes in tree.levels[1:]:
        sigma[nodes] = sigma[tree.parent[nodes]] * factor[nodes]
    return WeightedTree(tree, alpha, sigma, q)


def generate(spec: InstanceSpec) -> WeightedTree:
    rng = np.random.default_rng(spec.seed)
    if spec.tree_file:
        tree = read_tree(spec.tree_file)
    elif spec.generator == "binary":
        tree = binary_tree(spec.depth)
    elif spec.generator == "chain":
        tree = chain_tree(spec.size)
    elif spec.generator == "random":
        tree = random_tree(spec.size, rng, spec.max_children)
    else:
        raise MalformedInput(f"unknown generator {spec.generator!r}")
    if spec.weights_file:
        return read_weights(spec.weights_file, tree, spec.q)
    if spec.profile == "corollary":
        return corollary_weights(tree, spec.q)
    if spec.profile == "constant":
        n = tree.node_count
        return WeightedTree(tree, np.ones(n), np.ones(n), spec.q)
    if spec.profile == "random":
        return random_weights(tree, rng, spec.q)
    raise MalformedInput(f"unknown weight profile {spec.profile!r}")


def corollary_facts(wt: WeightedTree) -> list:
    """Level counts and tail distances of the corollary instance.

    For each k: ``#T_k < 2**(k+1)`` and, with ``K`` the depth,
    ``max_s d(T_k, s)**2 <= sum_{j=k+1..K} (j+1)**-2 <= 1/(k+1)``.
    The distance to T_k is measured through the ancestor at depth k.
    """
    tree = wt.tree
    ctx = distance_context(wt, reduced=False)
    K = tree.max_depth
    s = np.arange(tree.node_count)
    rows = []
    for k in range(K + 1):
        count = int(np.sum(tree.depth <= k))
        deep = s[tree.depth > k]
        if deep.size:
            anc = tree.ancestor_at_depth(deep, np.full(deep.size, k))
            worst = float(np.max(order_distance_many(ctx, anc, deep)) ** 2)
        else:
            worst = 0.0
        tail = float(sum((j + 1.0) ** -2 for j in range(k + 1, K + 1)))
        rows.append({
            "k": k, "count": count, "count_ok": count < 2 ** (k + 1),
            "tail": worst, "tail_sum": tail,
            "tail_ok": worst <= tail * (1 + 1e-12) and tail <= 1.0 / (k + 1),
        })
    return rows


# -- file formats -------------------------------------------------------------


def _lines(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc}") from exc
    for no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if line and not line.startswith("#"):
            yield no, line.split()


def _int(tok, path, no):
    try:
        return int(tok)
    except ValueError:
        raise MalformedInput(f"{path}:{no}: expected an integer id, got {tok!r}") from None


def read_tree(path) -> RootedTree:
    pairs = []
    for no, parts in _lines(path):
        if len(parts) != 2:
            raise MalformedInput(f"{path}:{no}: expected '<id> <parent-or->'")
        node = _int(parts[0], path, no)
        par = None if parts[1] == "-" else _int(parts[1], path, no)
        pairs.append((node, par))
    try:
        return build_tree(pairs)
    except MalformedTree as exc:
        raise MalformedInput(f"{path}: {exc}") from exc


def write_tree(tree: RootedTree, path) -> None:
    lab = tree.labels
    lines = []
    for v in tree.preorder:
        p = tree.parent[v]
        lines.append(f"{lab[v]} {'-' if p < 0 else lab[p]}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_weights(path, tree: RootedTree, q: float) -> WeightedTree:
    n = tree.node_count
    alpha = np.full(n, np.nan)
    sigma = np.full(n, np.nan)
    for no, parts in _lines(path):
        if len(parts) != 3:
            raise MalformedInput(f"{path}:{no}: expected '<id> <alpha> <sigma>'")
        node = _int(parts[0], path, no)
        if node not in tree.index_of:
            raise MalformedInput(f"{path}:{no}: unknown node {node}")
        try:
            a, s = float(parts[1]), float(parts[2])
        except ValueError:
            raise MalformedInput(f"{path}:{no}: weights must be decimal numbers") from None
        v = tree.index_of[node]
        alpha[v], sigma[v] = a, s
    if np.isnan(alpha).any():
        missing = [tree.labels[v] for v in np.nonzero(np.isnan(alpha))[0][:5]]
        raise MalformedInput(f"{path}: no weights for nodes {missing}")
    return WeightedTree(tree, alpha, sigma, q)


def write_weights(wt: WeightedTree, path) -> None:
    lab = wt.tree.labels
    lines = [f"{lab[v]} {float(wt.alpha[v])!r} {float(wt.sigma[v])!r}" for v in wt.tree.preorder]
    Path(path).write_text("\n".join(lines) + "\n")


def read_measure(path, tree: RootedTree) -> np.ndarray:
    mu = np.zeros(tree.node_count)
    for no, parts in _lines(path):
        if len(parts) != 2:
            raise MalformedInput(f"{path}:{no}: expected '<id> <value>'")
        node = _int(parts[0], path, no)
        if node not in tree.index_of:
            raise MalformedInput(f"{path}:{no}: unknown node {node}")
        try:
            mu[tree.index_of[node]] += float(parts[1])
        except ValueError:
            raise MalformedInput(f"{path}:{no}: bad value {parts[1]!r}") from None
    return mu


def random_measure(tree: RootedTree, rng, kind: str | None = None) -> np.ndarray:
    """A random point of the l1 unit sphere of one of four shapes.

    ``atoms``: a few signed point masses; ``dense``: Laplace noise everywhere;
    ``subtree``: mass inside one random subtree; ``path``: mass on one root path.
    """
    n = tree.node_count
    kinds = ("atoms", "dense", "subtree", "path")
    kind = kind or kinds[int(rng.integers(len(kinds)))]
    mu = np.zeros(n)
    if kind == "atoms":
        k = int(rng.integers(1, min(8, n) + 1))
        idx = rng.choice(n, size=k, replace=False)
        mu[idx] = rng.normal(size=k)
    elif kind == "dense":
        mu = rng.laplace(size=n)
    elif kind == "subtree":
        v = int(rng.integers(n))
        nodes = tree.preorder[tree.tin[v]:tree.tout[v]]
        mu[nodes] = rng.exponential(size=len(nodes)) * rng.choice([-1.0, 1.0], size=len(nodes))
    elif kind == "path":
        v = int(rng.integers(n))
        path = []
        while v >= 0:
            path.append(v)
            v = int(tree.parent[v])
        mu[path] = rng.normal(size=len(path))
    else:
        raise MalformedInput(f"unknown measure kind {kind!r}")
    total = np.abs(mu).sum()
    if total == 0:
        mu[int(rng.integers(n))] = 1.0
        total = 1.0
    # a radius in (0, 1] keeps the point inside the unit ball
    return mu / total * float(rng.uniform(0.5, 1.0))


def measure_suite(tree: RootedTree, count: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [random_measure(tree, rng) for _ in range(count)]
