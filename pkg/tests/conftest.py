import numpy as np
import pytest
from hypothesis import strategies as st

from treentropy.generate import binary_tree, corollary_weights
from treentropy.tree import tree_from_parents
from treentropy.weights import WeightedTree


@st.composite
def parent_lists(draw, min_size=1, max_size=12):
    n = draw(st.integers(min_size, max_size))
    return [-1] + [draw(st.integers(0, i - 1)) for i in range(1, n)]


@st.composite
def weighted_trees(draw, min_size=1, max_size=12, q=None, alpha_range=(0.1, 2.0)):
    par = draw(parent_lists(min_size, max_size))
    n = len(par)
    tree = tree_from_parents(par)
    alpha = np.array(draw(st.lists(st.floats(*alpha_range), min_size=n, max_size=n)))
    shrink = np.array(draw(st.lists(st.floats(0.3, 1.0), min_size=n, max_size=n)))
    sigma = np.ones(n) * draw(st.floats(0.2, 4.0))
    for v in tree.preorder[1:]:
        sigma[v] = sigma[tree.parent[v]] * shrink[v]
    qq = q if q is not None else draw(st.sampled_from([1.25, 1.5, 1.75, 2.0]))
    return WeightedTree(tree, alpha, sigma, qq)


def chain(n):
    return tree_from_parents([-1] + list(range(n - 1)))


def star(k):
    return tree_from_parents([-1] + [0] * k)


@pytest.fixture(scope="session")
def corollary14():
    return corollary_weights(binary_tree(14), 2.0)


@pytest.fixture(scope="session")
def corollary_chain14(corollary14):
    from treentropy.metrics import distance_context
    from treentropy.partitions import construct_root_chain, partition_from_roots

    ctx = distance_context(corollary14)
    ch = construct_root_chain(ctx, 64)
    return ctx, ch, partition_from_roots(ctx, ch)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
