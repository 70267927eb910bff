import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings

from treentropy.errors import NotComparable
from treentropy.metrics import (
    distance_context,
    equiv,
    full_distance,
    full_distance_matrix,
    localized_distance,
    localized_distance_matrix,
    localized_distance_min_form,
    order_distance,
    order_distance_matrix,
)
from treentropy.weights import WeightedTree, dyadic_reduction, normalize_c0

from conftest import chain, star, weighted_trees
import oracles


def ctx_of(tree, alpha, sigma, q=2.0):
    return distance_context(WeightedTree(tree, np.asarray(alpha, float), np.asarray(sigma, float), q))


def test_order_distance_examples():
    c = ctx_of(chain(3), [1, 1, 1], [1, 1, 1])
    assert order_distance(c, 2, 2) == 0
    assert order_distance(c, 0, 2) == pytest.approx(math.sqrt(2))
    c = ctx_of(chain(3), [1, 1, 1], [1, 1, 0.5])
    assert order_distance(c, 0, 2) == pytest.approx(1.0)
    with pytest.raises(NotComparable):
        order_distance(c, 2, 0)


def test_full_distance_examples():
    c = ctx_of(star(2), [1, 1, 1], [1, 1, 1])
    assert full_distance(c, 1, 2) == pytest.approx(1.0)
    assert full_distance(c, 1, 1) == 0
    assert full_distance(c, 0, 1) == order_distance(c, 0, 1)


def test_localized_distance_examples():
    c = ctx_of(chain(3), [1, 1, 1], [1, 0.5, 0.5])
    assert localized_distance(c, 0, 2) == pytest.approx(math.sqrt(2) / 2)
    assert localized_distance(c, 1, 2) == pytest.approx(0.5)
    s = ctx_of(star(2), [1, 1, 1], [1, 1, 1])
    assert localized_distance(s, 1, 2) == math.inf
    # single level set: d_I agrees with d on branches
    u = ctx_of(chain(4), [1, 2, 0.5, 1], [1, 1, 1, 1])
    for t in range(4):
        for x in range(t, 4):
            assert localized_distance(u, t, x) == pytest.approx(order_distance(u, t, x))


def test_equiv():
    lp = dyadic_reduction(WeightedTree(chain(2), np.ones(2), np.array([1.0, 0.5]), 2.0))
    assert equiv(lp, 0, 0) and not equiv(lp, 0, 1)
    lp = dyadic_reduction(WeightedTree(star(3), np.ones(4), np.full(4, 0.7), 2.0))
    assert all(equiv(lp, a, b) for a in range(4) for b in range(4))


def test_unreduced_context_uses_raw_sigma():
    wt = WeightedTree(chain(2), np.ones(2), np.array([1.0, 0.3]), 2.0)
    assert order_distance(distance_context(wt, reduced=False), 0, 1) == pytest.approx(0.3)
    assert order_distance(distance_context(wt), 0, 1) == pytest.approx(0.5)


@settings(max_examples=40, deadline=None)
@given(weighted_trees(max_size=12))
def test_matrices_match_oracle(wt):
    par = list(wt.tree.parent)
    ctx = distance_context(wt)
    sh = ctx.lp.sigma_hat
    n = len(par)
    D, F, L = order_distance_matrix(ctx), full_distance_matrix(ctx), localized_distance_matrix(ctx)
    for t in range(n):
        for s in range(n):
            f = oracles.d_full(par, wt.alpha, sh, wt.q, t, s)
            assert F[t, s] == pytest.approx(f, rel=1e-12, abs=1e-14)
            l = oracles.d_local(par, wt.alpha, wt.sigma, wt.q, t, s)
            if oracles.is_anc(par, t, s):
                assert D[t, s] == pytest.approx(oracles.d(par, wt.alpha, sh, wt.q, t, s), rel=1e-12, abs=1e-14)
                assert L[t, s] == pytest.approx(l, rel=1e-12, abs=1e-14)
                assert L[t, s] <= D[t, s] * (1 + 1e-12)
            else:
                assert D[t, s] == math.inf and L[t, s] == math.inf


@settings(max_examples=40, deadline=None)
@given(weighted_trees(max_size=12))
def test_min_form_agrees(wt):
    ctx = distance_context(wt)
    n = wt.tree.node_count
    for t in range(n):
        for s in range(n):
            a = localized_distance(ctx, t, s)
            b = localized_distance_min_form(ctx, t, s)
            if math.isinf(a):
                assert math.isinf(b)
            else:
                assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


@settings(max_examples=15, deadline=None)
@given(weighted_trees(min_size=2, max_size=40))
def test_metric_axioms(wt):
    F = full_distance_matrix(distance_context(wt))
    n = F.shape[0]
    assert np.allclose(F, F.T) and np.all(np.diag(F) == 0)
    off = ~np.eye(n, dtype=bool)
    assert np.all(F[off] > 0)
    # F[a, c] <= F[a, b] + F[b, c] for all triples
    via = F[:, :, None] + F[None, :, :]
    assert np.all(F[:, None, :] <= via * (1 + 1e-12) + 1e-15)


@settings(max_examples=30, deadline=None)
@given(weighted_trees(max_size=10))
def test_alpha_homogeneity(wt):
    F = full_distance_matrix(distance_context(wt))
    G = full_distance_matrix(distance_context(normalize_c0(wt, 8.0)))
    factor = 8.0 ** (-(1 - 1 / wt.q))
    assert np.allclose(G, F * factor, rtol=1e-12, atol=0)
