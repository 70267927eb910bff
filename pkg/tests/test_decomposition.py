import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treentropy.decomposition import (
    SPLIT_CONSTANT,
    check_essential,
    check_light_partition,
    component_data,
    enumerate_partitions,
    enumerate_partitions_brute,
    essential_tree,
    subtree_count_bound,
    light_partition,
    split_columns,
    split_matrices,
    split_operator,
    w4_bound,
    w4_certificate,
)
from treentropy.errors import EmptyMeasure, MalformedInput, MismatchedPartition, SizeLimit
from treentropy.generate import binary_tree, corollary_weights, measure_suite, random_measure
from treentropy.metrics import distance_context
from treentropy.partitions import construct_root_chain, partition_from_roots
from treentropy.weights import WeightedTree, W_matrix, apply_W, lq_norm

from conftest import weighted_trees


@pytest.fixture(scope="module")
def cor6():
    wt = corollary_weights(binary_tree(6), 2.0)
    ctx = distance_context(wt)
    ch = construct_root_chain(ctx, 64)
    return ctx, partition_from_roots(ctx, ch)


def heavy_oracle(pt, mu, n):
    out = set()
    for m in range(pt.M + 1):
        for r in pt.roots(m):
            if np.abs(mu[pt.members(m, int(r))]).sum() > m / n:
                out.add((m, int(r)))
    return out


def test_point_mass_n1(cor6):
    ctx, pt = cor6
    mu = np.zeros(ctx.tree.node_count)
    mu[37] = 1.0
    et = essential_tree(pt, mu, 1)
    assert et.signature() == ((0,),)
    assert et.terminal == ((0, 0),)
    light = light_partition(pt, et)
    assert sorted(light.root.tolist()) == sorted(pt.roots(1).tolist())
    assert set(light.level.tolist()) == {1}


def test_errors(cor6):
    ctx, pt = cor6
    n = ctx.tree.node_count
    with pytest.raises(EmptyMeasure):
        essential_tree(pt, np.zeros(n), 4)
    with pytest.raises(MalformedInput):
        essential_tree(pt, np.ones(3), 4)
    with pytest.raises(MalformedInput):
        essential_tree(pt, np.eye(1, n, 0).ravel(), 200)
    mu1 = random_measure(ctx.tree, np.random.default_rng(1))
    mu2 = random_measure(ctx.tree, np.random.default_rng(2))
    light = light_partition(pt, essential_tree(pt, mu1, 8))
    with pytest.raises(MismatchedPartition):
        w4_certificate(ctx.lp, light, mu2, 8)
    with pytest.raises(MismatchedPartition):
        w4_certificate(ctx.lp, light, mu1, 4)
    norm, bound, ok = w4_certificate(ctx.lp, light, np.zeros(n), 8)
    assert norm == 0 and ok


def test_w4_bound_value():
    assert w4_bound(16, 2.0) == pytest.approx(0.30028, abs=5e-6)
    assert w4_bound(16, 2.0) == pytest.approx((16 * math.log(2)) ** -0.5, rel=1e-14)
    assert SPLIT_CONSTANT == 3


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_heavy_light_against_definition(cor6, n):
    ctx, pt = cor6
    for mu in measure_suite(ctx.tree, 15, seed=n):
        et = essential_tree(pt, mu, n)
        want = heavy_oracle(pt, mu, n)
        got = {(m, int(r)) for m, h in enumerate(et.heavy) for r in h}
        assert got == want
        # ancestor closed
        for m, r in got:
            if m:
                assert pt.parent_domain(m, r) in got
        term = {(m, r) for (m, r) in got if not any(c in got for c in pt.children(m, r))}
        assert set(et.terminal) == term
        assert check_essential(et) == []
        light = light_partition(pt, et)
        assert check_light_partition(pt, et, light) == []
        # oracle: first light level along each node's chain
        for s in range(ctx.tree.node_count):
            m = next(m for m in range(pt.M + 1) if pt.domain_of(m, s) not in want)
            i = light.domain_of[s]
            assert (int(light.level[i]), int(light.root[i])) == pt.domain_of(m, s)
        for i in range(len(light)):
            assert light.generic[i] == (light.top[i] != light.root[i])
            assert light.top[i] == pt.owner[light.level[i] - 1, light.root[i]]


@pytest.mark.parametrize("n", [4, 16, 64])
def test_split_identity_and_w4(cor6, n):
    ctx, pt = cor6
    lp = ctx.lp
    for mu in measure_suite(ctx.tree, 20, seed=100 + n):
        light = light_partition(pt, essential_tree(pt, mu, n))
        parts = [split_operator(lp, light, mu, k) for k in (1, 2, 3, 4)]
        full = apply_W(lp, mu)
        assert lq_norm(full - sum(parts), 2.0) <= 1e-12 * lq_norm(full, 2.0)
        mats = split_matrices(lp, light)
        for k, (A, v) in enumerate(zip(mats, parts), start=1):
            assert np.allclose(A @ mu, v, atol=1e-13)
            assert np.allclose(split_columns(lp, light, k).toarray(), A)
        assert np.allclose(sum(mats), W_matrix(lp).toarray())
        # degenerate lights have no middle pieces
        deg = ~light.generic[light.domain_of]
        assert np.all(mats[1][:, deg] == 0) and np.all(mats[2][:, deg] == 0)
        norm, bound, ok = w4_certificate(lp, light, mu, n)
        assert ok, (norm, bound)


@settings(max_examples=30, deadline=None)
@given(weighted_trees(min_size=3, max_size=20, alpha_range=(0.05, 0.6)), st.integers(0, 2 ** 31),
       st.sampled_from([1, 2, 3, 5, 8]))
def test_decomposition_random_instances(wt, seed, n):
    ctx = distance_context(wt)
    try:
        ch = construct_root_chain(ctx, max(n, 12))
    except Exception:
        return
    pt = partition_from_roots(ctx, ch)
    mu = random_measure(wt.tree, np.random.default_rng(seed))
    et = essential_tree(pt, mu, n)
    assert check_essential(et) == []
    light = light_partition(pt, et)
    assert check_light_partition(pt, et, light) == []
    parts = sum(split_operator(ctx.lp, light, mu, k) for k in (1, 2, 3, 4))
    assert np.allclose(parts, apply_W(ctx.lp, mu), rtol=1e-12, atol=1e-14)
    assert w4_certificate(ctx.lp, light, mu, n)[2]
    assert component_data(light, ctx, ch.M).passed


def test_component_data_corollary(corollary_chain14):
    ctx, ch, pt = corollary_chain14
    seen_generic = 0
    for n in (4, 16, 64):
        for mu in measure_suite(ctx.tree, 10, seed=n):
            light = light_partition(pt, essential_tree(pt, mu, n))
            rep = component_data(light, ctx, 12)
            assert rep.passed, rep.violations[:3]
            seen_generic += len(rep.rows)
    assert seen_generic > 0


def small_branching():
    # depth-3 binary tree, doubled corollary weights: levels 1..4 split early
    base = corollary_weights(binary_tree(3), 2.0)
    wt = WeightedTree(base.tree, 2 * base.alpha, base.sigma, 2.0)
    ctx = distance_context(wt)
    pt = partition_from_roots(ctx, construct_root_chain(ctx, 8))
    assert [len(pt.roots(m)) for m in range(4)] == [1, 3, 3, 7]
    return ctx, pt


def test_lights_determined_by_essential_tree():
    # equal light partitions exactly when the heavy families agree
    ctx, pt = small_branching()
    rng = np.random.default_rng(0)
    wt = ctx.lp.base
    for n in (2, 3, 4):
        rows = []
        for _ in range(60):
            mu = random_measure(wt.tree, rng)
            et = essential_tree(pt, mu, n)
            rows.append((et.signature(), light_partition(pt, et).signature()))
        assert len({a for a, _ in rows}) > 1
        for a in rows:
            for b in rows:
                assert (a[0] == b[0]) == (a[1] == b[1])


def test_enumeration():
    ctx, pt = small_branching()
    assert enumerate_partitions(pt, 1) == 1
    assert [enumerate_partitions(pt, n) for n in (2, 3, 4)] == [4, 10, 24]
    # n = 4 was cross-checked once by brute force (21 domains, ~6 s)
    for n in (1, 2, 3):
        assert enumerate_partitions(pt, n) == enumerate_partitions_brute(pt, n)
    for n in (1, 2, 3, 4):
        assert enumerate_partitions(pt, n) <= subtree_count_bound(n)
    with pytest.raises(SizeLimit):
        enumerate_partitions_brute(pt, 4)
