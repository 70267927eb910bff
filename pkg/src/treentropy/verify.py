"""Invariant suite run by the ``verify`` command.

Each check yields a record ``{"section", "name", "ok", "detail"}``; the
report passes when every record does.
"""

from __future__ import annotations

import math

import numpy as np

from .decomposition import (
    check_essential,
    check_light_partition,
    component_data,
    essential_tree,
    light_partition,
    split_operator,
    w4_certificate,
)
from .errors import InfeasibleNet
from .generate import measure_suite
from .metrics import (
    distance_context,
    full_distance_matrix,
    localized_distance_matrix,
    localized_distance_min_form,
    order_distance_matrix,
)
from .nets import coverage_depth, epsilon_schedule, min_order_net, verify_covering_relations
from .partitions import (
    check_crucial,
    check_partition_tree,
    check_root_chain,
    construct_root_chain,
    partition_from_roots,
)
from .weights import (
    REL_SLACK,
    apply_V,
    apply_W,
    conjugate_exponent,
    dyadic_reduction,
    kappa,
    lq_norm,
)


class Checks:
    def __init__(self):
        self.records = []

    def add(self, section, name, ok, detail=None):
        self.records.append(
            {"section": section, "name": name, "ok": bool(ok), "detail": detail}
        )

    @property
    def passed(self):
        return all(r["ok"] for r in self.records)


def check_weights(wt, lp, checks, rng, samples=20):
    tree = wt.tree
    kap = kappa(wt)
    worst = 0.0
    lin = 0.0
    for _ in range(samples):
        mu = rng.laplace(size=tree.node_count)
        mu /= np.abs(mu).sum()
        worst = max(worst, lq_norm(apply_V(wt, mu), wt.q) / kap)
        nu = rng.normal(size=tree.node_count)
        a, b = rng.normal(size=2)
        lhs = apply_W(lp, a * mu + b * nu)
        rhs = a * apply_W(lp, mu) + b * apply_W(lp, nu)
        scale = max(lq_norm(lhs, wt.q), 1e-300)
        lin = max(lin, lq_norm(lhs - rhs, wt.q) / scale)
    checks.add("weights", "norm-bound", worst <= 1 + REL_SLACK, {"kappa": kap, "max_ratio": worst})
    checks.add("weights", "W-linear", lin <= 1e-12, {"max_rel_error": lin})
    sh = lp.sigma_hat
    checks.add("weights", "dyadic-bracket", bool(np.all(wt.sigma <= sh) and np.all(sh < 2 * wt.sigma)))
    kids = np.nonzero(tree.parent >= 0)[0]
    checks.add("weights", "levels-non-decreasing",
               bool(np.all(lp.level[kids] >= lp.level[tree.parent[kids]])))
    # same-level nodes on a root path form one contiguous stretch
    lam = lp.lam
    ok = bool(np.all(lp.level[lam] == lp.level) and np.all(
        (tree.parent[lam] < 0) | (lp.level[np.maximum(tree.parent[lam], 0)] != lp.level[lam])))
    checks.add("weights", "level-branches", ok)
    if tree.node_count <= 512:
        support_ok = True
        for s in range(tree.node_count):
            col = apply_W(lp, np.eye(1, tree.node_count, s).ravel())
            sup = np.nonzero(col)[0]
            want = set()
            v = s
            while True:
                want.add(v)
                if v == lam[s]:
                    break
                v = int(tree.parent[v])
            support_ok &= set(sup.tolist()) == want
        checks.add("weights", "W-column-support", support_ok)


def check_kappa_hypothesis(ctx, checks, grid=None):
    """Where the covering hypothesis holds on the grid above the threshold,
    the root must be a one-point net, bounding its distance to every node."""
    q = ctx.q
    thresh = (1.0 / math.log(2.0)) ** conjugate_exponent(q)
    grid = grid if grid is not None else thresh * (1.0 + 2.0 ** -np.arange(1, 8))
    P = ctx.prefix
    tree = ctx.tree
    root_dist = float(np.max(order_distance_to_root(ctx)))
    results = []
    for eps in grid:
        cd = coverage_depth(ctx, float(eps), "d")
        size = int(min_order_net(tree, cd).sum())
        hyp = math.log(size) <= float(eps) ** (-1.0 / conjugate_exponent(q))
        results.append((float(eps), size, hyp))
    holds = [e for e, _, h in results if h]
    ok = all(root_dist < e for e in holds)
    checks.add("weights", "root-radius-under-hypothesis", ok,
               {"max_root_distance": root_dist, "threshold": thresh,
                "grid_points_with_hypothesis": len(holds), "kappa": float(
                    np.max(P ** (1 / q) * ctx.sigma))})


def order_distance_to_root(ctx):
    from .nets import order_distance_many

    s = np.arange(ctx.tree.node_count)
    return order_distance_many(ctx, np.full_like(s, ctx.tree.root), s)


def check_metrics(ctx, checks, limit=64):
    tree = ctx.tree
    n = tree.node_count
    if n > limit:
        checks.add("metrics", "pairwise-checks", True, {"skipped": f"more than {limit} nodes"})
        return
    D = order_distance_matrix(ctx)
    DI = localized_distance_matrix(ctx)
    comp = np.isfinite(D)
    checks.add("metrics", "dI-below-d", bool(np.all(DI[comp] <= D[comp] * (1 + 1e-12))))
    worst = 0.0
    for t, s in zip(*np.nonzero(comp)):
        a = DI[t, s]
        b = localized_distance_min_form(ctx, t, s)
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    checks.add("metrics", "dI-min-form", worst <= 1e-12, {"max_rel_error": worst})
    F = full_distance_matrix(ctx)
    sym = np.allclose(F, F.T, rtol=0, atol=0)
    ident = bool(np.all(np.diag(F) == 0))
    tri = bool(np.all(F[:, None, :] <= (F[:, :, None] + F[None, :, :]) * (1 + 1e-12) + 1e-15))
    checks.add("metrics", "metric-axioms", sym and ident and tri,
               {"symmetric": bool(sym), "identity": ident, "triangle": tri})


def check_nets(ctx, checks, limit=32, points=8):
    n = ctx.tree.node_count
    if n > limit:
        checks.add("nets", "covering-relations", True, {"skipped": f"more than {limit} nodes"})
        return
    F = full_distance_matrix(ctx)
    vals = np.unique(F[np.isfinite(F) & (F > 0)])
    hi = float(vals.max()) * 1.1 if vals.size else 1.0
    grid = np.geomspace(hi / 20, hi, points)
    rep = verify_covering_relations(ctx, grid)
    checks.add("nets", "covering-relations", rep.passed, rep.rows and [
        {k: r[k] for k in ("epsilon", "N", "N_order", "N_order_2eps")} for r in rep.rows])
    hat = distance_context(ctx.lp, reduced=True)
    raw = distance_context(ctx.lp, reduced=False)
    from .nets import covering_number

    # sigma <= sigma_hat < 2 sigma gives d <= d_hat < 2 d, hence this direction
    ok = all(covering_number(hat, 2 * e).value <= covering_number(raw, e).value for e in grid)
    checks.add("nets", "dyadic-covering", ok)


def check_partitions(ctx, checks, M, mode="exact"):
    chain = construct_root_chain(ctx, M, mode)
    rep = check_root_chain(ctx, chain, replacement=(mode == "exact"))
    checks.add("partitions", "root-chain", rep.passed, {"violations": rep.violations[:10],
               "sizes": [len(l) for l in chain.levels]})
    pt = partition_from_roots(ctx, chain)
    bad = check_partition_tree(ctx, pt)
    checks.add("partitions", "partition-tree", not bad, {"violations": bad[:10]})
    if mode == "exact":
        cr = check_crucial(ctx, chain, pt)
        checks.add("partitions", "crucial", cr.passed,
                   {"triples": len(cr.rows), "violations": cr.violations[:10]})
    return chain, pt


def check_decomposition(ctx, pt, checks, n_values, count=20, seed=0):
    lp = ctx.lp
    q = ctx.q
    tree = ctx.tree
    counts = {"heavy": 0, "light": 0, "split": 0, "w4": 0, "components": 0}
    worst_split = 0.0
    for mu in measure_suite(tree, count, seed):
        Wmu = apply_W(lp, mu)
        for n in n_values:
            et = essential_tree(pt, mu, n)
            counts["heavy"] += bool(check_essential(et))
            light = light_partition(pt, et)
            counts["light"] += bool(check_light_partition(pt, et, light))
            total = sum(split_operator(lp, light, mu, k) for k in (1, 2, 3, 4))
            err = lq_norm(Wmu - total, q) / max(lq_norm(Wmu, q), 1e-300)
            worst_split = max(worst_split, err)
            counts["split"] += err > 1e-12
            counts["w4"] += not w4_certificate(lp, light, mu, n)[2]
            counts["components"] += not component_data(light, ctx, pt.M).passed
    for key, label in (("heavy", "heavy-counting"), ("light", "light-partition"),
                       ("split", "split-identity"), ("w4", "w4-certificate"),
                       ("components", "component-bounds")):
        detail = {"failures": counts[key]}
        if key == "split":
            detail["max_rel_error"] = worst_split
        checks.add("decomposition", label, counts[key] == 0, detail)


def run_verification(wt, n_values=(4, 16), measures=20, seed=0, mode="exact", M=None):
    """Run every invariant check on one instance and return the record list."""
    checks = Checks()
    rng = np.random.default_rng(seed)
    lp = dyadic_reduction(wt)
    ctx = distance_context(lp)
    check_weights(wt, lp, checks, rng)
    check_kappa_hypothesis(ctx, checks)
    check_metrics(ctx, checks)
    check_nets(ctx, checks)
    levels = M if M is not None else max(n_values)
    try:
        chain, pt = check_partitions(ctx, checks, levels, mode)
    except InfeasibleNet as exc:
        # the instance is outside the covering hypothesis: nothing to check
        checks.add("partitions", "covering-hypothesis", True,
                   {"holds": False, "reason": str(exc),
                    "skipped": ["partitions", "decomposition"]})
        return checks
    check_decomposition(ctx, pt, checks, n_values, measures, seed)
    return checks
