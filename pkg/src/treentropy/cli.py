"""Command-line front end.

Every subcommand builds one instance (from files or a generator), runs one
stage of the pipeline and writes CSV or JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import errors
from .generate import (
    GENERATORS,
    PROFILES,
    InstanceSpec,
    generate,
    measure_suite,
    read_measure,
    write_tree,
    write_weights,
)
from .metrics import distance_context, full_distance_matrix, localized_distance_matrix, order_distance_matrix

OUT_ENV = "TREENTROPY_OUT"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INVARIANT = 4
EXIT_SIZE = 5
EXIT_INFEASIBLE = 6
EXIT_VERIFY = 7
EXIT_DOMAIN = 8

EXIT_HELP = """exit codes:
  0  success
  2  usage error (bad flags or config keys)
  3  malformed input (tree, weight, measure or config file; unknown node)
  4  invariant violation while building an instance (e.g. sigma increasing)
  5  size limit exceeded for an exact solver
  6  infeasible net: no admissible order net at some level
  7  verification ran and at least one check failed
  8  other domain error (zero measure, mismatched partition)

environment:
  TREENTROPY_OUT  directory for output files when --out is not given
"""


class UsageError(Exception):
    pass


def _parser():
    p = argparse.ArgumentParser(
        prog="treentropy",
        description="Entropy bounds for weighted summation operators on trees.",
        epilog=EXIT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        g = sp.add_argument_group("instance")
        g.add_argument("--config", help="key=value file; flags override its values")
        g.add_argument("--tree", dest="tree_file", help="tree file (<id> <parent-or->)")
        g.add_argument("--weights", dest="weights_file", help="weight file (<id> <alpha> <sigma>)")
        g.add_argument("--generator", choices=GENERATORS)
        g.add_argument("--depth", type=int)
        g.add_argument("--size", type=int)
        g.add_argument("--profile", choices=PROFILES)
        g.add_argument("--q", type=float)
        g.add_argument("--seed", type=int)
        g.add_argument("--max-children", type=int)
        sp.add_argument("--out", help="output file (default: stdout or $TREENTROPY_OUT)")
        sp.add_argument("--jobs", type=int, default=None, help="concurrent workers")

    sp = sub.add_parser("gen-tree", help="write tree and weight files for an instance")
    common(sp)
    sp.add_argument("--out-tree")
    sp.add_argument("--out-weights")

    sp = sub.add_parser("dist", help="distance table (CSV)")
    common(sp)
    sp.add_argument("--max-nodes", type=int, help="default 256")

    sp = sub.add_parser("nets", help="covering numbers and order nets (CSV)")
    common(sp)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--grid", help="comma-separated eps values")
    sp.add_argument("--metric", choices=("d", "dI", "balls"), help="default d")
    sp.add_argument("--mode", choices=("exact", "greedy", "dp"), help="default exact")
    sp.add_argument("--limit", type=int, help="default 64")

    sp = sub.add_parser("partitions", help="root chain and partition tree (JSON)")
    common(sp)
    sp.add_argument("--levels", type=int)
    sp.add_argument("--mode", choices=("exact", "greedy"), help="default exact")

    sp = sub.add_parser("decompose", help="heavy/light decomposition for one measure (JSON)")
    common(sp)
    sp.add_argument("--mu", required=False, help="measure file or random:<seed>")
    sp.add_argument("--n", type=int)
    sp.add_argument("--levels", type=int)

    sp = sub.add_parser("entropy", help="entropy number bounds (CSV)")
    common(sp)
    sp.add_argument("--n-grid", help="comma-separated n values")
    sp.add_argument("--budget", type=int)
    sp.add_argument("--grid-size", type=int)

    sp = sub.add_parser("verify", help="run the invariant suite (JSON)")
    common(sp)
    sp.add_argument("--n-values", help="comma-separated n values for the measure suite")
    sp.add_argument("--measures", type=int)
    sp.add_argument("--mode", choices=("exact", "greedy"), help="default exact")
    return p


INSTANCE_KEYS = {
    "tree_file": str, "weights_file": str, "generator": str, "depth": int, "size": int,
    "profile": str, "q": float, "seed": int, "max_children": int,
}
EXTRA_KEYS = {
    "eps": float, "grid": str, "metric": str, "mode": str, "limit": int, "levels": int,
    "mu": str, "n": int, "n_grid": str, "budget": int, "grid_size": int, "n_values": str,
    "measures": int, "max_nodes": int, "jobs": int, "out": str,
}


def read_config(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise errors.MalformedInput(f"cannot read config {path}: {exc}") from exc
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise errors.MalformedInput(f"{path}:{no}: expected key=value")
        key, val = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        kind = INSTANCE_KEYS.get(key) or EXTRA_KEYS.get(key)
        if kind is None:
            raise UsageError(f"{path}:{no}: unknown key {key!r}")
        try:
            out[key] = kind(val)
        except ValueError:
            raise errors.MalformedInput(f"{path}:{no}: bad value for {key}") from None
    return out


DEFAULTS = {"mode": "exact", "metric": "d", "limit": 64, "max_nodes": 256}


def _merge(args):
    """Config values fill in flags that were not given on the command line."""
    if getattr(args, "config", None):
        for key, val in read_config(args.config).items():
            if getattr(args, key, None) is None:
                setattr(args, key, val)
    for key, val in DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, val)
    return args


def _instance(args):
    spec = InstanceSpec()
    fields = {k: getattr(args, k) for k in INSTANCE_KEYS if getattr(args, k, None) is not None}
    spec = InstanceSpec(**{**spec.__dict__, **fields})
    return generate(spec)


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


def _emit(args, text, ext):
    target = args.out
    if target is None and os.environ.get(OUT_ENV):
        d = Path(os.environ[OUT_ENV])
        d.mkdir(parents=True, exist_ok=True)
        target = d / f"{args.command}.{ext}"
    if target is None:
        sys.stdout.write(text)
    else:
        Path(target).write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset, tuple)):
        return list(x)
    raise TypeError(type(x).__name__)


def cmd_gen_tree(args):
    wt = _instance(args)
    d = os.environ.get(OUT_ENV)
    tree_path = args.out_tree or (str(Path(d) / "tree.txt") if d else None)
    w_path = args.out_weights or (str(Path(d) / "weights.txt") if d else None)
    if d:
        Path(d).mkdir(parents=True, exist_ok=True)
    if tree_path:
        write_tree(wt.tree, tree_path)
    if w_path:
        write_weights(wt, w_path)
    summary = {"nodes": wt.tree.node_count, "depth": wt.tree.max_depth, "q": wt.q,
               "tree_file": tree_path, "weights_file": w_path}
    if not tree_path:
        lab = wt.tree.labels
        summary["tree"] = [[lab[v], None if wt.tree.parent[v] < 0 else lab[wt.tree.parent[v]]]
                           for v in wt.tree.preorder]
        summary["alpha"] = wt.alpha.tolist()
        summary["sigma"] = wt.sigma.tolist()
    _emit(args, _json(summary), "json")


def cmd_dist(args):
    wt = _instance(args)
    n = wt.tree.node_count
    if n > args.max_nodes:
        raise errors.SizeLimit(f"distance table limited to {args.max_nodes} nodes, tree has {n}")
    ctx = distance_context(wt)
    D = order_distance_matrix(ctx)
    DI = localized_distance_matrix(ctx)
    F = full_distance_matrix(ctx)
    lab = wt.tree.labels
    lines = ["t,s,d,dI,full"]
    for t in range(n):
        for s in range(n):
            d = D[t, s]
            di = DI[t, s]
            lines.append(f"{lab[t]},{lab[s]},{'' if not np.isfinite(d) else repr(float(d))},"
                         f"{'' if not np.isfinite(di) else repr(float(di))},{float(F[t, s])!r}")
    _emit(args, "\n".join(lines) + "\n", "csv")


def cmd_nets(args):
    from .nets import covering_number, order_net_number

    wt = _instance(args)
    ctx = distance_context(wt)
    grid = _floats(args.grid) if args.grid else ([args.eps] if args.eps else None)
    if not grid:
        raise UsageError("give --eps or --grid")
    lab = wt.tree.labels

    def one(eps):
        if args.metric == "balls":
            if args.mode == "dp":
                raise UsageError("dp mode only applies to order nets")
            return covering_number(ctx, eps, args.mode, args.limit)
        return order_net_number(ctx, eps, args.metric, args.mode, args.limit)

    results = _map(args, one, grid)
    lines = ["epsilon,value,exact,centers"]
    for r in results:
        centers = " ".join(str(lab[c]) for c in r.centers)
        lines.append(f"{r.epsilon!r},{r.value},{str(r.exact).lower()},{centers}")
    _emit(args, "\n".join(lines) + "\n", "csv")


def _map(args, fn, items):
    jobs = args.jobs or 1
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def cmd_partitions(args):
    from .partitions import (
        check_crucial,
        check_partition_tree,
        check_root_chain,
        construct_root_chain,
        partition_from_roots,
    )

    wt = _instance(args)
    ctx = distance_context(wt)
    M = args.levels if args.levels is not None else 8
    chain = construct_root_chain(ctx, M, args.mode)
    pt = partition_from_roots(ctx, chain)
    lab = wt.tree.labels
    rep = check_root_chain(ctx, chain, replacement=args.mode == "exact")
    levels = []
    for m, R in enumerate(chain.levels):
        levels.append({
            "m": m,
            "epsilon": None if m == 0 else float(chain.eps[m]),
            "roots": [lab[r] for r in R],
            "domains": {str(lab[r]): [lab[s] for s in pt.members(m, int(r))] for r in R},
        })
    out = {
        "mode": chain.mode,
        "property4": chain.property4,
        "levels": levels,
        "checks": {
            "root_chain": rep.rows,
            "violations": rep.violations,
            "partition_tree": check_partition_tree(ctx, pt),
        },
    }
    if args.mode == "exact":
        cr = check_crucial(ctx, chain, pt)
        out["checks"]["crucial"] = {"triples": len(cr.rows), "violations": cr.violations}
    _emit(args, _json(out), "json")


def cmd_decompose(args):
    from .decomposition import (
        check_essential,
        check_light_partition,
        component_data,
        essential_tree,
        light_partition,
        split_operator,
        w4_certificate,
    )
    from .partitions import construct_root_chain, partition_from_roots
    from .weights import apply_W, lq_norm

    wt = _instance(args)
    n = args.n or 4
    ctx = distance_context(wt)
    spec = args.mu or "random:0"
    if spec.startswith("random:"):
        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad measure spec {spec!r}") from None
        mu = measure_suite(wt.tree, 1, seed)[0]
    else:
        mu = read_measure(spec, wt.tree)
    M = max(args.levels or n, n)
    chain = construct_root_chain(ctx, M)
    pt = partition_from_roots(ctx, chain)
    et = essential_tree(pt, mu, n)
    light = light_partition(pt, et)
    lab = wt.tree.labels
    lp = ctx.lp
    Wmu = apply_W(lp, mu)
    total = sum(split_operator(lp, light, mu, k) for k in (1, 2, 3, 4))
    norm, bound, ok = w4_certificate(lp, light, mu, n)
    comp = component_data(light, ctx, M)
    out = {
        "n": n,
        "l1_norm": float(np.abs(mu).sum()),
        "heavy": [{"level": m, "root": lab[int(r)]} for m, hv in enumerate(et.heavy) for r in hv],
        "terminal": [{"level": m, "root": lab[r]} for m, r in et.terminal],
        "lights": [
            {"level": int(light.level[i]), "root": lab[int(light.root[i])],
             "top": lab[int(light.top[i])],
             "below": None if light.below[i] < 0 else lab[int(light.below[i])],
             "generic": bool(light.generic[i]), "size": int(len(light.members(i)))}
            for i in range(len(light))
        ],
        "certificates": {
            "heavy_counting": {"violations": check_essential(et),
                               "count": et.count, "terminal_order_sum": et.terminal_order_sum},
            "light_partition": {"violations": check_light_partition(pt, et, light)},
            "split_identity": {"rel_error": lq_norm(Wmu - total, wt.q) / max(lq_norm(Wmu, wt.q), 1e-300)},
            "w4": {"norm": norm, "bound": bound, "pass": ok},
            "components": {"rows": comp.rows, "counting": comp.counting, "pass": comp.passed},
        },
    }
    _emit(args, _json(out), "json")


def cmd_entropy(args):
    from .entropy import DEFAULT_BUDGET, entropy_report

    wt = _instance(args)
    grid = _ints(args.n_grid) if args.n_grid else [1, 2, 4, 8]
    rep = entropy_report(
        wt, grid, args.budget or DEFAULT_BUDGET, args.seed or 0, args.grid_size or 400,
        mapper=lambda fn, items: _map(args, fn, list(items)),
    )
    _emit(args, rep.to_csv(), "csv")


def cmd_verify(args):
    from .verify import run_verification

    wt = _instance(args)
    n_values = tuple(_ints(args.n_values)) if args.n_values else (4, 16)
    checks = run_verification(wt, n_values, args.measures or 20, args.seed or 0, args.mode)
    out = {"passed": checks.passed, "checks": checks.records}
    _emit(args, _json(out), "json")
    return EXIT_OK if checks.passed else EXIT_VERIFY


COMMANDS = {
    "gen-tree": cmd_gen_tree,
    "dist": cmd_dist,
    "nets": cmd_nets,
    "partitions": cmd_partitions,
    "decompose": cmd_decompose,
    "entropy": cmd_entropy,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _merge(args)
        code = COMMANDS[args.command](args)
        return EXIT_OK if code is None else code
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except errors.InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (errors.MalformedInput, errors.MalformedTree, errors.UnknownNode, errors.NotComparable) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except errors.SizeLimit as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except errors.InfeasibleNet as exc:
        print(f"infeasible net: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except errors.TreeEntropyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
