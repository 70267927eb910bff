import numpy as np
import pytest

from treentropy.generate import InstanceSpec, binary_tree, corollary_weights, generate
from treentropy.verify import run_verification


def failures(checks):
    return [(r["section"], r["name"], r["detail"]) for r in checks.records if not r["ok"]]


def test_corollary_depth12_passes():
    checks = run_verification(corollary_weights(binary_tree(12)), n_values=(4, 16), measures=10)
    assert checks.passed, failures(checks)
    names = {r["name"] for r in checks.records}
    assert {"norm-bound", "dyadic-bracket", "root-chain", "crucial", "w4-certificate",
            "split-identity", "component-bounds"} <= names


@pytest.mark.parametrize("seed", range(8))
def test_random_small_instances_pass(seed):
    wt = generate(InstanceSpec(generator="random", size=28, profile="random", seed=seed, q=1.5 + seed % 2 / 2))
    checks = run_verification(wt, n_values=(2, 4), measures=6, seed=seed)
    assert checks.passed, failures(checks)
    ran = {r["name"] for r in checks.records if not (isinstance(r["detail"], dict) and "skipped" in r["detail"])}
    assert {"covering-relations", "dyadic-covering", "metric-axioms", "dI-min-form"} <= ran


def test_greedy_mode_skips_crucial():
    checks = run_verification(corollary_weights(binary_tree(6)), n_values=(4,), measures=3, mode="greedy")
    assert checks.passed, failures(checks)
    assert "crucial" not in {r["name"] for r in checks.records}


def test_infeasible_instance_is_reported_not_failed():
    wt = generate(InstanceSpec(generator="random", size=28, profile="random", seed=2, q=1.5))
    checks = run_verification(wt, n_values=(2, 4), measures=6, seed=2)
    rec = [r for r in checks.records if r["name"] == "covering-hypothesis"]
    assert len(rec) == 1 and rec[0]["detail"]["holds"] is False
    assert "root-chain" not in {r["name"] for r in checks.records}
