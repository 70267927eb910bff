"""Entropy bounds for weighted summation operators on finite rooted trees."""

from .errors import (
    EmptyMeasure,
    InfeasibleNet,
    InvariantViolation,
    MalformedInput,
    MalformedTree,
    MismatchedPartition,
    NotComparable,
    SizeLimit,
    TreeEntropyError,
    UnknownNode,
)
from .tree import RootedTree, build_tree, is_ancestor, order_interval, order_of, tree_from_parents
from .weights import (
    LevelPartition,
    WeightedTree,
    apply_V,
    apply_W,
    dyadic_reduction,
    kappa,
    l1_norm,
    lambda_of,
    lq_norm,
    normalize_c0,
)

__all__ = [
    "EmptyMeasure", "InfeasibleNet", "InvariantViolation", "MalformedInput", "MalformedTree",
    "MismatchedPartition", "NotComparable", "SizeLimit", "TreeEntropyError", "UnknownNode",
    "RootedTree", "build_tree", "is_ancestor", "order_interval", "order_of", "tree_from_parents",
    "LevelPartition", "WeightedTree", "apply_V", "apply_W", "dyadic_reduction", "kappa",
    "l1_norm", "lambda_of", "lq_norm", "normalize_c0",
]
