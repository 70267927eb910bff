"""Exception types raised across the package."""


class TreeEntropyError(Exception):
    """Base class for all package errors."""


class MalformedTree(TreeEntropyError, ValueError):
    pass


class MalformedInput(TreeEntropyError, ValueError):
    pass


class UnknownNode(TreeEntropyError, KeyError):
    pass


class NotComparable(TreeEntropyError, ValueError):
    pass


class SizeLimit(TreeEntropyError, RuntimeError):
    pass


class InfeasibleNet(TreeEntropyError, RuntimeError):
    """No order net of the admissible size exists at the requested level."""


class EmptyMeasure(TreeEntropyError, ValueError):
    pass


class MismatchedPartition(TreeEntropyError, ValueError):
    pass


class InvariantViolation(TreeEntropyError, ValueError):
    """A named structural invariant does not hold.

    ``name`` identifies the invariant so callers (and the CLI) can report it.
    """

    def __init__(self, name, message):
        super().__init__(f"{name}: {message}")
        self.name = name
