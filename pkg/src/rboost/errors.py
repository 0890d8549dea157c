"""Exception types raised by the package.

Plain argument validation failures raise :class:`ValueError` directly; the
classes here mark conditions a caller may want to catch specifically.
"""


class ParseError(ValueError):
    """Malformed input file."""


class SchemaError(ValueError):
    """Input parsed, but its label column does not describe a binary problem."""


class StratificationError(ValueError):
    """A class is too small to be split or carved."""


class DegenerateUpdateError(ArithmeticError):
    """A multiplicative flip-matrix update has a row whose mass vanished."""


class DegenerateFitError(RuntimeError):
    """A base learner cannot be fit, e.g. only one class carries weight."""
