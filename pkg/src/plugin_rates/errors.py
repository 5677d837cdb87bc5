"""Exception hierarchy.

``ModelError`` subclasses are data/model failures (CLI exit code 2);
``NetBudgetExceeded`` is a resource failure (exit code 3); ``ConfigError``
is a usage failure (exit code 1).
"""

import math


class PluginRatesError(Exception):
    """Base class for all package errors."""


class ModelError(PluginRatesError):
    """A generator, estimator or data problem."""


class Singular(ModelError):
    """Cholesky pivot fell below tolerance; the minimizer is not unique."""


class InvalidSampleSize(ModelError):
    pass


class InvalidLaw(ModelError):
    pass


class InvalidAlpha(ModelError):
    pass


class CalibrationFailed(ModelError):
    pass


class DegenerateSupport(ModelError):
    pass


class RangeViolation(ModelError):
    pass


class ConstraintViolation(ModelError):
    """Hypercube bookkeeping (m <= q^d, 0 < w <= 1/m, ...) was violated."""


class DatasetFormatError(ModelError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class InsufficientPoints(ModelError):
    pass


class TooManyVertices(ModelError):
    pass


class NetBudgetExceeded(PluginRatesError):
    def __init__(self, log_count: float, budget):
        if log_count < 30 * math.log(10):
            shown = str(round(math.exp(log_count)))
        else:
            shown = f"about 10^{math.floor(log_count / math.log(10))}"
        super().__init__(f"net has {shown} members, budget is {budget}")
        self.log_count = log_count
        self.budget = budget


class ConfigError(PluginRatesError):
    pass
