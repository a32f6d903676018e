"""Exception hierarchy shared across modules."""

from __future__ import annotations


class MuniEconError(Exception):
    """Base class for all computation errors raised by the package."""


class ValidationError(MuniEconError, ValueError):
    """Bad input record or configuration (CLI exit code 2)."""


class NonFiniteRate(MuniEconError):
    pass


class NoRoot(MuniEconError):
    pass


class Matured(MuniEconError):
    pass


class UnknownGrade(MuniEconError, KeyError):
    pass


class MissingFederalRate(MuniEconError, KeyError):
    pass


class MissingCurve(MuniEconError):
    pass


class NoCustomerTrades(MuniEconError):
    pass


class NoInterdealerTrades(MuniEconError):
    pass


class InsufficientTrades(MuniEconError):
    pass


class MissingField(MuniEconError):
    def __init__(self, field: str):
        super().__init__(f"missing required field: {field}")
        self.field = field


class ZeroDenominator(MuniEconError):
    pass


class NoRatedBonds(MuniEconError):
    pass


class ZeroBase(MuniEconError):
    pass


class EmptyPool(MuniEconError):
    pass


class NotConverged(MuniEconError):
    def __init__(self, iterations: int, last_change: float):
        super().__init__(
            f"alternating projections did not converge after {iterations} "
            f"iterations (last max change {last_change:.3e})"
        )
        self.iterations = iterations
        self.last_change = last_change


class Underdetermined(MuniEconError):
    pass


class DegenerateCluster(MuniEconError):
    pass


class NonBinary(MuniEconError, ValueError):
    pass


class MissingBenchmark(MuniEconError):
    pass


class MissingCoefficient(MuniEconError, KeyError):
    pass
