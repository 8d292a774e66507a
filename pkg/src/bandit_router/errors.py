"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: configuration and input
problems exit 1, data/schema problems exit 2, infeasible budgets exit 3.
"""

from __future__ import annotations


class RouterError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RouterError):
    """A parameter or configuration value is invalid (e.g. negative p)."""


class InputError(RouterError):
    """A runtime input violates an operation's contract (e.g. dim mismatch)."""


class DataError(RouterError):
    """A dataset or container file violates its schema or invariants."""


class InvalidRosterError(DataError):
    """An arm roster is unusable (empty, or no positive price)."""


class FormatError(DataError):
    """A container file is unreadable: truncated, wrong format, wrong version."""


class CompatibilityError(DataError):
    """A model and a roster/dataset do not belong together."""


class UnknownQueryError(RouterError):
    """A replay lookup asked for a query that is not in the cache."""

    def __init__(self, query_id: str) -> None:
        super().__init__(f"unknown query_id: {query_id!r}")
        self.query_id = query_id


class InstanceTooLargeError(RouterError):
    """An exact solve was requested on an instance beyond the enumeration guard."""


class InfeasibleBudgetError(RouterError):
    """No routing satisfies the budget; carries the cheapest achievable cost."""

    def __init__(self, message: str, cheapest_achievable=None) -> None:
        super().__init__(message)
        self.cheapest_achievable = cheapest_achievable
