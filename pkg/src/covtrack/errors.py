"""Exception types raised across the package."""

from __future__ import annotations


class CovtrackError(Exception):
    """Base class for all package errors."""


class ContractError(CovtrackError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(ContractError):
    """A matrix function was applied outside its domain (e.g. log of a non-SPD matrix)."""


class NotPositiveDefiniteError(DomainError):
    """A matrix failed the SPD construction check."""


class NumericError(CovtrackError, ArithmeticError):
    """A numerical routine failed (non-convergence, overflow, ill-conditioning)."""


class OutOfViewError(CovtrackError):
    """A pose places the target region entirely outside the image."""


class TrackLostError(CovtrackError):
    """Every particle received zero weight.

    ``last_estimate`` carries the most recent successful estimate (or ``None``
    if the filter never produced one).
    """

    def __init__(self, message: str, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate
