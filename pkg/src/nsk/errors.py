"""Exception types shared by the numerical modules."""

from __future__ import annotations

import numpy as np


class NSKError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NSKError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class SeriesConvergenceError(NSKError, ArithmeticError):
    """A series did not meet its tolerance.

    Parameters
    ----------
    message : str
    partial_sum : float or ndarray
        Partial sum reached when evaluation stopped.
    n_terms : int
        Number of terms that were summed.
    """

    def __init__(self, message: str, partial_sum=np.nan, n_terms: int = 0):
        super().__init__(f"{message} (terms={n_terms})")
        self.partial_sum = partial_sum
        self.n_terms = n_terms


class CancellationError(SeriesConvergenceError):
    """Series converged but rounding error from cancellation exceeds the tolerance."""


class QuadratureError(NSKError, ArithmeticError):
    """A quadrature rule failed to reach the requested accuracy."""

    def __init__(self, message: str, value=np.nan, error=np.inf):
        super().__init__(message)
        self.value = value
        self.error = error
