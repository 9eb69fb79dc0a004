"""Compound Poisson subordinators with non-singular convolution kernels.

Densities, governing-equation checks, Laplace tools, Monte Carlo and risk
utilities for exponential, Mittag-Leffler and incomplete-gamma kernels and
their distributed-order mixtures.
"""

from .errors import (CancellationError, DomainError, NSKError, QuadratureError,
                     SeriesConvergenceError)
from .kernels import (Beta, Dirac, DistributedExp, DistributedIG, DistributedML, Exponential,
                      Grid, IncompleteGammaK, KernelSpec, MittagLefflerK, TwoPoint,
                      bernstein_psi, jump_density, jump_mean, source_term, spec_from_dict,
                      spec_from_json, tail_levy_measure)
from .densities import SubordinatorLaw, law_of
from .specfun import SeriesControl

__version__ = "0.1.0"

__all__ = [
    "NSKError", "DomainError", "SeriesConvergenceError", "CancellationError", "QuadratureError",
    "KernelSpec", "Dirac", "TwoPoint", "Beta", "Grid", "Exponential", "MittagLefflerK",
    "IncompleteGammaK", "DistributedExp", "DistributedML", "DistributedIG",
    "bernstein_psi", "tail_levy_measure", "jump_density", "jump_mean", "source_term",
    "spec_from_dict", "spec_from_json", "SubordinatorLaw", "law_of", "SeriesControl",
    "__version__",
]
