"""Forward Laplace transforms and Gaver-Stehfest inversion.

The closed-form transform of the density of S(t) is
``exp(-t psi(eta)) - exp(-t)``.  Inversion uses the Gaver-Stehfest
formula with exact rational weights; the weighted sum is accumulated in
extended precision because the weights alternate and grow like
``10**(N/2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath as mp
import numpy as np

from .errors import DomainError
from .kernels import KernelSpec, bernstein_psi_complement
from .quadrature import exp_sinh

__all__ = [
    "TransformPair", "closed_form_transform", "closed_form_transform_mp",
    "numeric_forward", "stehfest_weights", "gaver_stehfest_invert",
    "gaver_stehfest_diagnostic", "invert_closed_form", "GS_MIN_X",
]

# inversion is not attempted closer to a singular origin than this
GS_MIN_X = 1e-2
_GS_DPS = 40
_GS_AGREEMENT = 1e-3


def closed_form_transform(spec: KernelSpec, eta, t):
    """``exp(-psi(eta) t) - exp(-t)``, computed as ``exp(-t) expm1(t (1 - psi))``."""
    if t < 0:
        raise DomainError("t must be >= 0")
    ea = np.asarray(eta, dtype=float)
    if np.any(ea <= 0):
        raise DomainError("eta must be > 0")
    val = math.exp(-t) * np.expm1(t * bernstein_psi_complement(spec, ea))
    return float(val) if ea.ndim == 0 else val


def _psi_complement_mp(spec: KernelSpec, eta):
    w, k, shape = spec.components()
    total = mp.mpf(0)
    for wi, ki, si in zip(w, k, shape):
        ki = mp.mpf(ki)
        si = mp.mpf(si)
        if spec.family == "exp":
            c = ki / (eta + ki)
        elif spec.family == "ml":
            c = ki / (eta ** si + ki)
        else:
            c = (ki / (eta + ki)) ** si
        total += mp.mpf(wi) * c
    return total


def closed_form_transform_mp(spec: KernelSpec, eta, t):
    """Extended-precision version of :func:`closed_form_transform` (mpmath numbers).

    Complex ``eta`` (principal branch) is accepted so the same function can
    feed contour-based oracles.
    """
    eta = mp.mpmathify(eta)
    t = mp.mpf(t)
    return mp.exp(-t) * mp.expm1(t * _psi_complement_mp(spec, eta))


@dataclass(frozen=True)
class TransformPair:
    """Closed-form transform of the density of S(t) for one kernel."""

    spec: KernelSpec
    t: float

    @property
    def label(self):
        return self.spec.label

    def forward(self, eta):
        return closed_form_transform(self.spec, eta, self.t)

    def forward_mp(self, eta):
        return closed_form_transform_mp(self.spec, eta, self.t)

    def probe_limits(self):
        """Values at ``eta = 1e-6`` and ``1e8`` with their limits ``1 - exp(-t)`` and 0."""
        return {
            "small": (self.forward(1e-6), 1.0 - math.exp(-self.t)),
            "large": (self.forward(1e8), 0.0),
        }


def numeric_forward(f, eta, singular_origin=False, scale=None, rel_tol=1e-11):
    """``int_0^inf exp(-eta x) f(x) dx`` by exp-sinh quadrature.

    Parameters
    ----------
    f : callable
        Vectorized function of a 1-D array.
    eta : float
        Transform variable, ``eta >= 0`` (0 gives the plain integral).
    singular_origin : bool
        Declares an integrable singularity at 0.  The exp-sinh nodes already
        approach the origin double-exponentially, so the flag only tightens
        the minimum refinement level.
    scale : float, optional
        Length scale of the integrand; defaults to ``1/eta`` capped to [1e-3, 1].

    Returns
    -------
    (value, error_estimate)
    """
    if eta < 0:
        raise DomainError("eta must be >= 0")
    if scale is None:
        scale = 1.0 if eta == 0 else min(1.0, max(1e-3, 1.0 / eta))

    def integrand(x):
        out = np.zeros_like(x)
        # f is not evaluated where exp(-eta x) underflows
        live = eta * x < 745.0
        if live.any():
            xs = x[live]
            with np.errstate(under="ignore"):
                out[live] = np.exp(-eta * xs) * np.asarray(f(xs), dtype=float)
        return out

    res = exp_sinh(integrand, 0.0, scale=scale, rel_tol=rel_tol, abs_tol=1e-300,
                   min_level=4 if singular_origin else 3, max_level=9)
    return float(res.value[0]), float(res.error[0])


@lru_cache(maxsize=None)
def stehfest_weights(n):
    """Exact Stehfest weights ``V_1..V_n`` as fractions (``n`` even)."""
    if n % 2 or n < 2:
        raise DomainError("terms must be a positive even integer")
    half = n // 2
    out = []
    for k in range(1, n + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(j ** half * math.factorial(2 * j),
                            math.factorial(half - j) * math.factorial(j)
                            * math.factorial(j - 1) * math.factorial(k - j)
                            * math.factorial(2 * j - k))
        out.append(acc * (-1) ** (k + half))
    return tuple(out)


def _gs_sum(forward, x, n):
    weights = stehfest_weights(n)
    with mp.workdps(_GS_DPS):
        a = mp.log(2) / mp.mpf(x)
        acc = mp.mpf(0)
        for k, v in enumerate(weights, start=1):
            acc += mp.mpf(v.numerator) / v.denominator * mp.mpf(forward(k * a))
        return float(a * acc)


def gaver_stehfest_invert(forward, x, terms=16, check=True):
    """Gaver-Stehfest approximation of the inverse Laplace transform at ``x``.

    ``forward`` is evaluated at ``eta = k ln2 / x`` for ``k = 1..terms``; it
    may accept and return mpmath numbers, which is what makes more than
    about 16 terms useful.  With ``check=True`` the result is compared with
    ``terms - 4`` and a :class:`RuntimeWarning` is issued when they disagree
    by more than 1e-3 relative.
    """
    if not x > 0:
        raise DomainError("x must be > 0")
    if terms % 2 or not 8 <= terms <= 20:
        raise DomainError("terms must be an even integer in [8, 20]")
    val = _gs_sum(forward, x, terms)
    if check:
        other = _gs_sum(forward, x, terms - 4)
        if abs(val - other) > _GS_AGREEMENT * max(abs(val), 1e-300):
            warnings.warn(f"Gaver-Stehfest values with {terms - 4} and {terms} terms disagree "
                          f"at x={x:g}: {other:.6g} vs {val:.6g}", RuntimeWarning, stacklevel=2)
    return val


def gaver_stehfest_diagnostic(forward, x, terms=(8, 12, 16)):
    """Inversions at several term counts, for judging convergence."""
    return {n: _gs_sum(forward, x, n) for n in terms}


def invert_closed_form(spec: KernelSpec, x, t, terms=16, check=False):
    """Density of S(t) at ``x`` by inverting the closed-form transform."""
    if spec.family != "exp" and x < GS_MIN_X:
        raise DomainError(f"inversion refused below x = {GS_MIN_X} for singular-origin kernels")
    if t == 0:
        return 0.0
    return gaver_stehfest_invert(lambda eta: closed_form_transform_mp(spec, eta, t), x,
                                 terms, check)
