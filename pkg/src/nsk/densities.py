"""Transition densities of the compound Poisson subordinator S(t).

With unit jump rate the law of S(t) is an atom ``exp(-t)`` at zero plus an
absolutely continuous part whose Laplace transform is
``exp(-t psi(eta)) - exp(-t)``.  The series below are that density for each
kernel family.  Every series with sign-definite terms is summed in log
space; signed series track their own cancellation and hand over to the
branch-cut representation

    f(x, t) = 1/pi * int_0^inf exp(-r x) Im[exp(-t psi(r e^{-i pi}))] dr,

which holds for the whole Mittag-Leffler family (including any mixture over
nu) and is what makes large ``x`` and continuous nu-mixtures tractable.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .errors import DomainError, SeriesConvergenceError
from .kernels import Dirac, KernelSpec, TwoPoint, k_of_alpha, mean_rate
from .quadrature import tanh_sinh
from .specfun import (DEFAULT_CONTROL, SeriesControl, cut_quad, log_prabhakar, log_rgamma,
                      log_wright, prabhakar_general, wright)
from .specfun import _cancelled, _signed_series

__all__ = [
    "density_exponential", "density_exponential_dx",
    "density_ml", "density_ml_dx",
    "density_ig", "density_ig_dx",
    "density_two_point_exp", "density_two_point_exp_dx",
    "density_two_point_ig", "density_two_point_ig_dx",
    "density_distributed_ml", "density_distributed_ml_dx",
    "density_ml_family_cut",
    "SubordinatorLaw", "law_of", "geometric_grid", "density_grid",
    "write_density_csv", "write_density_json",
]

# beyond k x^nu = this the Mittag-Leffler densities use the cut integral
_ML_SERIES_LIMIT = 5.0
# beyond this argument W_{1,b} is taken from the scaled modified Bessel function
_WRIGHT_BESSEL_LIMIT = 100.0
# beyond (k2 - k1) x = this the two-point exponential density is assembled
# from its two thinned components instead of the double series
_TPE_SERIES_LIMIT = 40.0


def _arr(x):
    a = np.asarray(x, dtype=float)
    return np.atleast_1d(a), a.ndim == 0


def _ret(v, scalar):
    return float(v[0]) if scalar else v


def _check_t(t):
    if not t >= 0:
        raise DomainError("t must be >= 0")


def _positive_x(x, what):
    if np.any(x <= 0):
        raise DomainError(f"{what} diverges at the origin; x must be > 0")


def _outer_done(terms, total, ctl, n):
    """Stopping rule for an outer sum of non-negative terms (last two small, decreasing)."""
    if len(terms) < 2 or n < 2:
        return False
    a, b = np.abs(terms[-1]), np.abs(terms[-2])
    bound = ctl.abs_tol * np.abs(total)
    return bool(np.all(((a <= bound) & (b <= bound) & (a <= b)) | ((a == 0) & (b == 0))))


# -- exponential kernel ------------------------------------------------------------

def _log_wright_1(b, y, ctl):
    """``log W_{1,b}(y)`` for ``y >= 0``, using ``W_{1,b}(y) = y^((1-b)/2) I_{b-1}(2 sqrt y)``
    where the series would need many terms."""
    out = np.empty_like(y)
    big = y > _WRIGHT_BESSEL_LIMIT
    with np.errstate(divide="ignore"):
        out[~big] = log_wright(1.0, b, np.log(y[~big]), ctl)
    z = 2.0 * np.sqrt(y[big])
    v = b - 1.0
    # scipy's ive returns nan for huge arguments; the two-term expansion is
    # exact to O(z^-2) there
    with np.errstate(invalid="ignore"):
        lnive = np.where(z < 1e8, np.log(sc.ive(v, np.minimum(z, 1e8))),
                         -0.5 * np.log(2.0 * np.pi * z) + np.log1p(-(4.0 * v * v - 1.0) / (8.0 * z)))
    out[big] = lnive + z + 0.5 * (1.0 - b) * np.log(y[big])
    return out


def density_exponential(k, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """``k t exp(-k x - t) W_{1,2}(k x t)`` for ``x >= 0``."""
    _check_t(t)
    xa, scalar = _arr(x)
    if np.any(xa < 0):
        raise DomainError("x must be >= 0")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    lw = _log_wright_1(2.0, k * xa * t, ctl)
    return _ret(k * t * np.exp(-k * xa - t + lw), scalar)


def density_exponential_dx(k, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """x-derivative: ``-k f + k^2 t^2 exp(-k x - t) W_{1,3}(k x t)``."""
    _check_t(t)
    xa, scalar = _arr(x)
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    lw = _log_wright_1(3.0, k * xa * t, ctl)
    f = density_exponential(k, xa, t, ctl)
    return _ret(-k * f + k * k * t * t * np.exp(-k * xa - t + lw), scalar)


# -- Mittag-Leffler kernel ------------------------------------------------------------

def _ml_prabhakar_sum(k, nu, x, t, ctl, shift, lpre=0.0):
    """``exp(lpre) sum_n (k t x^nu)^n / n! E^n_{nu, nu n - shift}(-k x^nu)`` for moderate ``k x^nu``.

    The prefactor enters each term in log space so tiny ``x`` does not overflow it.
    """
    z = k * x ** nu
    lz = np.log(k * t) + nu * np.log(x)
    total = np.zeros_like(x)
    terms = []
    n = 0
    while True:
        n += 1
        if n > ctl.max_terms:
            raise SeriesConvergenceError("outer density series did not converge", total, n)
        inner = prabhakar_general(nu, nu * n - shift, float(n), -z, ctl)
        term = np.exp(n * lz - sc.gammaln(n + 1.0) + lpre) * inner
        total = total + term
        terms.append(term)
        if _outer_done(terms, total, ctl, n):
            return total


def density_ml(k, nu, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """Density for the Mittag-Leffler kernel.

    ``(exp(-t)/x) sum_{n>=1} (k t x^nu)^n / n! E^n_{nu, nu n}(-k x^nu)``;
    points with ``k x^nu`` beyond the series range use the cut integral.
    """
    _check_t(t)
    if not 0 < nu < 1:
        raise DomainError("nu must lie in (0, 1)")
    xa, scalar = _arr(x)
    _positive_x(xa, "the Mittag-Leffler density")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    out = np.empty_like(xa)
    far = k * xa ** nu > _ML_SERIES_LIMIT
    if (~far).any():
        xs = xa[~far]
        out[~far] = _ml_prabhakar_sum(k, nu, xs, t, ctl, 0.0, -t - np.log(xs))
    if far.any():
        out[far] = _cut_density(np.array([1.0]), np.array([k]), np.array([nu]), xa[far], t)
    return _ret(out, scalar)


def density_ml_dx(k, nu, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """x-derivative from the term-wise differentiated series.

    ``exp(-t) sum_n (k t)^n / n! x^(nu n - 2) E^n_{nu, nu n - 1}(-k x^nu)``.
    """
    _check_t(t)
    xa, scalar = _arr(x)
    _positive_x(xa, "the Mittag-Leffler density")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    out = np.empty_like(xa)
    far = k * xa ** nu > _ML_SERIES_LIMIT
    if (~far).any():
        xs = xa[~far]
        out[~far] = _ml_prabhakar_sum(k, nu, xs, t, ctl, 1.0, -t - 2.0 * np.log(xs))
    if far.any():
        out[far] = _cut_density(np.array([1.0]), np.array([k]), np.array([nu]), xa[far], t,
                                derivative=True)
    return _ret(out, scalar)


def _cut_density(w, k, nu, x, t, derivative=False):
    """Branch-cut integral for a Mittag-Leffler mixture ``sum w_i`` (k_i, nu_i).

    The variable is rescaled by ``c = k^(1/nu)`` of the slowest component so
    that the pole-like peak of psi sits near ``r = 1``.
    """
    c = float(np.max(k ** (1.0 / nu)))
    lc = math.log(c)
    nu_c = float(np.max(nu))

    def h(lr, u):
        lrr = lr + lc
        s = np.exp(nu[None, None, :] * lrr[..., None] - 1j * np.pi * nu[None, None, :])
        psi = (s / (s + k)) @ w
        val = np.exp(-t * psi).imag * np.exp(-u)
        if derivative:
            val = -val * np.exp(lrr)
        return val

    xa = np.asarray(x, dtype=float)
    return c / np.pi * cut_quad(h, np.log(c * xa), nu_c, power=1.0)


def density_ml_family_cut(spec: KernelSpec, x, t, derivative=False):
    """Density (or its x-derivative) of S(t) for any Mittag-Leffler-family kernel via the cut integral."""
    _check_t(t)
    if spec.family != "ml":
        raise DomainError("the cut representation needs a Mittag-Leffler family kernel")
    xa, scalar = _arr(x)
    _positive_x(xa, "the Mittag-Leffler density")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    w, k, nu = spec.components()
    return _ret(_cut_density(w, k, nu, xa, t, derivative), scalar)


# -- incomplete-gamma kernel ------------------------------------------------------

def _gamma_family_live(k, t, x):
    """Mask of the ``x`` where an incomplete-gamma density can be representable.

    Every n-fold convolution of the jumps is a gamma(a, k) law with
    ``a <= n``, and for ``k x >= 1`` its density (and x-derivative over
    ``k (n + 1)``) is at most ``1.13 k 2^a exp(-k x / 2)``.  Summing over the
    Poisson weights bounds f and its derivative by
    ``1.13 k max(1, k) (2t + 1) exp(t - k x / 2)``; beyond ``exp(-750)`` both
    underflow, so the series, which would need ever more terms, is skipped.
    """
    bound = math.log(1.13 * k * max(1.0, k) * (2.0 * t + 1.0)) + t - 0.5 * k * x
    return (k * x < 1.0) | (bound > -750.0)


def _live_only(fn, k, t, xa):
    live = _gamma_family_live(k, t, xa)
    if live.all():
        return fn(xa)
    out = np.zeros_like(xa)
    if live.any():
        out[live] = fn(xa[live])
    return out

def density_ig(k, rho, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """``(exp(-t - k x)/x) sum_{n>=1} (k^rho t x^rho)^n / (n! Gamma(rho n))``."""
    _check_t(t)
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    xa, scalar = _arr(x)
    _positive_x(xa, "the incomplete-gamma density")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)

    def f(xv):
        lw = log_wright(rho, 0.0, rho * np.log(k * xv) + math.log(t), ctl)
        return np.exp(-t - k * xv - np.log(xv) + lw)

    return _ret(_live_only(f, k, t, xa), scalar)


def density_ig_dx(k, rho, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """x-derivative: ``-k f + (exp(-t - k x)/x^2) W_{rho,-1}(k^rho t x^rho)``."""
    _check_t(t)
    xa, scalar = _arr(x)
    _positive_x(xa, "the incomplete-gamma density")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)

    def df(xv):
        f = density_ig(k, rho, xv, t, ctl)
        w = wright(rho, -1.0, t * (k * xv) ** rho, ctl)
        return -k * f + np.exp(-t - k * xv - 2.0 * np.log(xv)) * w

    return _ret(_live_only(df, k, t, xa), scalar)


# -- two-point exponential mixture ----------------------------------------------

def _two_point_exp_sum(k1, k2, q1, x, t, ctl, shift, lpre):
    """``exp(lpre) sum_n t^n/n! x^(n-1-shift) sum_j C(n,j) (q1 k1)^j (q2 k2)^(n-j) E^j_{1,n-shift}(lam x)``.

    The terms of ``E^j_{1,n}(z)`` peak near index ``z``, so the term cap of
    these positive inner series is raised to cover ``lam x``; ``lpre``
    (typically ``-t - k2 x``) is added in log space to avoid overflow.
    """
    q2 = 1.0 - q1
    lam = k2 - k1
    z_max = float(lam * np.max(x)) if x.size else 0.0
    need = int(2.0 * z_max + 10.0 * math.sqrt(z_max) + 50)
    inner_ctl = SeriesControl(ctl.abs_tol, max(ctl.max_terms, need))
    with np.errstate(divide="ignore"):
        lx = np.log(x)
        llam = np.log(lam * x)
        la = math.log(q1 * k1) if q1 > 0 else -math.inf
        lb = math.log(q2 * k2) if q2 > 0 else -math.inf
    total = np.zeros_like(x)
    terms = []
    n = 0
    while True:
        n += 1
        if n > ctl.max_terms:
            raise SeriesConvergenceError("outer density series did not converge", total, n)
        term = np.zeros_like(x)
        for j in range(n + 1):
            lcoef = sc.gammaln(n + 1.0) - sc.gammaln(j + 1.0) - sc.gammaln(n - j + 1.0)
            if j:
                lcoef += j * la
            if n - j:
                lcoef += (n - j) * lb
            if lcoef == -math.inf:
                continue
            lp = log_prabhakar(1.0, float(n - shift), float(j), llam, inner_ctl)
            p = n - 1 - shift
            with np.errstate(invalid="ignore"):
                lpow = np.where(p == 0, 0.0, p * lx)
            term += np.exp(n * math.log(t) - sc.gammaln(n + 1.0) + lcoef + lpow + lp + lpre)
        total = total + term
        terms.append(term)
        if _outer_done(terms, total, ctl, n):
            return total


def _two_point_exp_thinned(k1, k2, q1, x, t, derivative=False):
    """Density (or x-derivative) from ``S = S1 + S2`` with independent thinned parts.

    ``S_i`` is compound Poisson with mean ``q_i t`` jumps of rate ``k_i``, so the
    density is ``e^{-q2 t} f1 + e^{-q1 t} f2 + f1 * f2``.  The convolution has
    a boundary layer of width ``1/(k2 - k1)`` at ``z = x``, which the
    tanh-sinh rule resolves; every factor is finite, so this form is cheap
    where the double series would need ``~(k2 - k1) x`` inner terms.
    """
    t1, t2 = q1 * t, (1.0 - q1) * t

    f1 = lambda z: density_exponential(k1, z.ravel(), t1).reshape(z.shape)  # noqa: E731
    f2 = lambda z: density_exponential(k2, z.ravel(), t2).reshape(z.shape)  # noqa: E731
    if not derivative:
        conv = tanh_sinh(lambda dl, dr: f1(dl) * f2(dr), 0.0, x, rel_tol=1e-13,
                         abs_tol=1e-300, max_level=10, pair=True).value
        return (math.exp(-t2) * density_exponential(k1, x, t1)
                + math.exp(-t1) * density_exponential(k2, x, t2) + conv)
    d2 = lambda z: density_exponential_dx(k2, z.ravel(), t2).reshape(z.shape)  # noqa: E731
    conv = tanh_sinh(lambda dl, dr: f1(dl) * d2(dr), 0.0, x, rel_tol=1e-13,
                     abs_tol=1e-300, max_level=10, pair=True).value
    return (math.exp(-t2) * density_exponential_dx(k1, x, t1)
            + math.exp(-t1) * density_exponential_dx(k2, x, t2)
            + density_exponential(k1, x, t1) * k2 * t2 * math.exp(-t2) + conv)


def _two_point_exp_dispatch(k1, k2, q1, xa, t, ctl, derivative):
    out = np.empty_like(xa)
    near = (k2 - k1) * xa <= _TPE_SERIES_LIMIT
    if near.any():
        xs = xa[near]
        f = _two_point_exp_sum(k1, k2, q1, xs, t, ctl, 0, -t - k2 * xs)
        if derivative:
            f = -k2 * f + _two_point_exp_sum(k1, k2, q1, xs, t, ctl, 1, -t - k2 * xs)
        out[near] = f
    if (~near).any():
        out[~near] = _two_point_exp_thinned(k1, k2, q1, xa[~near], t, derivative)
    return out


def density_two_point_exp(k1, k2, q1, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """Density for a two-point mixture of exponential kernels (rates k1 < k2, weights q1, 1-q1).

    ``(exp(-t - k2 x)/x) sum_n (x t)^n/n! sum_j C(n,j) (q1 k1)^j (q2 k2)^(n-j)
    E^j_{1,n}((k2 - k1) x)``, summed directly for moderate ``(k2 - k1) x``.
    """
    _check_t(t)
    if not (0 < k1 < k2):
        raise DomainError("need 0 < k1 < k2")
    if not 0 <= q1 <= 1:
        raise DomainError("q1 must lie in [0, 1]")
    xa, scalar = _arr(x)
    if np.any(xa < 0):
        raise DomainError("x must be >= 0")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    return _ret(_two_point_exp_dispatch(k1, k2, q1, xa, t, ctl, False), scalar)


def density_two_point_exp_dx(k1, k2, q1, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """x-derivative of :func:`density_two_point_exp` (x > 0)."""
    _check_t(t)
    if not (0 < k1 < k2):
        raise DomainError("need 0 < k1 < k2")
    xa, scalar = _arr(x)
    _positive_x(xa, "the term-wise derivative series")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    return _ret(_two_point_exp_dispatch(k1, k2, q1, xa, t, ctl, True), scalar)


# -- two-point incomplete-gamma mixture -----------------------------------------

def density_two_point_ig(k, rho1, rho2, q1, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """Density for a two-point rho-mixture of incomplete-gamma kernels.

    ``(exp(-t - k x)/x) sum_l A^l/l! W_{rho2, rho1 l}(B)`` with
    ``A = q1 k^rho1 x^rho1 t`` and ``B = q2 k^rho2 x^rho2 t``.
    """
    _check_t(t)
    if not (0 < rho1 < rho2 < 1):
        raise DomainError("need 0 < rho1 < rho2 < 1")
    if not 0 <= q1 <= 1:
        raise DomainError("q1 must lie in [0, 1]")
    xa, scalar = _arr(x)
    _positive_x(xa, "the incomplete-gamma density")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    return _ret(_live_only(lambda xv: _two_point_ig(k, rho1, rho2, q1, xv, t, ctl), k, t, xa),
                scalar)


def _two_point_ig(k, rho1, rho2, q1, xa, t, ctl):
    q2 = 1.0 - q1
    with np.errstate(divide="ignore"):
        la = math.log(q1) + rho1 * np.log(k * xa) + math.log(t) if q1 > 0 else np.full_like(xa, -np.inf)
        lb = math.log(q2) + rho2 * np.log(k * xa) + math.log(t) if q2 > 0 else np.full_like(xa, -np.inf)
    big = np.full_like(xa, -np.inf)
    logs = []
    l = 0
    total = np.zeros_like(xa)
    terms = []
    while True:
        if l > ctl.max_terms:
            raise SeriesConvergenceError("outer density series did not converge", total, l)
        with np.errstate(invalid="ignore"):
            lpow = np.where(l == 0, 0.0, l * la)
        lt = lpow - sc.gammaln(l + 1.0) + log_wright(rho2, rho1 * l, lb, ctl)
        logs.append(lt)
        big = np.maximum(big, lt)
        term = np.exp(lt)
        total = total + term
        terms.append(term)
        l += 1
        if q1 == 0 or _outer_done(terms, total, ctl, l):
            break
    # re-sum in log space to keep the tiny-x tail accurate
    arr = np.array(logs)
    shift = np.where(np.isfinite(big), big, 0.0)
    with np.errstate(under="ignore"):
        s = np.exp(arr - shift).sum(axis=0)
    lsum = shift + np.log(s)
    return np.exp(-t - k * xa - np.log(xa) + lsum)


def density_two_point_ig_dx(k, rho1, rho2, q1, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """x-derivative: ``-k f + (exp(-t - k x)/x^2) sum_l A^l/l! W_{rho2, rho1 l - 1}(B)``."""
    _check_t(t)
    xa, scalar = _arr(x)
    _positive_x(xa, "the incomplete-gamma density")
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    return _ret(_live_only(lambda xv: _two_point_ig_dx(k, rho1, rho2, q1, xv, t, ctl), k, t, xa),
                scalar)


def _two_point_ig_dx(k, rho1, rho2, q1, xa, t, ctl):
    q2 = 1.0 - q1
    a = q1 * t * (k * xa) ** rho1
    b = q2 * t * (k * xa) ** rho2
    total = np.zeros_like(xa)
    terms = []
    l = 0
    fact = 1.0
    while True:
        if l > ctl.max_terms:
            raise SeriesConvergenceError("outer derivative series did not converge", total, l)
        term = (a ** l / fact) * wright(rho2, rho1 * l - 1.0, b, ctl)
        total = total + term
        terms.append(term)
        l += 1
        fact *= l
        if q1 == 0 or _outer_done(terms, total, ctl, l):
            break
    f = _two_point_ig(k, rho1, rho2, q1, xa, t, ctl)
    return -k * f + np.exp(-t - k * xa - 2.0 * np.log(xa)) * total


# -- distributed-order Mittag-Leffler -------------------------------------------

def _laguerre_coefficients(k, q, t, n):
    """``a_J = (-k)^J L_J^(-1)(q t)`` for J = 0..n-1, as (log|a|, sign)."""
    j = np.arange(n, dtype=float)
    lag = np.empty(n)
    lag[0] = 1.0
    if n > 1:
        # L_J^(-1)(x) = -(x/J) L_{J-1}^(1)(x)
        jj = j[1:]
        lag[1:] = -(q * t / jj) * sc.eval_genlaguerre(jj - 1.0, 1.0, q * t)
    val_sign = np.sign(lag) * np.where(j % 2 == 1, -1.0, 1.0)
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(lag)) + j * math.log(k)
    return la, val_sign


def _two_point_ml_series(k, nu1, nu2, q1, x, t, ctl, shift=0.0):
    """``exp(-t) sum_{(J,M) != 0} a_J b_M x^(p - 1 - shift) / Gamma(p - shift)``, p = nu1 J + nu2 M.

    Follows from expanding ``exp(t q k/(eta^nu + k))`` in powers of
    ``eta^-nu`` (Laguerre generating function) and inverting term by term.
    Returns values and a mask of points free of harmful cancellation.
    """
    q2 = 1.0 - q1
    nmax = ctl.max_terms
    la, sa = _laguerre_coefficients(k, q1, t, nmax)
    lb, sb = _laguerre_coefficients(k, q2, t, nmax)
    lx = np.log(x)
    total = np.zeros_like(x)
    abs_total = np.zeros_like(x)
    terms = []
    for jj in range(nmax):
        if q1 == 0 and jj > 0:
            break
        j_min = 1 if jj == 0 else 0

        def coef(m, jj=jj):
            lr, sr = log_rgamma(nu1 * jj + nu2 * m - shift)
            lc = la[jj] + lb[m] + lr
            sg = sa[jj] * sb[m] * sr
            if jj == 0:
                lc = np.where(m == 0, -np.inf, lc)
                sg = np.where(m == 0, 0.0, sg)
            if q2 == 0:
                lc = np.where(m > 0, -np.inf, lc)
            return lc, sg

        # inner sum over M in powers of x^nu2, outer factor x^(nu1 J - 1 - shift)
        y = np.exp(nu2 * lx)
        inner, inner_abs, _ = _signed_series(coef, y, ctl, j_min + 2)
        pref = np.exp((nu1 * jj - 1.0 - shift) * lx)
        term = pref * inner
        total = total + term
        abs_total = abs_total + pref * inner_abs
        terms.append(term)
        if jj >= 2 and _outer_done(terms, np.abs(total) + 1e-300, ctl, jj):
            break
    else:
        raise SeriesConvergenceError("two-point series did not converge", total, nmax)
    ok = ~_cancelled(total, abs_total, ctl) & (total > 0 if shift == 0 else True)
    return math.exp(-t) * total, ok


def density_distributed_ml(k, mix, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """Density for a Mittag-Leffler kernel whose order nu is mixed by ``mix``.

    The mixture acts inside psi, so the transform is
    ``exp(-t sum_i w_i eta^nu_i/(eta^nu_i + k)) - exp(-t)``; this is not a
    mixture of single-order densities.  A Dirac law gives the single-order
    density; a two-point law uses the double power series (with the cut
    integral where that series cancels); Beta and Grid laws use the cut
    integral throughout.
    """
    _check_t(t)
    xa, scalar = _arr(x)
    _positive_x(xa, "the Mittag-Leffler density")
    if isinstance(mix, Dirac):
        return _ret(density_ml(k, mix.point, xa, t, ctl), scalar)
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    nodes, w = mix.discretize()
    if isinstance(mix, TwoPoint):
        out = np.empty_like(xa)
        trial = k * xa ** mix.p1 <= _ML_SERIES_LIMIT
        ok = np.zeros_like(trial)
        if trial.any():
            vals, good = _two_point_ml_series(k, mix.p1, mix.p2, mix.w1, xa[trial], t, ctl)
            idx = np.flatnonzero(trial)
            out[idx[good]] = vals[good]
            ok[idx[good]] = True
        if (~ok).any():
            out[~ok] = _cut_density(w, np.full_like(nodes, k), nodes, xa[~ok], t)
        return _ret(out, scalar)
    return _ret(_cut_density(w, np.full_like(nodes, k), nodes, xa, t), scalar)


def density_distributed_ml_dx(k, mix, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """x-derivative of :func:`density_distributed_ml`."""
    _check_t(t)
    xa, scalar = _arr(x)
    _positive_x(xa, "the Mittag-Leffler density")
    if isinstance(mix, Dirac):
        return _ret(density_ml_dx(k, mix.point, xa, t, ctl), scalar)
    if t == 0:
        return _ret(np.zeros_like(xa), scalar)
    nodes, w = mix.discretize()
    if isinstance(mix, TwoPoint):
        out = np.empty_like(xa)
        trial = k * xa ** mix.p1 <= _ML_SERIES_LIMIT
        ok = np.zeros_like(trial)
        if trial.any():
            vals, good = _two_point_ml_series(k, mix.p1, mix.p2, mix.w1, xa[trial], t, ctl, 1.0)
            idx = np.flatnonzero(trial)
            out[idx[good]] = vals[good]
            ok[idx[good]] = True
        if (~ok).any():
            out[~ok] = _cut_density(w, np.full_like(nodes, k), nodes, xa[~ok], t, True)
        return _ret(out, scalar)
    return _ret(_cut_density(w, np.full_like(nodes, k), nodes, xa, t, True), scalar)


# -- law of S(t) --------------------------------------------------------------------

@dataclass(frozen=True)
class SubordinatorLaw:
    """Law of S(t): atom ``exp(-t)`` at zero plus an absolutely continuous part.

    Attributes
    ----------
    spec, t : KernelSpec, float
    atom_mass : float
    method : str
        ``'series'`` for closed-form series, ``'cut'`` for the branch-cut
        integral, ``'gaver-stehfest'`` for numeric-only inversion.
    """

    spec: KernelSpec
    t: float
    atom_mass: float
    method: str
    _density: object = field(repr=False)
    _derivative: object = field(repr=False, default=None)
    ctl: SeriesControl = DEFAULT_CONTROL

    @property
    def numeric_only(self):
        return self.method == "gaver-stehfest"

    def density(self, x):
        """Density of the absolutely continuous part at ``x``."""
        return self._density(x)

    def density_dx(self, x):
        """x-derivative of the density, when an analytic form exists."""
        if self._derivative is None:
            raise DomainError(f"no analytic derivative for {self.spec.label}")
        return self._derivative(x)

    @property
    def has_derivative(self):
        return self._derivative is not None

    def value_at_origin(self):
        """Density at ``x = 0``: finite for the exponential family, ``inf`` otherwise."""
        if self.spec.finite_origin:
            return self.t * math.exp(-self.t) * mean_rate(self.spec)
        return math.inf if self.t > 0 else 0.0


def _numeric_law(spec, t, ctl):
    from .laplace import invert_closed_form

    origin = t * math.exp(-t) * mean_rate(spec) if spec.finite_origin else None

    def dens(x):
        xa, scalar = _arr(x)
        out = np.empty_like(xa)
        for i, xi in enumerate(xa):
            if xi == 0 and origin is not None:
                out[i] = origin
            else:
                out[i] = invert_closed_form(spec, xi, t)
        return _ret(out, scalar)

    return SubordinatorLaw(spec, t, math.exp(-t), "gaver-stehfest", dens, None, ctl)


def law_of(spec: KernelSpec, t, ctl: SeriesControl = DEFAULT_CONTROL) -> SubordinatorLaw:
    """Law of S(t) for ``spec``; dispatches to the matching density."""
    _check_t(t)
    t = float(t)
    atom = math.exp(-t)
    v = spec.variant
    mix = spec.mixture

    def make(f, df, method="series"):
        return SubordinatorLaw(spec, t, atom, method, f, df, ctl)

    if v == "Exponential" or (v == "DistributedExp" and isinstance(mix, Dirac)):
        k = spec.k if v == "Exponential" else k_of_alpha(mix.point)
        return make(lambda x: density_exponential(k, x, t, ctl),
                    lambda x: density_exponential_dx(k, x, t, ctl))
    if v == "DistributedExp" and isinstance(mix, TwoPoint):
        k1, k2, q1 = k_of_alpha(mix.p1), k_of_alpha(mix.p2), mix.w1
        return make(lambda x: density_two_point_exp(k1, k2, q1, x, t, ctl),
                    lambda x: density_two_point_exp_dx(k1, k2, q1, x, t, ctl))
    if v == "MittagLefflerK" or (v == "DistributedML" and isinstance(mix, Dirac)):
        nu = spec.nu if v == "MittagLefflerK" else mix.point
        k = spec.k
        return make(lambda x: density_ml(k, nu, x, t, ctl),
                    lambda x: density_ml_dx(k, nu, x, t, ctl))
    if v == "DistributedML":
        k = spec.k
        method = "series" if isinstance(mix, TwoPoint) else "cut"
        return make(lambda x: density_distributed_ml(k, mix, x, t, ctl),
                    lambda x: density_distributed_ml_dx(k, mix, x, t, ctl), method)
    if v == "IncompleteGammaK" or (v == "DistributedIG" and isinstance(mix, Dirac)):
        rho = spec.rho if v == "IncompleteGammaK" else mix.point
        k = spec.k
        return make(lambda x: density_ig(k, rho, x, t, ctl),
                    lambda x: density_ig_dx(k, rho, x, t, ctl))
    if v == "DistributedIG" and isinstance(mix, TwoPoint):
        k = spec.k
        a = (mix.p1, mix.p2, mix.w1)
        return make(lambda x: density_two_point_ig(k, *a, x, t, ctl),
                    lambda x: density_two_point_ig_dx(k, *a, x, t, ctl))
    # continuous or grid mixtures of the exponential / incomplete-gamma families
    return _numeric_law(spec, t, ctl)


# -- grids and export ------------------------------------------------------------

def geometric_grid(x_min, x_max, n, include_zero=False):
    """``n`` geometrically spaced points on [x_min, x_max], optionally preceded by 0."""
    if not (0 < x_min < x_max) or n < 2:
        raise DomainError("need 0 < x_min < x_max and n >= 2")
    g = np.geomspace(x_min, x_max, n)
    return np.concatenate([[0.0], g]) if include_zero else g


def density_grid(spec: KernelSpec, t, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Evaluate the density on a grid; x = 0 is allowed for finite-origin kernels."""
    law = law_of(spec, t, ctl)
    xa = np.asarray(x, dtype=float)
    out = np.empty_like(xa)
    zero = xa == 0
    if zero.any():
        if not spec.finite_origin and t > 0:
            raise DomainError(f"{spec.label} density diverges at x = 0")
        out[zero] = law.value_at_origin() if t > 0 else 0.0
    if (~zero).any():
        out[~zero] = law.density(xa[~zero]) if t > 0 else 0.0
    return law, out


def write_density_csv(path, spec: KernelSpec, t, x, values):
    """Write ``x,density,t,kernel_id`` rows with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "density", "t", "kernel_id"])
        for xi, fi in zip(x, values):
            w.writerow([f"{xi:.17g}", f"{fi:.17g}", f"{t:.17g}", spec.label])


def write_density_json(path, law: SubordinatorLaw, x, values):
    doc = {
        "spec": law.spec.to_dict(),
        "kernel_id": law.spec.label,
        "t": law.t,
        "atom_mass": law.atom_mass,
        "method": law.method,
        "ctl": law.ctl.to_dict(),
        "x": [float(v) for v in x],
        "density": [float(v) for v in values],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
