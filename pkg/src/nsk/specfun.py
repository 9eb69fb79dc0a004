"""Mittag-Leffler, Prabhakar and Wright functions and the upper incomplete gamma.

Series are summed in blocks with every term built in log space with an
explicit sign, so large Gamma values never overflow.  Besides the sum the
engine tracks ``sum |term|``; when rounding error from cancellation
(``~eps * sum|term|``) would exceed the tolerance, negative arguments are
rerouted to an integral representation instead of returning a poisoned
value.  The reroute is decided by that error estimate, not by a fixed
cut-off on ``|x|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import CancellationError, DomainError, QuadratureError, SeriesConvergenceError
from .quadrature import exp_sinh, tanh_sinh

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "mittag_leffler",
    "mittag_leffler2",
    "prabhakar",
    "wright",
    "log_wright",
    "log_prabhakar",
    "upper_inc_gamma",
    "rgamma",
]

_EPS = np.finfo(float).eps
_BLOCK = 32
# the series is trusted on |x| <= this for negative arguments as long as the
# cancellation estimate stays under tolerance
_SERIES_RADIUS = 5.0


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for every infinite series.

    Attributes
    ----------
    abs_tol : float
        A series stops once two consecutive terms are below
        ``abs_tol * max(1, |partial sum|)``.
    max_terms : int
        Hard cap; reaching it raises :class:`SeriesConvergenceError`.
    """

    abs_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not (self.abs_tol > 0):
            raise DomainError("abs_tol must be positive")
        if int(self.max_terms) < 1:
            raise DomainError("max_terms must be at least 1")

    def to_dict(self):
        return {"abs_tol": self.abs_tol, "max_terms": int(self.max_terms)}


DEFAULT_CONTROL = SeriesControl()


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _out(v, scalar):
    return float(v[0]) if scalar else v


def log_rgamma(z):
    """Return ``(log|1/Gamma(z)|, sign(1/Gamma(z)))``; poles give ``(-inf, 0)``."""
    z = np.asarray(z, dtype=float)
    pole = (z <= 0) & (z == np.floor(z))
    safe = np.where(pole, 1.0, z)
    la = np.where(pole, -np.inf, -sc.gammaln(safe))
    sg = np.where(pole, 0.0, sc.gammasgn(safe))
    return la, sg


def rgamma(z):
    """1/Gamma(z), exactly zero at non-positive integers."""
    return sc.rgamma(z)


def _first_regular_index(a, b):
    """Smallest j such that a*i + b > 0 for all i >= j (a > 0)."""
    if b > 0:
        return 0
    return int(np.floor(-b / a)) + 1


def _signed_series(coef, x, ctl, j_min=0, strict=True):
    """Sum ``sum_j c_j x^j`` for a 1-d array ``x``.

    ``coef(j)`` returns ``(log|c_j|, sign c_j)`` for an integer array ``j``.
    Returns the sums, the sums of absolute terms and a per-element
    convergence mask.  With ``strict=True`` any non-converged element raises
    :class:`SeriesConvergenceError`.
    """
    n = x.shape[0]
    with np.errstate(divide="ignore"):
        lx = np.log(np.abs(x))
    odd_sign = np.sign(x)
    total = np.zeros(n)
    abs_total = np.zeros(n)
    active = np.ones(n, dtype=bool)
    j0 = 0
    while True:
        j = np.arange(j0, min(j0 + _BLOCK, ctl.max_terms))
        idx = np.flatnonzero(active)
        la, sa = coef(j)
        with np.errstate(invalid="ignore", over="ignore"):
            lt = la[None, :] + j[None, :] * lx[idx, None]
            lt = np.where(j[None, :] == 0, la[None, :], lt)
            mag = np.exp(lt)
            sgn = sa[None, :] * np.where(j[None, :] % 2 == 1, odd_sign[idx, None], 1.0)
            total[idx] += (sgn * mag).sum(axis=1)
            abs_total[idx] += mag.sum(axis=1)
        bound = ctl.abs_tol * np.maximum(1.0, np.abs(total[idx]))
        if j.size >= 2:
            last, prev = mag[:, -1], mag[:, -2]
            done = (last <= bound) & (prev <= bound) & (last <= prev) & (j[-1] > j_min)
        else:
            done = np.zeros(idx.size, dtype=bool)
        blown = ~np.isfinite(total[idx])
        active[idx[done]] = False
        j0 = int(j[-1]) + 1
        if blown.any() or j0 >= ctl.max_terms:
            if strict and (blown.any() or active.any()):
                raise SeriesConvergenceError("series did not converge within max_terms",
                                             total.copy(), j0)
            if blown.any() or active.any():
                return total, abs_total, ~active & np.isfinite(total)
        if not active.any():
            return total, abs_total, ~active


def _log_positive_series(coef, logx, ctl, j_min=0):
    """Return ``log sum_j exp(coef(j) + j*logx)`` for terms that are all >= 0.

    ``coef(j)`` gives ``log c_j`` (``-inf`` for vanishing terms).  The
    stopping rule is relative here: the last two terms must be below
    ``abs_tol`` times the running sum.
    """
    n = logx.shape[0]
    big = np.full(n, -np.inf)
    acc = np.zeros(n)
    active = np.ones(n, dtype=bool)
    ltol = np.log(ctl.abs_tol)
    j0 = 0
    while True:
        j = np.arange(j0, min(j0 + _BLOCK, ctl.max_terms))
        idx = np.flatnonzero(active)
        la = coef(j)
        with np.errstate(invalid="ignore"):
            lt = la[None, :] + j[None, :] * logx[idx, None]
        lt = np.where(j[None, :] == 0, la[None, :], lt)
        lt = np.where(np.isnan(lt), -np.inf, lt)
        bmax = lt.max(axis=1)
        new_big = np.maximum(big[idx], bmax)
        ok = np.isfinite(new_big)
        shift = np.where(ok, new_big, 0.0)
        with np.errstate(invalid="ignore"):
            acc[idx] = acc[idx] * np.exp(np.where(ok, big[idx] - shift, 0.0)) \
                + np.exp(lt - shift[:, None]).sum(axis=1)
        acc[idx] = np.where(ok, acc[idx], 0.0)
        big[idx] = new_big
        logsum = np.where(ok, shift + np.log(np.where(ok, acc[idx], 1.0)), -np.inf)
        if j.size >= 2:
            last, prev = lt[:, -1], lt[:, -2]
            with np.errstate(invalid="ignore"):
                small = ((last - logsum <= ltol) | (last == -np.inf)) & \
                        ((prev - logsum <= ltol) | (prev == -np.inf))
            done = small & (last <= prev) & (j[-1] > j_min)
        else:
            done = np.zeros(idx.size, dtype=bool)
        active[idx[done]] = False
        j0 = int(j[-1]) + 1
        if not active.any():
            return np.where(acc > 0, big + np.log(np.where(acc > 0, acc, 1.0)), -np.inf)
        if j0 >= ctl.max_terms:
            partial = np.where(acc > 0, big + np.log(np.where(acc > 0, acc, 1.0)), -np.inf)
            raise SeriesConvergenceError("series did not converge within max_terms",
                                         np.exp(partial), j0)


def _log_pochhammer(g, n):
    """log (g)_j for j = 0..n-1, accumulated term by term."""
    out = np.zeros(n)
    if n > 1:
        with np.errstate(divide="ignore"):
            out[1:] = np.cumsum(np.log(g + np.arange(n - 1)))
    return out


def _prabhakar_coef(a, b, g, ctl):
    lpoch = _log_pochhammer(g, ctl.max_terms + 1)

    def coef(j):
        lr, sr = log_rgamma(a * j + b)
        return lpoch[j] - sc.gammaln(j + 1.0) + lr, sr

    return coef


def _cancelled(total, abs_total, ctl):
    return 4.0 * _EPS * abs_total > ctl.abs_tol * np.maximum(1.0, np.abs(total))


def _prabhakar_core(a, b, g, x, ctl):
    """Series value with rerouting of cancelling negative arguments to the cut integral.

    Internal form: accepts b <= 0 and g >= 0 (1/Gamma poles give zero terms).
    """
    out = np.empty_like(x)
    if g == 0:
        out[:] = rgamma(b)
        return out
    coef = _prabhakar_coef(a, b, g, ctl)
    cut = (lambda z: _prabhakar_cut(a, b, g, z)) if (a < 1 and a * g - b > -1) else None
    return _series_or_integral(coef, x, ctl, _first_regular_index(a, b), cut)


def _series_or_integral(coef, x, ctl, j_min, integral):
    """Sum the series where it is reliable, use ``integral(-x)`` elsewhere.

    Negative arguments beyond the series radius, or whose series fails to
    converge or loses more than the tolerance to cancellation, are handed to
    ``integral``.  Without an integral representation such failures raise.
    """
    out = np.empty_like(x)
    use_int = (x < -_SERIES_RADIUS) if integral is not None else np.zeros(x.shape, bool)
    ser = np.flatnonzero(~use_int)
    if ser.size:
        total, abs_total, conv = _signed_series(coef, x[ser], ctl, j_min,
                                                strict=integral is None)
        bad = ~conv | _cancelled(total, abs_total, ctl)
        if bad.any():
            if integral is None or not (x[ser][bad] < 0).all():
                if not conv.all():
                    raise SeriesConvergenceError("series did not converge within max_terms",
                                                 total, ctl.max_terms)
                raise CancellationError("series loses precision to cancellation", total, 0)
            use_int[ser[bad]] = True
        out[ser[~bad]] = total[~bad]
    if use_int.any():
        out[use_int] = integral(-x[use_int])
    return out


def cut_quad(h, ly, a, power=1.0):
    """Branch-cut integral ``I = int_0^inf r**(power-1) h(lr, u) dr``.

    ``h`` receives ``lr = log r`` and ``u = r*y`` (``y = exp(ly)``, one value
    per row) and returns the regular part of the integrand.  Cut integrands
    of the Mittag-Leffler type peak at ``r = 1`` with relative width about
    ``pi*(1 - a)``; breakpoints bracket the peak so every panel meets it only
    at an endpoint, and ``lr`` is always formed from exact distances.  On
    the first panel the substitution ``v = r**power`` absorbs the origin
    singularity.  Rows with ``y > 200`` are integrated in ``u`` instead,
    where ``exp(-u)`` makes the peak irrelevant.
    """
    ly = np.atleast_1d(np.asarray(ly, dtype=float))
    p = float(power)
    rel = 1e-13
    # panels run without their own stopping test, since one panel may cross
    # zero; the tolerance applies to the assembled integral
    kw = dict(rel_tol=rel, abs_tol=1e-300, max_level=10, strict=False)
    out = np.zeros_like(ly)
    far = ly > np.log(200.0)
    near = ~far
    if near.any():
        y = np.exp(ly[near])[:, None]
        delta = min(0.5, 60.0 * np.cos(0.5 * np.pi * a))
        r1 = 1.0 - delta
        v1 = r1 ** p

        def first(dl, dr):
            with np.errstate(divide="ignore", under="ignore"):
                lr0 = np.log(dl) / p
                gap = -r1 * np.expm1(np.log1p(-dr / v1) / p)  # r1 - r
                lr = np.where(lr0 < np.log(0.5), lr0, np.log1p(-(delta + gap)))
                u = np.exp(lr) * y
            return h(lr, u) / p

        def full(lr, u):
            return np.exp((p - 1.0) * lr) * h(lr, u)

        out[near] = _assemble([
            tanh_sinh(first, 0.0, np.full(y.shape[0], v1), pair=True, **kw),
            tanh_sinh(lambda dl, dr: full(np.log1p(-dr), y * (1.0 - dr)),
                      np.full(y.shape[0], r1), 1.0, pair=True, **kw),
            tanh_sinh(lambda dl, dr: full(np.log1p(dl), y * (1.0 + dl)),
                      np.ones(y.shape[0]), 1.0 + delta, pair=True, **kw),
            exp_sinh(lambda x, d: full(np.log1p(delta + d), y * x),
                     np.full(y.shape[0], 1.0 + delta), scale=max(1.0, delta),
                     pair=True, **kw)], rel)
    if far.any():
        lyf = ly[far][:, None]

        def first_u(dl, dr):
            with np.errstate(divide="ignore", under="ignore"):
                lu = np.log(dl) / p
                u = np.exp(lu)
            return h(lu - lyf, u) / p

        def full_u(u):
            return u ** (p - 1.0) * h(np.log(u) - lyf, u)

        m = int(far.sum())
        tot = _assemble([tanh_sinh(first_u, np.zeros(m), 1.0, pair=True, **kw),
                         exp_sinh(full_u, np.ones(m), **kw)], rel)
        out[far] = np.exp(-p * ly[far]) * tot
    return out


def _assemble(parts, rel):
    """Sum panel results, checking the summed error against the panel magnitudes."""
    tot = sum(r.value for r in parts)
    err = sum(r.error for r in parts)
    scale = sum(np.abs(r.value) for r in parts)
    bad = ~(err <= rel * np.maximum(np.abs(tot), scale))
    if bad.any():
        raise QuadratureError("branch-cut integral did not converge", tot, err)
    return tot


def _prabhakar_cut(a, b, g, z):
    """E^g_{a,b}(-z) for z > 0 and 0 < a < 1 from the branch-cut integral.

    With y = z^(1/a) and G(s) = s^(a g - b) / (s^a + 1)^g,
    E = y^(1-b)/pi * int_0^inf exp(-r y) Im G(r e^{-i pi}) dr.
    """
    ly = np.log(z) / a
    p = a * g - b
    power = min(1.0, p + 1.0)

    def h(lr, u):
        # s = r e^{-i pi}; 1 + s^a with the real part formed without
        # cancellation near a = 1
        ea = np.exp(a * lr)
        w = (-np.expm1(a * lr) + 2.0 * ea * np.cos(0.5 * np.pi * a) ** 2) \
            - 1j * ea * np.sin(np.pi * a)
        # regular part: r**(p - power + 1) * Im[...] * exp(-u)
        mag = (p - power + 1.0) * lr - g * np.log(np.abs(w)) - u
        phase = -np.pi * p - g * np.angle(w)
        return np.exp(mag) * np.sin(phase)

    return np.exp((1.0 - b) * ly) / np.pi * cut_quad(h, ly, a, power)


def prabhakar(alpha, beta, gamma, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Three-parameter Mittag-Leffler function.

    .. math:: E^{\\gamma}_{\\alpha,\\beta}(x) = \\sum_j \\frac{(\\gamma)_j x^j}{j!\\,\\Gamma(\\alpha j+\\beta)}

    Parameters
    ----------
    alpha, beta, gamma : float
        Strictly positive.
    x : float or array_like
    ctl : SeriesControl

    Returns
    -------
    float or ndarray
    """
    if not (alpha > 0 and beta > 0 and gamma > 0):
        raise DomainError("prabhakar requires alpha, beta, gamma > 0")
    xa, scalar = _as_array(x)
    return _out(_prabhakar_core(float(alpha), float(beta), float(gamma), xa, ctl), scalar)


def prabhakar_general(alpha, beta, gamma, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Prabhakar function allowing ``beta <= 0`` and ``gamma >= 0``.

    Terms with ``1/Gamma`` at a non-positive integer are exactly zero.  Used
    by the term-by-term differentiated density series.
    """
    if not (alpha > 0 and gamma >= 0):
        raise DomainError("alpha > 0 and gamma >= 0 required")
    xa, scalar = _as_array(x)
    return _out(_prabhakar_core(float(alpha), float(beta), float(gamma), xa, ctl), scalar)


def mittag_leffler2(alpha, beta, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Two-parameter Mittag-Leffler function E_{alpha,beta}(x)."""
    if not (alpha > 0):
        raise DomainError("alpha must be positive")
    xa, scalar = _as_array(x)
    return _out(_prabhakar_core(float(alpha), float(beta), 1.0, xa, ctl), scalar)


def _ml_integral(nu, z):
    """E_nu(-z) for z > 0 from the real integral representation.

    E_nu(-z) = sin(nu pi)/pi * int_0^inf r^(nu-1) exp(-r z^(1/nu))
               / (r^(2 nu) + 2 r^nu cos(nu pi) + 1) dr
    """
    c2 = 4.0 * np.cos(0.5 * nu * np.pi) ** 2

    def h(lr, u):
        ln = nu * lr
        # denominator written as (r^nu - 1)^2 + 4 r^nu cos^2(nu pi/2)
        with np.errstate(over="ignore"):
            den = np.expm1(ln) ** 2 + c2 * np.exp(ln)
            return np.exp(-u) / den

    return np.sin(nu * np.pi) / np.pi * cut_quad(h, np.log(z) / nu, nu, power=nu)


def mittag_leffler(nu, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """One-parameter Mittag-Leffler function E_nu(x), ``0 < nu <= 1``.

    Negative arguments beyond the series radius (or whose series would
    lose precision to cancellation) use the integral representation.
    """
    if not (0 < nu <= 1):
        raise DomainError("mittag_leffler requires 0 < nu <= 1")
    xa, scalar = _as_array(x)
    if nu == 1:
        return _out(np.exp(xa), scalar)
    coef = _prabhakar_coef(nu, 1.0, 1.0, ctl)
    out = _series_or_integral(coef, xa, ctl, 0, lambda z: _ml_integral(float(nu), z))
    return _out(out, scalar)


def wright(a, b, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Wright function W_{a,b}(x) = sum_j x^j / (j! Gamma(a j + b)), ``a > -1``.

    Raises :class:`CancellationError` if the alternating series cannot
    deliver the tolerance in double precision.
    """
    if not (a > -1):
        raise DomainError("wright requires a > -1")
    xa, scalar = _as_array(x)
    a = float(a)
    b = float(b)

    def coef(j):
        lr, sr = log_rgamma(a * j + b)
        return lr - sc.gammaln(j + 1.0), sr

    j_min = _first_regular_index(a, b) if a > 0 else 0
    total, abs_total, _ = _signed_series(coef, xa, ctl, j_min)
    bad = _cancelled(total, abs_total, ctl)
    if bad.any():
        raise CancellationError("wright series loses precision to cancellation", total, 0)
    return _out(total, scalar)


def log_wright(a, b, logx, ctl: SeriesControl = DEFAULT_CONTROL):
    """log W_{a,b}(x) from ``log x`` for series whose terms are all non-negative.

    Requires ``a > 0`` and ``a j + b`` either positive or a pole for every
    ``j``; ``logx = -inf`` encodes ``x = 0``.
    """
    la_, scalar = _as_array(logx)
    a = float(a)
    b = float(b)

    def coef(j):
        lr, sr = log_rgamma(a * j + b)
        if np.any(sr < 0):
            raise DomainError("log_wright needs non-negative terms")
        return lr - sc.gammaln(j + 1.0)

    return _out(_log_positive_series(coef, la_, ctl, _first_regular_index(a, b)), scalar)


def log_prabhakar(a, b, g, logx, ctl: SeriesControl = DEFAULT_CONTROL):
    """log E^g_{a,b}(x) from ``log x`` for non-negative term series (x >= 0, g >= 0)."""
    la_, scalar = _as_array(logx)
    a = float(a)
    b = float(b)
    lpoch = _log_pochhammer(float(g), ctl.max_terms + 1)

    def coef(j):
        lr, sr = log_rgamma(a * j + b)
        if np.any(sr < 0):
            raise DomainError("log_prabhakar needs non-negative terms")
        return lpoch[j] - sc.gammaln(j + 1.0) + lr

    return _out(_log_positive_series(coef, la_, ctl, _first_regular_index(a, b)), scalar)


def upper_inc_gamma(rho, x):
    """Upper incomplete gamma Gamma(rho; x) = int_x^inf e^{-w} w^(rho-1) dw."""
    if not rho > 0:
        raise DomainError("upper_inc_gamma requires rho > 0")
    xa, scalar = _as_array(x)
    if np.any(xa < 0):
        raise DomainError("upper_inc_gamma requires x >= 0")
    return _out(sc.gammaincc(rho, xa) * sc.gamma(rho), scalar)
