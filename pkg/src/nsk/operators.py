"""Convolution operators with kernel ``mu_bar`` and the governing-equation checks.

For a kernel with tail measure ``mu_bar`` the operator is

    D f(x) = int_0^x f'(z) mu_bar(x - z) dz.

When ``f(0)`` is finite this is evaluated as written.  Densities of the
Mittag-Leffler and incomplete-gamma families blow up at the origin and
their derivative is not integrable there, so the operator is taken in its
regularized form

    D f(x) = mu_bar(x) f(x) + int_0^x f'(z) [mu_bar(x - z) - mu_bar(x)] dz
           = f(x) - int_0^x f(z) f_X(x - z) dz,

whose Laplace transform is ``psi(eta) f~(eta)``, the same value the
termwise transform of ``f'`` produces.  Both integrals are computed by the
tanh-sinh rule in pair mode so that ``z`` and ``x - z`` are exact near
either endpoint.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from .densities import SubordinatorLaw, law_of
from .errors import DomainError
from .kernels import (KernelSpec, bernstein_psi, jump_cdf, jump_density, source_term,
                      tail_levy_measure)
from .quadrature import adaptive, tanh_sinh

__all__ = [
    "QuadratureConfig", "ResidualReport", "GeneralFormRefusal",
    "apply_operator", "laplace_of_operator", "ml_derivative_transform",
    "ig_derivative_transform", "governing_residual", "residual_sweep",
    "residual_refinement", "general_equation_check", "write_residual_csv",
]

# below z = _SHORT * x the kernel increment is integrated from f_X instead of
# being formed as a difference of two nearly equal tails
_SHORT = 0.1
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature settings for the operator integrals.

    Parameters
    ----------
    scheme : {'tanh-sinh', 'adaptive'}
        ``'tanh-sinh'`` handles endpoint singularities and is batched over x;
        ``'adaptive'`` is QUADPACK Gauss-Kronrod, one point at a time.
    rel_tol : float
    max_subdivisions : int
        Subinterval limit for the adaptive scheme, refinement levels for
        tanh-sinh are ``min(max_subdivisions, 10)``.
    """

    scheme: str = "tanh-sinh"
    rel_tol: float = 1e-9
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.scheme not in ("tanh-sinh", "adaptive"):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be > 0")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class ResidualReport:
    """One evaluation of ``df/dt = -D f + source``.

    ``lhs`` is the central difference in t, ``rhs = -operator + source`` and
    ``residual = lhs - rhs``.
    """

    x: float
    t: float
    lhs: float
    rhs: float
    residual: float
    fd_step: float
    kernel_id: str
    operator: float = math.nan
    source: float = math.nan
    form: str = "governing"

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class GeneralFormRefusal:
    """Returned instead of a residual when the boundary form does not apply."""

    kernel_id: str
    reason: str

    def to_dict(self):
        return asdict(self)


def _flat(fn):
    """Call a 1-D vectorized function on an array of any shape."""
    def g(z):
        z = np.asarray(z, dtype=float)
        return np.asarray(fn(z.ravel()), dtype=float).reshape(z.shape)
    return g


def _integrate(integrand, x, quad: QuadratureConfig, abs_tol=1e-300):
    """``int_0^x integrand(z, x - z) dz`` for each entry of ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if quad.scheme == "tanh-sinh":
        res = tanh_sinh(integrand, 0.0, x, rel_tol=quad.rel_tol, abs_tol=abs_tol,
                        max_level=min(quad.max_subdivisions, 10), pair=True)
        return res.value
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        def g(z, xi=xi):
            v = integrand(np.array([[z]]), np.array([[xi - z]]))
            return float(v.reshape(-1)[0])
        out[i], _ = adaptive(g, 0.0, xi, rel_tol=quad.rel_tol, abs_tol=1e-14,
                             limit=quad.max_subdivisions)
    return out


def _kernel_increment(spec, xcol, z, u):
    """``mu_bar(x - z) - mu_bar(x)`` for ``z`` in [0, x], with ``u = x - z`` exact."""
    xb = np.broadcast_to(xcol, z.shape)
    out = np.empty_like(z)
    short = z < _SHORT * xb
    if (~short).any():
        # difference of whichever of mu_bar and 1 - mu_bar is small at x
        ul, xl = u[~short], xb[~short]
        mu = _flat(lambda v: tail_levy_measure(spec, v))
        cdf = _flat(lambda v: jump_cdf(spec, v))
        mux = mu(xl)
        near = mux > 0.5
        diff = mu(ul) - mux
        if near.any():
            diff[near] = cdf(xl[near]) - cdf(ul[near])
        out[~short] = diff
    if short.any():
        # int_{x-z}^{x} f_X by Gauss-Legendre, exact to high order on short panels
        zs, us = z[short], u[short]
        nodes = us[:, None] + 0.5 * zs[:, None] * (_GL_NODES + 1.0)
        fx = _flat(lambda v: jump_density(spec, v))(nodes)
        out[short] = 0.5 * zs * (fx @ _GL_WEIGHTS)
    return out


def apply_operator(spec: KernelSpec, f, x, df=None, f_at_0=None,
                   quad: QuadratureConfig = DEFAULT_QUAD):
    """Apply the convolution operator of ``spec`` to ``f`` at ``x > 0``.

    Parameters
    ----------
    spec : KernelSpec
    f : callable
        Vectorized function of x.
    x : float or array_like
    df : callable, optional
        Analytic derivative of ``f``.  Without it the operator is evaluated
        from ``f`` alone through ``f(x) - int f(z) f_X(x - z) dz``.
    f_at_0 : float, optional
        ``f(0)``.  ``math.inf`` marks a singular origin and selects the
        regularized operator.  A finite value is needed when ``df`` is
        absent, to remove the boundary term.
    quad : QuadratureConfig

    Returns
    -------
    float or ndarray
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.ndim(x) == 0
    if np.any(xa <= 0):
        raise DomainError("the operator is evaluated at x > 0")
    singular = f_at_0 is not None and math.isinf(f_at_0)
    fv = _flat(f)
    xcol = xa[:, None]

    if df is not None and not singular:
        dfv = _flat(df)
        mu = _flat(lambda v: tail_levy_measure(spec, v))
        val = _integrate(lambda z, u: dfv(z) * mu(u), xa, quad)
    elif df is not None:
        dfv = _flat(df)

        def integrand(z, u):
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                d = dfv(z)
                v = d * _kernel_increment(spec, xcol, z, u)
            # f' overflows only for z below ~1e-200, where the integrand
            # (of order z^(nu-1)) holds a share ~ (z/x)^nu of the integral
            return np.where(np.isfinite(d), v, 0.0)

        lead = tail_levy_measure(spec, xa) * fv(xa)
        # the tolerance refers to the whole operator value, which near the
        # origin is dominated by the boundary product
        inner = _integrate(integrand, xa, quad,
                           abs_tol=np.maximum(quad.rel_tol * np.abs(lead), 1e-300))
        val = lead + inner
    else:
        if f_at_0 is None:
            raise DomainError("without a derivative the operator needs f_at_0")
        if spec.family != "exp" and quad.scheme == "adaptive":
            raise DomainError("the jump density is singular at 0; use the tanh-sinh scheme")
        fx = _flat(lambda v: jump_density(spec, v))
        conv = _integrate(lambda z, u: fv(z) * fx(u), xa, quad)
        val = fv(xa) - conv
        if not singular:
            val = val - f_at_0 * tail_levy_measure(spec, xa)
    return float(val[0]) if scalar else val


def laplace_of_operator(spec: KernelSpec, f_transform, f_at_0, eta, df_transform=None):
    """Laplace transform of the operator applied to ``f``.

    With finite ``f_at_0`` this is ``psi f~ - (psi/eta) f(0)``.  For a
    singular origin the product ``L{f'}(eta) * L{mu_bar}(eta)`` is used with
    ``L{mu_bar} = psi/eta`` and ``L{f'}`` supplied by the caller.
    """
    if not eta > 0:
        raise DomainError("eta must be > 0")
    psi = bernstein_psi(spec, eta)
    if f_at_0 is not None and math.isinf(f_at_0):
        if df_transform is None:
            raise DomainError("f(0) is infinite: the finite-origin formula does not apply; "
                              "pass df_transform")
        return df_transform(eta) * psi / eta
    if df_transform is not None:
        return df_transform(eta) * psi / eta
    return psi * f_transform(eta) - psi / eta * f_at_0


def ml_derivative_transform(k, nu, t, eta, max_terms=400, tol=1e-15):
    """Termwise Laplace transform of the x-derivative of the Mittag-Leffler density.

    The density is ``exp(-t) sum_n (k t)^n/n! sum_j (n)_j (-k)^j
    x^(nu(n+j)-1) / (j! Gamma(nu(n+j)))``; differentiating each power
    and transforming gives ``eta^(1 - nu(n+j))``, continued analytically in
    the exponent.  Terms with ``nu(n+j) = 1`` are constants of the density
    and keep their ``eta^0`` contribution, which is what the regularized
    operator sees; the exponential kernel instead removes ``f(0)``, hence
    the boundary-term gap as ``nu -> 1``.  Needs ``k < eta^nu`` for the
    j-series.
    """
    if not k < eta ** nu:
        raise DomainError("the termwise series needs k < eta**nu")
    y = k / eta ** nu
    total = 0.0
    for n in range(1, max_terms + 1):
        lead = math.exp(-t + n * math.log(k * t / eta ** nu) - math.lgamma(n + 1)) * eta
        inner = 0.0
        coef = 1.0
        for j in range(0, max_terms):
            if j > 0:
                coef *= -(n + j - 1) / j * y
            inner += coef
            if abs(coef) < tol * max(abs(inner), 1e-300) and j > 2:
                break
        term = lead * inner
        total += term
        if n > k * t and abs(term) < tol * max(abs(total), 1e-300):
            break
    return total


def ig_derivative_transform(k, rho, t, eta, max_terms=400, tol=1e-15):
    """Termwise Laplace transform of the x-derivative of the incomplete-gamma density.

    Each term ``x^(a-1) e^(-k x) / Gamma(a)`` with ``a = rho n`` differentiates to
    ``[x^(a-2)/Gamma(a-1) - k x^(a-1)/Gamma(a)] e^(-k x)``, whose transform is
    ``(eta+k)^(1-a) - k (eta+k)^(-a)``; the first part vanishes at ``a = 1``.
    """
    if not eta > 0:
        raise DomainError("eta must be > 0")
    total = 0.0
    lk = math.log(eta + k)
    for n in range(1, max_terms + 1):
        a = rho * n
        w = math.exp(-t + n * math.log(t) + a * math.log(k) - math.lgamma(n + 1))
        term = w * (math.exp((1.0 - a) * lk) - k * math.exp(-a * lk))
        total += term
        if n > t and abs(term) < tol * max(abs(total), 1e-300):
            break
    return total


# -- governing equations ------------------------------------------------------------

def _closed_law(spec, t):
    law = law_of(spec, t)
    if law.numeric_only:
        raise DomainError(f"{spec.label} has no closed-form density; residuals need one")
    return law


def _time_derivative(spec, x, t, h):
    if not t > h:
        raise DomainError(f"the time stencil needs t > fd_step (t={t}, fd_step={h})")
    up = law_of(spec, t + h).density(x)
    dn = law_of(spec, t - h).density(x)
    return (np.asarray(up) - np.asarray(dn)) / (2.0 * h)


def _operator_on_law(spec, law: SubordinatorLaw, x, quad, use_derivative=True):
    df = law.density_dx if (use_derivative and law.has_derivative) else None
    origin = law.value_at_origin()
    return apply_operator(spec, law.density, x, df=df, f_at_0=origin, quad=quad)


def _default_step(t):
    return 1e-4 * max(t, 1.0)


def residual_sweep(spec: KernelSpec, x, t, fd_step=None, quad: QuadratureConfig = DEFAULT_QUAD,
                   use_derivative=True):
    """Residuals of the governing equation at every ``x`` for one ``t``.

    The equation is ``df/dt = -D f + source`` with the source of
    :func:`nsk.kernels.source_term`.  With ``use_derivative=False`` the
    operator is evaluated from the density alone.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    h = _default_step(t) if fd_step is None else float(fd_step)
    law = _closed_law(spec, t)
    lhs = _time_derivative(spec, xa, t, h)
    op = np.atleast_1d(_operator_on_law(spec, law, xa, quad, use_derivative))
    src = np.atleast_1d(source_term(spec, xa, t))
    rhs = -op + src
    form = "governing" if use_derivative else "governing-regularized"
    return [ResidualReport(float(xi), float(t), float(l), float(r), float(l - r), h, spec.label,
                           float(o), float(s), form)
            for xi, l, r, o, s in zip(xa, np.atleast_1d(lhs), rhs, op, src)]


def governing_residual(spec: KernelSpec, x, t, fd_step=None,
                       quad: QuadratureConfig = DEFAULT_QUAD) -> ResidualReport:
    """Residual of the governing equation of the density of S(t) at one point."""
    if not x > 0:
        raise DomainError("x must be > 0")
    return residual_sweep(spec, [x], t, fd_step, quad)[0]


def residual_refinement(spec: KernelSpec, x, t, steps=(1e-2, 5e-3, 2.5e-3),
                        quad: QuadratureConfig = DEFAULT_QUAD):
    """Residuals at one point for a sequence of time steps.

    The operator side does not depend on the step, so it is computed once.
    Returns a list of :class:`ResidualReport`.
    """
    law = _closed_law(spec, t)
    op = _operator_on_law(spec, law, x, quad)
    src = source_term(spec, x, t)
    rhs = -op + src
    out = []
    for h in steps:
        lhs = float(_time_derivative(spec, x, t, h))
        out.append(ResidualReport(float(x), float(t), lhs, rhs, lhs - rhs, float(h), spec.label,
                                  op, src, "refinement"))
    return out


def general_equation_check(spec: KernelSpec, x, t, fd_step=None,
                           quad: QuadratureConfig = DEFAULT_QUAD):
    """Residual of ``df/dt = -D f - mu_bar(x) f(0, t) + f_X(x) exp(-t)``.

    Only kernels whose density is finite at the origin qualify; for the
    Mittag-Leffler and incomplete-gamma families a
    :class:`GeneralFormRefusal` is returned.
    """
    if not spec.finite_origin:
        return GeneralFormRefusal(
            spec.label,
            "the density is infinite at x = 0, so the boundary term f(0, t) and the "
            "finite-origin transform rule do not exist for this kernel")
    if not x > 0:
        raise DomainError("x must be > 0")
    h = _default_step(t) if fd_step is None else float(fd_step)
    law = _closed_law(spec, t)
    f0 = float(law.density(0.0))
    lhs = float(_time_derivative(spec, x, t, h))
    op = float(apply_operator(spec, law.density, x, df=law.density_dx, quad=quad))
    src = -float(tail_levy_measure(spec, x)) * f0 + math.exp(-t) * float(jump_density(spec, x))
    rhs = -op + src
    return ResidualReport(float(x), float(t), lhs, rhs, lhs - rhs, h, spec.label, op, src,
                          "general")


def write_residual_csv(path, reports):
    """Write ``x,t,lhs,rhs,residual,fd_step,kernel_id`` rows with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "lhs", "rhs", "residual", "fd_step", "kernel_id"])
        for r in reports:
            w.writerow([f"{r.x:.17g}", f"{r.t:.17g}", f"{r.lhs:.17g}", f"{r.rhs:.17g}",
                        f"{r.residual:.17g}", f"{r.fd_step:.17g}", r.kernel_id])
