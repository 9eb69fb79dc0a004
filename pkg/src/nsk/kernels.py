"""Kernel specifications and the Levy quantities derived from them.

Every kernel has unit Levy mass and is described by a tail measure
``mu_bar`` with ``mu_bar(0) = 1``.  Three base families exist:

* exponential, ``mu_bar(x) = exp(-k x)``
* Mittag-Leffler, ``mu_bar(x) = E_nu(-k x**nu)``
* incomplete gamma, ``mu_bar(x) = Gamma(rho; k x) / Gamma(rho)``

with ``k = alpha / (1 - alpha)``.  Distributed variants integrate one
parameter against a mixing law; internally every mixing law is a finite set
of nodes and weights, so all derived quantities are weighted sums over
components.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .errors import DomainError
from .specfun import DEFAULT_CONTROL, SeriesControl, mittag_leffler, mittag_leffler2

__all__ = [
    "Dirac", "TwoPoint", "Beta", "Grid", "mixture_from_dict",
    "KernelSpec", "Exponential", "MittagLefflerK", "IncompleteGammaK",
    "DistributedExp", "DistributedML", "DistributedIG",
    "k_of_alpha", "alpha_of_k", "spec_from_dict", "spec_from_json",
    "tail_levy_measure", "bernstein_psi", "bernstein_psi_complement", "jump_density", "jump_cdf",
    "jump_mean", "mean_rate", "source_term",
]

_WEIGHT_TOL = 1e-12


def k_of_alpha(alpha):
    """k = alpha / (1 - alpha)."""
    return alpha / (1.0 - alpha)


def alpha_of_k(k):
    """Inverse of :func:`k_of_alpha`."""
    return k / (1.0 + k)


def _check_open_unit(v, name):
    if not (0.0 < v < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {v!r}")


# -- mixing laws ----------------------------------------------------------------

@dataclass(frozen=True)
class Dirac:
    """Point mass at ``point``."""

    point: float
    kind: str = field(default="Dirac", init=False)

    def __post_init__(self):
        _check_open_unit(self.point, "Dirac point")

    def discretize(self):
        return np.array([self.point]), np.array([1.0])

    def to_dict(self):
        return {"kind": "Dirac", "point": self.point}


@dataclass(frozen=True)
class TwoPoint:
    """Weights ``w1, w2`` at ``p1 < p2``."""

    p1: float
    w1: float
    p2: float
    w2: float
    kind: str = field(default="TwoPoint", init=False)

    def __post_init__(self):
        _check_open_unit(self.p1, "p1")
        _check_open_unit(self.p2, "p2")
        if not self.p1 < self.p2:
            raise DomainError("TwoPoint requires p1 < p2")
        if not (0.0 <= self.w1 <= 1.0 and 0.0 <= self.w2 <= 1.0):
            raise DomainError("TwoPoint weights must lie in [0, 1]")
        if abs(self.w1 + self.w2 - 1.0) > _WEIGHT_TOL:
            raise DomainError("TwoPoint weights must sum to 1")

    def discretize(self):
        return np.array([self.p1, self.p2]), np.array([self.w1, self.w2])

    def to_dict(self):
        return {"kind": "TwoPoint", "p1": self.p1, "w1": self.w1, "p2": self.p2, "w2": self.w2}


@dataclass(frozen=True)
class Beta:
    """Beta(r, s) mixing density on (0, 1).

    Discretized with ``nodes``-point Gauss-Jacobi quadrature, which carries
    the weight ``p**(r-1) (1-p)**(s-1)`` exactly.
    """

    r: float
    s: float
    nodes: int = 64
    kind: str = field(default="Beta", init=False)

    def __post_init__(self):
        if not (self.r > 0 and self.s > 0):
            raise DomainError("Beta parameters must be positive")
        if int(self.nodes) < 1:
            raise DomainError("Beta needs at least one node")

    def discretize(self):
        x, w = sc.roots_jacobi(int(self.nodes), self.s - 1.0, self.r - 1.0)
        return 0.5 * (1.0 + x), w / w.sum()

    def mean(self):
        return self.r / (self.r + self.s)

    def to_dict(self):
        return {"kind": "Beta", "r": self.r, "s": self.s, "nodes": int(self.nodes)}


@dataclass(frozen=True)
class Grid:
    """Arbitrary finite mixture."""

    nodes: tuple
    weights: tuple
    kind: str = field(default="Grid", init=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(float(v) for v in self.nodes))
        object.__setattr__(self, "weights", tuple(float(v) for v in self.weights))
        if len(self.nodes) != len(self.weights) or not self.nodes:
            raise DomainError("Grid needs matching, non-empty nodes and weights")
        for v in self.nodes:
            _check_open_unit(v, "Grid node")
        if min(self.weights) < 0 or abs(math.fsum(self.weights) - 1.0) > _WEIGHT_TOL:
            raise DomainError("Grid weights must be non-negative and sum to 1")

    def discretize(self):
        return np.array(self.nodes), np.array(self.weights)

    def to_dict(self):
        return {"kind": "Grid", "nodes": list(self.nodes), "weights": list(self.weights)}


def mixture_from_dict(d):
    kind = d.get("kind")
    if kind == "Dirac":
        return Dirac(float(d["point"]))
    if kind == "TwoPoint":
        return TwoPoint(float(d["p1"]), float(d["w1"]), float(d["p2"]), float(d["w2"]))
    if kind == "Beta":
        return Beta(float(d["r"]), float(d["s"]), int(d.get("nodes", 64)))
    if kind == "Grid":
        return Grid(tuple(d["nodes"]), tuple(d["weights"]))
    raise DomainError(f"unknown mixture kind {kind!r}")


# -- kernel specification -------------------------------------------------------

_FAMILY = {
    "Exponential": "exp", "DistributedExp": "exp",
    "MittagLefflerK": "ml", "DistributedML": "ml",
    "IncompleteGammaK": "ig", "DistributedIG": "ig",
}


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of one kernel.

    Use the factory functions (:func:`Exponential`, :func:`MittagLefflerK`,
    ...) rather than the constructor.  ``k`` is precomputed for every
    variant with a fixed ``alpha``.
    """

    variant: str
    alpha: float | None = None
    nu: float | None = None
    rho: float | None = None
    mixture: object = None
    k: float | None = field(default=None, init=False)

    def __post_init__(self):
        v = self.variant
        if v not in _FAMILY:
            raise DomainError(f"unknown kernel variant {v!r}")
        if v != "DistributedExp":
            if self.alpha is None:
                raise DomainError(f"{v} needs alpha")
            _check_open_unit(self.alpha, "alpha")
            object.__setattr__(self, "k", k_of_alpha(float(self.alpha)))
        if v == "MittagLefflerK":
            _check_open_unit(self.nu, "nu")
        if v == "IncompleteGammaK":
            _check_open_unit(self.rho, "rho")
        if v.startswith("Distributed"):
            if not isinstance(self.mixture, (Dirac, TwoPoint, Beta, Grid)):
                raise DomainError(f"{v} needs a mixture")
            if v == "DistributedExp" and isinstance(self.mixture, Beta) and not self.mixture.s > 1:
                raise DomainError("a Beta mixture over alpha needs s > 1 for a finite mean rate")

    # structure
    @property
    def family(self):
        """Base family of every component: 'exp', 'ml' or 'ig'."""
        return _FAMILY[self.variant]

    @property
    def finite_origin(self):
        """True when the density of S(t) is finite at x = 0 (exponential family)."""
        return self.family == "exp"

    def components(self):
        """Return ``(weights, k, shape)`` arrays describing the component kernels.

        ``shape`` is nu for the Mittag-Leffler family, rho for the
        incomplete-gamma family and 1 for the exponential family.
        """
        v = self.variant
        if v == "Exponential":
            return np.array([1.0]), np.array([self.k]), np.array([1.0])
        if v == "MittagLefflerK":
            return np.array([1.0]), np.array([self.k]), np.array([self.nu])
        if v == "IncompleteGammaK":
            return np.array([1.0]), np.array([self.k]), np.array([self.rho])
        nodes, w = self.mixture.discretize()
        if v == "DistributedExp":
            return w, k_of_alpha(nodes), np.ones_like(nodes)
        return w, np.full_like(nodes, self.k), nodes

    @property
    def label(self):
        v = self.variant
        if v == "Exponential":
            return f"Exponential(alpha={self.alpha:.17g})"
        if v == "MittagLefflerK":
            return f"MittagLefflerK(alpha={self.alpha:.17g},nu={self.nu:.17g})"
        if v == "IncompleteGammaK":
            return f"IncompleteGammaK(alpha={self.alpha:.17g},rho={self.rho:.17g})"
        m = json.dumps(self.mixture.to_dict(), sort_keys=True, separators=(",", ":"))
        if v == "DistributedExp":
            return f"DistributedExp({m})"
        return f"{v}(alpha={self.alpha:.17g},{m})"

    def to_dict(self):
        d = {"variant": self.variant}
        if self.alpha is not None:
            d["alpha"] = self.alpha
        if self.nu is not None:
            d["nu"] = self.nu
        if self.rho is not None:
            d["rho"] = self.rho
        if self.mixture is not None:
            d["mixture"] = self.mixture.to_dict()
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def Exponential(alpha):
    return KernelSpec("Exponential", alpha=float(alpha))


def MittagLefflerK(alpha, nu):
    return KernelSpec("MittagLefflerK", alpha=float(alpha), nu=float(nu))


def IncompleteGammaK(alpha, rho):
    return KernelSpec("IncompleteGammaK", alpha=float(alpha), rho=float(rho))


def DistributedExp(mixture):
    return KernelSpec("DistributedExp", mixture=mixture)


def DistributedML(alpha, mixture):
    return KernelSpec("DistributedML", alpha=float(alpha), mixture=mixture)


def DistributedIG(alpha, mixture):
    return KernelSpec("DistributedIG", alpha=float(alpha), mixture=mixture)


def spec_from_dict(d):
    """Build a :class:`KernelSpec` from its JSON object form."""
    if not isinstance(d, dict) or "variant" not in d:
        raise DomainError("kernel spec must be an object with a 'variant' field")
    known = {"variant", "alpha", "nu", "rho", "mixture"}
    extra = set(d) - known
    if extra:
        raise DomainError(f"unknown kernel spec fields {sorted(extra)}")
    mix = mixture_from_dict(d["mixture"]) if "mixture" in d else None
    num = lambda key: None if d.get(key) is None else float(d[key])  # noqa: E731
    return KernelSpec(d["variant"], alpha=num("alpha"), nu=num("nu"), rho=num("rho"),
                      mixture=mix)


def spec_from_json(text):
    return spec_from_dict(json.loads(text))


# -- derived quantities ----------------------------------------------------------

def _arr(x):
    a = np.asarray(x, dtype=float)
    return np.atleast_1d(a), a.ndim == 0


def _ret(v, scalar):
    return float(v[0]) if scalar else v


def _require_positive_x(spec, x):
    if spec.family != "exp" and np.any(x <= 0):
        raise DomainError(f"{spec.variant} jump density is singular at the origin; x must be > 0")


def tail_levy_measure(spec: KernelSpec, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Tail of the Levy measure, ``mu_bar(x)``, for ``x >= 0``."""
    xa, scalar = _arr(x)
    if np.any(xa < 0):
        raise DomainError("tail_levy_measure needs x >= 0")
    w, k, shape = spec.components()
    out = np.zeros_like(xa)
    for wi, ki, si in zip(w, k, shape):
        if spec.family == "exp":
            out += wi * np.exp(-ki * xa)
        elif spec.family == "ml":
            out += wi * mittag_leffler(si, -ki * xa ** si, ctl)
        else:
            out += wi * sc.gammaincc(si, ki * xa)
    return _ret(out, scalar)


def bernstein_psi(spec: KernelSpec, eta):
    """Bernstein function psi(eta) for real ``eta >= 0``."""
    ea, scalar = _arr(eta)
    if np.any(ea < 0):
        raise DomainError("bernstein_psi needs eta >= 0")
    w, k, shape = spec.components()
    e = ea[:, None]
    if spec.family == "exp":
        vals = e / (e + k)
    elif spec.family == "ml":
        en = e ** shape
        vals = en / (en + k)
    else:
        # 1 - (k/(eta+k))**rho, written to keep precision for small eta
        vals = -np.expm1(shape * (np.log(k) - np.log(e + k)))
    return _ret(vals @ w, scalar)


def bernstein_psi_complement(spec: KernelSpec, eta):
    """``1 - psi(eta)``, formed directly so it keeps precision as psi -> 1."""
    ea, scalar = _arr(eta)
    if np.any(ea < 0):
        raise DomainError("bernstein_psi_complement needs eta >= 0")
    w, k, shape = spec.components()
    e = ea[:, None]
    if spec.family == "exp":
        vals = k / (e + k)
    elif spec.family == "ml":
        vals = k / (e ** shape + k)
    else:
        vals = np.exp(shape * (np.log(k) - np.log(e + k)))
    return _ret(vals @ w, scalar)


def psi_ml_on_cut(spec: KernelSpec, log_r):
    """psi(r e^{-i pi}) for the Mittag-Leffler family (complex values).

    Used by the branch-cut representations of densities.
    """
    if spec.family != "ml":
        raise DomainError("the branch-cut form is only available for the Mittag-Leffler family")
    w, k, shape = spec.components()
    lr = np.asarray(log_r, dtype=float)[..., None]
    s = np.exp(shape * lr - 1j * np.pi * shape)
    return (s / (s + k)) @ w


def jump_density(spec: KernelSpec, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Density of one jump, ``f_X = -mu_bar'``."""
    xa, scalar = _arr(x)
    if np.any(xa < 0):
        raise DomainError("jump_density needs x >= 0")
    _require_positive_x(spec, xa)
    w, k, shape = spec.components()
    out = np.zeros_like(xa)
    for wi, ki, si in zip(w, k, shape):
        if spec.family == "exp":
            out += wi * ki * np.exp(-ki * xa)
        elif spec.family == "ml":
            out += wi * ki * xa ** (si - 1.0) * mittag_leffler2(si, si, -ki * xa ** si, ctl)
        else:
            lg = si * np.log(ki) + (si - 1.0) * np.log(xa) - ki * xa - sc.gammaln(si)
            out += wi * np.exp(lg)
    return _ret(out, scalar)


def jump_cdf(spec: KernelSpec, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Distribution function of one jump, ``1 - mu_bar(x)``."""
    xa, scalar = _arr(x)
    w, k, shape = spec.components()
    out = np.zeros_like(xa)
    for wi, ki, si in zip(w, k, shape):
        if spec.family == "exp":
            out += wi * -np.expm1(-ki * xa)
        elif spec.family == "ml":
            # 1 - E_nu(-y) = y E_{nu,nu+1}(-y) keeps full precision for small y
            y = ki * xa ** si
            small = y < 0.5
            part = np.empty_like(xa)
            part[small] = y[small] * mittag_leffler2(si, si + 1.0, -y[small], ctl)
            part[~small] = 1.0 - mittag_leffler(si, -y[~small], ctl)
            out += wi * part
        else:
            out += wi * sc.gammainc(si, ki * xa)
    return _ret(out, scalar)


def mean_rate(spec: KernelSpec):
    """Mixture mean of k; for a Beta(r, s) law over alpha this is r/(s-1)."""
    if spec.variant == "DistributedExp":
        if isinstance(spec.mixture, Beta):
            return spec.mixture.r / (spec.mixture.s - 1.0)
        w, k, _ = spec.components()
        return float(w @ k)
    return float(spec.k)


def jump_mean(spec: KernelSpec):
    """Mean jump size, ``+inf`` for the Mittag-Leffler family."""
    v = spec.variant
    if spec.family == "ml":
        return math.inf
    if v == "Exponential":
        return 1.0 / spec.k
    if v == "IncompleteGammaK":
        return spec.rho / spec.k
    if v == "DistributedExp":
        if isinstance(spec.mixture, Beta):
            r, s = spec.mixture.r, spec.mixture.s
            return s / (r - 1.0) if r > 1 else math.inf
        w, k, _ = spec.components()
        return float(w @ (1.0 / k))
    # DistributedIG
    if isinstance(spec.mixture, Beta):
        return spec.mixture.mean() / spec.k
    w, _, rho = spec.components()
    return float(w @ rho) / spec.k


def source_term(spec: KernelSpec, x, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """Inhomogeneous term of the governing equation of the density of S(t).

    For singular-origin families it is ``exp(-t) f_X(x)``; for the
    exponential family the boundary contribution ``mu_bar(x) f(0, t)`` is
    folded in, giving ``k (1 - t) exp(-t - k x)`` for one exponential kernel.
    """
    xa, scalar = _arr(x)
    if t < 0:
        raise DomainError("t must be >= 0")
    v = spec.variant
    if v == "Exponential":
        k = spec.k
        out = k * (1.0 - t) * np.exp(-t - k * xa)
    elif v == "DistributedExp":
        a_q = jump_density(spec, xa, ctl)
        b_q = mean_rate(spec) * tail_levy_measure(spec, xa, ctl)
        out = math.exp(-t) * a_q - t * math.exp(-t) * b_q
    else:
        out = math.exp(-t) * jump_density(spec, xa, ctl)
    return _ret(out, scalar)
