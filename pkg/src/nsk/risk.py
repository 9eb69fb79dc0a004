"""Risk reserve ``R(t) = a + beta t - S(t)`` with claims from the subordinator.

Claims arrive at unit rate, so the net profit condition is ``beta > E X``.
Between claims the reserve increases, hence ruin on a finite horizon can
only happen at claim epochs and is checked there exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .kernels import KernelSpec, bernstein_psi, jump_mean
from .simulate import sample_arrivals, sample_values

__all__ = [
    "RiskConfig", "NetProfit", "net_profit_check", "ruin_probability", "ruin_grid",
    "mgf_R", "mgf_monte_carlo", "mgf_ode_residual",
]


class NetProfit(str, Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    INFINITE_MEAN = "infinite_mean"


@dataclass(frozen=True)
class RiskConfig:
    """Initial reserve ``a``, premium rate ``beta``, claim law ``spec``."""

    a: float
    beta: float
    spec: KernelSpec
    horizon: float = 10.0
    n_paths: int = 100_000

    def __post_init__(self):
        if not self.a >= 0:
            raise DomainError("a must be >= 0")
        if not self.beta > 0:
            raise DomainError("beta must be > 0")
        if not self.horizon > 0:
            raise DomainError("horizon must be > 0")
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")

    def to_dict(self):
        return {"a": self.a, "beta": self.beta, "kernel": self.spec.to_dict(),
                "horizon": self.horizon, "n_paths": self.n_paths}


def net_profit_check(cfg: RiskConfig) -> NetProfit:
    """Compare the premium rate with the mean claim size."""
    mu = jump_mean(cfg.spec)
    if math.isinf(mu):
        return NetProfit.INFINITE_MEAN
    return NetProfit.SATISFIED if cfg.beta > mu else NetProfit.VIOLATED


def _ruined(counts, times, sizes, a, beta):
    """Per-path ruin flags from claim epochs and sizes."""
    ruined = np.zeros(counts.size, dtype=bool)
    nz = counts > 0
    if not nz.any():
        return ruined
    ends = np.cumsum(counts)
    starts = ends - counts
    claims = np.cumsum(sizes)
    before = np.concatenate([[0.0], claims])[starts]
    owner = np.repeat(np.arange(counts.size), counts)
    # aggregate claims of the own path only, without cross-path cancellation
    own = claims - before[owner]
    surplus = a + beta * times - own
    lowest = np.minimum.reduceat(surplus, starts[nz])
    ruined[nz] = lowest < 0
    return ruined


def _interval(flags):
    n = flags.size
    p = float(flags.mean())
    return p, 1.96 * math.sqrt(p * (1.0 - p) / n)


def ruin_probability(cfg: RiskConfig, seed: int, threads=1):
    """Monte Carlo estimate of ``P(min_{t <= horizon} R(t) < 0)``.

    Returns ``(estimate, half_width_95)``.
    """
    counts, times, sizes = sample_arrivals(cfg.spec, cfg.horizon, cfg.n_paths, seed, threads)
    return _interval(_ruined(counts, times, sizes, cfg.a, cfg.beta))


def ruin_grid(spec: KernelSpec, a_values, beta_values, horizon, n_paths, seed: int, threads=1):
    """Ruin estimates on an ``(a, beta)`` grid from one common set of paths.

    Sharing the paths makes the estimates monotone in ``a`` and ``beta``
    path by path.  Returns an array of shape ``(len(a_values), len(beta_values))``.
    """
    counts, times, sizes = sample_arrivals(spec, horizon, n_paths, seed, threads)
    out = np.empty((len(a_values), len(beta_values)))
    for i, a in enumerate(a_values):
        for j, b in enumerate(beta_values):
            out[i, j] = _ruined(counts, times, sizes, a, b).mean()
    return out


def mgf_R(cfg: RiskConfig, eta, t, reading="full"):
    """``E exp(eta R(t))`` from the Laplace exponent of S(t).

    ``reading='full'`` gives ``exp(eta (a + beta t) - psi(eta) t)``, the
    true moment generating function.  ``reading='density'`` keeps only the
    absolutely continuous part of the law of S(t),
    ``exp(eta (a + beta t)) (exp(-psi t) - exp(-t))``, the function that
    satisfies the differential equation of :func:`mgf_ode_residual`.
    """
    if not eta > 0:
        raise DomainError("eta must be > 0")
    if t < 0:
        raise DomainError("t must be >= 0")
    psi = bernstein_psi(cfg.spec, eta)
    drift = eta * (cfg.a + cfg.beta * t)
    if reading == "full":
        return math.exp(drift - psi * t)
    if reading == "density":
        return math.exp(drift) * (math.exp(-psi * t) - math.exp(-t))
    raise DomainError("reading must be 'full' or 'density'")


def mgf_monte_carlo(cfg: RiskConfig, eta, t, seed: int, threads=1):
    """Sample mean of ``exp(eta R(t))`` and its standard error."""
    values, _ = sample_values(cfg.spec, t, cfg.n_paths, seed, threads)
    z = np.exp(eta * (cfg.a + cfg.beta * t - values))
    return float(z.mean()), float(z.std(ddof=1) / math.sqrt(z.size))


def mgf_ode_residual(cfg: RiskConfig, eta, t, fd_step=1e-5):
    """Central-difference residual of
    ``dPhi/dt = (beta eta - psi) Phi + exp(eta (a + beta t) - t) (1 - psi)``
    for the density reading of :func:`mgf_R`.
    """
    if not eta > 0:
        raise DomainError("eta must be > 0")
    if not t > fd_step:
        raise DomainError(f"the stencil needs t > fd_step (t={t}, fd_step={fd_step})")
    phi = lambda s: mgf_R(cfg, eta, s, "density")  # noqa: E731
    lhs = (phi(t + fd_step) - phi(t - fd_step)) / (2.0 * fd_step)
    psi = bernstein_psi(cfg.spec, eta)
    rhs = (cfg.beta * eta - psi) * phi(t) + math.exp(eta * (cfg.a + cfg.beta * t) - t) * (1.0 - psi)
    return lhs - rhs
