"""Monte Carlo sampling of the compound Poisson subordinator S(t).

Arrivals form a unit-rate Poisson process and jumps are i.i.d. with density
``f_X``.  Work is split into fixed-size blocks of paths, block ``i`` drawing
from stream ``i`` of the seed, so results do not depend on how many
threads ran the blocks.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import interpolate, stats

from .densities import law_of
from .errors import DomainError
from .kernels import Beta, Dirac, Grid, KernelSpec, TwoPoint, k_of_alpha, tail_levy_measure
from .quadrature import tanh_sinh

__all__ = [
    "RngSeed", "SamplePath", "GENERATOR", "sample_jump", "sample_jumps", "sample_path",
    "sample_values", "sample_arrivals", "ks_compare", "conditional_cdf", "tail_slope",
    "write_paths_csv", "simulation_summary", "dump_summary",
]

GENERATOR = "numpy.random.PCG64(SeedSequence(seed, spawn_key=(stream_id,)))"
# paths per block; fixed so that any thread count gives the same draws
BLOCK = 1 << 15
KS_MIN_NONZERO = 100


@dataclass(frozen=True)
class RngSeed:
    """A 64-bit seed plus a stream id selecting an independent substream."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise DomainError("stream_id must be >= 0")

    def generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def to_dict(self):
        return {"seed": self.seed, "stream_id": self.stream_id}


@dataclass(frozen=True)
class SamplePath:
    """Jump epochs and sizes of one path on ``[0, horizon]``."""

    jump_times: np.ndarray
    jump_sizes: np.ndarray
    horizon: float

    def value_at(self, t):
        """``S(t)``, right-continuous and 0 at ``t = 0``."""
        n = np.searchsorted(self.jump_times, t, side="right")
        return float(self.jump_sizes[:n].sum())


# -- jumps -----------------------------------------------------------------------

def _exp_inverse_cdf(k, u):
    """Inverse-CDF draw ``-ln(U)/k``."""
    return -np.log(u) / k


def _ml_jump(k, nu, u, v):
    """Exponential-times-stable representation of the Mittag-Leffler jump law."""
    a = nu * np.pi
    stable = (np.sin(a) / np.tan(a * v) - np.cos(a)) ** (1.0 / nu)
    return k ** (-1.0 / nu) * (-np.log(u)) * stable


def _open_uniform(rng, size):
    """Uniforms on (0, 1]; ``1 - random()`` never returns 0."""
    return 1.0 - rng.random(size)


def _mixture_parameter(mix, rng, size):
    if isinstance(mix, Dirac):
        return np.full(size, mix.point)
    if isinstance(mix, TwoPoint):
        pick = rng.random(size) < mix.w1
        return np.where(pick, mix.p1, mix.p2)
    if isinstance(mix, Beta):
        return rng.beta(mix.r, mix.s, size)
    if isinstance(mix, Grid):
        return rng.choice(np.asarray(mix.nodes), size=size, p=np.asarray(mix.weights))
    raise DomainError(f"unknown mixture {mix!r}")


def sample_jumps(spec: KernelSpec, rng, size):
    """``size`` i.i.d. jumps with density ``f_X``.

    Distributed variants draw the mixed parameter first, then the jump.
    """
    size = int(size)
    v = spec.variant
    if v == "Exponential":
        return _exp_inverse_cdf(spec.k, _open_uniform(rng, size))
    if v == "MittagLefflerK":
        return _ml_jump(spec.k, spec.nu, _open_uniform(rng, size), rng.random(size))
    if v == "IncompleteGammaK":
        return rng.standard_gamma(spec.rho, size) / spec.k
    par = _mixture_parameter(spec.mixture, rng, size)
    if v == "DistributedExp":
        return _exp_inverse_cdf(k_of_alpha(par), _open_uniform(rng, size))
    if v == "DistributedML":
        return _ml_jump(spec.k, par, _open_uniform(rng, size), rng.random(size))
    return rng.standard_gamma(par, size) / spec.k


def sample_jump(spec: KernelSpec, rng):
    """One jump drawn from ``f_X``."""
    return float(sample_jumps(spec, rng, 1)[0])


# -- paths -------------------------------------------------------------------------

def sample_path(spec: KernelSpec, horizon, seed: RngSeed) -> SamplePath:
    """One path on ``[0, horizon]`` with exponential(1) inter-arrival gaps."""
    if horizon < 0:
        raise DomainError("horizon must be >= 0")
    rng = seed.generator()
    times = []
    s = rng.standard_exponential()
    while s <= horizon:
        times.append(s)
        s += rng.standard_exponential()
    times = np.array(times, dtype=float)
    sizes = sample_jumps(spec, rng, times.size)
    return SamplePath(times, sizes, float(horizon))


def _blocks(n_paths):
    starts = list(range(0, n_paths, BLOCK))
    return [(i, min(BLOCK, n_paths - s)) for i, s in enumerate(starts)]


def _run_blocks(fn, n_paths, seed, threads):
    """Run ``fn(rng, n)`` per block and concatenate results in stream order."""
    if n_paths < 0:
        raise DomainError("n_paths must be >= 0")
    blocks = _blocks(n_paths)
    seeds = [RngSeed(seed, i) for i, _ in blocks]
    job = lambda b: fn(seeds[b[0]].generator(), b[1])  # noqa: E731
    if threads and threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(job, blocks))
    else:
        parts = [job(b) for b in blocks]
    return parts


def _segment_sums(values, counts):
    """Sum of consecutive segments of ``values`` with lengths ``counts``."""
    out = np.zeros(counts.size)
    nz = counts > 0
    if nz.any():
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        out[nz] = np.add.reduceat(values, starts[nz])
    return out


def sample_values(spec: KernelSpec, t, n_paths, seed: int, threads=1):
    """Draws of ``S(t)`` for ``n_paths`` independent paths.

    Returns ``(values, n_jumps)``.
    """
    if t < 0:
        raise DomainError("t must be >= 0")

    def block(rng, n):
        counts = rng.poisson(t, n)
        sizes = sample_jumps(spec, rng, counts.sum())
        return _segment_sums(sizes, counts), counts

    parts = _run_blocks(block, int(n_paths), seed, threads)
    if not parts:
        return np.zeros(0), np.zeros(0, dtype=int)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sample_arrivals(spec: KernelSpec, horizon, n_paths, seed: int, threads=1):
    """Jump epochs and sizes of many paths on ``[0, horizon]``.

    Given the Poisson count, epochs are sorted uniforms on the horizon.
    Returns ``(counts, times, sizes)`` with epochs of each path contiguous
    and increasing.
    """
    if horizon < 0:
        raise DomainError("horizon must be >= 0")

    def block(rng, n):
        counts = rng.poisson(horizon, n)
        total = int(counts.sum())
        times = rng.random(total) * horizon
        owner = np.repeat(np.arange(n), counts)
        order = np.lexsort((times, owner))
        times = times[order]
        sizes = sample_jumps(spec, rng, total)
        return counts, times, sizes

    parts = _run_blocks(block, int(n_paths), seed, threads)
    if not parts:
        return np.zeros(0, dtype=int), np.zeros(0), np.zeros(0)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


# -- comparison with the closed-form law -------------------------------------------

def _upper_limit(spec, law, t):
    """Abscissa beyond which the mass of S(t) is negligible for a KS comparison."""
    x = 1.0
    if spec.family == "ml":
        while t * tail_levy_measure(spec, x) > 1e-8 and x < 1e15:
            x *= 4.0
        return x
    while x * law.density(x) > 1e-14 and x < 1e6:
        x *= 2.0
    return x


def conditional_cdf(spec: KernelSpec, t, panels=160, rel_tol=1e-9):
    """Distribution function of S(t) given at least one jump.

    The density is integrated on geometric panels with the tanh-sinh rule
    and interpolated monotonically in ``log x``; below the first panel the
    CDF follows the leading power ``x^p`` of the density.
    """
    law = law_of(spec, t)
    if law.numeric_only:
        raise DomainError(f"{spec.label} has no closed-form density")
    _, _, shape = spec.components()
    p = float(np.min(shape))
    x_hi = _upper_limit(spec, law, t)
    x_lo = 1e-8 * min(1.0, x_hi)
    edges = np.geomspace(x_lo, x_hi, panels + 1)
    lefts = np.concatenate([[0.0], edges[:-1]])
    rights = edges

    def dens(z):
        return law.density(z.ravel()).reshape(z.shape)

    if spec.finite_origin:
        vals = tanh_sinh(dens, lefts, rights, rel_tol=rel_tol, abs_tol=1e-300, max_level=7).value
    else:
        # density ~ x^(p-1) at the origin: integrate the first panel in u = x^p
        rest = tanh_sinh(dens, lefts[1:], rights[1:], rel_tol=rel_tol, abs_tol=1e-300,
                         max_level=7).value
        def g(u):
            z = u ** (1.0 / p)
            ok = z > 0
            out = np.zeros_like(u)
            # nodes whose x underflows to 0 carry weights far below rounding
            out[ok] = dens(z[ok]) * u[ok] ** (1.0 / p - 1.0) / p
            return out

        first = tanh_sinh(g, 0.0, x_lo ** p, rel_tol=rel_tol, abs_tol=1e-300, max_level=7).value
        vals = np.concatenate([first, rest])
    mass = 1.0 - math.exp(-t)
    cum = np.cumsum(vals) / mass
    if abs(cum[-1] - 1.0) > 1e-5 and spec.family != "ml":
        raise DomainError(f"density of {spec.label} integrates to {cum[-1] * mass:.8g}, "
                          f"expected {mass:.8g}")
    cum = np.minimum(cum, 1.0)
    interp = interpolate.PchipInterpolator(np.log(edges), cum, extrapolate=False)
    c0 = cum[0]

    def cdf(y):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        low = y < x_lo
        high = y >= x_hi
        mid = ~(low | high)
        with np.errstate(divide="ignore"):
            out[low] = c0 * (np.maximum(y[low], 0.0) / x_lo) ** p
        out[high] = 1.0
        out[mid] = interp(np.log(y[mid]))
        return np.clip(out, 0.0, 1.0)

    return cdf


def ks_compare(spec: KernelSpec, t, n_paths, seed: int, threads=1):
    """One-sample KS statistic of the nonzero draws of S(t) against the closed-form law.

    Returns ``(statistic, n_nonzero)``.  Refuses when fewer than 100 paths
    have a jump.
    """
    values, counts = sample_values(spec, t, n_paths, seed, threads)
    nz = values[counts > 0]
    if nz.size < KS_MIN_NONZERO:
        raise DomainError(f"only {nz.size} paths with a jump; KS needs at least {KS_MIN_NONZERO}")
    cdf = conditional_cdf(spec, t)
    res = stats.kstest(nz, cdf)
    return float(res.statistic), int(nz.size)


def tail_slope(samples, x_lo=10.0, x_hi=1e3, points=20):
    """Least-squares slope of ``log P(X > x)`` against ``log x`` on ``[x_lo, x_hi]``."""
    s = np.sort(np.asarray(samples, dtype=float))
    xs = np.geomspace(x_lo, x_hi, points)
    surv = 1.0 - np.searchsorted(s, xs, side="right") / s.size
    if np.any(surv <= 0):
        raise DomainError("no samples beyond the upper end of the regression range")
    slope, _ = np.polyfit(np.log(xs), np.log(surv), 1)
    return float(slope)


# -- output ------------------------------------------------------------------------

def write_paths_csv(path, spec: KernelSpec, horizon, n_paths, seed: int):
    """Write ``path_id,jump_time,jump_size`` rows, 17 significant digits."""
    counts, times, sizes = sample_arrivals(spec, horizon, n_paths, seed)
    owner = np.repeat(np.arange(counts.size), counts)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "jump_time", "jump_size"])
        for i, tj, xj in zip(owner, times, sizes):
            w.writerow([int(i), f"{tj:.17g}", f"{xj:.17g}"])
    return counts


def simulation_summary(spec: KernelSpec, t, n_paths, seed: int, threads=1, ks=True):
    """Zero-jump fraction, sample mean with standard error and, when
    available, the KS statistic of S(t)."""
    values, counts = sample_values(spec, t, n_paths, seed, threads)
    n = values.size
    zero = float(np.mean(counts == 0)) if n else math.nan
    out = {
        "kernel": spec.to_dict(),
        "kernel_id": spec.label,
        "t": float(t),
        "n_paths": int(n_paths),
        "seed": int(seed),
        "streams": len(_blocks(int(n_paths))),
        "generator": GENERATOR,
        "zero_jump_fraction": zero,
        "zero_jump_expected": math.exp(-t),
        "zero_jump_sigma": math.sqrt(math.exp(-t) * (1 - math.exp(-t)) / max(n, 1)),
        "mean": float(values.mean()) if n else math.nan,
        "mean_se": float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
    }
    nz = values[counts > 0]
    out["n_nonzero"] = int(nz.size)
    if ks and nz.size >= KS_MIN_NONZERO and not law_of(spec, t).numeric_only:
        stat = float(stats.kstest(nz, conditional_cdf(spec, t)).statistic)
        out["ks_statistic"] = stat
        out["ks_scaled"] = stat * math.sqrt(nz.size)
        out["ks_critical_1pct"] = 1.63
    return out


def dump_summary(path, summary):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
