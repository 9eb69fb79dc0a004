"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Tolerances are fixed by the acceptance criteria and are not tuned here.
Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed at the end of the session.
"""

import math
import time

import mpmath as mp
import numpy as np
import pytest

from nsk import (Dirac, DistributedExp, DistributedIG, DistributedML, Exponential,
                 IncompleteGammaK, MittagLefflerK, TwoPoint, bernstein_psi, law_of)
from nsk.densities import (density_distributed_ml, density_exponential, density_ig,
                           density_ml, density_two_point_exp, density_two_point_ig)
from nsk.laplace import closed_form_transform, closed_form_transform_mp, gaver_stehfest_invert, numeric_forward
from nsk.operators import (general_equation_check, ig_derivative_transform, laplace_of_operator,
                           ml_derivative_transform, residual_refinement, residual_sweep)
from nsk.risk import (NetProfit, RiskConfig, mgf_monte_carlo, mgf_ode_residual, mgf_R,
                      net_profit_check, ruin_probability)
from nsk.simulate import ks_compare, sample_jumps, sample_values, tail_slope, RngSeed

T_VALUES = (0.5, 1.0, 2.0)

# one representative of each family with a closed-form density; k = 1 unless noted
FAMILIES = {
    "exponential": Exponential(0.5),
    "mittag-leffler": MittagLefflerK(0.5, 0.6),
    "incomplete-gamma": IncompleteGammaK(0.5, 0.5),
    # k1 = 1, k2 = 3, q1 = 0.4
    "two-point exponential": DistributedExp(TwoPoint(0.5, 0.4, 0.75, 0.6)),
    "two-point Mittag-Leffler": DistributedML(0.5, TwoPoint(0.4, 0.5, 0.8, 0.5)),
    "two-point incomplete-gamma": DistributedIG(0.5, TwoPoint(0.3, 0.5, 0.7, 0.5)),
}


def test_criterion_1_normalization(record):
    start = time.perf_counter()
    worst, where = 0.0, None
    for name, spec in FAMILIES.items():
        for t in T_VALUES:
            law = law_of(spec, t)
            mass, _ = numeric_forward(law.density, 0.0, singular_origin=not spec.finite_origin,
                                      rel_tol=1e-10)
            err = abs(math.exp(-t) + mass - 1.0)
            if err > worst:
                worst, where = err, (name, t)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 30.0
    record(1, "normalization", ok,
           f"max |atom + mass - 1| = {worst:.2e} at {where}, {elapsed:.1f} s (limits 1e-6, 30 s)")
    assert ok


def test_criterion_2_laplace_triangle(record):
    start = time.perf_counter()
    etas = (0.5, 1.0, 2.0, 5.0)
    xs = np.geomspace(0.1, 5.0, 12)
    fwd_worst, inv_worst = 0.0, {}
    for name, spec in FAMILIES.items():
        for t in T_VALUES:
            law = law_of(spec, t)
            for eta in etas:
                val, _ = numeric_forward(law.density, eta, singular_origin=not spec.finite_origin)
                fwd_worst = max(fwd_worst, abs(val - closed_form_transform(spec, eta, t)))
            dens = law.density(xs)
            inv = np.array([gaver_stehfest_invert(
                lambda e, s=spec, tt=t: closed_form_transform_mp(s, e, tt), x, terms=20, check=False)
                for x in xs])
            rel = float(np.max(np.abs(inv - dens) / np.abs(dens)))
            inv_worst[name] = max(inv_worst.get(name, 0.0), rel)
    elapsed = time.perf_counter() - start
    failing = {k: v for k, v in inv_worst.items() if not v < 1e-4}
    ok = fwd_worst < 1e-6 and not failing and elapsed < 60.0
    detail = (f"forward max abs err {fwd_worst:.2e} (limit 1e-6); inversion max rel err "
              + ", ".join(f"{k} {v:.1e}" for k, v in inv_worst.items())
              + f" (limit 1e-4); {elapsed:.1f} s")
    if failing:
        detail += "; over limit: " + ", ".join(sorted(failing))
    record(2, "Laplace triangle", ok, detail)
    assert ok


RESIDUAL_CASES = {
    "exponential": (Exponential(0.5), "governing"),
    "Mittag-Leffler": (MittagLefflerK(0.5, 0.5), "governing"),
    "incomplete-gamma": (IncompleteGammaK(0.5, 0.5), "governing"),
    "two-point exponential": (FAMILIES["two-point exponential"], "governing"),
    "two-point exponential, boundary form": (FAMILIES["two-point exponential"], "general"),
    "distributed ML, Dirac": (DistributedML(0.5, Dirac(0.6)), "governing"),
    "distributed ML, two-point": (FAMILIES["two-point Mittag-Leffler"], "governing"),
    "two-point incomplete-gamma": (FAMILIES["two-point incomplete-gamma"], "governing"),
    "two-point incomplete-gamma, no derivative": (FAMILIES["two-point incomplete-gamma"],
                                                  "regularized"),
}


def test_criterion_3_governing_residuals(record):
    start = time.perf_counter()
    xs = [0.25, 0.5, 1.0, 2.0, 4.0]
    ts = [0.5, 0.75, 1.0, 1.5, 2.0]
    worst = {}
    for name, (spec, form) in RESIDUAL_CASES.items():
        m = 0.0
        for t in ts:
            if form == "general":
                res = [general_equation_check(spec, x, t, fd_step=1e-4).residual for x in xs]
            else:
                reps = residual_sweep(spec, xs, t, fd_step=1e-4,
                                      use_derivative=(form == "governing"))
                res = [r.residual for r in reps]
            m = max(m, float(np.max(np.abs(res))))
        worst[name] = m
    reps = residual_refinement(Exponential(0.5), 1.0, 1.0, steps=(1e-2, 5e-3, 2.5e-3))
    r = [abs(p.residual) for p in reps]
    ratios = (r[0] / r[1], r[1] / r[2])
    elapsed = time.perf_counter() - start
    second_order = all(3.5 < q < 4.5 for q in ratios)
    ok = max(worst.values()) < 1e-5 and second_order and elapsed < 300.0
    record(3, "governing-equation residuals", ok,
           f"max residual {max(worst.values()):.2e} over {len(worst)} cases (limit 1e-5); "
           f"refinement ratios {ratios[0]:.3f}, {ratios[1]:.3f}; {elapsed:.1f} s")
    assert ok


def _gamma_convolution(k, rho, x, t, terms=30):
    k, rho, x, t = mp.mpf(k), mp.mpf(rho), mp.mpf(x), mp.mpf(t)
    return mp.exp(-t) * mp.fsum(
        t ** n / mp.factorial(n) * k ** (rho * n) * x ** (rho * n - 1) * mp.exp(-k * x)
        / mp.gamma(rho * n) for n in range(1, terms + 1))


def test_criterion_4_incomplete_gamma_exact(record):
    xs = np.geomspace(0.01, 10.0, 20)
    worst = 0.0
    with mp.workdps(40):
        for k, rho, t in ((1.0, 0.5, 1.0), (2.0, 0.5, 2.0), (1.0, 0.3, 0.5)):
            got = density_ig(k, rho, xs, t)
            ref = np.array([float(_gamma_convolution(k, rho, mp.mpf(float(x)), t)) for x in xs])
            worst = max(worst, float(np.max(np.abs(got - ref))))
    ok = worst < 1e-10
    record(4, "incomplete-gamma exact oracle", ok, f"max abs gap {worst:.2e} (limit 1e-10)")
    assert ok


def test_criterion_5_anomaly(record):
    alpha, eta, t = 0.5, 2.0, 1.0
    k = alpha / (1 - alpha)
    f0 = k * t * math.exp(-t)
    exp_spec = Exponential(alpha)
    exp_path = laplace_of_operator(exp_spec, lambda e: closed_form_transform(exp_spec, e, t), f0, eta)

    nu = 1 - 1e-8
    ml = MittagLefflerK(alpha, nu)
    ml_path = laplace_of_operator(ml, None, math.inf, eta,
                                  df_transform=lambda e: ml_derivative_transform(k, nu, t, e))
    predicted_ml = k * t * math.exp(-t) / (eta + k)
    gap_ml = ml_path - exp_path

    rho = 1 - 1e-8
    ig = IncompleteGammaK(alpha, rho)
    ig_path = laplace_of_operator(ig, None, math.inf, eta,
                                  df_transform=lambda e: ig_derivative_transform(k, rho, t, e))
    psi = bernstein_psi(ig, eta)
    predicted_ig = k ** rho * t * math.exp(-t) * (eta + k) ** (1 - rho) * psi / eta
    gap_ig = ig_path - exp_path

    e1, e2 = abs(gap_ml - predicted_ml), abs(gap_ig - predicted_ig)
    ok = e1 < 1e-4 and e2 < 1e-4
    record(5, "anomaly reproduction", ok,
           f"nu-gap {gap_ml:.8f} vs {predicted_ml:.8f} (err {e1:.1e}); "
           f"rho-gap {gap_ig:.8f} vs {predicted_ig:.8f} (err {e2:.1e}); limit 1e-4")
    assert ok


def test_criterion_6_monte_carlo(record):
    start = time.perf_counter()
    notes, ok = [], True
    n, t = 100_000, 1.0

    _, counts = sample_values(Exponential(0.5), t, n, seed=101)
    frac = float(np.mean(counts == 0))
    p = math.exp(-t)
    sigma = math.sqrt(p * (1 - p) / n)
    good = abs(frac - p) < 3 * sigma
    ok &= good
    notes.append(f"zero-jump {frac:.5f} vs {p:.5f} ({abs(frac - p) / sigma:.2f} sigma)")

    for name, spec in (("exp", Exponential(0.5)), ("IG", IncompleteGammaK(0.5, 0.5)),
                       ("two-point exp", FAMILIES["two-point exponential"])):
        stat, nz = ks_compare(spec, t, n, seed=202)
        scaled = stat * math.sqrt(nz)
        good = scaled < 1.63
        ok &= good
        notes.append(f"KS {name} {scaled:.3f}")

    jumps = sample_jumps(MittagLefflerK(0.5, 0.6), RngSeed(303).generator(), 1_000_000)
    slope = tail_slope(jumps, 10.0, 1e3)
    good = abs(slope + 0.6) < 0.05
    ok &= good
    notes.append(f"ML tail slope {slope:.4f} (target -0.6)")

    for name, spec, mean in (("exp", Exponential(0.5), 1.0),
                             ("IG", IncompleteGammaK(0.5, 0.5), 0.5)):
        values, _ = sample_values(spec, 1.0, 1_000_000, seed=404)
        se = values.std(ddof=1) / math.sqrt(values.size)
        z = abs(values.mean() - mean) / se
        good = z < 3
        ok &= good
        notes.append(f"mean S(1) {name} {values.mean():.5f} vs {mean} ({z:.2f} SE)")

    elapsed = time.perf_counter() - start
    ok &= elapsed < 300.0
    record(6, "Monte Carlo", ok, "; ".join(notes) + f"; {elapsed:.1f} s")
    assert ok


def test_criterion_7_risk(record):
    notes, ok = [], True
    kernels = {"exponential": Exponential(0.5), "incomplete-gamma": IncompleteGammaK(0.5, 0.5),
               "Mittag-Leffler": MittagLefflerK(0.5, 0.5)}
    expected = {
        ("exponential", 0.3): NetProfit.VIOLATED, ("exponential", 2.0): NetProfit.SATISFIED,
        ("incomplete-gamma", 0.3): NetProfit.VIOLATED,
        ("incomplete-gamma", 2.0): NetProfit.SATISFIED,
        ("Mittag-Leffler", 0.3): NetProfit.INFINITE_MEAN,
        ("Mittag-Leffler", 2.0): NetProfit.INFINITE_MEAN,
    }
    got = {(name, b): net_profit_check(RiskConfig(1.0, b, spec))
           for name, spec in kernels.items() for b in (0.3, 2.0)}
    good = got == expected
    ok &= good
    notes.append(f"net-profit matrix {'exact' if good else 'mismatch'}")

    res = max(abs(mgf_ode_residual(RiskConfig(0.0, 1.0, spec), 1.0, 1.0, fd_step=1e-5))
              for spec in (Exponential(0.5), IncompleteGammaK(0.5, 0.5)))
    ok &= res < 1e-7
    notes.append(f"MGF equation residual {res:.1e}")

    cfg = RiskConfig(1.0, 2.0, Exponential(0.5), n_paths=1_000_000)
    mean, se = mgf_monte_carlo(cfg, 0.5, 1.0, seed=505)
    closed = mgf_R(cfg, 0.5, 1.0)
    z = abs(mean - closed) / se
    ok &= z < 3
    notes.append(f"MGF {mean:.5f} vs {closed:.5f} ({z:.2f} SE)")

    cfg = RiskConfig(0.0, 1e-6, Exponential(0.5), horizon=10.0, n_paths=100_000)
    est, _ = ruin_probability(cfg, seed=606)
    p = 1 - math.exp(-10.0)
    sigma = math.sqrt(p * (1 - p) / cfg.n_paths)
    ok &= abs(est - p) < 3 * sigma
    notes.append(f"ruin at small premium {est:.6f} vs {p:.6f} ({abs(est - p) / sigma:.2f} sigma)")

    record(7, "risk", ok, "; ".join(notes))
    assert ok


def test_criterion_8_reduction_ladder(record):
    etas = np.array([0.1, 0.5, 1.0, 2.0, 10.0])
    xs = np.array([0.2, 0.7, 1.5, 4.0])
    t = 1.0
    gaps = {}
    gaps["psi nu->1"] = np.max(np.abs(bernstein_psi(MittagLefflerK(0.5, 1 - 1e-8), etas)
                                      - bernstein_psi(Exponential(0.5), etas)))
    gaps["psi rho->1"] = np.max(np.abs(bernstein_psi(IncompleteGammaK(0.5, 1 - 1e-8), etas)
                                       - bernstein_psi(Exponential(0.5), etas)))
    gaps["density nu->1"] = np.max(np.abs(density_ml(1.0, 1 - 1e-8, xs, t)
                                          - density_exponential(1.0, xs, t)))
    gaps["density rho->1"] = np.max(np.abs(density_ig(1.0, 1 - 1e-8, xs, t)
                                           - density_exponential(1.0, xs, t)))
    gaps["Dirac exp"] = np.max(np.abs(law_of(DistributedExp(Dirac(0.6)), t).density(xs)
                                      - law_of(Exponential(0.6), t).density(xs)))
    gaps["Dirac ML"] = np.max(np.abs(law_of(DistributedML(0.5, Dirac(0.6)), t).density(xs)
                                     - law_of(MittagLefflerK(0.5, 0.6), t).density(xs)))
    gaps["Dirac IG"] = np.max(np.abs(law_of(DistributedIG(0.5, Dirac(0.4)), t).density(xs)
                                     - law_of(IncompleteGammaK(0.5, 0.4), t).density(xs)))
    gaps["q1=0 exp"] = np.max(np.abs(density_two_point_exp(1.0, 3.0, 0.0, xs, t)
                                     - density_exponential(3.0, xs, t)))
    gaps["q1=1 exp"] = np.max(np.abs(density_two_point_exp(1.0, 3.0, 1.0, xs, t)
                                     - density_exponential(1.0, xs, t)))
    gaps["q1=0 IG"] = np.max(np.abs(density_two_point_ig(1.0, 0.3, 0.7, 0.0, xs, t)
                                    - density_ig(1.0, 0.7, xs, t)))
    gaps["q1=1 IG"] = np.max(np.abs(density_two_point_ig(1.0, 0.3, 0.7, 1.0, xs, t)
                                    - density_ig(1.0, 0.3, xs, t)))
    gaps["q1=0 ML"] = np.max(np.abs(density_distributed_ml(1.0, TwoPoint(0.4, 0.0, 0.8, 1.0), xs, t)
                                    - density_ml(1.0, 0.8, xs, t)))
    gaps["q1=1 ML"] = np.max(np.abs(density_distributed_ml(1.0, TwoPoint(0.4, 1.0, 0.8, 0.0), xs, t)
                                    - density_ml(1.0, 0.4, xs, t)))
    worst = max(gaps, key=gaps.get)
    ok = all(v < 1e-4 for v in gaps.values())
    record(8, "reduction ladder", ok,
           f"{len(gaps)} limits, largest gap {gaps[worst]:.1e} ({worst}); limit 1e-4")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
