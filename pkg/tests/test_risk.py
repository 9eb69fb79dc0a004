"""Risk reserve: net profit screening, ruin estimates and the moment generating function."""

import math

import numpy as np
import pytest

from nsk import (DistributedExp, DistributedML, DomainError, Exponential, IncompleteGammaK,
                 MittagLefflerK, TwoPoint)
from nsk.risk import (NetProfit, RiskConfig, mgf_monte_carlo, mgf_ode_residual, mgf_R,
                      net_profit_check, ruin_grid, ruin_probability)

EXP = Exponential(0.5)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(a=-1.0, beta=1.0), dict(a=0.0, beta=0.0),
                                    dict(a=0.0, beta=1.0, horizon=0.0),
                                    dict(a=0.0, beta=1.0, n_paths=0)])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            RiskConfig(spec=EXP, **kw)

    def test_infinite_mean_config_is_constructible(self):
        cfg = RiskConfig(1.0, 2.0, MittagLefflerK(0.5, 0.5))
        assert cfg.to_dict()["kernel"]["variant"] == "MittagLefflerK"


class TestNetProfit:
    def test_satisfied(self):
        assert net_profit_check(RiskConfig(0.0, 2.0, EXP)) is NetProfit.SATISFIED

    @pytest.mark.parametrize("spec", [MittagLefflerK(0.5, 0.5), MittagLefflerK(0.3, 0.9),
                                      DistributedML(0.5, TwoPoint(0.4, 0.5, 0.8, 0.5))],
                             ids=lambda s: s.label)
    def test_infinite_mean(self, spec):
        assert net_profit_check(RiskConfig(0.0, 2.0, spec)) is NetProfit.INFINITE_MEAN

    def test_violated(self):
        cfg = RiskConfig(0.0, 0.3, IncompleteGammaK(0.5, 0.5))
        assert net_profit_check(cfg) is NetProfit.VIOLATED

    def test_boundary_is_violated(self):
        # beta equal to the mean claim is not a strict net profit
        assert net_profit_check(RiskConfig(0.0, 1.0, EXP)) is NetProfit.VIOLATED

    def test_mixture_mean(self):
        spec = DistributedExp(TwoPoint(0.5, 0.4, 0.75, 0.6))
        # E X = 0.4 * 1 + 0.6 / 3
        assert net_profit_check(RiskConfig(0.0, 0.61, spec)) is NetProfit.SATISFIED
        assert net_profit_check(RiskConfig(0.0, 0.59, spec)) is NetProfit.VIOLATED


class TestRuin:
    def test_unreachable(self):
        p, hw = ruin_probability(RiskConfig(1e6, 1.0, EXP, n_paths=2000), seed=1)
        assert p == 0.0 and hw == 0.0

    def test_independent_seed_within_interval(self):
        cfg = RiskConfig(0.0, 1.0, EXP, horizon=10.0, n_paths=100000)
        p1, hw1 = ruin_probability(cfg, seed=11)
        p2, _ = ruin_probability(cfg, seed=12)
        assert abs(p1 - p2) < hw1
        assert 0.3 < p1 < 0.9

    def test_tiny_premium_ruins_at_first_claim(self):
        cfg = RiskConfig(0.0, 1e-6, EXP, horizon=10.0, n_paths=100000)
        p, hw = ruin_probability(cfg, seed=3)
        ref = 1 - math.exp(-10)
        assert abs(p - ref) < max(hw, 3 * math.sqrt(ref * (1 - ref) / cfg.n_paths))

    def test_reproducible(self):
        cfg = RiskConfig(0.5, 1.2, IncompleteGammaK(0.5, 0.5), n_paths=5000)
        assert ruin_probability(cfg, seed=8) == ruin_probability(cfg, seed=8)

    def test_first_claim_ruin_probability(self):
        # with a = 0 and horizon h, ruin at the first claim has probability
        # int_0^h e^-s P(X > beta s) ds = (1 - e^-(1 + beta k) h) / (1 + beta k) for Exp(k);
        # later ruins only add, so this is a lower bound
        beta, k, h = 1.0, 1.0, 10.0
        lower = (1 - math.exp(-(1 + beta * k) * h)) / (1 + beta * k)
        p, hw = ruin_probability(RiskConfig(0.0, beta, EXP, horizon=h, n_paths=50000), seed=4)
        assert p > lower - hw

    def test_grid_monotone(self):
        grid = ruin_grid(EXP, [0.0, 1.0, 3.0], [0.5, 1.0, 2.0], 10.0, 20000, seed=5)
        assert grid.shape == (3, 3)
        assert np.all(np.diff(grid, axis=0) <= 0)
        assert np.all(np.diff(grid, axis=1) <= 0)
        assert grid[0, 0] > grid[-1, -1]

    def test_grid_matches_single_estimates(self):
        grid = ruin_grid(EXP, [1.0], [1.5], 5.0, 3000, seed=6)
        p, _ = ruin_probability(RiskConfig(1.0, 1.5, EXP, horizon=5.0, n_paths=3000), seed=6)
        assert grid[0, 0] == p


class TestMGF:
    def test_time_zero(self):
        assert mgf_R(RiskConfig(1.3, 2.0, EXP), 0.7, 0.0) == pytest.approx(math.exp(0.7 * 1.3),
                                                                          rel=1e-15)

    def test_small_eta(self):
        assert mgf_R(RiskConfig(1.0, 2.0, EXP), 1e-8, 1.0) == pytest.approx(1.0, abs=1e-7)

    def test_exponential_value(self):
        # psi(1) = 1/2 for k = 1
        assert mgf_R(RiskConfig(1.0, 2.0, EXP), 1.0, 1.0) == pytest.approx(
            math.exp(3.0 - 0.5), rel=1e-15)

    def test_monte_carlo_agreement(self):
        cfg = RiskConfig(1.0, 2.0, EXP, n_paths=10 ** 6)
        mean, se = mgf_monte_carlo(cfg, 1.0, 1.0, seed=21)
        assert abs(mean - math.exp(2.5)) < 3 * se

    @pytest.mark.parametrize("spec", [EXP, IncompleteGammaK(0.5, 0.5),
                                      DistributedExp(TwoPoint(0.5, 0.4, 0.75, 0.6))],
                             ids=lambda s: s.label)
    def test_monte_carlo_small_eta(self, spec):
        cfg = RiskConfig(0.5, 1.0, spec, n_paths=200000)
        mean, se = mgf_monte_carlo(cfg, 0.4, 2.0, seed=22)
        assert abs(mean - mgf_R(cfg, 0.4, 2.0)) < 3 * se

    def test_density_reading_misses_the_atom(self):
        cfg = RiskConfig(1.0, 2.0, EXP)
        full = mgf_R(cfg, 1.0, 1.0)
        dens = mgf_R(cfg, 1.0, 1.0, reading="density")
        assert full - dens == pytest.approx(math.exp(3.0 - 1.0), rel=1e-14)

    @pytest.mark.parametrize("spec", [EXP, IncompleteGammaK(0.5, 0.5)], ids=lambda s: s.label)
    def test_ode_residual(self, spec):
        cfg = RiskConfig(0.0, 1.0, spec)
        assert abs(mgf_ode_residual(cfg, 1.0, 1.0, fd_step=1e-5)) < 1e-7

    def test_ode_residual_second_order(self):
        cfg = RiskConfig(0.0, 1.0, EXP)
        r = [abs(mgf_ode_residual(cfg, 1.0, 1.0, fd_step=h)) for h in (4e-3, 2e-3)]
        assert r[0] / r[1] == pytest.approx(4.0, rel=0.05)

    def test_ode_stencil_precondition(self):
        with pytest.raises(DomainError):
            mgf_ode_residual(RiskConfig(0.0, 1.0, EXP), 1.0, 5e-6, fd_step=1e-5)

    def test_rejects_nonpositive_eta(self):
        with pytest.raises(DomainError):
            mgf_R(RiskConfig(0.0, 1.0, EXP), 0.0, 1.0)
        with pytest.raises(DomainError):
            mgf_R(RiskConfig(0.0, 1.0, EXP), 1.0, 1.0, reading="other")
