"""Forward transforms, Gaver-Stehfest inversion and the transform triangle."""

import math
import warnings
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from nsk import (DistributedExp, DistributedML, DomainError, Exponential, IncompleteGammaK,
                 MittagLefflerK, TwoPoint, law_of)
from nsk.densities import density_exponential
from nsk.laplace import (GS_MIN_X, TransformPair, closed_form_transform, closed_form_transform_mp,
                         gaver_stehfest_diagnostic, gaver_stehfest_invert, invert_closed_form,
                         numeric_forward, stehfest_weights)

SPECS = [Exponential(0.5), MittagLefflerK(0.5, 0.5), IncompleteGammaK(0.5, 0.5),
         DistributedExp(TwoPoint(0.5, 0.4, 0.75, 0.6)),
         DistributedML(0.5, TwoPoint(0.4, 0.5, 0.8, 0.5))]


class TestClosedForm:
    def test_zero_time(self):
        for spec in SPECS:
            assert closed_form_transform(spec, 1.3, 0.0) == 0.0

    def test_exponential_value(self):
        assert closed_form_transform(Exponential(0.5), 1.0, 1.0) == pytest.approx(
            math.exp(-0.5) - math.exp(-1.0), rel=1e-15)

    def test_large_eta(self):
        # F(eta) = exp(-t) expm1(t (1 - psi)); 1 - psi decays like 1/eta only for the
        # exponential family, like eta^-nu or eta^-rho otherwise
        eta = 1e8
        for spec in SPECS:
            ref = float(closed_form_transform_mp(spec, mp.mpf(eta), mp.mpf(1)))
            assert closed_form_transform(spec, eta, 1.0) == pytest.approx(ref, rel=1e-12)
            if spec.finite_origin:
                assert abs(closed_form_transform(spec, eta, 1.0)) < 1e-6
        ml = closed_form_transform(MittagLefflerK(0.5, 0.5), eta, 1.0)
        assert ml == pytest.approx(math.exp(-1) * math.expm1(1 / (1e4 + 1)), rel=1e-12)

    def test_mp_agrees_with_float(self):
        for spec in SPECS:
            for eta in (0.01, 1.0, 50.0):
                assert float(closed_form_transform_mp(spec, mp.mpf(eta), 1.5)) == pytest.approx(
                    closed_form_transform(spec, eta, 1.5), rel=1e-13)

    def test_small_eta_keeps_precision(self):
        # exp(-t psi) - exp(-t) is formed as exp(-t) expm1(t (1 - psi)), exact at small eta
        spec = Exponential(0.5)
        eta = 1e-12
        with mp.workdps(40):
            ref = float(mp.exp(-1) * mp.expm1(1 / (1 + mp.mpf(eta))))
        assert closed_form_transform(spec, eta, 1.0) == pytest.approx(ref, rel=1e-12)

    def test_pair(self):
        pair = TransformPair(Exponential(0.5), 1.0)
        assert pair.forward(2.0) == closed_form_transform(Exponential(0.5), 2.0, 1.0)
        assert "Exponential" in pair.label


class TestNumericForward:
    def test_exponential_function(self):
        val, _ = numeric_forward(lambda x: np.exp(-x), 1.0)
        assert val == pytest.approx(0.5, rel=1e-12)

    def test_density_against_closed_form(self):
        val, _ = numeric_forward(lambda x: density_exponential(1.0, x, 1.0), 2.0)
        assert val == pytest.approx(closed_form_transform(Exponential(0.5), 2.0, 1.0), abs=1e-6)
        assert val == pytest.approx(closed_form_transform(Exponential(0.5), 2.0, 1.0), rel=1e-11)

    def test_singular_integrand(self):
        val, _ = numeric_forward(lambda x: x ** -0.5 * np.exp(-x), 0.0, singular_origin=True)
        assert val == pytest.approx(math.sqrt(math.pi), rel=1e-12)

    def test_singular_with_eta(self):
        # int x^-1/2 e^-x e^-2x dx = sqrt(pi / 3), checked against mpmath quadrature
        val, _ = numeric_forward(lambda x: x ** -0.5 * np.exp(-x), 2.0, singular_origin=True)
        assert val == pytest.approx(1.0233267079464885, rel=1e-12)

    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
    def test_density_transforms(self, spec):
        law = law_of(spec, 1.0)
        for eta in (0.5, 2.0):
            val, _ = numeric_forward(law.density, eta, singular_origin=not spec.finite_origin)
            assert val == pytest.approx(closed_form_transform(spec, eta, 1.0), abs=1e-9)

    def test_rejects_negative_eta(self):
        with pytest.raises(DomainError):
            numeric_forward(lambda x: np.exp(-x), -1.0)


class TestGaverStehfest:
    def test_weights_sum_to_zero(self):
        for n in (8, 12, 16, 20):
            assert sum(stehfest_weights(n)) == 0

    def test_weights_small_case(self):
        # N = 2: V1 = 2, V2 = -2
        assert stehfest_weights(2) == (Fraction(2), Fraction(-2))

    def test_known_pairs(self):
        assert gaver_stehfest_invert(lambda e: 1 / (e + 1), 1.0, terms=20) == pytest.approx(
            math.exp(-1), abs=1e-8)
        assert gaver_stehfest_invert(lambda e: 1 / e ** 2, 3.0, terms=20) == pytest.approx(
            3.0, abs=1e-8)

    def test_known_pair_at_default_terms(self):
        # 16 terms resolve these pairs to about 1e-7, 20 terms to 1e-8 or better
        v16 = gaver_stehfest_invert(lambda e: 1 / (e + 1), 1.0)
        assert abs(v16 - math.exp(-1)) < 1e-6

    def test_exponential_density(self):
        val = invert_closed_form(Exponential(0.5), 1.0, 1.0, terms=16)
        assert val == pytest.approx(density_exponential(1.0, 1.0, 1.0), abs=1e-6)

    def test_ml_density(self):
        # Talbot oracle at 120 digits; agreement to 1e-4 relative
        val = invert_closed_form(MittagLefflerK(0.5, 0.9), 2.0, 0.5)
        assert val == pytest.approx(0.055227491867260413, rel=1e-4)

    def test_check_warns_on_disagreement(self):
        # a transform with an oscillating inverse defeats the method
        with pytest.warns(RuntimeWarning):
            gaver_stehfest_invert(lambda e: 1 / (e * e + 25), 3.0, terms=12, check=True)

    def test_no_warning_when_converged(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            gaver_stehfest_invert(lambda e: 1 / (e + 1), 1.0, terms=16, check=True)

    def test_diagnostic(self):
        d = gaver_stehfest_diagnostic(lambda e: 1 / (e + 1), 1.0)
        assert set(d) == {8, 12, 16}
        errs = [abs(d[n] - math.exp(-1)) for n in (8, 12, 16)]
        assert errs[2] < errs[0]

    @pytest.mark.parametrize("terms", [6, 15, 22])
    def test_term_range(self, terms):
        with pytest.raises(DomainError):
            gaver_stehfest_invert(lambda e: 1 / (e + 1), 1.0, terms=terms)

    def test_refuses_near_singular_origin(self):
        with pytest.raises(DomainError):
            invert_closed_form(MittagLefflerK(0.5, 0.5), GS_MIN_X / 2, 1.0)

    def test_x_must_be_positive(self):
        with pytest.raises(DomainError):
            gaver_stehfest_invert(lambda e: 1 / (e + 1), 0.0)


def test_triangle_consistency():
    # density -> forward transform -> closed form, and closed form -> inversion -> density
    spec = IncompleteGammaK(0.5, 0.5)
    law = law_of(spec, 1.0)
    val, _ = numeric_forward(law.density, 1.0, singular_origin=True)
    assert val == pytest.approx(closed_form_transform(spec, 1.0, 1.0), abs=1e-6)
    xs = np.array([0.1, 1.0, 5.0])
    inv = np.array([invert_closed_form(spec, x, 1.0, terms=20) for x in xs])
    assert np.allclose(inv, law.density(xs), rtol=1e-4, atol=0)
