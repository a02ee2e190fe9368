import math

import numpy as np
import pytest

from src.core.errors import DomainError, NoSupportError
from src.core.oracle import score_numeric
from src.core.process import (
    BES3Process,
    BESQGeneralProcess,
    BESQProcess,
    CEVProcess,
    CIRProcess,
    ConstantSchedule,
    GBMProcess,
    Prior,
    VEProcess,
    VPProcess,
)
from src.core.tweedie import (
    AnalyticOracle,
    DegenerateOracle,
    Integrand,
    MonteCarloOracle,
    QuadratureOracle,
    conditional_expectation_mc,
    eps_from_score,
    make_oracle,
    score_bes3,
    score_field,
    score_from_eps,
    stationary_score,
    tweedie_score,
)

COTH_1 = 1.0 / math.tanh(1.0)


def finite_difference(spec, z, t, x, h=1e-5):
    """Производная log q(t, z, ·) в точке x"""
    return (spec.log_transition_density(z, t, x + h) - spec.log_transition_density(z, t, x - h)) / (2.0 * h)


class TestPointMass:
    """При точечной массе скор равен производной логарифма плотности перехода"""

    def test_bes3_value(self):
        assert score_bes3(DegenerateOracle(1.0), 1.0, 1.0) == pytest.approx(COTH_1, rel=1e-12)
        assert tweedie_score(BES3Process(1.0), DegenerateOracle(1.0), 1.0, 1.0) == pytest.approx(COTH_1, rel=1e-12)

    @pytest.mark.parametrize('spec, z, t, x', [
        (GBMProcess(ConstantSchedule(0.1), ConstantSchedule(0.5)), 1.0, 0.8, 1.3),
        (BESQProcess(0.5), 1.0, 0.5, 2.0),
        (BESQGeneralProcess(2.0, 1.0), 1.0, 0.5, 1.4),
        (CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5)), 1.0, 0.7, 1.3),
        (CEVProcess(ConstantSchedule(0.1), ConstantSchedule(0.5), 1.5), 1.0, 0.5, 1.1),
        (BES3Process(0.7), 1.0, 0.5, 1.2),
        (VEProcess(ConstantSchedule(2.0)), 0.3, 0.4, -0.5),
        (VPProcess(ConstantSchedule(1.0)), 0.3, 0.4, 1.5),
    ])
    def test_matches_log_density_derivative(self, spec, z, t, x):
        value = tweedie_score(spec, DegenerateOracle(z), t, x)
        assert value == pytest.approx(finite_difference(spec, z, t, x), rel=1e-6, abs=1e-7)

    def test_small_time_large_argument(self):
        # √(xz)/t порядка 2e9
        spec, z, t = BESQProcess(0.5), 2e4, 1e-5
        x = z + 1.0
        value = tweedie_score(spec, DegenerateOracle(z), t, x)
        assert np.isfinite(value)
        assert value == pytest.approx(finite_difference(spec, z, t, x, h=1e-3), abs=1e-3)

    def test_vectorized_points(self):
        spec = BESQProcess(0.5)
        x = np.array([0.5, 1.0, 2.0])
        values = tweedie_score(spec, DegenerateOracle(1.0), 0.5, x)
        expected = [tweedie_score(spec, DegenerateOracle(1.0), 0.5, v) for v in x]
        np.testing.assert_allclose(values, expected, rtol=1e-14)


class TestGaussianFamilies:

    def test_ve_gaussian_prior(self):
        spec = VEProcess(ConstantSchedule(1.0))
        oracle = make_oracle(Prior.gaussian(0.5, 1.0), spec)
        assert isinstance(oracle, AnalyticOracle)
        assert tweedie_score(spec, oracle, 1.0, 2.0) == pytest.approx(-0.75, rel=1e-12)

    def test_vp_gaussian_prior(self):
        spec = VPProcess(ConstantSchedule(1.0))
        a = math.exp(-0.5)
        v = 1.0 - math.exp(-1.0)
        oracle = AnalyticOracle.from_prior(Prior.gaussian(2.0, 0.5))
        expected = (a * 2.0 - 1.0) / (a * a * 0.25 + v)
        assert tweedie_score(spec, oracle, 0.5, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_vp_stationary_prior(self):
        spec = VPProcess(ConstantSchedule(1.0))
        oracle = make_oracle(Prior.gaussian(0.0, 1.0), spec)
        assert tweedie_score(spec, oracle, 0.3, 1.7) == pytest.approx(-1.7, rel=1e-12)

    def test_quadrature_oracle_agrees_with_analytic(self):
        spec = VEProcess(ConstantSchedule(1.0))
        prior = Prior.gaussian(0.0, 1.0)
        value = QuadratureOracle(prior).expect(Integrand.IDENTITY, spec, 1.0, 0.5)
        assert value == pytest.approx(0.25, rel=1e-8)

    def test_gbm_lognormal_prior_analytic_equals_quadrature(self):
        spec = GBMProcess(ConstantSchedule(0.0), ConstantSchedule(0.5))
        prior = Prior.lognormal(0.2, 0.3)
        analytic = tweedie_score(spec, make_oracle(prior, spec), 0.6, 1.4)
        numeric = tweedie_score(spec, make_oracle(prior, spec, 'quadrature'), 0.6, 1.4)
        assert analytic == pytest.approx(numeric, rel=1e-8)


class TestNonGaussianPriors:

    def test_cir_stationary_prior(self):
        # Gamma(ν+1, 1) стационарен для σ = √(2α), скор ν/x - 1
        spec = CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5))
        oracle = make_oracle(Prior.gamma(1.5, 1.0), spec)
        assert isinstance(oracle, QuadratureOracle)
        assert tweedie_score(spec, oracle, 0.5, 1.2) == pytest.approx(0.5 / 1.2 - 1.0, rel=1e-7)
        assert stationary_score(spec)(0.5, 1.2) == pytest.approx(0.5 / 1.2 - 1.0)

    @pytest.mark.parametrize('spec', [
        BESQProcess(0.5),
        BESQGeneralProcess(2.0, 1.0),
        CEVProcess(ConstantSchedule(0.1), ConstantSchedule(0.5), 1.5),
        BES3Process(0.7),
    ], ids=lambda spec: spec.family)
    @pytest.mark.parametrize('t, x', [(0.5, 0.7), (1.0, 1.5)])
    def test_gamma_prior_matches_numeric_score(self, spec, t, x):
        prior = Prior.gamma(3.0, 2.0)
        value = tweedie_score(spec, make_oracle(prior, spec, 'quadrature'), t, x)
        assert value == pytest.approx(score_numeric(prior, spec, t, x).value, abs=1e-5)

    def test_monte_carlo_oracle(self, rng):
        spec = VEProcess(ConstantSchedule(1.0))
        oracle = make_oracle(Prior.gaussian(0.0, 1.0), spec, 'mc', rng, 100_000)
        assert isinstance(oracle, MonteCarloOracle)
        estimate = oracle.estimate(Integrand.IDENTITY, spec, 1.0, 0.5)
        assert estimate.value == pytest.approx(0.25, abs=5 * estimate.stderr + 1e-3)
        assert estimate.ess > 10_000

    def test_monte_carlo_particles_frozen(self, rng):
        oracle = MonteCarloOracle.from_prior(Prior.gamma(2.0, 1.0), 1000, rng)
        with pytest.raises(ValueError):
            oracle.particles[0] = 1.0

    def test_no_support(self):
        spec = BESQProcess(0.5)
        with pytest.raises(NoSupportError):
            conditional_expectation_mc(np.array([1.0, 2.0]), spec, Integrand.IDENTITY, 0.5, -1.0)

    def test_besq_ratio_requires_besq(self):
        with pytest.raises(DomainError):
            DegenerateOracle(1.0).expect(Integrand.BESQ_RATIO, VEProcess(ConstantSchedule(1.0)), 1.0, 1.0)


class TestOracleSelection:

    def test_auto_modes(self):
        ve = VEProcess(ConstantSchedule(1.0))
        assert isinstance(make_oracle(Prior.point_mass(1.0), ve), DegenerateOracle)
        assert isinstance(make_oracle(Prior.gaussian(0.0, 1.0), ve), AnalyticOracle)
        assert isinstance(make_oracle(Prior.gamma(2.0, 1.0), BESQProcess(0.5)), QuadratureOracle)

    def test_mc_requires_stream(self):
        with pytest.raises(DomainError):
            make_oracle(Prior.gaussian(0.0, 1.0), mode='mc')

    def test_unknown_mode(self):
        with pytest.raises(DomainError):
            make_oracle(Prior.gaussian(0.0, 1.0), mode='exact')

    def test_score_field_provenance(self, rng):
        ve = VEProcess(ConstantSchedule(1.0))
        assert score_field(ve, make_oracle(Prior.gaussian(0.0, 1.0), ve)).provenance == 'tweedie-analytic'
        assert score_field(ve, make_oracle(Prior.gaussian(0.0, 1.0), ve, 'mc', rng, 10)).provenance == 'tweedie-mc'

    def test_stationary_score_unsupported(self):
        with pytest.raises(DomainError):
            stationary_score(VEProcess(ConstantSchedule(1.0)))


class TestNoiseParameterization:

    @pytest.mark.parametrize('spec', [
        VEProcess(ConstantSchedule(1.0)),
        VPProcess(ConstantSchedule(1.0)),
        GBMProcess(ConstantSchedule(0.0), ConstantSchedule(0.5)),
        CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5)),
    ])
    def test_eps_inverts_score(self, spec):
        x = np.array([0.4, 1.0, 2.5])
        score = np.array([-1.0, 0.2, 3.0])
        eps = eps_from_score(spec, 0.7, x, score)
        np.testing.assert_allclose(score_from_eps(spec, 0.7, x, eps), score, rtol=1e-12)

    def test_unsupported_family(self):
        with pytest.raises(DomainError):
            eps_from_score(BESQProcess(0.5), 1.0, 1.0, 0.0)
