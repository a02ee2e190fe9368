import math

import numpy as np
import pytest

from src.core.errors import DomainError
from src.core.oracle import (
    QuadratureSpec,
    conditional_expectation_numeric,
    lookback_drift_mc,
    lookback_identity_rhs,
    marginal_density_numeric,
    score_numeric,
)
from src.core.process import BESQProcess, ConstantSchedule, GBMProcess, Prior, VEProcess
from src.core.rng import RngStream

VE = VEProcess(ConstantSchedule(1.0))
STANDARD = Prior.gaussian(0.0, 1.0)


class TestMarginalDensity:

    def test_ve_gaussian_marginal(self):
        assert marginal_density_numeric(STANDARD, VE, 1.0, 0.0) == pytest.approx(1.0 / (2.0 * math.sqrt(math.pi)), rel=1e-10)
        assert marginal_density_numeric(STANDARD, VE, 1.0, 0.0) == pytest.approx(0.28209479, abs=1e-8)

    def test_full_output(self):
        value, error = marginal_density_numeric(STANDARD, VE, 1.0, 0.5, full_output=True)
        assert error < 1e-8 * value

    def test_point_mass_uses_transition_density(self):
        spec = BESQProcess(0.5)
        prior = Prior.point_mass(1.0)
        assert marginal_density_numeric(prior, spec, 0.5, 1.3) == pytest.approx(spec.transition_density(1.0, 0.5, 1.3))

    def test_gbm_lognormal_marginal(self):
        # log X_t ~ N(m - Σ²/2, v + Σ²) при μ = 0
        spec = GBMProcess(ConstantSchedule(0.0), ConstantSchedule(0.5))
        prior = Prior.lognormal(0.1, 0.4)
        t, x = 0.8, 1.5
        s2 = 0.25 * t
        var = 0.16 + s2
        mean = 0.1 - s2 / 2.0
        expected = math.exp(-(math.log(x) - mean) ** 2 / (2.0 * var)) / (x * math.sqrt(2.0 * math.pi * var))
        assert marginal_density_numeric(prior, spec, t, x) == pytest.approx(expected, rel=1e-9)

    def test_requires_density(self):
        with pytest.raises(DomainError):
            marginal_density_numeric(Prior.empirical(np.array([1.0, 2.0])), VE, 1.0, 0.0)


class TestNumericScore:

    def test_ve_gaussian_score(self):
        result = score_numeric(STANDARD, VE, 1.0, 1.0)
        assert result.value == pytest.approx(-0.5, abs=1e-7)
        assert result.error < 1e-6

    def test_positive_family_rejects_nonpositive_point(self):
        with pytest.raises(DomainError):
            score_numeric(Prior.gamma(2.0, 1.0), BESQProcess(0.5), 1.0, 0.0)

    def test_conditional_expectation(self):
        assert conditional_expectation_numeric(STANDARD, VE, lambda z: z, 1.0, 1.0) == pytest.approx(0.5, rel=1e-9)
        assert conditional_expectation_numeric(STANDARD, VE, lambda z: z, 1.0, 0.0) == pytest.approx(0.0, abs=1e-9)

    def test_quadrature_spec_validation(self):
        with pytest.raises(DomainError):
            QuadratureSpec(support=(1.0, 0.0))
        with pytest.raises(DomainError):
            QuadratureSpec(transform='cube')


class TestLookback:

    def test_identity_rhs(self):
        # VE из точечной массы в нуле: s = -x/t
        assert lookback_identity_rhs(VE, -0.5, 1.0, 0.5) == pytest.approx(-0.5)

    @pytest.mark.slow
    def test_reverse_drift_estimate(self):
        t, x = 1.0, 0.5
        rhs = lookback_identity_rhs(VE, -x / t, t, x)
        estimate = lookback_drift_mc(VE, Prior.point_mass(0.0), t, x, 0.01, 2_000_000, RngStream(3),
                                     shard_size=500_000, max_workers=2)
        assert estimate.count > 1000
        assert estimate.value == pytest.approx(rhs, abs=5 * estimate.stderr + 0.05)

    def test_lookback_thread_count_invariance(self):
        kwargs = dict(spec=VE, prior=STANDARD, t=1.0, x=0.0, epsilon=0.05, n=40_000, shard_size=10_000)
        one = lookback_drift_mc(rng=RngStream(9), max_workers=1, **kwargs)
        many = lookback_drift_mc(rng=RngStream(9), max_workers=4, **kwargs)
        assert one == many

    def test_invalid_epsilon(self, rng):
        with pytest.raises(DomainError):
            lookback_drift_mc(VE, STANDARD, 1.0, 0.0, 1.5, 100, rng)
