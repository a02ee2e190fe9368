import math

import numpy as np
import pytest
from scipy import special

from src.core.errors import DomainError
from src.core.rng import RngStream
from src.core.special_fn import (
    bessel_ratio,
    erf,
    log_bessel_i,
    log_sinh,
    sample_gamma,
    sample_lognormal,
    sample_noncentral_chi2,
    u_coth,
)

COTH_1 = 1.0 / math.tanh(1.0)


class TestBesselRatio:

    def test_half_order_closed_form(self):
        # I_{3/2}/I_{1/2} = coth x - 1/x
        assert bessel_ratio(0.5, 1.0) == pytest.approx(COTH_1 - 1.0, rel=1e-12)
        assert bessel_ratio(0.5, 1.0) == pytest.approx(0.31303529, abs=1e-8)

    def test_large_argument_branch(self):
        assert bessel_ratio(0.5, 200.0) == pytest.approx(1.0 - 1.0 / 200.0, rel=1e-12)

    def test_zero_argument(self):
        assert bessel_ratio(1.0, 0.0) == 0.0

    def test_vectorized_matches_scipy(self):
        nu = np.array([0.0, 0.5, 2.0, 7.5])
        x = np.array([0.1, 3.0, 10.0, 40.0])
        expected = special.iv(nu + 1.0, x) / special.iv(nu, x)
        np.testing.assert_allclose(bessel_ratio(nu, x), expected, rtol=1e-12)

    def test_stays_below_one(self):
        assert bessel_ratio(0.0, 1e12) < 1.0

    @pytest.mark.parametrize('nu, x', [(0.0, 2e9), (0.5, 1e10), (3.0, 1e12)])
    def test_huge_argument_is_finite(self, nu, x):
        value = bessel_ratio(nu, x)
        assert 0.0 < value < 1.0
        assert value == pytest.approx(1.0 - (2.0 * nu + 1.0) / (2.0 * x), rel=1e-15)

    def test_mixed_branches(self):
        x = np.array([1.0, 500.0, 1e12])
        expected = [COTH_1 - 1.0, 1.0 / math.tanh(500.0) - 1.0 / 500.0, 1.0 - 1e-12]
        np.testing.assert_allclose(bessel_ratio(0.5, x), expected, rtol=1e-12)

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            bessel_ratio(0.5, float('nan'))


class TestLogBessel:

    def test_half_order_closed_form(self):
        expected = 0.5 * math.log(2.0 / math.pi) + math.log(math.sinh(1.0))
        assert log_bessel_i(0.5, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_large_argument_no_overflow(self):
        x = 1000.0
        expected = x - math.log(2.0) + 0.5 * math.log(2.0 / (math.pi * x))
        assert log_bessel_i(0.5, x) == pytest.approx(expected, rel=1e-12)

    def test_huge_argument(self):
        x = 1e10
        expected = x - 0.5 * math.log(2.0 * math.pi * x)
        assert log_bessel_i(0.5, x) == pytest.approx(expected, rel=1e-15)
        assert np.isfinite(log_bessel_i(2.0, x))

    def test_small_argument_series(self):
        x = 1e-3
        expected = 100.0 * math.log(x / 2.0) - special.gammaln(101.0)
        assert log_bessel_i(100.0, x) == pytest.approx(expected, rel=1e-10)

    def test_zero_argument(self):
        assert log_bessel_i(0.0, 0.0) == 0.0
        assert log_bessel_i(1.5, 0.0) == -math.inf

    def test_negative_argument(self):
        with pytest.raises(DomainError):
            log_bessel_i(0.5, -1.0)


class TestElementary:

    def test_erf(self):
        assert erf(1.0) == pytest.approx(0.8427007929, abs=1e-10)
        assert erf(-1.0) == pytest.approx(-0.8427007929, abs=1e-10)

    def test_u_coth(self):
        assert u_coth(0.0) == 1.0
        assert u_coth(1e-6) == pytest.approx(1.0, abs=1e-12)
        assert u_coth(1.0) == pytest.approx(COTH_1, rel=1e-14)

    def test_log_sinh(self):
        assert log_sinh(1.0) == pytest.approx(math.log(math.sinh(1.0)), rel=1e-14)
        assert log_sinh(800.0) == pytest.approx(800.0 - math.log(2.0), rel=1e-14)


class TestSamplers:

    def test_noncentral_chi2_moments(self, rng):
        draws = sample_noncentral_chi2(3.0, 2.0, rng, 200_000)
        assert draws.mean() == pytest.approx(5.0, abs=0.05)
        assert draws.var() == pytest.approx(14.0, rel=0.05)

    def test_noncentral_chi2_fractional_dof(self, rng):
        draws = sample_noncentral_chi2(1.3, 0.0, rng, 100_000)
        assert draws.mean() == pytest.approx(1.3, abs=0.03)
        assert np.all(draws >= 0)

    def test_same_seed_same_draws(self):
        a = sample_noncentral_chi2(3.0, np.array([0.5, 1.0, 4.0]), RngStream(7))
        b = sample_noncentral_chi2(3.0, np.array([0.5, 1.0, 4.0]), RngStream(7))
        np.testing.assert_array_equal(a, b)

    def test_gamma_rate_parameterization(self, rng):
        draws = sample_gamma(12.0, 10.0, rng, 100_000)
        assert draws.mean() == pytest.approx(1.2, abs=0.01)

    def test_lognormal_log_moments(self, rng):
        logs = np.log(sample_lognormal(0.3, 0.25, rng, 100_000))
        assert logs.mean() == pytest.approx(0.3, abs=0.01)
        assert logs.var() == pytest.approx(0.25, rel=0.03)

    def test_lognormal_broadcasts_parameters(self, rng):
        draws = sample_lognormal(np.array([0.0, 1.0, 2.0]), 0.1, rng)
        assert draws.shape == (3,)
        assert np.all(draws > 0)

    def test_invalid_parameters(self, rng):
        with pytest.raises(DomainError):
            sample_noncentral_chi2(0.0, 1.0, rng)
        with pytest.raises(DomainError):
            sample_noncentral_chi2(3.0, -1.0, rng)
        with pytest.raises(DomainError):
            sample_lognormal(0.0, 0.0, rng)
