import math

import numpy as np
import pytest
from scipy import integrate, stats

from src.core.errors import ConfigError, DomainError
from src.core.process import (
    PRESETS,
    AffineSchedule,
    BES3Process,
    BESQGeneralProcess,
    BESQProcess,
    CallableSchedule,
    CEVProcess,
    CIRProcess,
    ConstantSchedule,
    ExponentialSchedule,
    GBMProcess,
    Prior,
    Transport,
    VEProcess,
    VPProcess,
    forward_sample,
    get_available_families,
    noise_distribution,
    prior_from_config,
    process_from_config,
    transition_density,
)
from src.core.rng import RngStream

CIR_CONSTANT = CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5))


class TestSchedules:

    def test_affine_integrals(self):
        s = AffineSchedule(0.05, 4.95)
        assert s.antiderivative(1.0) == pytest.approx(0.05 + 4.95 / 2.0)
        assert s.square_antiderivative(1.0) == pytest.approx(
            integrate.quad(lambda u: (0.05 + 4.95 * u) ** 2, 0.0, 1.0)[0], rel=1e-12)

    def test_exponential_square_integral(self):
        s = ExponentialSchedule(1.0, 25.0)
        assert s.square_antiderivative(1.0) == pytest.approx(624.0 / (2.0 * math.log(25.0)), rel=1e-12)

    def test_callable_schedule_uses_quadrature(self):
        s = CallableSchedule(lambda u: 1.0 + u)
        assert s.antiderivative(2.0) == pytest.approx(4.0, rel=1e-12)
        np.testing.assert_allclose(s.antiderivative(np.array([0.0, 1.0])), [0.0, 1.5], rtol=1e-12)

    def test_integral_kinds(self):
        s = ConstantSchedule(2.0)
        assert s.integral(3.0, 'rate') == pytest.approx(6.0)
        assert s.integral(3.0, 'sigma') == pytest.approx(12.0)
        with pytest.raises(DomainError):
            s.integral(1.0, 'other')


class TestTransitionDensities:

    def test_gbm_density_value(self):
        spec = GBMProcess(ConstantSchedule(0.0), ConstantSchedule(1.0))
        assert transition_density(spec, 1.0, 1.0, 1.0) == pytest.approx(0.35207, abs=1e-5)

    def test_gbm_density_zero_outside_support(self):
        spec = GBMProcess(ConstantSchedule(0.0), ConstantSchedule(1.0))
        assert transition_density(spec, 1.0, 1.0, -1.0) == 0.0

    def test_besq_matches_scaled_ncx2(self):
        nu, x0, t = 0.5, 1.0, 0.5
        spec = BESQProcess(nu)
        y = np.array([0.1, 0.8, 2.5, 6.0])
        expected = stats.ncx2.pdf(y / t, 2.0 * (nu + 1.0), x0 / t) / t
        np.testing.assert_allclose(spec.transition_density(x0, t, y), expected, rtol=1e-10)

    def test_besq_from_zero_is_gamma(self):
        spec = BESQProcess(0.5)
        y = np.array([0.2, 1.0, 3.0])
        expected = stats.gamma.pdf(y, 1.5, scale=2.0 * 0.7)
        np.testing.assert_allclose(spec.transition_density(0.0, 0.7, y), expected, rtol=1e-10)

    @pytest.mark.parametrize('spec, x0, t', [
        (CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5)), 1.0, 0.7),
        (CEVProcess(ConstantSchedule(0.1), ConstantSchedule(0.5), 1.5), 1.0, 0.5),
        (BES3Process(0.7), 1.0, 0.5),
        (BESQGeneralProcess(2.0, 1.0), 1.0, 0.5),
    ])
    def test_density_normalized(self, spec, x0, t):
        lo, hi = spec.transition_support(x0, t)
        hi = min(hi, 50.0)
        mass, _ = integrate.quad(lambda y: spec.transition_density(x0, t, y), max(lo, 0.0), hi,
                                 points=[x0], limit=400)
        assert mass == pytest.approx(1.0, abs=1e-6)


class TestExactSampling:
    """Эмпирическая функция распределения выборки против квадратуры плотности перехода"""

    @pytest.mark.parametrize('spec, x0, t', [
        (VEProcess(ConstantSchedule(1.5)), 0.3, 0.6),
        (VPProcess(AffineSchedule(0.5, 1.0)), 0.3, 0.8),
        (GBMProcess(ConstantSchedule(0.1), ConstantSchedule(0.5)), 1.0, 0.8),
        (BESQProcess(0.5), 1.0, 0.5),
        (BESQGeneralProcess(2.0, 1.0), 1.0, 0.5),
        (CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5)), 1.0, 0.7),
        (CIRProcess(AffineSchedule(1.0, 0.5), ConstantSchedule(1.5)), 1.0, 0.7),
        (CEVProcess(ConstantSchedule(0.1), ConstantSchedule(0.5), 1.5), 1.0, 0.5),
        (BES3Process(0.7), 1.0, 0.5),
    ], ids=lambda value: getattr(value, 'family', str(value)))
    def test_sample_matches_density(self, spec, x0, t):
        draws = np.sort(spec.sample(x0, t, RngStream(21), 50_000))
        lo, _ = spec.transition_support(x0, t)
        lo = max(lo, 0.0) if spec.positive else max(lo, draws[0] - 10.0 * draws.std())
        grid = np.quantile(draws, np.linspace(0.02, 0.98, 25))
        pieces = [integrate.quad(lambda y: spec.transition_density(x0, t, y), a, b, limit=200)[0]
                  for a, b in zip(np.concatenate([[lo], grid[:-1]]), grid)]
        cdf = np.cumsum(pieces)
        ecdf = np.searchsorted(draws, grid, side='right') / draws.size
        # критическое значение КС при n = 50000 и уровне 1e-3: около 0.0087
        assert np.max(np.abs(ecdf - cdf)) < 0.01


class TestSampling:

    def test_cir_sample_mean(self, rng):
        spec = CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.0))
        assert spec.nu == pytest.approx(0.0)
        draws = forward_sample(spec, 2.0, 0.5, rng, 200_000)
        expected = 2.0 * math.exp(-0.5) + (1.0 - math.exp(-0.5))
        assert draws.mean() == pytest.approx(expected, abs=0.01)

    def test_ve_two_step_matches_one_step(self, rng):
        spec = VEProcess(ConstantSchedule(1.0))
        x_half = spec.sample(np.zeros(100_000), 0.5, rng)
        x_one = spec.sample_between(x_half, 0.5, 1.0, rng)
        assert x_one.var() == pytest.approx(1.0, rel=0.02)

    def test_gbm_rejects_nonpositive_state(self, rng):
        spec = GBMProcess(ConstantSchedule(0.0), ConstantSchedule(1.0))
        with pytest.raises(DomainError):
            spec.sample(0.0, 1.0, rng)

    def test_besq_admits_zero_start(self, rng):
        draws = BESQProcess(0.5).sample(0.0, 1.0, rng, 1000)
        assert np.all(draws >= 0)


class TestProcessInvariants:

    def test_besq_index_must_be_positive(self):
        with pytest.raises(DomainError):
            BESQProcess(0.0)
        assert BESQProcess(0.0, allow_zero_index=True).dof == pytest.approx(2.0)

    def test_cir_index_must_be_constant(self):
        with pytest.raises(DomainError):
            CIRProcess(AffineSchedule(1.0, 1.0), ConstantSchedule(1.0), ConstantSchedule(1.0))

    def test_cir_index_checked_on_longer_horizon(self):
        # индекс постоянен на [0, 1] и растёт после t = 1
        spec = CIRProcess(ConstantSchedule(1.0), CallableSchedule(lambda t: 1.5 + max(t - 1.0, 0.0)))
        assert spec.covering(0.5) is spec
        with pytest.raises(DomainError):
            spec.covering(2.0)
        assert CIR_CONSTANT.covering(3.0).horizon == 3.0

    def test_cir_sigma_default(self):
        spec = CIRProcess(ConstantSchedule(2.0), ConstantSchedule(1.5))
        assert spec.nu == pytest.approx(0.5)
        assert spec.time_change(1.0) == pytest.approx(0.5 * math.expm1(2.0))

    def test_besq_general_condition(self):
        with pytest.raises(DomainError):
            BESQGeneralProcess(0.4, 1.0)
        assert BESQGeneralProcess(2.0, 1.0).nu == pytest.approx(3.0)

    def test_cev_requires_beta_above_one(self):
        with pytest.raises(DomainError):
            CEVProcess(ConstantSchedule(0.0), ConstantSchedule(1.0), 1.0)

    def test_noise_distributions(self, rng):
        vp = noise_distribution(VPProcess(ConstantSchedule(1.0)), 1.0)
        assert vp.density(0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))
        cir = noise_distribution(CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5)), 1.0)
        assert cir.conjugacy.kind == 'gamma'
        assert cir.conjugacy.params == pytest.approx((1.5, 1.0))

    def test_presets(self):
        assert set(PRESETS) >= {'gbm_image', 've_image', 'cir_image', 'vp_image', 'gbm_finance', 'vp_finance'}
        assert PRESETS['cir_image'].process.nu == pytest.approx(0.0)
        assert PRESETS['gbm_finance'].n_steps == 500


class TestPriors:

    def test_pushforward_scale_density(self):
        prior = Prior.gamma(2.0, 1.0).pushforward(Transport.scale(3.0))
        assert prior.density(1.5) == pytest.approx(stats.gamma.pdf(1.5, 2.0, scale=3.0), rel=1e-12)
        assert prior.conjugacy.params == pytest.approx((2.0, 1.0 / 3.0))

    def test_pushforward_power_keeps_atom(self):
        prior = Prior.point_mass(2.0).pushforward(Transport.power(-2.0))
        assert prior.atom == pytest.approx(0.25)

    def test_prior_from_config(self):
        prior = prior_from_config({'prior.kind': 'lognormal', 'prior.mean': '0.0', 'prior.std': '0.5'})
        assert prior.conjugacy.kind == 'lognormal'
        with pytest.raises(ConfigError):
            prior_from_config({'prior.kind': 'cauchy'})

    def test_lognormal_and_gamma_draws(self):
        draws = Prior.lognormal(0.5, 0.4).sample(RngStream(11), 50_000)
        assert stats.kstest(draws, stats.lognorm(s=0.4, scale=math.exp(0.5)).cdf).statistic < 0.01
        draws = Prior.gamma(12.0, 10.0).sample(RngStream(12), 50_000)
        assert stats.kstest(draws, stats.gamma(a=12.0, scale=0.1).cdf).statistic < 0.01


class TestConfigRegistry:

    def test_families(self):
        assert set(get_available_families()) == {'ve', 'vp', 'gbm', 'besq', 'besq_general', 'cir', 'cev', 'bes3'}

    def test_from_config(self):
        spec = process_from_config({
            'process.family': 'cir',
            'process.alpha.kind': 'affine', 'process.alpha.a': '0.05', 'process.alpha.b': '4.95',
            'process.mu.kind': 'constant', 'process.mu.c': '1.0',
        })
        assert isinstance(spec, CIRProcess)
        assert spec.sigma is None
        assert process_from_config(spec.to_config()) == spec

    def test_unknown_family(self):
        with pytest.raises(ConfigError) as exc:
            process_from_config({'process.family': 'heston'})
        assert exc.value.key == 'process.family'

    def test_invalid_parameters_become_config_error(self):
        with pytest.raises(ConfigError):
            process_from_config({'process.family': 'besq', 'process.nu': '-1'})
