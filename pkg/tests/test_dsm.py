import numpy as np
import pandas as pd
import pytest

from src.core.dsm import (
    BasisScoreModel,
    draw_dsm_samples,
    dsm_design,
    dsm_loss,
    dsm_loss_cir,
    dsm_loss_gbm,
    dsm_loss_ve,
    empirical_dsm_loss,
    fit_basis_score,
    resolve_basis,
)
from src.core.errors import DomainError
from src.core.process import BESQProcess, CallableSchedule, CIRProcess, ConstantSchedule, GBMProcess, Prior, VEProcess, VPProcess
from src.core.rng import RngStream

VE = VEProcess(ConstantSchedule(1.0))
GBM = GBMProcess(ConstantSchedule(0.0), ConstantSchedule(0.5))
CIR = CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5))


class TestLosses:

    def test_ve_zero_model(self, rng):
        sample = draw_dsm_samples(VE, np.zeros(100), 0.5, rng)
        losses = dsm_loss_ve(lambda t, x: np.zeros_like(x), sample, VE)
        np.testing.assert_allclose(losses, 0.5 * sample.z ** 2, rtol=1e-14)

    def test_ve_forms_agree(self, rng):
        sample = draw_dsm_samples(VE, rng.standard_normal(200), 0.5, rng)
        score = lambda t, x: -x / (1.0 + t)
        eps = lambda t, x: -np.sqrt(t) * score(t, x)
        np.testing.assert_allclose(dsm_loss_ve(score, sample, VE, 'score'),
                                   dsm_loss_ve(eps, sample, VE, 'eps'), rtol=1e-12)

    def test_gbm_forms_agree(self, rng):
        sample = draw_dsm_samples(GBM, np.exp(rng.standard_normal(200)), 0.7, rng)
        std = np.sqrt(0.25 * 0.7)
        score = lambda t, x: -1.0 / x - np.log(x) / x
        eps = lambda t, x: -std * (1.0 + x * score(t, x))
        np.testing.assert_allclose(dsm_loss_gbm(score, sample, GBM, 'score'),
                                   dsm_loss_gbm(eps, sample, GBM, 'eps'), rtol=1e-10)

    def test_unknown_form(self, rng):
        sample = draw_dsm_samples(VE, np.zeros(3), 0.5, rng)
        with pytest.raises(DomainError):
            dsm_loss_ve(lambda t, x: x, sample, VE, 'velocity')

    def test_cir_requires_default_sigma(self, rng):
        spec = CIRProcess(ConstantSchedule(1.0), ConstantSchedule(1.5), ConstantSchedule(1.0))
        sample = draw_dsm_samples(spec, np.ones(10), 0.5, rng)
        with pytest.raises(DomainError):
            dsm_loss_cir(lambda t, x: x, sample, spec)

    def test_unsupported_family(self, rng):
        with pytest.raises(DomainError):
            draw_dsm_samples(BESQProcess(0.5), np.ones(3), 0.5, rng)

    def test_true_score_beats_zero(self):
        data = np.random.default_rng(0).standard_normal(5000)
        true_score = lambda t, x: -x / (1.0 + t)
        zero = lambda t, x: np.zeros_like(x)
        best, _ = empirical_dsm_loss(VE, true_score, data, 1.0, RngStream(1))
        worst, _ = empirical_dsm_loss(VE, zero, data, 1.0, RngStream(1))
        assert best < worst

    def test_standard_error_shrinks(self):
        data = np.random.default_rng(0).standard_normal(1000)
        model = lambda t, x: -x / (1.0 + t)
        _, se_small = empirical_dsm_loss(VE, model, data, 1.0, RngStream(2), n_mc=1)
        _, se_large = empirical_dsm_loss(VE, model, data, 1.0, RngStream(2), n_mc=16)
        assert se_large < se_small


class TestDesign:
    """Квадратичная форма совпадает с потерей по примерам"""

    @pytest.mark.parametrize('spec, data, names, form', [
        (VE, np.linspace(-2.0, 2.0, 300), ['one', 'x'], 'score'),
        (VPProcess(ConstantSchedule(1.0)), np.linspace(-2.0, 2.0, 300), ['one', 'x', 'x2'], 'score'),
        (GBM, np.linspace(0.2, 3.0, 300), ['inv_x', 'log_x_over_x'], 'score'),
        (CIR, np.linspace(0.2, 3.0, 300), ['inv_x', 'one', 'x'], 'score'),
    ])
    def test_design_loss_matches_per_sample_loss(self, spec, data, names, form):
        sample = draw_dsm_samples(spec, data, 0.6, RngStream(5))
        basis = resolve_basis(names)
        theta = np.linspace(-0.7, 0.4, len(names))
        model = BasisScoreModel(spec.family, basis, [0.6], theta[None, :])
        design = dsm_design(spec, basis, sample)
        assert design.loss(theta) == pytest.approx(float(dsm_loss(spec, model, sample, form).mean()), rel=1e-10)

    def test_gradient_vanishes_at_minimum(self, rng):
        sample = draw_dsm_samples(VE, rng.standard_normal(2000), 0.6, rng)
        design = dsm_design(VE, resolve_basis(['one', 'x']), sample)
        gram, rhs = design.normal_equations()
        theta = np.linalg.solve(gram, rhs)
        np.testing.assert_allclose(design.gradient(theta), 0.0, atol=1e-10)

    def test_unknown_basis(self):
        with pytest.raises(DomainError):
            resolve_basis(['x', 'sin_x'])


class TestBasisFit:

    def test_ve_gaussian_coefficient(self):
        data = np.random.default_rng(0).standard_normal(20_000)
        model = fit_basis_score(VE, data, [1.0], resolve_basis(['x']), 5, RngStream(11))
        # s = -x/(1 + Σ²), Σ² = 1
        assert model.coefficients[0, 0] == pytest.approx(-0.5, abs=0.02)

    @pytest.mark.slow
    def test_cir_stationary_coefficients(self):
        # при стационарных данных Gamma(ν+1, 1) скор равен ν/x - 1
        data = Prior.gamma(1.5, 1.0).sample(RngStream(4), 20_000)
        model = fit_basis_score(CIR, data, [0.5], resolve_basis(['inv_x', 'one']), 4, RngStream(6))
        np.testing.assert_allclose(model.coefficients[0], [0.5, -1.0], atol=0.1)

    def test_independent_of_threads_and_order(self):
        data = np.random.default_rng(1).standard_normal(2000)
        slices = [0.2, 0.5, 1.0]
        one = fit_basis_score(VE, data, slices, None, 2, RngStream(8), max_workers=1)
        many = fit_basis_score(VE, data[::-1], slices, None, 2, RngStream(8), max_workers=3)
        np.testing.assert_array_equal(one.coefficients, many.coefficients)

    def test_interpolation_is_clamped(self):
        model = BasisScoreModel('ve', resolve_basis(['x']), [0.5, 1.0], [[-2.0], [-1.0]])
        assert model.coefficients_at(0.75)[0] == pytest.approx(-1.5)
        assert model.coefficients_at(0.1)[0] == pytest.approx(-2.0)
        assert model.coefficients_at(3.0)[0] == pytest.approx(-1.0)
        assert model(0.75, 2.0) == pytest.approx(-3.0)

    def test_frame_roundtrip(self):
        model = BasisScoreModel('gbm', resolve_basis(['inv_x', 'log_x_over_x']), [0.5, 1.0],
                                [[-1.0, -0.5], [-1.0, -0.25]], np.array([0.1, 0.2]), np.array([3.0, 4.0]))
        frame = model.coefficients_frame()
        assert list(frame.columns) == ['t_slice', 'inv_x', 'log_x_over_x', 'loss', 'condition']
        restored = BasisScoreModel.from_frame(frame, 'gbm')
        np.testing.assert_array_equal(restored.coefficients, model.coefficients)
        assert restored.score_field().provenance == 'basis-fit'

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            BasisScoreModel('ve', resolve_basis(['x']), [0.5, 1.0], [[1.0, 2.0]])

    def test_cir_index_checked_up_to_last_slice(self):
        spec = CIRProcess(ConstantSchedule(1.0), CallableSchedule(lambda t: 1.5 + max(t - 1.0, 0.0)))
        with pytest.raises(DomainError):
            fit_basis_score(spec, np.ones(10), [0.5, 2.0], None, 1, RngStream(0))

    def test_rejects_nonpositive_slices(self):
        with pytest.raises(DomainError):
            fit_basis_score(VE, np.zeros(10), [0.0, 1.0], None, 1, RngStream(0))

    def test_frame_is_dataframe(self):
        model = BasisScoreModel('ve', resolve_basis(['one']), [1.0], [[0.0]])
        assert isinstance(model.coefficients_frame(), pd.DataFrame)
