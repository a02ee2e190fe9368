"""
Формулы Твиди для гауссовских и негауссовских диффузий

Скор ∇log p(t,x) выражается через условное ожидание E(g(X_0) | X_t = x).
Ожидание поставляет оракул: аналитический (сопряжённые априорные законы),
вырожденный (точечная масса), Монте-Карло (самонормированная выборка по
значимости) или квадратурный.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Optional, Union

import numpy as np

from .config import Settings
from .errors import DomainError, NoSupportError
from .oracle import QuadratureSpec, conditional_expectation_numeric, score_numeric
from .process import (
    BES3Process,
    BESQGeneralProcess,
    BESQProcess,
    CEVProcess,
    CIRProcess,
    CoefficientSchedule,
    Conjugacy,
    ForwardProcess,
    GBMProcess,
    Prior,
    Transport,
    VEProcess,
    VPProcess,
)
from .rng import RngStream
from .special_fn import bessel_ratio, u_coth

logger = logging.getLogger('TweedieLab.Tweedie')

ArrayLike = Union[float, np.ndarray]

# Ограничение на размер матрицы весов (строки x столбцы) в одном пакете
MC_MATRIX_LIMIT = 4_000_000


class Integrand(str, Enum):
    """Функция g под условным ожиданием"""
    IDENTITY = 'identity'       # X_0: VE, VP
    LOG = 'log'                 # log X_0: GBM
    BESQ_RATIO = 'besq_ratio'   # √X_0 · I_{ν+1}/I_ν(√(x X_0)/t): BESQ, CIR, CEV
    BES3_COTH = 'bes3_coth'     # X_0 coth(x X_0/t) - x: BES(3)


def integrand(tag: Integrand, spec: ForwardProcess, t: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Возвращает g(z, x) для заданного тега"""
    tag = Integrand(tag)
    if tag == Integrand.IDENTITY:
        return lambda z, x: z + 0.0 * np.asarray(x)
    if tag == Integrand.LOG:
        return lambda z, x: np.log(z) + 0.0 * np.asarray(x)
    if tag == Integrand.BESQ_RATIO:
        if not isinstance(spec, BESQProcess):
            raise DomainError(f"Тег {tag.value} требует процесс BESQ, получен {spec.family}")
        nu = spec.nu
        return lambda z, x: np.sqrt(z) * bessel_ratio(nu, np.sqrt(x * z) / t)
    if not isinstance(spec, BES3Process):
        raise DomainError(f"Тег {tag.value} требует процесс BES(3), получен {spec.family}")
    # z coth(xz/t) = (t/x)·u coth(u), u = xz/t
    return lambda z, x: (t / x) * u_coth(x * z / t) - x


def _check_time(t: float) -> None:
    if not t > 0:
        raise DomainError(f"t должен быть положительным: {t}")


# ==========================================================================
# Самонормированная оценка по значимости
# ==========================================================================

@dataclass(frozen=True)
class McEstimate:
    value: ArrayLike
    stderr: ArrayLike
    ess: ArrayLike


def conditional_expectation_mc(prior_samples: np.ndarray, spec: ForwardProcess, tag: Integrand,
                               t: float, x: ArrayLike, batch_size: Optional[int] = None,
                               ess_warning: Optional[float] = None) -> McEstimate:
    """
    Оценка E(g(X_0) | X_t = x) по частицам из априорного распределения

    Веса w(z) = q(t, z, x) считаются в логарифмической шкале с вычитанием
    максимума. Погрешность - дельта-метод для самонормированной оценки.

    Args:
        prior_samples: частицы z_i ~ p_data
        spec: прямой процесс (задаёт плотность перехода)
        tag: функция g
        t: время
        x: точка или массив точек
        batch_size: число точек x в одном пакете
        ess_warning: порог предупреждения по эффективному размеру выборки

    Returns:
        McEstimate(value, stderr, ess)
    """
    _check_time(t)
    z = np.asarray(prior_samples, dtype=float).ravel()
    if z.size == 0:
        raise DomainError("Пустой набор частиц")
    spec.check_state(z)

    batch_size = batch_size or Settings.MC_BATCH_SIZE
    ess_warning = Settings.ESS_WARNING if ess_warning is None else ess_warning
    batch = max(1, min(batch_size, MC_MATRIX_LIMIT // z.size))

    scalar = np.ndim(x) == 0
    x_arr = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    g = integrand(tag, spec, t)

    values = np.empty_like(x_arr)
    errors = np.empty_like(x_arr)
    ess = np.empty_like(x_arr)
    for start in range(0, x_arr.size, batch):
        xb = x_arr[start:start + batch][:, None]
        log_w = np.asarray(spec.log_transition_density(z[None, :], t, xb), dtype=float)
        peak = log_w.max(axis=1, keepdims=True)
        if np.any(~np.isfinite(peak)):
            bad = xb[~np.isfinite(peak[:, 0]), 0]
            raise NoSupportError(f"Все веса равны нулю при t={t}, x={bad[:3]}")
        w = np.exp(log_w - peak)
        w /= w.sum(axis=1, keepdims=True)
        with np.errstate(invalid='ignore', divide='ignore'):
            gv = np.asarray(g(z[None, :], xb), dtype=float)
        weighted = np.where(w > 0, w * gv, 0.0)
        mean = weighted.sum(axis=1)
        resid = np.where(w > 0, w * w * (gv - mean[:, None]) ** 2, 0.0)
        values[start:start + batch] = mean
        errors[start:start + batch] = np.sqrt(resid.sum(axis=1))
        ess[start:start + batch] = 1.0 / (w * w).sum(axis=1)

    if ess.min() < ess_warning:
        logger.warning(f"⚠️ Малый эффективный размер выборки: ESS={ess.min():.1f} (t={t}, семейство {spec.family})")

    if scalar:
        return McEstimate(float(values[0]), float(errors[0]), float(ess[0]))
    shape = np.shape(x)
    return McEstimate(values.reshape(shape), errors.reshape(shape), ess.reshape(shape))


# ==========================================================================
# Оракулы условного ожидания
# ==========================================================================

class ConditionalOracle(ABC):
    """Источник условных ожиданий E(g(X_0) | X_t = x)"""

    mode: str = ''

    @abstractmethod
    def expect(self, tag: Integrand, spec: ForwardProcess, t: float, x: ArrayLike) -> ArrayLike:
        pass

    @abstractmethod
    def transported(self, transport: Transport) -> 'ConditionalOracle':
        """Оракул для образа априорного распределения под монотонным отображением"""
        pass


@dataclass(frozen=True)
class DegenerateOracle(ConditionalOracle):
    """Точечная масса в z: ожидание равно g(z)"""
    z: float

    mode = 'degenerate'

    def expect(self, tag, spec, t, x):
        g = integrand(tag, spec, t)
        value = g(np.float64(self.z), np.asarray(x, dtype=float))
        return float(value) if np.ndim(x) == 0 else np.asarray(value)

    def transported(self, transport):
        return DegenerateOracle(float(transport.forward(self.z)))


@dataclass(frozen=True)
class AnalyticOracle(ConditionalOracle):
    """Замкнутые формы для сопряжённых пар: гауссовский закон для VE/VP, логнормальный для GBM"""
    conjugacy: Conjugacy

    mode = 'analytic'

    @classmethod
    def from_prior(cls, prior: Prior) -> 'AnalyticOracle':
        if prior.conjugacy is None:
            raise DomainError(f"Распределение {prior.name} не имеет сопряжённого описания")
        return cls(prior.conjugacy)

    def expect(self, tag, spec, t, x):
        tag = Integrand(tag)
        kind, params = self.conjugacy.kind, self.conjugacy.params
        if kind == 'point_mass':
            return DegenerateOracle(params[0]).expect(tag, spec, t, x)

        x_arr = np.asarray(x, dtype=float)
        if kind == 'gaussian' and tag == Integrand.IDENTITY:
            m0, v0 = params
            if isinstance(spec, VEProcess):
                s2 = float(spec.variance(t))
                value = (m0 * s2 + x_arr * v0) / (v0 + s2)
                return float(value) if np.ndim(x) == 0 else value
            if isinstance(spec, VPProcess):
                a = float(spec.signal(t))
                v = float(spec.variance(t))
                value = m0 + a * v0 * (x_arr - a * m0) / (a * a * v0 + v)
                return float(value) if np.ndim(x) == 0 else value
        if kind == 'lognormal' and tag == Integrand.LOG and isinstance(spec, GBMProcess):
            m0, v0 = params
            s2 = float(spec.variance(t))
            c = float(spec.log_shift(t))
            value = m0 + v0 * (np.log(x_arr) - c - m0) / (v0 + s2)
            return float(value) if np.ndim(x) == 0 else value

        raise DomainError(f"Нет замкнутой формы для {kind} / {tag.value} / {spec.family}")

    def transported(self, transport):
        pushed = self.conjugacy.pushforward(transport)
        if pushed is None:
            raise DomainError(f"Сопряжённость {self.conjugacy.kind} не сохраняется при {transport.kind}")
        return AnalyticOracle(pushed)


@dataclass(frozen=True, eq=False)
class MonteCarloOracle(ConditionalOracle):
    """Частицы из априорного распределения, замороженные при создании"""
    particles: np.ndarray
    batch_size: Optional[int] = None

    mode = 'mc'

    def __post_init__(self):
        frozen = np.array(self.particles, dtype=float).ravel()
        frozen.setflags(write=False)
        object.__setattr__(self, 'particles', frozen)

    @classmethod
    def from_prior(cls, prior: Prior, n: int, rng: RngStream, batch_size: Optional[int] = None) -> 'MonteCarloOracle':
        return cls(np.asarray(prior.sample(rng, n), dtype=float), batch_size)

    def estimate(self, tag, spec, t, x) -> McEstimate:
        return conditional_expectation_mc(self.particles, spec, tag, t, x, self.batch_size)

    def expect(self, tag, spec, t, x):
        return self.estimate(tag, spec, t, x).value

    def transported(self, transport):
        return MonteCarloOracle(np.asarray(transport.forward(self.particles), dtype=float), self.batch_size)


@dataclass(frozen=True)
class QuadratureOracle(ConditionalOracle):
    """Точное (квадратурное) условное ожидание для априорного закона с плотностью"""
    prior: Prior
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    mode = 'quadrature'

    def expect(self, tag, spec, t, x):
        g = integrand(tag, spec, t)

        def one(xi: float) -> float:
            return conditional_expectation_numeric(self.prior, spec, lambda z: g(z, xi), t, xi, self.quad)

        if np.ndim(x) == 0:
            return one(float(x))
        x_arr = np.asarray(x, dtype=float)
        return np.array([one(v) for v in x_arr.ravel()]).reshape(x_arr.shape)

    def transported(self, transport):
        return QuadratureOracle(self.prior.pushforward(transport), replace(self.quad, support=None))


def make_oracle(prior: Prior, spec: Optional[ForwardProcess] = None, mode: str = 'auto',
                rng: Optional[RngStream] = None, n_particles: int = 100_000,
                quad: Optional[QuadratureSpec] = None) -> ConditionalOracle:
    """
    Выбор оракула для априорного распределения

    auto: точечная масса -> вырожденный; сопряжённая пара -> аналитический;
    иначе -> квадратурный.
    """
    if mode == 'auto':
        if prior.is_point_mass:
            return DegenerateOracle(prior.atom)
        conj = prior.conjugacy.kind if prior.conjugacy else None
        if (conj == 'gaussian' and isinstance(spec, (VEProcess, VPProcess))) or \
                (conj == 'lognormal' and isinstance(spec, GBMProcess)):
            return AnalyticOracle(prior.conjugacy)
        mode = 'quadrature'
    if mode == 'degenerate':
        if not prior.is_point_mass:
            raise DomainError("Вырожденный оракул требует точечной массы")
        return DegenerateOracle(prior.atom)
    if mode == 'analytic':
        return AnalyticOracle.from_prior(prior)
    if mode == 'mc':
        if rng is None:
            raise DomainError("Для Монте-Карло оракула нужен поток случайных чисел")
        return MonteCarloOracle.from_prior(prior, n_particles, rng)
    if mode == 'quadrature':
        if prior.is_point_mass:
            return DegenerateOracle(prior.atom)
        return QuadratureOracle(prior, quad or QuadratureSpec())
    raise DomainError(f"Неизвестный режим оракула: {mode}")


# ==========================================================================
# Формулы скора
# ==========================================================================

def score_ve(sigma: CoefficientSchedule, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """s = (E(X_0 | X_t = x) - x) / Σ²(t)"""
    _check_time(t)
    spec = VEProcess(sigma)
    posterior_mean = oracle.expect(Integrand.IDENTITY, spec, t, x)
    return (posterior_mean - x) / float(spec.variance(t))


def score_vp(alpha: CoefficientSchedule, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """s = (e^{-A(t)} E(X_0 | X_t = x) - x) / (1 - e^{-2A(t)})"""
    _check_time(t)
    spec = VPProcess(alpha)
    posterior_mean = oracle.expect(Integrand.IDENTITY, spec, t, x)
    return (float(spec.signal(t)) * posterior_mean - x) / float(spec.variance(t))


def score_gbm(mu: CoefficientSchedule, sigma: CoefficientSchedule, oracle: ConditionalOracle,
              t: float, x: ArrayLike) -> ArrayLike:
    """s = (U/Σ² - 3/2)/x - log x/(xΣ²) + E(log X_0 | X_t = x)/(xΣ²)"""
    _check_time(t)
    spec = GBMProcess(mu, sigma)
    spec.check_point(x)
    s2 = float(spec.variance(t))
    u = float(mu.antiderivative(t))
    posterior_log = oracle.expect(Integrand.LOG, spec, t, x)
    return (u / s2 - 1.5) / x - np.log(x) / (x * s2) + posterior_log / (x * s2)


def _score_besq_kernel(kernel: BESQProcess, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """s = ν/x - 1/(2t) + E(√X_0 · I_{ν+1}/I_ν(√(x X_0)/t) | X_t = x) / (2t√x)"""
    _check_time(t)
    kernel.check_point(x)
    expectation = oracle.expect(Integrand.BESQ_RATIO, kernel, t, x)
    return kernel.nu / x - 1.0 / (2.0 * t) + expectation / (2.0 * t * np.sqrt(x))


def score_besq(nu: float, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """Формула Твиди для квадрата процесса Бесселя индекса ν > 0"""
    return _score_besq_kernel(BESQProcess(nu), oracle, t, x)


def score_besq_general(mu: float, sigma: float, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """
    dX = μ dt + σ√X dW: Y = cX, c = 4/σ², - BESQ индекса 2μ/σ² - 1,
    поэтому s(t,x) = c · s_ν(t, c x) для образа априорного закона под z -> cz
    """
    spec = BESQGeneralProcess(mu, sigma)
    c = spec.scale
    return c * score_besq(spec.nu, oracle.transported(Transport.scale(c)), t, c * np.asarray(x, dtype=float)
                          if np.ndim(x) else c * x)


def score_cir(spec: CIRProcess, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """s(t,x) = e^{A(t)} s_ν^{BESQ}(τ(t), e^{A(t)} x); априорный закон не меняется (e^{A(0)} = 1)"""
    _check_time(t)
    spec.check_point(x)
    growth = math.exp(float(spec.log_scale(t)))
    tau = float(spec.time_change(t))
    return growth * _score_besq_kernel(spec.kernel, oracle, tau, growth * x)


def score_cev(spec: CEVProcess, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """
    s = -(2β-1)/x - 2(β-1) e^{2(β-1)U}/x^{2β-1} · s^{BESQ}_{1/(2(β-1))}(τ, e^{2(β-1)U} x^{-2(β-1)}),
    априорный закон переносится отображением z -> z^{-2(β-1)}
    """
    _check_time(t)
    spec.check_point(x)
    k = spec.exponent
    z = spec.to_kernel_state(x, t)
    tau = float(spec.time_change(t))
    inner = _score_besq_kernel(spec.kernel, oracle.transported(Transport.power(-k)), tau, z)
    result = -(2.0 * spec.beta - 1.0) / x - k * (z / x) * inner
    return float(result) if np.ndim(x) == 0 else result


def score_bes3(oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """s = 1/x + (1/t) E(X_0 coth(x X_0/t) - x | X_t = x)"""
    _check_time(t)
    spec = BES3Process(1.0)
    spec.check_point(x)
    return 1.0 / x + oracle.expect(Integrand.BES3_COTH, spec, t, x) / t


def score_bes3_sigma(sigma_const: float, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """X/σ - стандартный BES(3), поэтому s(t,x) = (1/σ) s(t, x/σ) для образа z -> z/σ"""
    BES3Process(sigma_const)
    inverse = 1.0 / sigma_const
    return inverse * score_bes3(oracle.transported(Transport.scale(inverse)), t, inverse * x)


_SCORE_DISPATCH: Dict[str, Callable] = {
    've': lambda spec, oracle, t, x: score_ve(spec.sigma, oracle, t, x),
    'vp': lambda spec, oracle, t, x: score_vp(spec.alpha, oracle, t, x),
    'gbm': lambda spec, oracle, t, x: score_gbm(spec.mu, spec.sigma, oracle, t, x),
    'besq': lambda spec, oracle, t, x: _score_besq_kernel(spec, oracle, t, x),
    'besq_general': lambda spec, oracle, t, x: score_besq_general(spec.mu, spec.sigma, oracle, t, x),
    'cir': score_cir,
    'cev': score_cev,
    'bes3': lambda spec, oracle, t, x: score_bes3_sigma(spec.sigma_const, oracle, t, x),
}


def tweedie_score(spec: ForwardProcess, oracle: ConditionalOracle, t: float, x: ArrayLike) -> ArrayLike:
    """Скор по формуле Твиди для любого семейства"""
    if spec.family not in _SCORE_DISPATCH:
        raise DomainError(f"Нет формулы Твиди для семейства {spec.family}")
    return _SCORE_DISPATCH[spec.family](spec, oracle, t, x)


# ==========================================================================
# Поля скора
# ==========================================================================

@dataclass(frozen=True)
class ScoreField:
    """Вычислитель (t, x) -> ∇log p(t,x) с указанием происхождения"""
    fn: Callable[[float, ArrayLike], ArrayLike]
    provenance: str
    family: str = ''

    def __call__(self, t: float, x: ArrayLike) -> ArrayLike:
        return self.fn(t, x)


_PROVENANCE = {
    'degenerate': 'tweedie-analytic',
    'analytic': 'tweedie-analytic',
    'mc': 'tweedie-mc',
    'quadrature': 'tweedie-quadrature',
}


def score_field(spec: ForwardProcess, oracle: ConditionalOracle) -> ScoreField:
    """Замыкание формулы Твиди над процессом и оракулом"""
    return ScoreField(lambda t, x: tweedie_score(spec, oracle, t, x),
                      _PROVENANCE.get(oracle.mode, 'tweedie'), spec.family)


def numeric_score_field(prior: Prior, spec: ForwardProcess, quad: Optional[QuadratureSpec] = None) -> ScoreField:
    """Скор из конечных разностей квадратурной маргинальной плотности"""
    def fn(t, x):
        if np.ndim(x) == 0:
            return score_numeric(prior, spec, t, float(x), quad=quad).value
        x_arr = np.asarray(x, dtype=float)
        return np.array([score_numeric(prior, spec, t, v, quad=quad).value for v in x_arr.ravel()]).reshape(x_arr.shape)

    return ScoreField(fn, 'finite-difference-oracle', spec.family)


def stationary_score(spec: ForwardProcess) -> ScoreField:
    """
    Скор стационарного закона, когда p_data с ним совпадает:
    VP -> -x; CIR -> ν/x - 2α/σ² (при σ = √(2α) это ν/x - 1)
    """
    if isinstance(spec, VPProcess):
        return ScoreField(lambda t, x: -x, 'stationary', spec.family)
    if isinstance(spec, CIRProcess):
        if spec.sigma is None:
            rate = 1.0
        elif spec.alpha.is_constant and spec.sigma.is_constant:
            rate = spec.stationary_rate(0.0)
        else:
            raise DomainError("Стационарный закон CIR определён только при постоянном 2α/σ²")
        nu = spec.nu
        return ScoreField(lambda t, x: nu / x - rate, 'stationary', spec.family)
    raise DomainError(f"У семейства {spec.family} нет стационарного закона")


def eps_from_score(spec: ForwardProcess, t: float, x: ArrayLike, score: ArrayLike) -> ArrayLike:
    """
    Предсказание шума по скору:
    VE/VP: ε = -Σ s; GBM: ε = -Σ(1 + x s); CIR: ε = (1 - e^{-A}) s + 1
    """
    if isinstance(spec, (VEProcess, VPProcess)):
        return -math.sqrt(float(spec.variance(t))) * score
    if isinstance(spec, GBMProcess):
        return -math.sqrt(float(spec.variance(t))) * (1.0 + x * score)
    if isinstance(spec, CIRProcess):
        return -math.expm1(-float(spec.log_scale(t))) * score + 1.0
    raise DomainError(f"Нет параметризации шума для семейства {spec.family}")


def score_from_eps(spec: ForwardProcess, t: float, x: ArrayLike, eps: ArrayLike) -> ArrayLike:
    """Обратное к eps_from_score"""
    if isinstance(spec, (VEProcess, VPProcess)):
        return -eps / math.sqrt(float(spec.variance(t)))
    if isinstance(spec, GBMProcess):
        return (-eps / math.sqrt(float(spec.variance(t))) - 1.0) / x
    if isinstance(spec, CIRProcess):
        return (eps - 1.0) / (-math.expm1(-float(spec.log_scale(t))))
    raise DomainError(f"Нет параметризации шума для семейства {spec.family}")
