"""
Расписания коэффициентов, априорные распределения и семейства прямых процессов

Семейства: VE, VP, GBM, BESQ (канонический и общий), CIR, CEV, BES(3).
Для каждого доступны точная выборка перехода (без дискретизации по времени),
плотность перехода в логарифмической шкале и распределение шума для
инициализации обратного процесса.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Type, Union

import numpy as np
from scipy import integrate, special, stats

from .errors import ConfigError, DomainError
from .rng import RngStream
from .special_fn import log_bessel_i, log_sinh, sample_gamma, sample_lognormal, sample_noncentral_chi2

logger = logging.getLogger('TweedieLab.Process')

ArrayLike = Union[float, np.ndarray]
Size = Optional[Union[int, Tuple[int, ...]]]

# Число точек сетки для проверки постоянства индекса CIR
CIR_INDEX_GRID = 64
CIR_INDEX_RTOL = 1e-8
# Хвост эффективного носителя априорных распределений
SUPPORT_TAIL = 1e-15


# ==========================================================================
# Вспомогательные функции
# ==========================================================================

def _map_scalar(fn: Callable[[float], float], t: ArrayLike) -> ArrayLike:
    if np.ndim(t) == 0:
        return float(fn(float(t)))
    arr = np.asarray(t, dtype=float)
    return np.array([fn(v) for v in arr.ravel()]).reshape(arr.shape)


def _quad_from_zero(fn: Callable[[float], float], t: ArrayLike) -> ArrayLike:
    """Адаптивная квадратура от 0 до t"""
    def one(upper: float) -> float:
        if upper == 0.0:
            return 0.0
        value, _ = integrate.quad(fn, 0.0, upper, epsabs=0.0, epsrel=1e-13, limit=200)
        return value
    return _map_scalar(one, t)


def _out(value: np.ndarray, like: Any) -> ArrayLike:
    return float(value) if np.ndim(like) == 0 else value


def _out_pair(value: np.ndarray, a: Any, b: Any) -> ArrayLike:
    return float(value) if np.ndim(a) == 0 and np.ndim(b) == 0 else value


def _size(x0: ArrayLike, size: Size) -> Size:
    if size is not None:
        return size
    return None if np.ndim(x0) == 0 else np.shape(x0)


def _check_time(t: ArrayLike, name: str = 't') -> None:
    if np.any(~(np.asarray(t, dtype=float) > 0)):
        raise DomainError(f"{name} должен быть положительным: {t}")


def _get_str(values: Mapping[str, Optional[str]], key: str, default: Optional[str] = None) -> str:
    raw = values.get(key)
    if raw is None or str(raw).strip() == '':
        if default is not None:
            return default
        raise ConfigError(key, "отсутствует обязательный параметр")
    return str(raw).strip()


def _get_float(values: Mapping[str, Optional[str]], key: str, default: Optional[float] = None) -> float:
    raw = values.get(key)
    if raw is None or str(raw).strip() == '':
        if default is not None:
            return default
        raise ConfigError(key, "отсутствует обязательный параметр")
    try:
        return float(str(raw).strip())
    except ValueError:
        raise ConfigError(key, f"ожидалось число, получено '{raw}'")


def _fmt(value: float) -> str:
    return repr(float(value))


# ==========================================================================
# Расписания коэффициентов
# ==========================================================================

class CoefficientSchedule(ABC):
    """
    Зависящий от времени коэффициент f(t) с точными интегралами

    antiderivative(t) = ∫₀ᵗ f(s) ds (для A(t), U(t)),
    square_antiderivative(t) = ∫₀ᵗ f(s)² ds (для Σ²(t)).
    """

    kind: str = ''

    @abstractmethod
    def value(self, t: ArrayLike) -> ArrayLike:
        pass

    def antiderivative(self, t: ArrayLike) -> ArrayLike:
        return _quad_from_zero(self.value, t)

    def square_antiderivative(self, t: ArrayLike) -> ArrayLike:
        return _quad_from_zero(lambda s: self.value(s) ** 2, t)

    def integral(self, t: ArrayLike, kind: str = 'rate') -> ArrayLike:
        """Бегущий интеграл: 'sigma' интегрирует f², 'rate' интегрирует f"""
        if kind == 'sigma':
            return self.square_antiderivative(t)
        if kind == 'rate':
            return self.antiderivative(t)
        raise DomainError(f"Неизвестный вид интеграла: {kind}")

    @property
    def is_constant(self) -> bool:
        return False

    def to_config(self, prefix: str) -> Dict[str, str]:
        raise ConfigError(prefix, f"расписание {type(self).__name__} не сериализуется")

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return self.value(t)


@dataclass(frozen=True)
class ConstantSchedule(CoefficientSchedule):
    c: float

    kind = 'constant'

    def value(self, t):
        return _out(np.full(np.shape(t), float(self.c)), t)

    def antiderivative(self, t):
        return _out(self.c * np.asarray(t, dtype=float), t)

    def square_antiderivative(self, t):
        return _out(self.c ** 2 * np.asarray(t, dtype=float), t)

    @property
    def is_constant(self) -> bool:
        return True

    def to_config(self, prefix: str) -> Dict[str, str]:
        return {f'{prefix}.kind': self.kind, f'{prefix}.c': _fmt(self.c)}


@dataclass(frozen=True)
class AffineSchedule(CoefficientSchedule):
    """f(t) = a + b t"""
    a: float
    b: float

    kind = 'affine'

    def value(self, t):
        return _out(self.a + self.b * np.asarray(t, dtype=float), t)

    def antiderivative(self, t):
        tt = np.asarray(t, dtype=float)
        return _out(self.a * tt + 0.5 * self.b * tt ** 2, t)

    def square_antiderivative(self, t):
        tt = np.asarray(t, dtype=float)
        return _out(self.a ** 2 * tt + self.a * self.b * tt ** 2 + self.b ** 2 * tt ** 3 / 3.0, t)

    def to_config(self, prefix: str) -> Dict[str, str]:
        return {f'{prefix}.kind': self.kind, f'{prefix}.a': _fmt(self.a), f'{prefix}.b': _fmt(self.b)}


@dataclass(frozen=True)
class PowerSchedule(CoefficientSchedule):
    """f(t) = a + b t^p"""
    a: float
    b: float
    p: float

    kind = 'power'

    def __post_init__(self):
        if not self.p > 0:
            raise DomainError(f"Показатель степени должен быть положительным: {self.p}")

    def value(self, t):
        return _out(self.a + self.b * np.asarray(t, dtype=float) ** self.p, t)

    def antiderivative(self, t):
        tt = np.asarray(t, dtype=float)
        return _out(self.a * tt + self.b * tt ** (self.p + 1) / (self.p + 1), t)

    def square_antiderivative(self, t):
        tt = np.asarray(t, dtype=float)
        p = self.p
        value = (self.a ** 2 * tt
                 + 2 * self.a * self.b * tt ** (p + 1) / (p + 1)
                 + self.b ** 2 * tt ** (2 * p + 1) / (2 * p + 1))
        return _out(value, t)

    def to_config(self, prefix: str) -> Dict[str, str]:
        return {f'{prefix}.kind': self.kind, f'{prefix}.a': _fmt(self.a),
                f'{prefix}.b': _fmt(self.b), f'{prefix}.p': _fmt(self.p)}


@dataclass(frozen=True)
class ExponentialSchedule(CoefficientSchedule):
    """f(t) = a b^t"""
    a: float
    b: float

    kind = 'exponential'

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError(f"Основание экспоненты должно быть положительным: {self.b}")

    def value(self, t):
        return _out(self.a * self.b ** np.asarray(t, dtype=float), t)

    def antiderivative(self, t):
        tt = np.asarray(t, dtype=float)
        if self.b == 1.0:
            return _out(self.a * tt, t)
        log_b = math.log(self.b)
        return _out(self.a * np.expm1(tt * log_b) / log_b, t)

    def square_antiderivative(self, t):
        tt = np.asarray(t, dtype=float)
        if self.b == 1.0:
            return _out(self.a ** 2 * tt, t)
        log_b = math.log(self.b)
        return _out(self.a ** 2 * np.expm1(2.0 * tt * log_b) / (2.0 * log_b), t)

    def to_config(self, prefix: str) -> Dict[str, str]:
        return {f'{prefix}.kind': self.kind, f'{prefix}.a': _fmt(self.a), f'{prefix}.b': _fmt(self.b)}


@dataclass(frozen=True)
class ScaledSquareSchedule(CoefficientSchedule):
    """f(t) = scale * g(t)² + shift, например mu(t) = sigma(t)²/2"""
    base: CoefficientSchedule
    scale: float = 0.5
    shift: float = 0.0

    kind = 'scaled_square'

    def value(self, t):
        return _out(self.scale * np.asarray(self.base.value(t)) ** 2 + self.shift, t)

    def antiderivative(self, t):
        return _out(self.scale * np.asarray(self.base.square_antiderivative(t))
                    + self.shift * np.asarray(t, dtype=float), t)

    @property
    def is_constant(self) -> bool:
        return self.base.is_constant

    def to_config(self, prefix: str) -> Dict[str, str]:
        values = {f'{prefix}.kind': self.kind, f'{prefix}.scale': _fmt(self.scale),
                  f'{prefix}.shift': _fmt(self.shift)}
        values.update(self.base.to_config(f'{prefix}.base'))
        return values


@dataclass(frozen=True)
class CallableSchedule(CoefficientSchedule):
    """Произвольное расписание; интегралы считаются квадратурой"""
    fn: Callable[[float], float]
    label: str = 'callable'

    kind = 'callable'

    def value(self, t):
        return _map_scalar(self.fn, t)


SCHEDULE_REGISTRY: Dict[str, Type[CoefficientSchedule]] = {
    'constant': ConstantSchedule,
    'affine': AffineSchedule,
    'power': PowerSchedule,
    'exponential': ExponentialSchedule,
    'scaled_square': ScaledSquareSchedule,
}


def schedule_from_config(values: Mapping[str, Optional[str]], prefix: str) -> CoefficientSchedule:
    """Восстанавливает расписание из плоского словаря ключ-значение"""
    kind = _get_str(values, f'{prefix}.kind')
    if kind == 'constant':
        return ConstantSchedule(_get_float(values, f'{prefix}.c'))
    if kind == 'affine':
        return AffineSchedule(_get_float(values, f'{prefix}.a'), _get_float(values, f'{prefix}.b'))
    if kind == 'power':
        return PowerSchedule(_get_float(values, f'{prefix}.a'), _get_float(values, f'{prefix}.b'),
                             _get_float(values, f'{prefix}.p'))
    if kind == 'exponential':
        return ExponentialSchedule(_get_float(values, f'{prefix}.a'), _get_float(values, f'{prefix}.b'))
    if kind == 'scaled_square':
        return ScaledSquareSchedule(schedule_from_config(values, f'{prefix}.base'),
                                    _get_float(values, f'{prefix}.scale', 0.5),
                                    _get_float(values, f'{prefix}.shift', 0.0))
    raise ConfigError(f'{prefix}.kind', f"неизвестный вид расписания '{kind}', доступны: {list(SCHEDULE_REGISTRY)}")


# ==========================================================================
# Монотонные преобразования и априорные распределения
# ==========================================================================

@dataclass(frozen=True)
class Transport:
    """Монотонное отображение y = T(z): масштаб c·z или степень z^p"""
    kind: str
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in ('identity', 'scale', 'power'):
            raise DomainError(f"Неизвестное преобразование: {self.kind}")
        if self.kind == 'scale' and not self.param > 0:
            raise DomainError(f"Масштаб должен быть положительным: {self.param}")
        if self.kind == 'power' and self.param == 0:
            raise DomainError("Показатель степени не может быть нулевым")

    @classmethod
    def identity(cls) -> 'Transport':
        return cls('identity')

    @classmethod
    def scale(cls, c: float) -> 'Transport':
        return cls('scale', float(c))

    @classmethod
    def power(cls, p: float) -> 'Transport':
        return cls('power', float(p))

    @property
    def increasing(self) -> bool:
        return not (self.kind == 'power' and self.param < 0)

    def forward(self, z: ArrayLike) -> ArrayLike:
        if self.kind == 'scale':
            return self.param * np.asarray(z, dtype=float) if np.ndim(z) else self.param * float(z)
        if self.kind == 'power':
            with np.errstate(divide='ignore'):
                return np.power(z, self.param)
        return z

    def inverse(self, y: ArrayLike) -> ArrayLike:
        if self.kind == 'scale':
            return np.asarray(y, dtype=float) / self.param if np.ndim(y) else float(y) / self.param
        if self.kind == 'power':
            with np.errstate(divide='ignore'):
                return np.power(y, 1.0 / self.param)
        return y

    def log_abs_inverse_jacobian(self, y: ArrayLike) -> ArrayLike:
        if self.kind == 'scale':
            return -math.log(self.param) + 0.0 * np.asarray(y, dtype=float)
        if self.kind == 'power':
            with np.errstate(divide='ignore'):
                return -math.log(abs(self.param)) + (1.0 / self.param - 1.0) * np.log(y)
        return 0.0 * np.asarray(y, dtype=float)


@dataclass(frozen=True)
class Conjugacy:
    """Дескриптор сопряжённости: point_mass(z), gaussian(m, v), lognormal(m, v), gamma(shape, rate)"""
    kind: str
    params: Tuple[float, ...]

    def pushforward(self, transport: Transport) -> Optional['Conjugacy']:
        if transport.kind == 'identity':
            return self
        if self.kind == 'point_mass':
            return Conjugacy('point_mass', (float(transport.forward(self.params[0])),))
        c = transport.param
        if self.kind == 'gaussian' and transport.kind == 'scale':
            return Conjugacy('gaussian', (c * self.params[0], c * c * self.params[1]))
        if self.kind == 'lognormal':
            if transport.kind == 'scale':
                return Conjugacy('lognormal', (self.params[0] + math.log(c), self.params[1]))
            return Conjugacy('lognormal', (c * self.params[0], c * c * self.params[1]))
        if self.kind == 'gamma' and transport.kind == 'scale':
            return Conjugacy('gamma', (self.params[0], self.params[1] / c))
        return None


@dataclass(frozen=True)
class Prior:
    """
    Распределение данных p_data

    sampler(rng, size) даёт выборку; log_density (если есть) нормирована;
    support - эффективный носитель (квантили 1e-15 для непрерывных законов);
    atom - значение точечной массы.
    """
    name: str
    sampler: Callable[[RngStream, Size], ArrayLike]
    log_density: Optional[Callable[[ArrayLike], ArrayLike]] = None
    conjugacy: Optional[Conjugacy] = None
    support: Tuple[float, float] = (-np.inf, np.inf)
    atom: Optional[float] = None

    def sample(self, rng: RngStream, size: Size = None) -> ArrayLike:
        return self.sampler(rng, size)

    def density(self, z: ArrayLike) -> ArrayLike:
        if self.log_density is None:
            raise DomainError(f"У распределения {self.name} нет плотности")
        return np.exp(self.log_density(z))

    @property
    def is_point_mass(self) -> bool:
        return self.atom is not None

    @classmethod
    def point_mass(cls, z: float) -> 'Prior':
        z = float(z)

        def sampler(rng, size=None):
            return z if size is None else np.full(size, z)

        return cls(f'point_mass({z})', sampler, None, Conjugacy('point_mass', (z,)), (z, z), z)

    @classmethod
    def from_distribution(cls, dist, name: str, conjugacy: Optional[Conjugacy] = None,
                          sampler: Optional[Callable[[RngStream, Size], ArrayLike]] = None) -> 'Prior':
        """Обёртка замороженного распределения scipy.stats"""
        if sampler is None:
            def sampler(rng, size=None):
                return dist.rvs(size=size, random_state=rng.generator)

        support = (float(dist.ppf(SUPPORT_TAIL)), float(dist.isf(SUPPORT_TAIL)))
        return cls(name, sampler, dist.logpdf, conjugacy, support)

    @classmethod
    def gaussian(cls, mean: float, std: float) -> 'Prior':
        if not std > 0:
            raise DomainError(f"Стандартное отклонение должно быть положительным: {std}")
        return cls.from_distribution(stats.norm(loc=mean, scale=std), f'gaussian({mean}, {std})',
                                     Conjugacy('gaussian', (float(mean), float(std) ** 2)))

    @classmethod
    def lognormal(cls, mean_log: float, std_log: float) -> 'Prior':
        if not std_log > 0:
            raise DomainError(f"Стандартное отклонение логарифма должно быть положительным: {std_log}")
        return cls.from_distribution(stats.lognorm(s=std_log, scale=math.exp(mean_log)),
                                     f'lognormal({mean_log}, {std_log})',
                                     Conjugacy('lognormal', (float(mean_log), float(std_log) ** 2)),
                                     lambda rng, size=None: sample_lognormal(mean_log, std_log ** 2, rng, size))

    @classmethod
    def gamma(cls, shape: float, rate: float) -> 'Prior':
        if not (shape > 0 and rate > 0):
            raise DomainError(f"Параметры гамма-распределения должны быть положительными: {shape}, {rate}")
        return cls.from_distribution(stats.gamma(a=shape, scale=1.0 / rate), f'gamma({shape}, {rate})',
                                     Conjugacy('gamma', (float(shape), float(rate))),
                                     lambda rng, size=None: sample_gamma(shape, rate, rng, size))

    @classmethod
    def exponential(cls, rate: float) -> 'Prior':
        prior = cls.gamma(1.0, rate)
        return Prior(f'exponential({rate})', prior.sampler, prior.log_density,
                     prior.conjugacy, prior.support)

    @classmethod
    def empirical(cls, samples: np.ndarray) -> 'Prior':
        """Эмпирическое распределение без плотности; выборка с возвращением"""
        data = np.sort(np.asarray(samples, dtype=float))
        if data.size == 0:
            raise DomainError("Пустая выборка")

        def sampler(rng, size=None):
            return rng.generator.choice(data, size=size, replace=True)

        return cls(f'empirical(n={data.size})', sampler, None, None, (float(data[0]), float(data[-1])))

    @classmethod
    def transition_law(cls, spec: 'ForwardProcess', reference: float, T: float) -> 'Prior':
        """Закон перехода из опорной точки за время T"""
        def sampler(rng, size=None):
            return spec.sample(reference, T, rng, size)

        def log_density(y):
            return spec.log_transition_density(reference, T, y)

        return cls(f'{spec.family}_transition({reference}, {T})', sampler, log_density, None,
                   spec.transition_support(reference, T))

    def pushforward(self, transport: Transport) -> 'Prior':
        """Образ распределения под монотонным отображением"""
        if transport.kind == 'identity':
            return self

        def sampler(rng, size=None):
            return transport.forward(self.sampler(rng, size))

        log_density = None
        if self.log_density is not None:
            base_log_density = self.log_density

            def log_density(y):
                return base_log_density(transport.inverse(y)) + transport.log_abs_inverse_jacobian(y)

        ends = sorted(float(transport.forward(v)) for v in self.support)
        atom = None if self.atom is None else float(transport.forward(self.atom))
        conjugacy = None if self.conjugacy is None else self.conjugacy.pushforward(transport)
        return Prior(f'{self.name}|{transport.kind}({transport.param})', sampler, log_density,
                     conjugacy, (ends[0], ends[1]), atom)


def prior_from_config(values: Mapping[str, Optional[str]], prefix: str = 'prior') -> Prior:
    """Априорное распределение из конфигурации: point_mass, gaussian, lognormal, gamma, exponential"""
    kind = _get_str(values, f'{prefix}.kind')
    if kind == 'point_mass':
        return Prior.point_mass(_get_float(values, f'{prefix}.value'))
    if kind == 'gaussian':
        return Prior.gaussian(_get_float(values, f'{prefix}.mean'), _get_float(values, f'{prefix}.std'))
    if kind == 'lognormal':
        return Prior.lognormal(_get_float(values, f'{prefix}.mean'), _get_float(values, f'{prefix}.std'))
    if kind == 'gamma':
        return Prior.gamma(_get_float(values, f'{prefix}.shape'), _get_float(values, f'{prefix}.rate'))
    if kind == 'exponential':
        return Prior.exponential(_get_float(values, f'{prefix}.rate'))
    raise ConfigError(f'{prefix}.kind', f"неизвестное распределение '{kind}'")


# ==========================================================================
# Прямые процессы
# ==========================================================================

class ForwardProcess(ABC):
    """Базовый класс семейства прямых процессов dX = b(t,X)dt + σ(t,X)dW"""

    family: str = ''
    positive: bool = True
    admits_zero: bool = False

    def check_state(self, x0: ArrayLike) -> None:
        """Проверка начального состояния"""
        arr = np.asarray(x0, dtype=float)
        if np.any(np.isnan(arr)):
            raise DomainError("Начальное состояние содержит NaN")
        if not self.positive:
            return
        if self.admits_zero:
            if np.any(arr < 0):
                raise DomainError(f"{self.family}: начальное состояние должно быть неотрицательным")
        elif np.any(arr <= 0):
            raise DomainError(f"{self.family}: начальное состояние должно быть положительным")

    def check_point(self, x: ArrayLike) -> None:
        """Проверка точки внутри открытого пространства состояний"""
        if self.positive and np.any(~(np.asarray(x, dtype=float) > 0)):
            raise DomainError(f"{self.family}: x должен быть положительным")

    @abstractmethod
    def drift(self, t: float, x: ArrayLike) -> ArrayLike:
        pass

    @abstractmethod
    def diffusion_sq(self, t: float, x: ArrayLike) -> ArrayLike:
        """a(t,x) = σ(t,x)²"""
        pass

    @abstractmethod
    def diffusion_sq_divergence(self, t: float, x: ArrayLike) -> ArrayLike:
        """∂ₓa(t,x)"""
        pass

    def diffusion(self, t: float, x: ArrayLike) -> ArrayLike:
        return np.sqrt(self.diffusion_sq(t, x))

    @abstractmethod
    def sample(self, x0: ArrayLike, t: float, rng: RngStream, size: Size = None) -> ArrayLike:
        """Точная выборка X_t при X_0 = x0"""
        pass

    @abstractmethod
    def sample_between(self, x_s: ArrayLike, s: float, t: float, rng: RngStream) -> ArrayLike:
        """Точная выборка X_t при X_s = x_s, s < t"""
        pass

    @abstractmethod
    def log_transition_density(self, x0: ArrayLike, t: float, x: ArrayLike) -> ArrayLike:
        pass

    def transition_density(self, x0: ArrayLike, t: float, x: ArrayLike) -> ArrayLike:
        return np.exp(self.log_transition_density(x0, t, x))

    @abstractmethod
    def noise_distribution(self, T: float, reference: float = 1.0) -> Prior:
        pass

    @abstractmethod
    def transition_support(self, x0: float, t: float) -> Tuple[float, float]:
        """Эффективный носитель закона перехода для квадратур"""
        pass

    @abstractmethod
    def to_config(self, prefix: str = 'process') -> Dict[str, str]:
        pass

    def _check_interval(self, s: float, t: float) -> None:
        if not (0 <= s < t):
            raise DomainError(f"Требуется 0 <= s < t, получено s={s}, t={t}")


def _gaussian_log_density(mean, var, x):
    return -0.5 * np.log(2.0 * np.pi * var) - (x - mean) ** 2 / (2.0 * var)


@dataclass(frozen=True)
class VEProcess(ForwardProcess):
    """dX = σ(t) dW"""
    sigma: CoefficientSchedule

    family = 've'
    positive = False

    def variance(self, t):
        return self.sigma.square_antiderivative(t)

    def drift(self, t, x):
        return _out(np.zeros_like(np.asarray(x, dtype=float)), x)

    def diffusion_sq(self, t, x):
        return _out(self.sigma.value(t) ** 2 + np.zeros_like(np.asarray(x, dtype=float)), x)

    def diffusion_sq_divergence(self, t, x):
        return _out(np.zeros_like(np.asarray(x, dtype=float)), x)

    def sample(self, x0, t, rng, size=None):
        _check_time(t)
        return x0 + math.sqrt(self.variance(t)) * rng.standard_normal(_size(x0, size))

    def sample_between(self, x_s, s, t, rng):
        self._check_interval(s, t)
        std = math.sqrt(self.variance(t) - self.variance(s))
        return x_s + std * rng.standard_normal(_size(x_s, None))

    def log_transition_density(self, x0, t, x):
        _check_time(t)
        return _gaussian_log_density(x0, self.variance(t), x)

    def noise_distribution(self, T, reference=1.0):
        _check_time(T, 'T')
        return Prior.gaussian(0.0, math.sqrt(self.variance(T)))

    def transition_support(self, x0, t):
        sd = math.sqrt(self.variance(t))
        return x0 - 40.0 * sd, x0 + 40.0 * sd

    def to_config(self, prefix='process'):
        values = {f'{prefix}.family': self.family}
        values.update(self.sigma.to_config(f'{prefix}.sigma'))
        return values

    @classmethod
    def from_config(cls, values, prefix='process'):
        return cls(schedule_from_config(values, f'{prefix}.sigma'))


@dataclass(frozen=True)
class VPProcess(ForwardProcess):
    """dX = -α(t) X dt + √(2α(t)) dW"""
    alpha: CoefficientSchedule

    family = 'vp'
    positive = False

    def signal(self, t):
        """e^{-A(t)}"""
        return np.exp(-np.asarray(self.alpha.antiderivative(t)))

    def variance(self, t):
        """1 - e^{-2A(t)}"""
        return -np.expm1(-2.0 * np.asarray(self.alpha.antiderivative(t)))

    def drift(self, t, x):
        return -self.alpha.value(t) * x

    def diffusion_sq(self, t, x):
        return _out(2.0 * self.alpha.value(t) + np.zeros_like(np.asarray(x, dtype=float)), x)

    def diffusion_sq_divergence(self, t, x):
        return _out(np.zeros_like(np.asarray(x, dtype=float)), x)

    def sample(self, x0, t, rng, size=None):
        _check_time(t)
        return float(self.signal(t)) * np.asarray(x0) + math.sqrt(self.variance(t)) * rng.standard_normal(_size(x0, size))

    def sample_between(self, x_s, s, t, rng):
        self._check_interval(s, t)
        delta = float(self.alpha.antiderivative(t)) - float(self.alpha.antiderivative(s))
        return math.exp(-delta) * np.asarray(x_s) + math.sqrt(-math.expm1(-2.0 * delta)) * rng.standard_normal(_size(x_s, None))

    def log_transition_density(self, x0, t, x):
        _check_time(t)
        return _gaussian_log_density(float(self.signal(t)) * np.asarray(x0), self.variance(t), x)

    def noise_distribution(self, T, reference=1.0):
        _check_time(T, 'T')
        return Prior.gaussian(0.0, 1.0)

    def transition_support(self, x0, t):
        mean = float(self.signal(t)) * x0
        sd = math.sqrt(self.variance(t))
        return mean - 40.0 * sd, mean + 40.0 * sd

    def to_config(self, prefix='process'):
        values = {f'{prefix}.family': self.family}
        values.update(self.alpha.to_config(f'{prefix}.alpha'))
        return values

    @classmethod
    def from_config(cls, values, prefix='process'):
        return cls(schedule_from_config(values, f'{prefix}.alpha'))


@dataclass(frozen=True)
class GBMProcess(ForwardProcess):
    """dX = μ(t) X dt + σ(t) X dW"""
    mu: CoefficientSchedule
    sigma: CoefficientSchedule

    family = 'gbm'

    def variance(self, t):
        """Σ²(t)"""
        return self.sigma.square_antiderivative(t)

    def log_shift(self, t):
        """U(t) - Σ²(t)/2"""
        return self.mu.antiderivative(t) - 0.5 * self.sigma.square_antiderivative(t)

    def drift(self, t, x):
        return self.mu.value(t) * x

    def diffusion_sq(self, t, x):
        return self.sigma.value(t) ** 2 * x * x

    def diffusion_sq_divergence(self, t, x):
        return 2.0 * self.sigma.value(t) ** 2 * x

    def sample(self, x0, t, rng, size=None):
        _check_time(t)
        self.check_state(x0)
        return x0 * np.exp(self.log_shift(t) + math.sqrt(self.variance(t)) * rng.standard_normal(_size(x0, size)))

    def sample_between(self, x_s, s, t, rng):
        self._check_interval(s, t)
        shift = float(self.log_shift(t)) - float(self.log_shift(s))
        std = math.sqrt(self.variance(t) - self.variance(s))
        return x_s * np.exp(shift + std * rng.standard_normal(_size(x_s, None)))

    def log_transition_density(self, x0, t, x):
        _check_time(t)
        x_arr = np.asarray(x, dtype=float)
        mean = np.log(x0) + self.log_shift(t)
        var = self.variance(t)
        with np.errstate(divide='ignore', invalid='ignore'):
            log_x = np.log(np.where(x_arr > 0, x_arr, 1.0))
            value = -log_x + _gaussian_log_density(mean, var, log_x)
        return _out_pair(np.where(x_arr > 0, value, -np.inf), x0, x)

    def noise_distribution(self, T, reference=1.0):
        _check_time(T, 'T')
        return Prior.lognormal(math.log(reference) + float(self.log_shift(T)), math.sqrt(self.variance(T)))

    def transition_support(self, x0, t):
        mean = math.log(x0) + float(self.log_shift(t))
        sd = math.sqrt(self.variance(t))
        return math.exp(mean - 40.0 * sd), math.exp(mean + 40.0 * sd)

    def to_config(self, prefix='process'):
        values = {f'{prefix}.family': self.family}
        values.update(self.mu.to_config(f'{prefix}.mu'))
        values.update(self.sigma.to_config(f'{prefix}.sigma'))
        return values

    @classmethod
    def from_config(cls, values, prefix='process'):
        return cls(schedule_from_config(values, f'{prefix}.mu'), schedule_from_config(values, f'{prefix}.sigma'))


def _besq_log_density(nu: float, x0: ArrayLike, t: float, y: ArrayLike) -> ArrayLike:
    """
    log q(t, x0, y) квадрата процесса Бесселя индекса nu:
    q = (1/2t)(y/x0)^{nu/2} exp(-(x0+y)/2t) I_nu(√(x0 y)/t),
    при x0 = 0 - гамма-закон Gamma(nu+1, масштаб 2t)
    """
    x0_arr, y_arr = np.broadcast_arrays(np.asarray(x0, dtype=float), np.asarray(y, dtype=float))
    out = np.full(x0_arr.shape, -np.inf)
    valid = y_arr >= 0
    central = valid & (x0_arr == 0)
    general = valid & (x0_arr > 0)

    if np.any(central):
        yc = y_arr[central]
        out[central] = (special.xlogy(nu, yc) - yc / (2.0 * t)
                        - (nu + 1.0) * math.log(2.0 * t) - special.gammaln(nu + 1.0))
    if np.any(general):
        xg = x0_arr[general]
        yg = y_arr[general]
        out[general] = (-math.log(2.0 * t)
                        + special.xlogy(0.5 * nu, yg) - 0.5 * nu * np.log(xg)
                        - (xg + yg) / (2.0 * t)
                        + log_bessel_i(nu, np.sqrt(xg * yg) / t))
    return _out_pair(out, x0, y)


@dataclass(frozen=True)
class BESQProcess(ForwardProcess):
    """Квадрат процесса Бесселя: dX = 2(ν+1) dt + 2√X dW"""
    nu: float
    allow_zero_index: bool = field(default=False, repr=False)

    family = 'besq'
    admits_zero = True

    def __post_init__(self):
        if self.allow_zero_index:
            if not self.nu >= 0:
                raise DomainError(f"Индекс должен быть неотрицательным: {self.nu}")
        elif not self.nu > 0:
            raise DomainError(f"Индекс BESQ должен быть положительным: {self.nu}")

    @property
    def dof(self) -> float:
        return 2.0 * (self.nu + 1.0)

    def drift(self, t, x):
        return _out(self.dof + np.zeros_like(np.asarray(x, dtype=float)), x)

    def diffusion_sq(self, t, x):
        return 4.0 * x

    def diffusion_sq_divergence(self, t, x):
        return _out(4.0 + np.zeros_like(np.asarray(x, dtype=float)), x)

    def sample(self, x0, t, rng, size=None):
        _check_time(t)
        self.check_state(x0)
        return t * sample_noncentral_chi2(self.dof, np.asarray(x0, dtype=float) / t, rng, size)

    def sample_between(self, x_s, s, t, rng):
        self._check_interval(s, t)
        dt = t - s
        return dt * sample_noncentral_chi2(self.dof, np.maximum(np.asarray(x_s, dtype=float), 0.0) / dt, rng)

    def log_transition_density(self, x0, t, x):
        _check_time(t)
        self.check_state(x0)
        return _besq_log_density(self.nu, x0, t, x)

    def noise_distribution(self, T, reference=1.0):
        _check_time(T, 'T')
        return Prior.transition_law(self, reference, T)

    def transition_support(self, x0, t):
        mean = x0 + self.dof * t
        sd = math.sqrt(2.0 * self.dof * t * t + 4.0 * x0 * t)
        return 0.0, mean + 40.0 * sd

    def to_config(self, prefix='process'):
        return {f'{prefix}.family': self.family, f'{prefix}.nu': _fmt(self.nu)}

    @classmethod
    def from_config(cls, values, prefix='process'):
        return cls(_get_float(values, f'{prefix}.nu'))


@dataclass(frozen=True)
class BESQGeneralProcess(ForwardProcess):
    """dX = μ dt + σ√X dW с μ > σ²/2; Y = 4X/σ² - BESQ индекса 2μ/σ² - 1"""
    mu: float
    sigma: float

    family = 'besq_general'
    admits_zero = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"σ должна быть положительной: {self.sigma}")
        if not self.mu > self.sigma ** 2 / 2.0:
            raise DomainError(f"Требуется μ > σ²/2: μ={self.mu}, σ={self.sigma}")

    @property
    def nu(self) -> float:
        return 2.0 * self.mu / self.sigma ** 2 - 1.0

    @property
    def scale(self) -> float:
        """Множитель перехода к каноническому BESQ: 4/σ²"""
        return 4.0 / self.sigma ** 2

    @property
    def canonical(self) -> BESQProcess:
        return BESQProcess(self.nu)

    def drift(self, t, x):
        return _out(self.mu + np.zeros_like(np.asarray(x, dtype=float)), x)

    def diffusion_sq(self, t, x):
        return self.sigma ** 2 * x

    def diffusion_sq_divergence(self, t, x):
        return _out(self.sigma ** 2 + np.zeros_like(np.asarray(x, dtype=float)), x)

    def sample(self, x0, t, rng, size=None):
        self.check_state(x0)
        return self.canonical.sample(self.scale * np.asarray(x0, dtype=float), t, rng, size) / self.scale

    def sample_between(self, x_s, s, t, rng):
        return self.canonical.sample_between(self.scale * np.asarray(x_s, dtype=float), s, t, rng) / self.scale

    def log_transition_density(self, x0, t, x):
        _check_time(t)
        self.check_state(x0)
        c = self.scale
        return _besq_log_density(self.nu, c * np.asarray(x0, dtype=float), t, c * np.asarray(x, dtype=float)) + math.log(c)

    def noise_distribution(self, T, reference=1.0):
        _check_time(T, 'T')
        return Prior.transition_law(self, reference, T)

    def transition_support(self, x0, t):
        lo, hi = self.canonical.transition_support(self.scale * x0, t)
        return lo / self.scale, hi / self.scale

    def to_config(self, prefix='process'):
        return {f'{prefix}.family': self.family, f'{prefix}.mu': _fmt(self.mu), f'{prefix}.sigma': _fmt(self.sigma)}

    @classmethod
    def from_config(cls, values, prefix='process'):
        return cls(_get_float(values, f'{prefix}.mu'), _get_float(values, f'{prefix}.sigma'))


@dataclass(frozen=True)
class CIRProcess(ForwardProcess):
    """
    Процесс Кокса-Ингерсолла-Росса dX = α(t)(μ(t) - X) dt + σ(t)√X dW

    Индекс ν = 2αμ/σ² - 1 обязан быть постоянным. Представление через BESQ:
    X_t = e^{-A(t)} Z_{τ(t)}, τ(t) = ¼∫₀ᵗ σ²(s) e^{A(s)} ds, Z - BESQ индекса ν.
    sigma=None означает σ(t) = √(2α(t)).
    """
    alpha: CoefficientSchedule
    mu: CoefficientSchedule
    sigma: Optional[CoefficientSchedule] = None
    horizon: float = 1.0
    nu: float = field(init=False, default=0.0)

    family = 'cir'
    admits_zero = True

    def __post_init__(self):
        grid = np.linspace(0.0, self.horizon, CIR_INDEX_GRID)
        sigma_sq = np.asarray(self.sigma_sq(grid), dtype=float)
        if np.any(~(sigma_sq > 0)):
            raise DomainError("σ²(t) должна быть положительной на [0, horizon]")
        index = 2.0 * np.asarray(self.alpha.value(grid)) * np.asarray(self.mu.value(grid)) / sigma_sq - 1.0
        nu = float(index[0])
        if np.any(np.abs(index - nu) > CIR_INDEX_RTOL * max(1.0, abs(nu))):
            raise DomainError(f"Индекс 2αμ/σ² - 1 не постоянен: от {index.min()} до {index.max()}")
        if nu < 0:
            raise DomainError(f"Индекс CIR должен быть неотрицательным: {nu}")
        object.__setattr__(self, 'nu', nu)

    def covering(self, T: float) -> 'CIRProcess':
        """Тот же процесс с проверкой постоянства индекса на [0, T]"""
        if T <= self.horizon:
            return self
        return replace(self, horizon=float(T))

    def sigma_sq(self, t):
        if self.sigma is None:
            return 2.0 * np.asarray(self.alpha.value(t)) if np.ndim(t) else 2.0 * self.alpha.value(t)
        value = self.sigma.value(t)
        return np.asarray(value) ** 2 if np.ndim(t) else value ** 2

    @property
    def kernel(self) -> BESQProcess:
        return BESQProcess(self.nu, allow_zero_index=True)

    def log_scale(self, t):
        """A(t)"""
        return self.alpha.antiderivative(t)

    def time_change(self, t):
        """τ(t) = ¼∫₀ᵗ σ²(s) e^{A(s)} ds"""
        if self.sigma is None:
            return _out(0.5 * np.expm1(np.asarray(self.alpha.antiderivative(t))), t)
        if self.alpha.is_constant and self.sigma.is_constant:
            a = float(self.alpha.value(0.0))
            s2 = float(self.sigma.value(0.0)) ** 2
            tt = np.asarray(t, dtype=float)
            if a == 0.0:
                return _out(0.25 * s2 * tt, t)
            return _out(s2 / (4.0 * a) * np.expm1(a * tt), t)
        return _map_scalar(self._time_change_numeric, t)

    @lru_cache(maxsize=4096)
    def _time_change_numeric(self, t: float) -> float:
        if t == 0.0:
            return 0.0
        value, _ = integrate.quad(lambda s: 0.25 * self.sigma_sq(s) * math.exp(self.alpha.antiderivative(s)),
                                  0.0, t, epsabs=0.0, epsrel=1e-13, limit=200)
        return value

    def stationary_rate(self, t: float) -> float:
        """Параметр rate гамма-закона шума: 2α/σ²"""
        return 2.0 * float(self.alpha.value(t)) / float(self.sigma_sq(t))

    def drift(self, t, x):
        return self.alpha.value(t) * (self.mu.value(t) - x)

    def diffusion_sq(self, t, x):
        return self.sigma_sq(t) * x

    def diffusion_sq_divergence(self, t, x):
        return _out(self.sigma_sq(t) + np.zeros_like(np.asarray(x, dtype=float)), x)

    def sample(self, x0, t, rng, size=None):
        _check_time(t)
        self.check_state(x0)
        z = self.kernel.sample(x0, float(self.time_change(t)), rng, size)
        return math.exp(-float(self.log_scale(t))) * z

    def sample_between(self, x_s, s, t, rng):
        self._check_interval(s, t)
        z_s = math.exp(float(self.log_scale(s))) * np.asarray(x_s, dtype=float)
        z_t = self.kernel.sample_between(z_s, float(self.time_change(s)), float(self.time_change(t)), rng)
        return math.exp(-float(self.log_scale(t))) * z_t

    def log_transition_density(self, x0, t, x):
        """Плотность через scipy.stats.ncx2: X_t = e^{-A}τ · χ²(2(ν+1), x0/τ)"""
        _check_time(t)
        self.check_state(x0)
        tau = float(self.time_change(t))
        c = math.exp(-float(self.log_scale(t))) * tau
        dof = 2.0 * (self.nu + 1.0)
        x0_arr, x_arr = np.broadcast_arrays(np.asarray(x0, dtype=float), np.asarray(x, dtype=float))
        y = x_arr / c
        nc = x0_arr / tau
        out = np.full(y.shape, -np.inf)
        positive = y > 0
        central = positive & (nc == 0)
        shifted = positive & (nc > 0)
        if np.any(central):
            out[central] = stats.chi2.logpdf(y[central], dof)
        if np.any(shifted):
            out[shifted] = stats.ncx2.logpdf(y[shifted], dof, nc[shifted])
        return _out_pair(out - math.log(c), x0, x)

    def noise_distribution(self, T, reference=1.0):
        _check_time(T, 'T')
        return Prior.gamma(self.nu + 1.0, self.stationary_rate(T))

    def transition_support(self, x0, t):
        tau = float(self.time_change(t))
        scale = math.exp(-float(self.log_scale(t)))
        _, hi = self.kernel.transition_support(x0, tau)
        return 0.0, scale * hi

    def to_config(self, prefix='process'):
        values = {f'{prefix}.family': self.family, f'{prefix}.horizon': _fmt(self.horizon)}
        values.update(self.alpha.to_config(f'{prefix}.alpha'))
        values.update(self.mu.to_config(f'{prefix}.mu'))
        if self.sigma is not None:
            values.update(self.sigma.to_config(f'{prefix}.sigma'))
        return values

    @classmethod
    def from_config(cls, values, prefix='process'):
        sigma = None
        if values.get(f'{prefix}.sigma.kind'):
            sigma = schedule_from_config(values, f'{prefix}.sigma')
        return cls(schedule_from_config(values, f'{prefix}.alpha'),
                   schedule_from_config(values, f'{prefix}.mu'),
                   sigma,
                   _get_float(values, f'{prefix}.horizon', 1.0))


@dataclass(frozen=True)
class CEVProcess(ForwardProcess):
    """
    Процесс постоянной эластичности dX = μ(t) X dt + σ(t) X^β dW, β > 1

    X_t = e^{U(t)} Z_{τ(t)}^{-1/(2(β-1))}, Z - BESQ индекса 1/(2(β-1))
    из x0^{-2(β-1)}, τ(t) = (β-1)²∫₀ᵗ σ²(s) e^{2(β-1)U(s)} ds.
    """
    mu: CoefficientSchedule
    sigma: CoefficientSchedule
    beta: float

    family = 'cev'

    def __post_init__(self):
        if not self.beta > 1:
            raise DomainError(f"Требуется β > 1: {self.beta}")

    @property
    def exponent(self) -> float:
        """2(β-1)"""
        return 2.0 * (self.beta - 1.0)

    @property
    def kernel(self) -> BESQProcess:
        return BESQProcess(1.0 / self.exponent)

    def time_change(self, t):
        k = self.exponent
        if self.mu.is_constant and self.sigma.is_constant:
            m = float(self.mu.value(0.0))
            s2 = float(self.sigma.value(0.0)) ** 2
            tt = np.asarray(t, dtype=float)
            factor = (self.beta - 1.0) ** 2 * s2
            if m == 0.0:
                return _out(factor * tt, t)
            return _out(factor * np.expm1(k * m * tt) / (k * m), t)
        return _map_scalar(self._time_change_numeric, t)

    @lru_cache(maxsize=4096)
    def _time_change_numeric(self, t: float) -> float:
        if t == 0.0:
            return 0.0
        k = self.exponent
        value, _ = integrate.quad(
            lambda s: (self.beta - 1.0) ** 2 * self.sigma.value(s) ** 2 * math.exp(k * self.mu.antiderivative(s)),
            0.0, t, epsabs=0.0, epsrel=1e-13, limit=200)
        return value

    def to_kernel_state(self, x: ArrayLike, t: float) -> ArrayLike:
        """z = (x e^{-U(t)})^{-2(β-1)}"""
        return np.power(np.asarray(x, dtype=float) * math.exp(-float(self.mu.antiderivative(t))), -self.exponent)

    def from_kernel_state(self, z: ArrayLike, t: float) -> ArrayLike:
        return math.exp(float(self.mu.antiderivative(t))) * np.power(z, -1.0 / self.exponent)

    def drift(self, t, x):
        return self.mu.value(t) * x

    def diffusion_sq(self, t, x):
        return self.sigma.value(t) ** 2 * np.power(x, 2.0 * self.beta)

    def diffusion_sq_divergence(self, t, x):
        return 2.0 * self.beta * self.sigma.value(t) ** 2 * np.power(x, 2.0 * self.beta - 1.0)

    def sample(self, x0, t, rng, size=None):
        _check_time(t)
        self.check_state(x0)
        z = self.kernel.sample(self.to_kernel_state(x0, 0.0), float(self.time_change(t)), rng, size)
        return self.from_kernel_state(z, t)

    def sample_between(self, x_s, s, t, rng):
        self._check_interval(s, t)
        z_s = self.to_kernel_state(x_s, s)
        z_t = self.kernel.sample_between(z_s, float(self.time_change(s)), float(self.time_change(t)), rng)
        return self.from_kernel_state(z_t, t)

    def log_transition_density(self, x0, t, x):
        """Плотность BESQ в точке z(x) с якобианом |dz/dx| = 2(β-1) z / x"""
        _check_time(t)
        self.check_state(x0)
        x_arr = np.asarray(x, dtype=float)
        safe_x = np.where(x_arr > 0, x_arr, 1.0)
        z = self.to_kernel_state(safe_x, t)
        z0 = self.to_kernel_state(x0, 0.0)
        value = (_besq_log_density(self.kernel.nu, z0, float(self.time_change(t)), z)
                 + math.log(self.exponent) + np.log(z) - np.log(safe_x))
        return _out_pair(np.where(x_arr > 0, value, -np.inf), x0, x)

    def noise_distribution(self, T, reference=1.0):
        _check_time(T, 'T')
        return Prior.transition_law(self, reference, T)

    def transition_support(self, x0, t):
        tau = float(self.time_change(t))
        z0 = float(self.to_kernel_state(x0, 0.0))
        _, z_hi = self.kernel.transition_support(z0, tau)
        return float(self.from_kernel_state(z_hi, t)), np.inf

    def to_config(self, prefix='process'):
        values = {f'{prefix}.family': self.family, f'{prefix}.beta': _fmt(self.beta)}
        values.update(self.mu.to_config(f'{prefix}.mu'))
        values.update(self.sigma.to_config(f'{prefix}.sigma'))
        return values

    @classmethod
    def from_config(cls, values, prefix='process'):
        return cls(schedule_from_config(values, f'{prefix}.mu'),
                   schedule_from_config(values, f'{prefix}.sigma'),
                   _get_float(values, f'{prefix}.beta'))


@dataclass(frozen=True)
class BES3Process(ForwardProcess):
    """Трёхмерный процесс Бесселя dX = σ²/X dt + σ dW; X/σ - стандартный BES(3)"""
    sigma_const: float = 1.0

    family = 'bes3'
    admits_zero = True

    def __post_init__(self):
        if not self.sigma_const > 0:
            raise DomainError(f"σ должна быть положительной: {self.sigma_const}")

    @property
    def kernel(self) -> BESQProcess:
        return BESQProcess(0.5)

    def drift(self, t, x):
        return self.sigma_const ** 2 / x

    def diffusion_sq(self, t, x):
        return _out(self.sigma_const ** 2 + np.zeros_like(np.asarray(x, dtype=float)), x)

    def diffusion_sq_divergence(self, t, x):
        return _out(np.zeros_like(np.asarray(x, dtype=float)), x)

    def sample(self, x0, t, rng, size=None):
        _check_time(t)
        self.check_state(x0)
        y0 = np.asarray(x0, dtype=float) / self.sigma_const
        return self.sigma_const * np.sqrt(self.kernel.sample(y0 * y0, t, rng, size))

    def sample_between(self, x_s, s, t, rng):
        y_s = np.asarray(x_s, dtype=float) / self.sigma_const
        return self.sigma_const * np.sqrt(self.kernel.sample_between(y_s * y_s, s, t, rng))

    def log_transition_density(self, x0, t, x):
        """q(t,y0,y) = (y/y0)√(2/(πt)) e^{-(y0²+y²)/2t} sinh(y0 y/t); при y0 = 0 - закон Максвелла"""
        _check_time(t)
        self.check_state(x0)
        s = self.sigma_const
        y0, y = np.broadcast_arrays(np.asarray(x0, dtype=float) / s, np.asarray(x, dtype=float) / s)
        out = np.full(y.shape, -np.inf)
        positive = y > 0
        central = positive & (y0 == 0)
        general = positive & (y0 > 0)
        if np.any(central):
            yc = y[central]
            out[central] = 0.5 * math.log(2.0 / math.pi) - 1.5 * math.log(t) + 2.0 * np.log(yc) - yc * yc / (2.0 * t)
        if np.any(general):
            a = y0[general]
            b = y[general]
            out[general] = (np.log(b) - np.log(a) + 0.5 * math.log(2.0 / (math.pi * t))
                            - (a * a + b * b) / (2.0 * t) + log_sinh(a * b / t))
        return _out_pair(out - math.log(s), x0, x)

    def noise_distribution(self, T, reference=1.0):
        _check_time(T, 'T')
        return Prior.transition_law(self, reference, T)

    def transition_support(self, x0, t):
        return 0.0, x0 + self.sigma_const * 15.0 * math.sqrt(t)

    def to_config(self, prefix='process'):
        return {f'{prefix}.family': self.family, f'{prefix}.sigma': _fmt(self.sigma_const)}

    @classmethod
    def from_config(cls, values, prefix='process'):
        return cls(_get_float(values, f'{prefix}.sigma', 1.0))


PROCESS_REGISTRY: Dict[str, Type[ForwardProcess]] = {
    've': VEProcess,
    'vp': VPProcess,
    'gbm': GBMProcess,
    'besq': BESQProcess,
    'besq_general': BESQGeneralProcess,
    'cir': CIRProcess,
    'cev': CEVProcess,
    'bes3': BES3Process,
}


def get_available_families() -> Dict[str, str]:
    """Список доступных семейств процессов"""
    return {name: (cls.__doc__ or '').strip().split('\n')[0] for name, cls in PROCESS_REGISTRY.items()}


def process_from_config(values: Mapping[str, Optional[str]], prefix: str = 'process') -> ForwardProcess:
    """Создаёт процесс по тегу семейства из конфигурации"""
    family = _get_str(values, f'{prefix}.family')
    if family not in PROCESS_REGISTRY:
        raise ConfigError(f'{prefix}.family', f"неизвестное семейство '{family}', доступны: {list(PROCESS_REGISTRY)}")
    try:
        return PROCESS_REGISTRY[family].from_config(values, prefix)
    except DomainError as e:
        raise ConfigError(prefix, str(e))


def process_to_config(spec: ForwardProcess, prefix: str = 'process') -> Dict[str, str]:
    return spec.to_config(prefix)


# ==========================================================================
# Операции модуля
# ==========================================================================

def forward_sample(spec: ForwardProcess, x0: ArrayLike, t: float, rng: RngStream, size: Size = None) -> ArrayLike:
    """Точная выборка из закона перехода X_t | X_0 = x0"""
    return spec.sample(x0, t, rng, size)


def transition_density(spec: ForwardProcess, x0: ArrayLike, t: float, x: ArrayLike) -> ArrayLike:
    """Плотность перехода q(t, x0, x)"""
    return spec.transition_density(x0, t, x)


def noise_distribution(spec: ForwardProcess, T: float, reference: float = 1.0) -> Prior:
    """Распределение шума для инициализации обратного процесса"""
    return spec.noise_distribution(T, reference)


# ==========================================================================
# Предустановленные расписания экспериментов
# ==========================================================================

@dataclass(frozen=True)
class Preset:
    process: ForwardProcess
    horizon: float = 1.0
    n_steps: int = 1000
    description: str = ''


def _gbm_sigma_image() -> CoefficientSchedule:
    return PowerSchedule(0.01, 1.99, 1.5)


def _gbm_sigma_finance() -> CoefficientSchedule:
    return AffineSchedule(0.001, 1.999)


PRESETS: Dict[str, Preset] = {
    'gbm_image': Preset(GBMProcess(ScaledSquareSchedule(_gbm_sigma_image(), 0.5), _gbm_sigma_image()),
                        description='σ(t) = 0.01 + 1.99 t^{3/2}, μ = σ²/2'),
    've_image': Preset(VEProcess(ExponentialSchedule(1.0, 25.0)), description='σ(t) = 25^t'),
    'cir_image': Preset(CIRProcess(AffineSchedule(0.05, 4.95), ConstantSchedule(1.0)),
                        description='α(t) = 0.05 + 4.95 t, μ ≡ 1, σ = √(2α)'),
    'vp_image': Preset(VPProcess(AffineSchedule(0.05, 9.95)), description='α(t) = 0.05 + 9.95 t'),
    'gbm_finance': Preset(GBMProcess(ScaledSquareSchedule(_gbm_sigma_finance(), 0.5, -0.25), _gbm_sigma_finance()),
                          n_steps=500, description='σ(t) = 0.001 + 1.999 t, μ = σ²/2 - 0.25'),
    'vp_finance': Preset(VPProcess(AffineSchedule(0.05, 1.575)), description='α(t) = 0.05 + 1.575 t'),
}
