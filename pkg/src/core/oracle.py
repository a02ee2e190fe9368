"""
Независимая численная проверка

Квадратурные маргинальные плотности, конечно-разностные скоры, квадратурные
условные ожидания и Монте-Карло проверка тождества для обратного дрейфа.
Модуль не использует формулы Твиди: только плотности перехода и априорные
распределения.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import DomainError, NoSupportError, QuadratureError
from .process import ForwardProcess, Prior
from .rng import RngStream

logger = logging.getLogger('TweedieLab.Oracle')

# Подстановки для полубесконечных носителей по семействам
DEFAULT_TRANSFORMS = {
    've': 'identity',
    'vp': 'identity',
    'gbm': 'log',
    'cev': 'log',
    'besq': 'sqrt',
    'besq_general': 'sqrt',
    'cir': 'sqrt',
    'bes3': 'sqrt',
}


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Параметры адаптивной квадратуры

    Подынтегральная функция нормируется на свой максимум, поэтому epsabs
    действует как относительный допуск к пику.
    """
    support: Optional[Tuple[float, float]] = None
    epsabs: float = 1e-13
    epsrel: float = 1e-12
    limit: int = 500
    transform: Optional[str] = None
    grid_size: int = 4001
    log_window: float = 40.0
    fail_rtol: float = 1e-6

    def __post_init__(self):
        if self.support is not None and not self.support[0] < self.support[1]:
            raise DomainError(f"Некорректный носитель: {self.support}")
        if not (self.epsabs > 0 and self.epsrel > 0):
            raise DomainError("Допуски квадратуры должны быть положительными")
        if self.transform not in (None, 'identity', 'log', 'sqrt'):
            raise DomainError(f"Неизвестная подстановка: {self.transform}")


@dataclass(frozen=True)
class QuadratureResult:
    log_scale: float
    values: Tuple[float, ...]
    errors: Tuple[float, ...]


@dataclass(frozen=True)
class NumericScore:
    value: float
    error: float


@dataclass(frozen=True)
class LookbackEstimate:
    """Оценка (1/ε)E(X_{t-ε} - X_t | X_t ≈ x) в окне полуширины window"""
    value: float
    stderr: float
    count: int
    window: float


# ==========================================================================
# Подстановки
# ==========================================================================

def _to_z(kind: str, v: np.ndarray) -> np.ndarray:
    if kind == 'log':
        return np.exp(v)
    if kind == 'sqrt':
        return v * v
    return v


def _from_z(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == 'log':
        return np.log(z)
    if kind == 'sqrt':
        return np.sqrt(z)
    return z


def _log_jacobian(kind: str, v: np.ndarray) -> np.ndarray:
    if kind == 'log':
        return v
    if kind == 'sqrt':
        with np.errstate(divide='ignore'):
            return np.log(2.0 * v)
    return np.zeros_like(v)


def _resolve_transform(spec: ForwardProcess, quad: QuadratureSpec) -> str:
    if quad.transform is not None:
        return quad.transform
    if not spec.positive:
        return 'identity'
    return DEFAULT_TRANSFORMS.get(spec.family, 'log')


def _integrate_posterior(prior: Prior, spec: ForwardProcess, t: float, x: float,
                         functions: Sequence[Callable[[np.ndarray], np.ndarray]],
                         quad: QuadratureSpec) -> QuadratureResult:
    """
    Интегралы ∫ g(z) p_data(z) q(t,z,x) dz для набора g, с общим масштабом exp(log_scale)

    Пик и эффективная область ищутся на сетке (логарифмической для положительных
    семейств), затем интеграл берётся адаптивно в выбранной подстановке.
    """
    if prior.log_density is None:
        raise DomainError(f"Для квадратуры нужна плотность распределения {prior.name}")

    lo, hi = quad.support if quad.support is not None else prior.support
    kind = _resolve_transform(spec, quad)

    if spec.positive:
        lo = max(lo, 1e-300)
        hi = min(hi, 1e300)
        if not lo < hi:
            raise QuadratureError("Пустой носитель", {'lo': lo, 'hi': hi})
        z_grid = np.exp(np.linspace(math.log(lo), math.log(hi), quad.grid_size))
    else:
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise QuadratureError("Для вещественного носителя нужны конечные границы", {'lo': lo, 'hi': hi})
        z_grid = np.linspace(lo, hi, quad.grid_size)

    def log_joint(z):
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            value = np.asarray(prior.log_density(z), dtype=float) + np.asarray(spec.log_transition_density(z, t, x), dtype=float)
        return np.where(np.isnan(value), -np.inf, value)

    v_grid = _from_z(kind, z_grid)
    log_weights = log_joint(z_grid) + _log_jacobian(kind, v_grid)
    log_weights = np.where(np.isnan(log_weights), -np.inf, log_weights)
    peak = int(np.argmax(log_weights))
    log_scale = float(log_weights[peak])
    if not np.isfinite(log_scale):
        raise QuadratureError("Подынтегральная функция равна нулю на всей сетке",
                              {'family': spec.family, 't': t, 'x': x})

    inside = np.nonzero(log_weights > log_scale - quad.log_window)[0]
    a = float(v_grid[max(inside[0] - 1, 0)])
    b = float(v_grid[min(inside[-1] + 1, len(v_grid) - 1)])
    v_peak = float(v_grid[peak])
    points = [v_peak] if a < v_peak < b else None

    values: List[float] = []
    errors: List[float] = []
    for g in functions:
        def integrand(v, g=g):
            z = _to_z(kind, np.asarray(v, dtype=float))
            weight = math.exp(float(log_joint(z)) + float(_log_jacobian(kind, np.asarray(v))) - log_scale)
            return float(g(z)) * weight if weight > 0 else 0.0

        result = integrate.quad(integrand, a, b, points=points, epsabs=quad.epsabs,
                                epsrel=quad.epsrel, limit=quad.limit, full_output=1)
        value, abserr = result[0], result[1]
        if len(result) > 3:
            logger.debug(f"quad: {result[3]} (t={t}, x={x}, family={spec.family})")
        # интеграл g, близкий к нулю, сравнивается с нормировкой
        reference = max(abs(value), values[0] if values else 0.0, 1e-300)
        if abserr > quad.fail_rtol * reference:
            raise QuadratureError("Квадратура не сошлась",
                                  {'family': spec.family, 't': t, 'x': x, 'value': value, 'abserr': abserr})
        values.append(value)
        errors.append(abserr)

    return QuadratureResult(log_scale, tuple(values), tuple(errors))


def _one(z):
    return 1.0


# ==========================================================================
# Операции модуля
# ==========================================================================

def log_marginal_density_numeric(prior: Prior, spec: ForwardProcess, t: float, x: float,
                                 quad: Optional[QuadratureSpec] = None) -> float:
    """log p(t, x) квадратурой"""
    if prior.is_point_mass:
        return float(spec.log_transition_density(prior.atom, t, x))
    result = _integrate_posterior(prior, spec, t, x, [_one], quad or QuadratureSpec())
    if not result.values[0] > 0:
        raise QuadratureError("Неположительное значение маргинальной плотности", {'t': t, 'x': x})
    return result.log_scale + math.log(result.values[0])


def marginal_density_numeric(prior: Prior, spec: ForwardProcess, t: float, x: float,
                             quad: Optional[QuadratureSpec] = None,
                             full_output: bool = False):
    """
    Маргинальная плотность p(t,x) = ∫ p_data(z) q(t,z,x) dz

    Args:
        prior: распределение данных с плотностью (или точечная масса)
        spec: прямой процесс
        t: время, t > 0
        x: точка
        quad: параметры квадратуры
        full_output: вернуть также оценку абсолютной погрешности

    Returns:
        значение плотности или (значение, погрешность)
    """
    if prior.is_point_mass:
        value = float(spec.transition_density(prior.atom, t, x))
        return (value, 0.0) if full_output else value
    result = _integrate_posterior(prior, spec, t, x, [_one], quad or QuadratureSpec())
    scale = math.exp(result.log_scale)
    value = scale * result.values[0]
    if full_output:
        return value, scale * result.errors[0]
    return value


def score_numeric(prior: Prior, spec: ForwardProcess, t: float, x: float,
                  h: Optional[float] = None, quad: Optional[QuadratureSpec] = None) -> NumericScore:
    """
    Центральная разность log p(t,·) с экстраполяцией Ричардсона по шагам h и h/2

    Returns:
        NumericScore(value, error), error = |экстраполяция - разность с шагом h/2|
    """
    if h is None:
        h = 1e-5 * max(1.0, abs(x))
    if spec.positive:
        if not x > 0:
            raise DomainError(f"x должен быть положительным: {x}")
        h = min(h, x / 4.0)
    if not h > 0:
        raise DomainError(f"Шаг должен быть положительным: {h}")

    def log_p(y):
        return log_marginal_density_numeric(prior, spec, t, y, quad)

    coarse = (log_p(x + h) - log_p(x - h)) / (2.0 * h)
    fine = (log_p(x + h / 2.0) - log_p(x - h / 2.0)) / h
    value = (4.0 * fine - coarse) / 3.0
    return NumericScore(value, abs(value - fine))


def conditional_expectation_numeric(prior: Prior, spec: ForwardProcess,
                                    g: Callable[[np.ndarray], np.ndarray],
                                    t: float, x: float,
                                    quad: Optional[QuadratureSpec] = None) -> float:
    """E(g(X_0) | X_t = x) как отношение двух квадратур с общим масштабом"""
    if prior.is_point_mass:
        return float(g(np.asarray(prior.atom)))
    result = _integrate_posterior(prior, spec, t, x, [_one, g], quad or QuadratureSpec())
    return result.values[1] / result.values[0]


def lookback_identity_rhs(spec: ForwardProcess, score: float, t: float, x: float) -> float:
    """a(t,x)·s + ∂ₓa(t,x) - b(t,x): предел оценки обратного дрейфа при ε → 0"""
    return float(spec.diffusion_sq(t, x) * score + spec.diffusion_sq_divergence(t, x) - spec.drift(t, x))


def _lookback_shard(spec: ForwardProcess, prior: Prior, t: float, x: float, epsilon: float,
                    size: int, stream: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    z = np.asarray(prior.sample(stream, size), dtype=float)
    x_prev = spec.sample(z, t - epsilon, stream)
    x_now = spec.sample_between(x_prev, t - epsilon, t, stream)
    return x_prev, x_now


def lookback_drift_mc(spec: ForwardProcess, prior: Prior, t: float, x: float, epsilon: float,
                      n: int, rng: RngStream, window: Optional[float] = None,
                      shard_size: int = 1_000_000, max_workers: int = 1) -> LookbackEstimate:
    """
    Монте-Карло оценка (1/ε)E(X_{t-ε} - X_t | X_t = x)

    Пары (X_{t-ε}, X_t) строятся точной двухшаговой выборкой, условие X_t = x
    заменяется равномерным окном полуширины window (по умолчанию 0.02·std(X_t)).
    """
    if not 0 < epsilon < t:
        raise DomainError(f"Требуется 0 < ε < t: ε={epsilon}, t={t}")
    if n < 1:
        raise DomainError(f"n должно быть положительным: {n}")

    sizes = [shard_size] * (n // shard_size)
    if n % shard_size:
        sizes.append(n % shard_size)
    streams = rng.spawn(len(sizes))

    first_prev, first_now = _lookback_shard(spec, prior, t, x, epsilon, sizes[0], streams[0])
    if window is None:
        window = 0.02 * float(np.std(first_now))
    if not window > 0:
        raise DomainError(f"Ширина окна должна быть положительной: {window}")

    def summarize(pair):
        x_prev, x_now = pair
        mask = np.abs(x_now - x) <= window
        d = (x_prev[mask] - x_now[mask]) / epsilon
        return int(mask.sum()), float(d.sum()), float((d * d).sum())

    def run(index):
        return summarize(_lookback_shard(spec, prior, t, x, epsilon, sizes[index], streams[index]))

    parts = [summarize((first_prev, first_now))]
    if len(sizes) > 1:
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                parts.extend(pool.map(run, range(1, len(sizes))))
        else:
            parts.extend(run(i) for i in range(1, len(sizes)))

    count = sum(p[0] for p in parts)
    if count == 0:
        raise NoSupportError(f"Окно вокруг x={x} пусто: увеличьте n или ширину окна (w={window})")
    total = sum(p[1] for p in parts)
    total_sq = sum(p[2] for p in parts)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    stderr = math.sqrt(var / count)
    logger.debug(f"lookback: n={n}, в окне {count}, оценка {mean:.5f} ± {stderr:.5f}")
    return LookbackEstimate(mean, stderr, count, window)
