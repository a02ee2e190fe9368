"""
Специальные функции и точные сэмплеры негауссовских законов

Все функции векторизованы по numpy: скаляр на входе даёт float на выходе.
"""

import logging
from typing import Optional, Union

import numpy as np
from scipy import special

from .errors import DomainError
from .rng import RngStream

logger = logging.getLogger('TweedieLab.SpecialFn')

ArrayLike = Union[float, np.ndarray]

# Порог перехода от цепной дроби к отношению масштабированных ive
RATIO_ASYMPTOTIC_FACTOR = 50.0
# Ряд для u*coth(u) при малом аргументе
COTH_SERIES_CUTOFF = 1e-4
# При x > RATIO_SERIES_FACTOR·(nu+1) log I_nu и отношение берутся из асимптотики (ive даёт NaN)
RATIO_SERIES_FACTOR = 1e8
# Ниже этого значения ive считается потерявшим точность
IVE_UNDERFLOW = 1e-280


def _finish(value: np.ndarray, scalar: bool) -> ArrayLike:
    return float(value) if scalar else value


def _check_argument(x: np.ndarray, name: str = 'x', allow_negative: bool = False) -> None:
    if np.any(np.isnan(x)):
        raise DomainError(f"{name} содержит NaN")
    if not allow_negative and np.any(x < 0):
        raise DomainError(f"{name} должен быть неотрицательным")


def _log_bessel_series(nu: np.ndarray, x: np.ndarray, n_terms: int = 40) -> np.ndarray:
    """log I_nu(x) по степенному ряду, для малых x"""
    k = np.arange(n_terms, dtype=float)[:, None]
    half_log = np.log(x / 2.0)
    terms = 2.0 * k * half_log[None, :] - special.gammaln(k + 1.0) - special.gammaln(nu[None, :] + k + 1.0)
    return nu * half_log + special.logsumexp(terms, axis=0)


def _log_bessel_asymptotic(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    """log I_nu(x) = x - log(2πx)/2 + log(1 - (4nu²-1)/(8x)) + O(x⁻²)"""
    return x - 0.5 * np.log(2.0 * np.pi * x) + np.log1p(-(4.0 * nu * nu - 1.0) / (8.0 * x))


def log_bessel_i(nu: ArrayLike, x: ArrayLike) -> ArrayLike:
    """
    Логарифм модифицированной функции Бесселя первого рода I_nu(x)

    Args:
        nu: порядок, nu >= 0
        x: аргумент, x >= 0

    Returns:
        log I_nu(x); -inf при x = 0 и nu > 0, 0 при x = 0 и nu = 0
    """
    scalar = np.ndim(nu) == 0 and np.ndim(x) == 0
    nu_arr, x_arr = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(x, dtype=float))
    _check_argument(x_arr)
    _check_argument(nu_arr, 'nu')
    nu_arr = nu_arr.ravel()
    x_arr = x_arr.ravel()

    out = np.empty_like(x_arr)
    zero = x_arr == 0
    out[zero] = np.where(nu_arr[zero] == 0, 0.0, -np.inf)

    positive = ~zero
    if np.any(positive):
        with np.errstate(divide='ignore', under='ignore', invalid='ignore'):
            scaled = special.ive(nu_arr[positive], x_arr[positive])
            values = np.log(scaled) + x_arr[positive]
        huge = x_arr[positive] > RATIO_SERIES_FACTOR * (nu_arr[positive] + 1.0)
        bad = ((scaled < IVE_UNDERFLOW) | ~np.isfinite(values)) & ~huge
        if np.any(bad):
            values[bad] = _log_bessel_series(nu_arr[positive][bad], x_arr[positive][bad])
        if np.any(huge):
            values[huge] = _log_bessel_asymptotic(nu_arr[positive][huge], x_arr[positive][huge])
        out[positive] = values

    return _finish(out.reshape(np.broadcast(nu, x).shape), scalar)


def _ratio_lentz(nu: np.ndarray, x: np.ndarray, tol: float = 1e-16, max_iter: int = 100000) -> np.ndarray:
    """
    Модифицированный метод Ленца для цепной дроби
    I_{nu+1}/I_nu = 1/(b_1 + 1/(b_2 + ...)), b_j = 2(nu+j)/x
    """
    tiny = 1e-300
    f = np.full_like(x, tiny)
    c = f.copy()
    d = np.zeros_like(x)
    active = np.ones(x.shape, dtype=bool)

    for j in range(1, max_iter + 1):
        b = 2.0 * (nu + j) / x
        d = b + d
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + 1.0 / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = c * d
        f = np.where(active, f * delta, f)
        active &= np.abs(delta - 1.0) > tol
        if not active.any():
            break
    else:
        logger.warning(f"⚠️ Цепная дробь не сошлась за {max_iter} итераций")

    return f


def _ratio_series(nu: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Асимптотика I_{nu+1}(x)/I_nu(x) = 1 - (2nu+1)/(2x) + (4nu²-1)/(8x²) + O(x⁻³)"""
    return 1.0 - (2.0 * nu + 1.0) / (2.0 * x) + (4.0 * nu * nu - 1.0) / (8.0 * x * x)


def bessel_ratio(nu: ArrayLike, x: ArrayLike) -> ArrayLike:
    """
    Отношение I_{nu+1}(x)/I_nu(x) без вычисления самих I

    Args:
        nu: порядок, nu >= 0
        x: аргумент, x >= 0

    Returns:
        значение в [0, 1), равное 0 при x = 0
    """
    scalar = np.ndim(nu) == 0 and np.ndim(x) == 0
    nu_arr, x_arr = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(x, dtype=float))
    _check_argument(x_arr)
    _check_argument(nu_arr, 'nu')
    shape = nu_arr.shape
    nu_arr = nu_arr.ravel()
    x_arr = x_arr.ravel()

    out = np.zeros_like(x_arr)
    huge = x_arr > RATIO_SERIES_FACTOR * (nu_arr + 1.0)
    large = (x_arr > RATIO_ASYMPTOTIC_FACTOR * (nu_arr + 1.0)) & ~huge
    if np.any(large):
        with np.errstate(invalid='ignore'):
            out[large] = special.ive(nu_arr[large] + 1.0, x_arr[large]) / special.ive(nu_arr[large], x_arr[large])
        # ive теряет значение (NaN) при x порядка 1e9 и выше
        huge[large] = ~np.isfinite(out[large])
    if np.any(huge):
        out[huge] = _ratio_series(nu_arr[huge], x_arr[huge])
    mid = (x_arr > 0) & (x_arr <= RATIO_ASYMPTOTIC_FACTOR * (nu_arr + 1.0))
    if np.any(mid):
        out[mid] = _ratio_lentz(nu_arr[mid], x_arr[mid])

    out = np.minimum(out, np.nextafter(1.0, 0.0))
    return _finish(out.reshape(shape), scalar)


def erf(x: ArrayLike) -> ArrayLike:
    """Функция ошибок"""
    scalar = np.ndim(x) == 0
    x_arr = np.asarray(x, dtype=float)
    _check_argument(x_arr, allow_negative=True)
    return _finish(special.erf(x_arr), scalar)


def u_coth(u: ArrayLike) -> ArrayLike:
    """u * coth(u), устойчиво при u -> 0 (предел 1)"""
    scalar = np.ndim(u) == 0
    u_arr = np.asarray(u, dtype=float)
    small = np.abs(u_arr) < COTH_SERIES_CUTOFF
    u2 = u_arr * u_arr
    with np.errstate(divide='ignore', invalid='ignore'):
        direct = u_arr / np.tanh(u_arr)
    out = np.where(small, 1.0 + u2 / 3.0 - u2 * u2 / 45.0, direct)
    return _finish(out, scalar)


def log_sinh(u: ArrayLike) -> ArrayLike:
    """log sinh(u) для u >= 0 без переполнения"""
    scalar = np.ndim(u) == 0
    u_arr = np.asarray(u, dtype=float)
    _check_argument(u_arr, 'u')
    with np.errstate(divide='ignore'):
        out = u_arr + np.log(-np.expm1(-2.0 * u_arr)) - np.log(2.0)
    return _finish(out, scalar)


def sample_noncentral_chi2(dof: ArrayLike, noncentrality: ArrayLike, rng: RngStream,
                           size: Optional[Union[int, tuple]] = None) -> ArrayLike:
    """
    Точная выборка из нецентрального хи-квадрат

    Пуассоновская смесь: K ~ Poisson(nc/2), затем 2 * Gamma(dof/2 + K, 1).
    Работает для нецелых степеней свободы.

    Args:
        dof: число степеней свободы, > 0
        noncentrality: параметр нецентральности, >= 0
        rng: поток случайных чисел
        size: размер выборки

    Returns:
        выборка (скаляр или массив)
    """
    dof_arr = np.asarray(dof, dtype=float)
    nc_arr = np.asarray(noncentrality, dtype=float)
    if np.any(~(dof_arr > 0)):
        raise DomainError(f"Степени свободы должны быть положительными: {dof}")
    if np.any(~(nc_arr >= 0)):
        raise DomainError(f"Нецентральность должна быть неотрицательной: {noncentrality}")

    k = rng.poisson(nc_arr / 2.0, size)
    return 2.0 * rng.gamma(dof_arr / 2.0 + k, 1.0, None if size is None else np.shape(k))


def sample_gamma(shape: ArrayLike, rate: ArrayLike, rng: RngStream,
                 size: Optional[Union[int, tuple]] = None) -> ArrayLike:
    """Гамма-распределение в параметризации (shape, rate): среднее shape/rate"""
    shape_arr = np.asarray(shape, dtype=float)
    rate_arr = np.asarray(rate, dtype=float)
    if np.any(~(shape_arr > 0)) or np.any(~(rate_arr > 0)):
        raise DomainError(f"Параметры гамма-распределения должны быть положительными: shape={shape}, rate={rate}")
    return rng.gamma(shape_arr, 1.0 / rate_arr, size)


def sample_lognormal(mu: ArrayLike, sigma2: ArrayLike, rng: RngStream,
                     size: Optional[Union[int, tuple]] = None) -> ArrayLike:
    """exp(N(mu, sigma2)); sigma2 - дисперсия логарифма"""
    mu_arr = np.asarray(mu, dtype=float)
    sigma2_arr = np.asarray(sigma2, dtype=float)
    if np.any(~(sigma2_arr > 0)):
        raise DomainError(f"Дисперсия логарифма должна быть положительной: {sigma2}")
    if size is None:
        size = np.broadcast(mu_arr, sigma2_arr).shape or None
    return np.exp(mu_arr + np.sqrt(sigma2_arr) * rng.standard_normal(size))
