"""
Denoising score matching

Потери по отдельным примерам для VE, VP, GBM и CIR (в форме скора и в форме
предсказания шума) и точная линейная регрессия скора по базису функций:
на каждом срезе времени минимум эмпирической потери находится из
нормальных уравнений.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DomainError, RankError
from .process import CIRProcess, ForwardProcess, GBMProcess, VEProcess, VPProcess
from .rng import RngStream
from .special_fn import bessel_ratio, sample_noncentral_chi2
from .tweedie import ScoreField

logger = logging.getLogger('TweedieLab.DSM')

ArrayLike = Union[float, np.ndarray]
Model = Callable[[float, ArrayLike], ArrayLike]

# Порог числа обусловленности, выше которого добавляется гребневая поправка
CONDITION_LIMIT = 1e12
RIDGE_FACTOR = 1e-8
# Нижняя граница времени для агрегированной потери, в долях T
DEFAULT_T_MIN_FRACTION = 1e-3

FORMS = ('score', 'eps')


@dataclass(frozen=True)
class DsmSample:
    """
    Набор обучающих примеров: X_t восстанавливается из (X_0, z или k, t)

    z - стандартная нормальная величина (VE, VP, GBM), k - нецентральная
    хи-квадрат величина (CIR).
    """
    t: np.ndarray
    x0: np.ndarray
    xt: np.ndarray
    z: Optional[np.ndarray] = None
    k: Optional[np.ndarray] = None
    family: str = ''

    def __len__(self) -> int:
        return int(self.xt.size)


def _check_times(t: np.ndarray) -> None:
    if np.any(~(t > 0)):
        raise DomainError("Время примеров должно быть положительным")


def draw_dsm_samples(spec: ForwardProcess, x0: ArrayLike, t: ArrayLike, rng: RngStream) -> DsmSample:
    """
    Прямое отображение для обучения

    VE: X_t = X_0 + Σ(t)Z; VP: X_t = e^{-A}X_0 + √(1-e^{-2A})Z;
    GBM: X_t = X_0 exp(U - Σ²/2 + ΣZ); CIR: X_t = e^{-A}τ·K, K ~ χ²(2(ν+1), X_0/τ).
    """
    x0_arr = np.asarray(x0, dtype=float).ravel()
    t_arr = np.broadcast_to(np.asarray(t, dtype=float), x0_arr.shape).copy()
    _check_times(t_arr)
    spec.check_state(x0_arr)

    if isinstance(spec, VEProcess):
        z = rng.standard_normal(x0_arr.shape)
        xt = x0_arr + np.sqrt(spec.variance(t_arr)) * z
        return DsmSample(t_arr, x0_arr, xt, z=z, family=spec.family)
    if isinstance(spec, VPProcess):
        z = rng.standard_normal(x0_arr.shape)
        xt = spec.signal(t_arr) * x0_arr + np.sqrt(spec.variance(t_arr)) * z
        return DsmSample(t_arr, x0_arr, xt, z=z, family=spec.family)
    if isinstance(spec, GBMProcess):
        z = rng.standard_normal(x0_arr.shape)
        xt = x0_arr * np.exp(spec.log_shift(t_arr) + np.sqrt(spec.variance(t_arr)) * z)
        return DsmSample(t_arr, x0_arr, xt, z=z, family=spec.family)
    if isinstance(spec, CIRProcess):
        tau = np.asarray(spec.time_change(t_arr), dtype=float)
        k = np.asarray(sample_noncentral_chi2(2.0 * (spec.nu + 1.0), x0_arr / tau, rng, x0_arr.shape))
        xt = np.exp(-np.asarray(spec.log_scale(t_arr))) * tau * k
        return DsmSample(t_arr, x0_arr, xt, k=k, family=spec.family)
    raise DomainError(f"Нет DSM-параметризации для семейства {spec.family}")


def _evaluate(model: Model, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Вычисляет модель по группам одинакового времени"""
    unique, inverse = np.unique(t, return_inverse=True)
    if unique.size == 1:
        return np.broadcast_to(np.asarray(model(float(unique[0]), x), dtype=float), x.shape).copy()
    out = np.empty_like(x)
    for i, value in enumerate(unique):
        mask = inverse == i
        out[mask] = model(float(value), x[mask])
    return out


def _check_form(form: str) -> None:
    if form not in FORMS:
        raise DomainError(f"Неизвестная форма модели '{form}', доступны: {FORMS}")


def dsm_loss_ve(model: Model, sample: DsmSample, spec: VEProcess, form: str = 'score') -> np.ndarray:
    """Σ²|Σ s + Z|² (форма скора) или Σ²|ε - Z|² (форма шума)"""
    _check_form(form)
    _check_times(sample.t)
    var = np.asarray(spec.variance(sample.t), dtype=float)
    out = _evaluate(model, sample.t, sample.xt)
    residual = np.sqrt(var) * out + sample.z if form == 'score' else out - sample.z
    return var * residual * residual


def dsm_loss_vp(model: Model, sample: DsmSample, spec: VPProcess, form: str = 'score') -> np.ndarray:
    """Вес 1/λ_t = Σ²/a², невязка Σ s + Z или ε - Z"""
    _check_form(form)
    _check_times(sample.t)
    a = np.asarray(spec.signal(sample.t), dtype=float)
    var = np.asarray(spec.variance(sample.t), dtype=float)
    out = _evaluate(model, sample.t, sample.xt)
    residual = np.sqrt(var) * out + sample.z if form == 'score' else out - sample.z
    return var / (a * a) * residual * residual


def dsm_loss_gbm(model: Model, sample: DsmSample, spec: GBMProcess, form: str = 'eps') -> np.ndarray:
    """Σ²|ε - Z|², где в форме скора ε = -Σ(1 + x s)"""
    _check_form(form)
    _check_times(sample.t)
    if np.any(~(sample.xt > 0)):
        raise DomainError("X_t должен быть положительным для GBM")
    std = np.sqrt(np.asarray(spec.variance(sample.t), dtype=float))
    out = _evaluate(model, sample.t, sample.xt)
    eps = -std * (1.0 + sample.xt * out) if form == 'score' else out
    residual = eps - sample.z
    return std * std * residual * residual


def _cir_terms(spec: CIRProcess, sample: DsmSample) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Вес e^{-A}, множитель c = e^{-A/2}(e^A - 1) и цель √X_0·I_μ/I_{μ-1}(2√(X_t X_0)/c)"""
    if spec.sigma is not None:
        raise DomainError("DSM-потеря CIR определена для σ(t) = √(2α(t))")
    _check_times(sample.t)
    if np.any(~(sample.xt > 0)):
        raise DomainError("X_t должен быть положительным для CIR")
    big_a = np.asarray(spec.log_scale(sample.t), dtype=float)
    c = np.exp(-0.5 * big_a) * np.expm1(big_a)
    u = 2.0 * np.sqrt(sample.xt * sample.x0) / c
    target = np.sqrt(sample.x0) * bessel_ratio(spec.nu, u)
    return np.exp(-big_a), c, target


def dsm_loss_cir(model: Model, sample: DsmSample, spec: CIRProcess, form: str = 'score') -> np.ndarray:
    """
    λ(t)|(c(s + (1-μ)/X_t) + e^{A/2})√X_t - √X_0 I_μ/I_{μ-1}(·)|², λ = e^{-A}, μ = ν + 1

    В форме шума s восстанавливается из ε = (1 - e^{-A})s + 1.
    """
    _check_form(form)
    weight, c, target = _cir_terms(spec, sample)
    out = _evaluate(model, sample.t, sample.xt)
    if form == 'eps':
        out = (out - 1.0) / (-np.expm1(-np.asarray(spec.log_scale(sample.t))))
    root = np.sqrt(sample.xt)
    lhs = (c * (out - spec.nu / sample.xt) + 1.0 / np.sqrt(weight)) * root
    residual = lhs - target
    return weight * residual * residual


def dsm_loss(spec: ForwardProcess, model: Model, sample: DsmSample, form: Optional[str] = None) -> np.ndarray:
    """Потеря по примерам для семейства процесса"""
    if isinstance(spec, VEProcess):
        return dsm_loss_ve(model, sample, spec, form or 'score')
    if isinstance(spec, VPProcess):
        return dsm_loss_vp(model, sample, spec, form or 'score')
    if isinstance(spec, GBMProcess):
        return dsm_loss_gbm(model, sample, spec, form or 'eps')
    if isinstance(spec, CIRProcess):
        return dsm_loss_cir(model, sample, spec, form or 'score')
    raise DomainError(f"Нет DSM-потери для семейства {spec.family}")


def empirical_dsm_loss(spec: ForwardProcess, model: Model, data: np.ndarray, T: float, rng: RngStream,
                       n_mc: int = 1, t_min_fraction: float = DEFAULT_T_MIN_FRACTION,
                       form: Optional[str] = None, t: Optional[float] = None) -> Tuple[float, float]:
    """
    Средняя потеря и её стандартная ошибка

    t ~ U(t_min, T) для каждого примера, если t не задано явно.
    """
    if not T > 0:
        raise DomainError(f"T должен быть положительным: {T}")
    if isinstance(spec, CIRProcess):
        spec = spec.covering(T)
    x0 = np.repeat(np.asarray(data, dtype=float).ravel(), n_mc)
    if t is None:
        times = rng.uniform(t_min_fraction * T, T, x0.shape)
    else:
        times = np.full(x0.shape, float(t))
    sample = draw_dsm_samples(spec, x0, times, rng)
    losses = dsm_loss(spec, model, sample, form)
    return float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(losses.size)) if losses.size > 1 else 0.0


# ==========================================================================
# Базисы и линейная регрессия скора
# ==========================================================================

@dataclass(frozen=True)
class BasisFunction:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(x)


BASIS_LIBRARY: Dict[str, BasisFunction] = {
    'one': BasisFunction('one', lambda x: np.ones_like(x)),
    'x': BasisFunction('x', lambda x: x),
    'x2': BasisFunction('x2', lambda x: x * x),
    'x3': BasisFunction('x3', lambda x: x * x * x),
    'inv_x': BasisFunction('inv_x', lambda x: 1.0 / x),
    'log_x_over_x': BasisFunction('log_x_over_x', lambda x: np.log(x) / x),
    'log2_x_over_x': BasisFunction('log2_x_over_x', lambda x: np.log(x) ** 2 / x),
}

DEFAULT_BASES: Dict[str, List[str]] = {
    've': ['one', 'x', 'x2', 'x3'],
    'vp': ['one', 'x', 'x2', 'x3'],
    'gbm': ['inv_x', 'log_x_over_x', 'log2_x_over_x'],
    'cir': ['inv_x', 'one', 'x'],
}


def resolve_basis(names: Sequence[str]) -> List[BasisFunction]:
    unknown = [n for n in names if n not in BASIS_LIBRARY]
    if unknown:
        raise DomainError(f"Неизвестные базисные функции: {unknown}, доступны: {list(BASIS_LIBRARY)}")
    return [BASIS_LIBRARY[n] for n in names]


def default_basis(family: str) -> List[BasisFunction]:
    if family not in DEFAULT_BASES:
        raise DomainError(f"Нет базиса по умолчанию для семейства {family}")
    return resolve_basis(DEFAULT_BASES[family])


@dataclass(frozen=True)
class DsmDesign:
    """
    Квадратичная форма потери L(θ) = mean(w (Mθ + r)²)

    Невязка каждого семейства аффинна по s_θ = Φθ, поэтому потеря
    задаётся матрицей M, сдвигом r и весами w.
    """
    M: np.ndarray
    r: np.ndarray
    w: np.ndarray

    def loss(self, theta: np.ndarray) -> float:
        residual = self.M @ theta + self.r
        return float(np.mean(self.w * residual * residual))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        residual = self.M @ theta + self.r
        return 2.0 * (self.M * (self.w * residual)[:, None]).mean(axis=0)

    def normal_equations(self) -> Tuple[np.ndarray, np.ndarray]:
        weighted = self.M * self.w[:, None]
        return weighted.T @ self.M / self.r.size, -(weighted.T @ self.r) / self.r.size


def dsm_design(spec: ForwardProcess, basis: Sequence[BasisFunction], sample: DsmSample) -> DsmDesign:
    """Раскладывает потерю семейства в форму w(α·Φθ + β)²"""
    phi = np.column_stack([f(sample.xt) for f in basis])
    if not np.all(np.isfinite(phi)):
        raise DomainError("Базисные функции не конечны на выборке")
    t = sample.t
    if isinstance(spec, VEProcess):
        var = np.asarray(spec.variance(t), dtype=float)
        alpha, beta, w = np.sqrt(var), sample.z, var
    elif isinstance(spec, VPProcess):
        var = np.asarray(spec.variance(t), dtype=float)
        a = np.asarray(spec.signal(t), dtype=float)
        alpha, beta, w = np.sqrt(var), sample.z, var / (a * a)
    elif isinstance(spec, GBMProcess):
        std = np.sqrt(np.asarray(spec.variance(t), dtype=float))
        alpha, beta, w = -std * sample.xt, -std - sample.z, std * std
    elif isinstance(spec, CIRProcess):
        weight, c, target = _cir_terms(spec, sample)
        root = np.sqrt(sample.xt)
        alpha = c * root
        beta = -c * spec.nu / root + root / np.sqrt(weight) - target
        w = weight
    else:
        raise DomainError(f"Нет DSM-потери для семейства {spec.family}")
    w = np.broadcast_to(np.asarray(w, dtype=float), sample.xt.shape)
    return DsmDesign(phi * np.asarray(alpha)[:, None] if np.ndim(alpha) else phi * alpha,
                     np.asarray(beta, dtype=float), np.asarray(w))


@dataclass(frozen=True)
class SliceFit:
    t: float
    coefficients: np.ndarray
    loss: float
    condition: float
    ridge: float


@dataclass
class BasisScoreModel:
    """Скор s(t,x) = Σ_j θ_j(t) φ_j(x) с коэффициентами на срезах времени"""
    family: str
    basis: List[BasisFunction]
    t_slices: np.ndarray
    coefficients: np.ndarray
    losses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    conditions: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.t_slices = np.asarray(self.t_slices, dtype=float)
        self.coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if self.coefficients.shape != (self.t_slices.size, len(self.basis)):
            raise DomainError(f"Размер коэффициентов {self.coefficients.shape} не согласован с "
                              f"{self.t_slices.size} срезами и {len(self.basis)} функциями")
        if not np.all(np.isfinite(self.coefficients)):
            raise DomainError("Коэффициенты должны быть конечными")

    def coefficients_at(self, t: float) -> np.ndarray:
        """Линейная интерполяция по срезам с фиксацией на краях"""
        return np.array([np.interp(t, self.t_slices, self.coefficients[:, j]) for j in range(len(self.basis))])

    def __call__(self, t: float, x: ArrayLike) -> ArrayLike:
        theta = self.coefficients_at(t)
        x_arr = np.asarray(x, dtype=float)
        value = sum(theta[j] * f(x_arr) for j, f in enumerate(self.basis))
        return float(value) if np.ndim(x) == 0 else value

    def score_field(self) -> ScoreField:
        return ScoreField(self, 'basis-fit', self.family)

    def coefficients_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.coefficients, columns=[f.name for f in self.basis])
        frame.insert(0, 't_slice', self.t_slices)
        if self.losses.size:
            frame['loss'] = self.losses
        if self.conditions.size:
            frame['condition'] = self.conditions
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, family: str) -> 'BasisScoreModel':
        names = [c for c in frame.columns if c not in ('t_slice', 'loss', 'condition')]
        return cls(family, resolve_basis(names), frame['t_slice'].to_numpy(dtype=float),
                   frame[names].to_numpy(dtype=float))


def _fit_slice(spec: ForwardProcess, data: np.ndarray, t: float, basis: Sequence[BasisFunction],
               n_mc: int, stream: RngStream) -> SliceFit:
    sample = draw_dsm_samples(spec, np.repeat(data, n_mc), t, stream)
    design = dsm_design(spec, basis, sample)
    gram, rhs = design.normal_equations()
    condition = float(np.linalg.cond(gram))
    ridge = 0.0
    if not condition < CONDITION_LIMIT:
        ridge = RIDGE_FACTOR * float(np.trace(gram))
        logger.warning(f"⚠️ Плохая обусловленность на срезе t={t}: cond={condition:.3e}, гребень {ridge:.3e}")
        gram = gram + ridge * np.eye(gram.shape[0])
    try:
        theta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as e:
        raise RankError(f"Вырожденные нормальные уравнения на срезе t={t}: {e}")
    return SliceFit(float(t), theta, design.loss(theta), condition, ridge)


def fit_basis_score(spec: ForwardProcess, data: np.ndarray, t_slices: Sequence[float],
                    basis: Optional[Sequence[BasisFunction]], n_mc: int, rng: RngStream,
                    max_workers: int = 1) -> BasisScoreModel:
    """
    Точный минимум эмпирической DSM-потери на каждом срезе времени

    Данные сортируются, поэтому результат не зависит от их порядка; каждый
    срез получает собственный дочерний поток, поэтому результат не зависит
    от числа потоков.

    Args:
        spec: прямой процесс (VE, VP, GBM или CIR)
        data: выборка X_0
        t_slices: моменты времени > 0
        basis: базисные функции (None - базис семейства по умолчанию)
        n_mc: число примеров шума на одно наблюдение
        rng: поток случайных чисел
        max_workers: число потоков

    Returns:
        BasisScoreModel
    """
    data = np.sort(np.asarray(data, dtype=float).ravel())
    if data.size == 0:
        raise DomainError("Пустая выборка данных")
    spec.check_state(data)
    if n_mc < 1:
        raise DomainError(f"n_mc должно быть положительным: {n_mc}")
    slices = np.asarray(sorted(float(t) for t in t_slices))
    if slices.size == 0 or np.any(~(slices > 0)):
        raise DomainError("Срезы времени должны быть положительными")
    if isinstance(spec, CIRProcess):
        spec = spec.covering(float(slices[-1]))
    basis = list(basis) if basis else default_basis(spec.family)

    streams = rng.spawn(slices.size)

    def run(i: int) -> SliceFit:
        return _fit_slice(spec, data, slices[i], basis, n_mc, streams[i])

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            fits = list(pool.map(run, range(slices.size)))
    else:
        fits = [run(i) for i in range(slices.size)]

    logger.info(f"📊 DSM-регрессия: {spec.family}, {slices.size} срезов, {len(basis)} функций, "
                f"{data.size * n_mc} примеров на срез")
    return BasisScoreModel(spec.family, basis, slices,
                           np.vstack([f.coefficients for f in fits]),
                           np.array([f.loss for f in fits]),
                           np.array([f.condition for f in fits]))
