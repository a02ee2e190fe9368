"""
Эмпирический Байес на основе формул Твиди

Гистограмма наблюдений, оценка скора методом Линдси (натуральный кубический
сплайн по логарифмам частот) и три оценщика: нецентральный хи-квадрат (BESQ),
логнормальный шум (GBM) и броуновский шум в логарифмической шкале.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np
import pandas as pd
from scipy import optimize

from .errors import DomainError, InversionError, RankError
from .process import Prior
from .rng import RngStream
from .special_fn import sample_noncentral_chi2, u_coth

logger = logging.getLogger('TweedieLab.EmpiricalBayes')

ArrayLike = Union[float, np.ndarray]

DEFAULT_BINS = 63
DEFAULT_DF = 10
CHI2_DOF = 3
BRACKET_CAP = 1e6
CURVE_POINTS = 200

EB_KINDS = ('besq', 'gbm', 'bm_log')


@dataclass(frozen=True)
class Histogram:
    """
    Равноширокие бины на [min z, max z]

    Бины полуоткрыты слева [a, b), последний бин замкнут. Если все значения
    совпадают, диапазон расширяется на ±0.5 (соглашение numpy).
    """
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'x': self.centers, 'count': self.counts})


def build_histogram(z: np.ndarray, n_bins: int = DEFAULT_BINS) -> Histogram:
    """Гистограмма наблюдений с n_bins равными бинами"""
    data = np.asarray(z, dtype=float).ravel()
    if n_bins < 2:
        raise DomainError(f"Число бинов должно быть не меньше 2: {n_bins}")
    if data.size == 0:
        raise DomainError("Пустая выборка")
    if not np.all(np.isfinite(data)):
        raise DomainError("Наблюдения должны быть конечными")
    counts, edges = np.histogram(data, bins=n_bins)
    return Histogram(edges, counts.astype(np.int64))


# ==========================================================================
# Натуральный кубический сплайн
# ==========================================================================

def _natural_basis(u: np.ndarray, knots: np.ndarray, derivative: bool = False) -> np.ndarray:
    """
    Базис натурального кубического сплайна с K узлами:
    N_1 = 1, N_2 = u, N_{k+2} = d_k - d_{K-1}, d_k = ((u-ξ_k)³₊ - (u-ξ_K)³₊)/(ξ_K - ξ_k)
    """
    k_last = knots[-1]

    def d(k: int) -> np.ndarray:
        if derivative:
            num = 3.0 * np.maximum(u - knots[k], 0.0) ** 2 - 3.0 * np.maximum(u - k_last, 0.0) ** 2
        else:
            num = np.maximum(u - knots[k], 0.0) ** 3 - np.maximum(u - k_last, 0.0) ** 3
        return num / (k_last - knots[k])

    last = d(knots.size - 2)
    columns = [np.zeros_like(u) if derivative else np.ones_like(u), np.ones_like(u) if derivative else u]
    columns.extend(d(k) - last for k in range(knots.size - 2))
    return np.column_stack(columns)


@dataclass(frozen=True)
class SplineScore:
    """
    Сплайн log-частот и его производная (оценка скора)

    Аргумент нормируется на [0, 1] по диапазону [lo, hi]; за пределами
    крайних узлов сплайн линеен.
    """
    knots: np.ndarray
    coefficients: np.ndarray
    df: int
    lo: float
    hi: float

    def _scale(self, x: ArrayLike) -> np.ndarray:
        return (np.atleast_1d(np.asarray(x, dtype=float)) - self.lo) / (self.hi - self.lo)

    def eval(self, x: ArrayLike) -> ArrayLike:
        value = _natural_basis(self._scale(x), self.knots) @ self.coefficients
        return float(value[0]) if np.ndim(x) == 0 else value.reshape(np.shape(x))

    def deriv(self, x: ArrayLike) -> ArrayLike:
        value = _natural_basis(self._scale(x), self.knots, derivative=True) @ self.coefficients / (self.hi - self.lo)
        return float(value[0]) if np.ndim(x) == 0 else value.reshape(np.shape(x))

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return self.deriv(x)

    def outside(self, x: ArrayLike) -> np.ndarray:
        """Маска запросов вне диапазона подгонки"""
        x_arr = np.asarray(x, dtype=float)
        return (x_arr < self.lo) | (x_arr > self.hi)


def lindsey_fit(h: Histogram, df: int = DEFAULT_DF) -> SplineScore:
    """
    Метод Линдси: МНК log y_k на натуральный сплайн с df степенями свободы

    Пустые бины исключаются, узлы - равноотстоящие квантили центров
    оставшихся бинов. Логарифм ширины бина - аддитивная константа и не
    влияет на производную.
    """
    if df < 2:
        raise DomainError(f"Число степеней свободы должно быть не меньше 2: {df}")
    nonzero = h.counts > 0
    n_nonzero = int(nonzero.sum())
    if n_nonzero < df + 1:
        raise RankError(f"Непустых бинов {n_nonzero} < df + 1 = {df + 1}: уменьшите df или увеличьте число бинов")

    x = h.centers[nonzero]
    y = np.log(h.counts[nonzero].astype(float))
    lo, hi = float(x[0]), float(x[-1])
    u = (x - lo) / (hi - lo)
    knots = np.quantile(u, np.linspace(0.0, 1.0, df))
    design = _natural_basis(u, knots)
    coefficients, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < df:
        raise RankError(f"Ранг матрицы сплайна {rank} < {df}: уменьшите df")
    logger.debug(f"Сплайн Линдси: {n_nonzero} непустых бинов, df={df}")
    return SplineScore(knots, coefficients, df, lo, hi)


# ==========================================================================
# Оценщики
# ==========================================================================

Score = Callable[[ArrayLike], ArrayLike]


@dataclass(frozen=True)
class EBModel:
    """Оценщик эмпирического Байеса: тип шума, оценка скора и параметры"""
    kind: str
    score: Score
    sigma: Optional[float] = None
    bracket_cap: float = BRACKET_CAP

    def __post_init__(self):
        if self.kind not in EB_KINDS:
            raise DomainError(f"Неизвестный тип модели '{self.kind}', доступны: {EB_KINDS}")
        if self.kind in ('gbm', 'bm_log') and not (self.sigma is not None and self.sigma > 0):
            raise DomainError(f"Модель {self.kind} требует σ > 0")


def besq_curve(u: ArrayLike, z: ArrayLike) -> ArrayLike:
    """f(u, z) = √u coth(√(uz)), с пределом 1/√z при u -> 0"""
    z_arr = np.asarray(z, dtype=float)
    value = u_coth(np.sqrt(np.asarray(u, dtype=float) * z_arr)) / np.sqrt(z_arr)
    return float(value) if np.ndim(value) == 0 else value


def solve_besq_noncentrality(rhs: float, z: float, cap: float = BRACKET_CAP) -> float:
    """
    Единственный корень f(u, z) = rhs, u >= 0

    rhs <= 1/√z проектируется в u = 0. Правая граница скобки растёт
    геометрически от max(z, 1) до cap.
    """
    if math.isnan(rhs):
        raise DomainError(f"Правая часть NaN при z={z}")
    if not z > 0:
        raise DomainError(f"z должен быть положительным: {z}")
    if rhs <= 1.0 / math.sqrt(z):
        return 0.0

    def residual(u: float) -> float:
        return besq_curve(u, z) - rhs

    upper = max(z, 1.0)
    while residual(upper) <= 0:
        upper *= 2.0
        if upper > cap:
            raise InversionError(f"Скобка превысила {cap} при z={z}, rhs={rhs}")
    return optimize.brentq(residual, 0.0, upper, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def _check_positive(z: np.ndarray) -> None:
    if np.any(~(z > 0)):
        raise DomainError("Наблюдения z должны быть положительными")


def eb_besq_estimate(model: EBModel, z: ArrayLike) -> ArrayLike:
    """û из f(û, z) = (2ŝ(z) + 1)√z"""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    _check_positive(z_arr)
    rhs = (2.0 * np.asarray(model.score(z_arr), dtype=float) + 1.0) * np.sqrt(z_arr)
    out = np.array([solve_besq_noncentrality(float(r), float(v), model.bracket_cap) for r, v in zip(rhs, z_arr)])
    return float(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


def eb_gbm_estimate(model: EBModel, z: ArrayLike) -> ArrayLike:
    """û = σ² z ŝ(z) + σ² + log z"""
    z_arr = np.asarray(z, dtype=float)
    _check_positive(z_arr)
    s2 = model.sigma ** 2
    return s2 * z_arr * model.score(z_arr) + s2 + np.log(z_arr)


def eb_bm_estimate(model: EBModel, z: ArrayLike) -> ArrayLike:
    """ũ = σ² ŝ̃(log z) + log z, ŝ̃ подогнан по log z"""
    z_arr = np.asarray(z, dtype=float)
    _check_positive(z_arr)
    log_z = np.log(z_arr)
    return model.sigma ** 2 * model.score(log_z) + log_z


ESTIMATORS: Dict[str, Callable[[EBModel, ArrayLike], ArrayLike]] = {
    'besq': eb_besq_estimate,
    'gbm': eb_gbm_estimate,
    'bm_log': eb_bm_estimate,
}


# ==========================================================================
# Эксперименты
# ==========================================================================

def efron_prior_grid(n: int = 500, repetitions: int = 10) -> np.ndarray:
    """u_i = log log(n/(i - 1/2)), i = 1..n, повторённые repetitions раз (e^u близко к Exp(1))"""
    if n < 1 or repetitions < 1:
        raise DomainError(f"n и repetitions должны быть положительными: {n}, {repetitions}")
    i = np.arange(1, n + 1, dtype=float)
    return np.tile(np.log(np.log(n / (i - 0.5))), repetitions)


def gamma_prior(shape: float = 12.0, rate: float = 10.0) -> Prior:
    """Гамма-закон в параметризации (shape, rate)"""
    return Prior.gamma(shape, rate)


@dataclass
class EBReport:
    kind: str
    histogram: Histogram
    spline: SplineScore
    estimates: pd.DataFrame
    curve: pd.DataFrame
    rmse: float
    baseline_rmse: float
    out_of_range: int
    settings: Dict[str, str] = field(default_factory=dict)

    @property
    def improvement(self) -> float:
        return self.baseline_rmse - self.rmse


def _rmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def _draw_data(kind: str, prior: Optional[Prior], sigma: Optional[float], n: int,
               repetitions: int, rng: RngStream):
    if prior is not None:
        u = np.asarray(prior.sample(rng, n), dtype=float)
    elif kind == 'besq':
        u = np.asarray(gamma_prior().sample(rng, n), dtype=float)
    else:
        if n % repetitions:
            raise DomainError(f"N={n} должно делиться на число повторов {repetitions}")
        u = efron_prior_grid(n // repetitions, repetitions)
    if kind == 'besq':
        z = np.asarray(sample_noncentral_chi2(CHI2_DOF, u, rng, u.shape))
    else:
        if not (sigma is not None and sigma > 0):
            raise DomainError(f"Модель {kind} требует σ > 0")
        z = np.exp(u + sigma * rng.standard_normal(u.shape))
    return u, z


def _fit_and_estimate(kind: str, u: np.ndarray, z: np.ndarray, sigma: Optional[float],
                      n_bins: int, df: int) -> EBReport:
    observed = np.log(z) if kind == 'bm_log' else z
    histogram = build_histogram(observed, n_bins)
    spline = lindsey_fit(histogram, df)
    model = EBModel(kind, spline, sigma)
    u_hat = np.asarray(ESTIMATORS[kind](model, z), dtype=float)

    baseline = np.maximum(z - CHI2_DOF, 0.0) if kind == 'besq' else np.log(z)
    out_of_range = int(spline.outside(observed).sum())
    if out_of_range:
        logger.debug(f"{out_of_range} запросов вне диапазона сплайна (линейное продолжение)")

    grid = np.linspace(histogram.edges[0], histogram.edges[-1], CURVE_POINTS)
    curve = pd.DataFrame({'x': grid, 'log_fit': spline.eval(grid), 'score': spline.deriv(grid)})
    if kind == 'besq':
        curve['f_hat'] = (2.0 * curve['score'] + 1.0) * np.sqrt(grid)

    estimates = pd.DataFrame({'z': z, 'u': u, 'u_hat': u_hat, 'baseline': baseline})
    return EBReport(kind, histogram, spline, estimates, curve,
                    _rmse(u_hat, u), _rmse(baseline, u), out_of_range)


def run_eb_experiment(kind: str, prior: Optional[Prior] = None, sigma: Optional[float] = None,
                      n: int = 5000, n_bins: int = DEFAULT_BINS, df: int = DEFAULT_DF, seed: int = 0,
                      repetitions: int = 10) -> EBReport:
    """
    Полный конвейер эмпирического Байеса

    besq: u ~ prior (по умолчанию Gamma(12, 10)), z ~ χ²(3, u);
    gbm и bm_log: u - сетка log log(n/(i - 1/2)) (или prior), z = exp(u + σN(0,1)).

    Returns:
        EBReport с парами (z, u, û), кривой сплайна и RMSE против базовой оценки
        (max(z - 3, 0) для besq, log z для gbm и bm_log)
    """
    if kind not in EB_KINDS:
        raise DomainError(f"Неизвестный тип эксперимента '{kind}', доступны: {EB_KINDS}")
    rng = RngStream(seed)
    u, z = _draw_data(kind, prior, sigma, n, repetitions, rng)
    report = _fit_and_estimate(kind, u, z, sigma, n_bins, df)
    report.settings = {'kind': kind, 'n': str(n), 'n_bins': str(n_bins), 'df': str(df), 'seed': str(seed),
                       'sigma': '' if sigma is None else repr(float(sigma)),
                       'prior': prior.name if prior is not None else 'default'}
    logger.info(f"📊 Эмпирический Байес ({kind}): RMSE={report.rmse:.5f}, базовая RMSE={report.baseline_rmse:.5f}")
    return report


def compare_gbm_bm(sigma: float, n: int = 5000, n_bins: int = DEFAULT_BINS, df: int = DEFAULT_DF,
                   seed: int = 0, repetitions: int = 10, prior: Optional[Prior] = None) -> pd.DataFrame:
    """Парное сравнение оценщиков GBM и BM на одних и тех же данных"""
    rng = RngStream(seed)
    u, z = _draw_data('gbm', prior, sigma, n, repetitions, rng)
    rows = []
    for kind in ('gbm', 'bm_log'):
        report = _fit_and_estimate(kind, u, z, sigma, n_bins, df)
        rows.append({'kind': kind, 'sigma': sigma, 'seed': seed, 'rmse': report.rmse,
                     'baseline_rmse': report.baseline_rmse, 'out_of_range': report.out_of_range})
    return pd.DataFrame(rows)
