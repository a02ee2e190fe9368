"""
Обратная генерация схемой Эйлера-Маруямы

Общий обратный дрейф -b + a·∇log p + ∂ₓa и специализированные
мультипликативная схема GBM и схема CIR. Траектории разбиты на блоки
с собственными дочерними потоками: результат не зависит от числа потоков.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DomainError
from .process import CIRProcess, ForwardProcess, GBMProcess, Prior
from .rng import RngStream
from .tweedie import eps_from_score, score_from_eps

logger = logging.getLogger('TweedieLab.Sampler')

ArrayLike = Union[float, np.ndarray]
Field = Callable[[float, ArrayLike], ArrayLike]

GUARD_KINDS = ('reflect', 'clamp', 'reject', 'none')
DEFAULT_FLOOR = 1e-8
DEFAULT_T_MIN_FRACTION = 1e-5
QUANTILES = (0.01, 0.05, 0.5, 0.95, 0.99)


@dataclass(frozen=True)
class PositivityGuard:
    """
    Политика для шага, покинувшего (0, ∞)

    reflect: y <- |y| (ноль заменяется на floor); clamp: y <- max(y, floor);
    reject: шаг повторяется с новым шумом до max_retries раз, после чего
    траектория исключается.
    """
    kind: str = 'clamp'
    floor: float = DEFAULT_FLOOR
    max_retries: int = 20

    def __post_init__(self):
        if self.kind not in GUARD_KINDS:
            raise DomainError(f"Неизвестная защита '{self.kind}', доступны: {GUARD_KINDS}")
        if self.kind in ('clamp', 'reflect') and not self.floor > 0:
            raise DomainError(f"floor должен быть положительным: {self.floor}")
        if self.max_retries < 0:
            raise DomainError(f"max_retries не может быть отрицательным: {self.max_retries}")

    @classmethod
    def default_for(cls, spec: ForwardProcess) -> 'PositivityGuard':
        if not spec.positive:
            return cls('none')
        if isinstance(spec, GBMProcess):
            return cls('reflect')
        return cls('clamp')


@dataclass(frozen=True)
class ReverseRunConfig:
    """Параметры обратного прогона"""
    spec: ForwardProcess
    score: Optional[Field] = None
    T: float = 1.0
    n_steps: int = 1000
    n_paths: int = 10_000
    seed: int = 0
    guard: Optional[PositivityGuard] = None
    t_min_fraction: float = DEFAULT_T_MIN_FRACTION
    keep_paths: bool = False
    max_workers: int = 1
    shard_size: int = 1024
    noise: Optional[Prior] = None
    eps: Optional[Field] = None
    reference: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"T должен быть положительным: {self.T}")
        if self.n_steps < 1:
            raise DomainError(f"n_steps должно быть не меньше 1: {self.n_steps}")
        if self.n_paths < 1:
            raise DomainError(f"n_paths должно быть не меньше 1: {self.n_paths}")
        if not 0 < self.t_min_fraction < 1:
            raise DomainError(f"t_min_fraction должна лежать в (0, 1): {self.t_min_fraction}")
        if self.shard_size < 1:
            raise DomainError(f"shard_size должен быть положительным: {self.shard_size}")
        if self.score is None and self.eps is None:
            raise DomainError("Нужно поле скора или поле шума")
        if isinstance(self.spec, CIRProcess):
            object.__setattr__(self, 'spec', self.spec.covering(self.T))
        if self.guard is None:
            object.__setattr__(self, 'guard', PositivityGuard.default_for(self.spec))

    @property
    def step(self) -> float:
        return self.T / self.n_steps

    def time_grid(self) -> np.ndarray:
        """Равномерная сетка от T до t_min = t_min_fraction·T"""
        return np.linspace(self.T, self.t_min_fraction * self.T, self.n_steps + 1)

    def score_field(self) -> Field:
        if self.score is not None:
            return self.score
        eps, spec = self.eps, self.spec
        return lambda t, x: score_from_eps(spec, t, x, eps(t, x))

    def eps_field(self) -> Field:
        if self.eps is not None:
            return self.eps
        score, spec = self.score, self.spec
        return lambda t, x: eps_from_score(spec, t, x, score(t, x))

    def initial_law(self) -> Prior:
        return self.noise or self.spec.noise_distribution(self.T, self.reference)


@dataclass
class SamplerResult:
    """Итог прогона: конечные значения включённых траекторий и метаданные"""
    samples: np.ndarray
    path_ids: np.ndarray
    excluded_ids: np.ndarray
    times: np.ndarray
    method: str
    paths: Optional[np.ndarray] = None

    @property
    def excluded(self) -> int:
        return int(self.excluded_ids.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'path_id': self.path_ids, 'y': self.samples})

    def paths_frame(self) -> pd.DataFrame:
        """Траектории в длинном формате (path_id, step, t, y)"""
        if self.paths is None:
            raise DomainError("Траектории не сохранялись (keep_paths=False)")
        n_times, n_paths = self.paths.shape
        return pd.DataFrame({
            'path_id': np.tile(np.arange(n_paths), n_times),
            'step': np.repeat(np.arange(n_times), n_paths),
            't': np.repeat(self.times, n_paths),
            'y': self.paths.ravel(),
        })

    def summary(self) -> pd.Series:
        return summarize_samples(self.samples)


def summarize_samples(samples: np.ndarray) -> pd.Series:
    """Среднее, стандартное отклонение, асимметрия, эксцесс и квантили 1/5/50/95/99 %"""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("Пустая выборка")
    values = {
        'count': float(x.size),
        'mean': float(np.mean(x)),
        'std': float(np.std(x, ddof=1)) if x.size > 1 else 0.0,
        'skewness': float(stats.skew(x)) if x.size > 2 else 0.0,
        'kurtosis': float(stats.kurtosis(x)) if x.size > 3 else 0.0,
    }
    for q, value in zip(QUANTILES, np.quantile(x, QUANTILES)):
        values[f'q{int(round(q * 100)):02d}'] = float(value)
    return pd.Series(values)


# ==========================================================================
# Шаги схем
# ==========================================================================

Update = Callable[[float, float, np.ndarray, np.ndarray], np.ndarray]


def _general_update(cfg: ReverseRunConfig) -> Update:
    spec = cfg.spec
    score = cfg.score_field()

    def update(tau: float, dt: float, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        a = np.asarray(spec.diffusion_sq(tau, y), dtype=float)
        drift = (-np.asarray(spec.drift(tau, y)) + a * np.asarray(score(tau, y))
                 + np.asarray(spec.diffusion_sq_divergence(tau, y)))
        return y + drift * dt + np.sqrt(np.maximum(a, 0.0) * dt) * z

    return update


def _gbm_update(cfg: ReverseRunConfig) -> Update:
    spec = cfg.spec
    if not isinstance(spec, GBMProcess):
        raise DomainError(f"Схема GBM требует процесс GBM, получен {spec.family}")
    eps = cfg.eps_field()

    def update(tau: float, dt: float, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        sig = float(spec.sigma.value(tau))
        big_sigma = math.sqrt(float(spec.variance(tau)))
        mu = float(spec.mu.value(tau))
        rate = sig * sig - mu - sig * sig / big_sigma * np.asarray(eps(tau, y))
        return y * (1.0 + rate * dt + sig * math.sqrt(dt) * z)

    return update


def _cir_update(cfg: ReverseRunConfig) -> Update:
    spec = cfg.spec
    if not isinstance(spec, CIRProcess) or spec.sigma is not None:
        raise DomainError("Схема CIR требует процесс CIR с σ(t) = √(2α(t))")
    if not spec.mu.is_constant:
        raise DomainError("Схема CIR требует постоянного μ")
    mu = float(spec.mu.value(0.0))
    score = cfg.score_field()

    def update(tau: float, dt: float, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        alpha = float(spec.alpha.value(tau))
        drift = alpha * (2.0 * y * np.asarray(score(tau, y)) + 2.0 - mu + y)
        return y + drift * dt + np.sqrt(np.maximum(2.0 * alpha * y * dt, 0.0)) * z

    return update


def _guarded_step(update: Update, guard: PositivityGuard, positive: bool, tau: float, dt: float,
                  y: np.ndarray, stream: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    """Один шаг с защитой; возвращает новые значения и маску исключённых"""
    y_new = update(tau, dt, y, stream.standard_normal(y.shape))
    failed = ~np.isfinite(y_new)
    if not positive or guard.kind == 'none':
        return y_new, failed

    if guard.kind == 'clamp':
        return np.where(failed, y_new, np.maximum(y_new, guard.floor)), failed
    if guard.kind == 'reflect':
        reflected = np.abs(y_new)
        return np.where(failed, y_new, np.where(reflected > 0, reflected, guard.floor)), failed

    bad = ~(y_new > 0)
    for _ in range(guard.max_retries):
        idx = np.flatnonzero(bad)
        if idx.size == 0:
            break
        y_new[idx] = update(tau, dt, y[idx], stream.standard_normal(idx.size))
        bad = ~(y_new > 0)
    return y_new, bad


def _run_shard(cfg: ReverseRunConfig, update: Update, size: int, stream: RngStream
               ) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    times = cfg.time_grid()
    spec, guard = cfg.spec, cfg.guard
    y = np.asarray(cfg.initial_law().sample(stream, size), dtype=float).reshape(size)
    alive = np.ones(size, dtype=bool)
    paths = np.empty((times.size, size)) if cfg.keep_paths else None
    if paths is not None:
        paths[0] = y

    for k in range(cfg.n_steps):
        tau, dt = float(times[k]), float(times[k] - times[k + 1])
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        y_next, failed = _guarded_step(update, guard, spec.positive, tau, dt, y[idx], stream)
        y[idx] = np.where(failed, y[idx], y_next)
        alive[idx[failed]] = False
        if paths is not None:
            paths[k + 1] = y

    return y, alive, paths


def _run(cfg: ReverseRunConfig, update: Update, method: str, rng: Optional[RngStream]) -> SamplerResult:
    rng = rng or RngStream(cfg.seed)
    sizes = [cfg.shard_size] * (cfg.n_paths // cfg.shard_size)
    if cfg.n_paths % cfg.shard_size:
        sizes.append(cfg.n_paths % cfg.shard_size)
    streams = rng.spawn(len(sizes))

    logger.info(f"🔄 Обратная генерация ({method}): {cfg.spec.family}, {cfg.n_paths} траекторий, "
                f"{cfg.n_steps} шагов, защита {cfg.guard.kind}")

    def run(i: int):
        return _run_shard(cfg, update, sizes[i], streams[i])

    if cfg.max_workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]

    y = np.concatenate([p[0] for p in parts])
    alive = np.concatenate([p[1] for p in parts])
    paths = np.concatenate([p[2] for p in parts], axis=1) if cfg.keep_paths else None
    ids = np.arange(cfg.n_paths)
    excluded = ids[~alive]
    if excluded.size:
        logger.warning(f"⚠️ Исключено траекторий: {excluded.size} из {cfg.n_paths}")
    return SamplerResult(y[alive], ids[alive], excluded, cfg.time_grid(), method, paths)


def reverse_em_general(cfg: ReverseRunConfig, rng: Optional[RngStream] = None) -> SamplerResult:
    """dY = (-b + a·s + ∂ₓa)(T-t, Y) dt + √a(T-t, Y) dB, Y_0 из распределения шума"""
    return _run(cfg, _general_update(cfg), 'general', rng)


def reverse_em_gbm(cfg: ReverseRunConfig, rng: Optional[RngStream] = None) -> SamplerResult:
    """y <- y(1 + (σ² - μ - σ²/Σ·ε)Δt + σ√Δt z), коэффициенты в момент T-t"""
    return _run(cfg, _gbm_update(cfg), 'gbm', rng)


def reverse_em_cir(cfg: ReverseRunConfig, rng: Optional[RngStream] = None) -> SamplerResult:
    """y <- y + α(2y s + 2 - μ + y)Δt + √(2α y Δt) z, коэффициенты в момент T-t"""
    return _run(cfg, _cir_update(cfg), 'cir', rng)


SAMPLER_REGISTRY = {
    'general': reverse_em_general,
    'gbm': reverse_em_gbm,
    'cir': reverse_em_cir,
}


def reverse_sample(cfg: ReverseRunConfig, method: str = 'general', rng: Optional[RngStream] = None) -> SamplerResult:
    if method not in SAMPLER_REGISTRY:
        raise DomainError(f"Неизвестная схема '{method}', доступны: {list(SAMPLER_REGISTRY)}")
    return SAMPLER_REGISTRY[method](cfg, rng)
