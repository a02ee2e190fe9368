#!/usr/bin/env python3
"""
Главный класс TweedieLab: воспроизводимые эксперименты с CSV-артефактами
"""

import logging
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np
import pandas as pd

from src import __version__
from src.core import (
    BasisScoreModel, ConfigError, PositivityGuard, RunConfig, RunManifest, ReverseRunConfig,
    RngStream, Settings, TweedieLabError, PRESETS, compare_gbm_bm, fit_basis_score, make_oracle,
    numeric_score_field, prior_from_config, process_from_config, read_csv, resolve_basis,
    reverse_sample, run_eb_experiment, score_field, score_numeric, setup_logger, stationary_score,
    tweedie_score, write_csv, write_sidecar,
)
from src.core.oracle import QuadratureSpec

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TOLERANCE = 2


class TweedieLab:
    """Основной класс TweedieLab"""

    def __init__(self, out_dir: str = 'out', seed: int = 0, threads: Optional[int] = None):
        self.logger = setup_logger('TweedieLab')
        self.settings = Settings()
        self.out_dir = Path(out_dir)
        self.seed = int(seed)
        self.threads = threads or Settings.DEFAULT_THREADS
        self.commands: Dict[str, Callable[[RunConfig, RunManifest], int]] = {
            'score-check': self.cmd_score_check,
            'generate': self.cmd_generate,
            'dsm-fit': self.cmd_dsm_fit,
            'eb-run': self.cmd_eb_run,
        }

    def run(self, command: str, config_path: str) -> int:
        """
        Запуск подкоманды

        Returns:
            0 - успех, 1 - ошибка конфигурации или вычислений, 2 - превышен допуск
        """
        if command not in self.commands:
            self.logger.error(f"❌ Неизвестная команда: {command}. Доступны: {list(self.commands)}")
            return EXIT_ERROR
        try:
            if self.seed < 0:
                raise ConfigError('seed', f"seed должен быть неотрицательным: {self.seed}")
            config = RunConfig.load(config_path)
            manifest = RunManifest(command, str(config_path), self.seed, str(self.out_dir), __version__)
            self.logger.info(f"🚀 Запуск {command}: конфигурация {config_path}, seed={self.seed}")
            code = self.commands[command](config, manifest)
            if code == EXIT_OK:
                self.logger.info(f"✅ {command} завершена, результаты в {self.out_dir}")
            return code
        except ConfigError as e:
            self.logger.error(f"❌ Ошибка конфигурации: {e}")
            return EXIT_ERROR
        except TweedieLabError as e:
            self.logger.error(f"❌ Ошибка вычислений: {e}")
            return EXIT_ERROR
        except Exception as e:
            self.logger.error(f"❌ Критическая ошибка в {command}: {e}")
            return EXIT_ERROR

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    # ======================================================================
    # score-check
    # ======================================================================

    def cmd_score_check(self, config: RunConfig, manifest: RunManifest) -> int:
        """Сравнение формулы Твиди с квадратурным оракулом на сетке (t, x)"""
        spec = process_from_config(config, 'process')
        model_spec = process_from_config(config, 'model') if config.section('model') else spec
        prior = prior_from_config(config, 'prior')
        times = config.get_floats('check.t')
        points = config.get_floats('check.x')
        tolerance = config.get_float('check.tolerance', 1e-5)
        mode = config.get_str('check.oracle', 'auto')
        particles = config.get_int('check.particles', 100_000)

        rng = RngStream(self.seed)
        oracle = make_oracle(prior, model_spec, mode, rng, particles)
        self.logger.info(f"📊 Проверка скора: {model_spec.family}, оракул {mode}, "
                         f"{len(times)}x{len(points)} точек, допуск {tolerance}")

        rows = []
        for t in times:
            for x in points:
                formula = float(tweedie_score(model_spec, oracle, t, x))
                reference = score_numeric(prior, spec, t, x, quad=QuadratureSpec()).value
                rows.append({'t': t, 'x': x, 'tweedie': formula, 'oracle': reference,
                             'abs_diff': abs(formula - reference)})
        frame = pd.DataFrame(rows)
        max_diff = float(frame['abs_diff'].max())
        passed = bool(max_diff <= tolerance)

        write_csv(frame, self._path('score_check.csv'), manifest, config.to_lines())
        write_sidecar(self._path('score_check.meta'), manifest, {
            'family': model_spec.family, 'oracle': oracle.mode, 'tolerance': tolerance,
            'max_abs_diff': max_diff, 'passed': str(passed).lower(),
        })

        if not passed:
            self.logger.error(f"❌ Превышен допуск: max |diff| = {max_diff:.3e} > {tolerance:.1e}")
            return EXIT_TOLERANCE
        self.logger.info(f"✅ Максимальное расхождение {max_diff:.3e}")
        return EXIT_OK

    # ======================================================================
    # generate
    # ======================================================================

    def _build_score(self, config: RunConfig, spec, rng: RngStream):
        source = config.get_str('score.source', 'analytic')
        if source == 'analytic':
            prior = prior_from_config(config, 'prior')
            mode = config.get_str('score.oracle', 'auto')
            return score_field(spec, make_oracle(prior, spec, mode, rng,
                                                 config.get_int('score.particles', 100_000)))
        if source == 'stationary':
            return stationary_score(spec)
        if source == 'numeric':
            return numeric_score_field(prior_from_config(config, 'prior'), spec)
        if source == 'basis':
            path = config.get_str('score.file')
            if not Path(path).is_file():
                raise ConfigError('score.file', f"файл не найден: {path}")
            return BasisScoreModel.from_frame(read_csv(path), spec.family).score_field()
        raise ConfigError('score.source', f"неизвестный источник '{source}' (analytic, stationary, numeric, basis)")

    def cmd_generate(self, config: RunConfig, manifest: RunManifest) -> int:
        """Обратная генерация и сводная статистика конечных значений"""
        preset_name = config.get('preset')
        if preset_name:
            if preset_name not in PRESETS:
                raise ConfigError('preset', f"неизвестный пресет '{preset_name}', доступны: {list(PRESETS)}")
            preset = PRESETS[preset_name]
            spec, horizon, steps = preset.process, preset.horizon, preset.n_steps
        else:
            spec = process_from_config(config, 'process')
            horizon, steps = 1.0, 1000

        rng = RngStream(self.seed)
        oracle_stream, sampler_stream = rng.spawn(2)
        score = self._build_score(config, spec, oracle_stream)

        guard = None
        if config.get('sample.guard'):
            guard = PositivityGuard(config.get_str('sample.guard'),
                                    config.get_float('sample.floor', 1e-8),
                                    config.get_int('sample.retries', 20))
        try:
            cfg = ReverseRunConfig(
                spec=spec, score=score,
                T=config.get_float('sample.T', horizon),
                n_steps=config.get_int('sample.steps', steps),
                n_paths=config.get_int('sample.paths', 10_000),
                seed=self.seed, guard=guard,
                keep_paths=config.get_bool('sample.keep_paths', False),
                max_workers=self.threads,
                reference=config.get_float('sample.reference', 1.0),
            )
        except TweedieLabError as e:
            raise ConfigError('sample', str(e))

        method = config.get_str('sample.method', 'general')
        result = reverse_sample(cfg, method, sampler_stream)

        summary = result.summary()
        write_csv(result.to_frame(), self._path('samples.csv'), manifest, config.to_lines())
        write_csv(summary.rename_axis('statistic').reset_index(name='value'),
                  self._path('summary.csv'), manifest, config.to_lines())
        if cfg.keep_paths:
            write_csv(result.paths_frame(), self._path('paths.csv'), manifest, config.to_lines())
        write_sidecar(self._path('generate.meta'), manifest, {
            'family': spec.family, 'method': result.method, 'guard': cfg.guard.kind,
            'score': score.provenance, 'n_paths': cfg.n_paths, 'n_steps': cfg.n_steps,
            'excluded': result.excluded, 'seed': self.seed,
        })

        self.logger.info(f"📊 Среднее {summary['mean']:.5f}, std {summary['std']:.5f}, "
                         f"медиана {summary['q50']:.5f}, исключено {result.excluded}")
        return EXIT_OK

    # ======================================================================
    # dsm-fit
    # ======================================================================

    def cmd_dsm_fit(self, config: RunConfig, manifest: RunManifest) -> int:
        """Линейная регрессия скора по DSM-потере на срезах времени"""
        spec = process_from_config(config, 'process')
        prior = prior_from_config(config, 'prior')
        n = config.get_int('dsm.n', 10_000)
        if n < 1:
            raise ConfigError('dsm.n', f"размер выборки должен быть положительным: {n}")
        t_slices = config.get_floats('dsm.t_slices')
        n_mc = config.get_int('dsm.n_mc', 1)
        basis = resolve_basis([b.strip() for b in config.get_str('dsm.basis').split(',')]) \
            if config.get('dsm.basis') else None

        data_stream, fit_stream = RngStream(self.seed).spawn(2)
        data = np.asarray(prior.sample(data_stream, n), dtype=float)
        model = fit_basis_score(spec, data, t_slices, basis, n_mc, fit_stream, max_workers=self.threads)

        write_csv(model.coefficients_frame(), self._path('dsm_coefficients.csv'), manifest, config.to_lines())
        write_sidecar(self._path('dsm_fit.meta'), manifest, {
            'family': spec.family, 'basis': ','.join(f.name for f in model.basis),
            'n': n, 'n_mc': n_mc, 'max_condition': float(model.conditions.max()),
        })
        return EXIT_OK

    # ======================================================================
    # eb-run
    # ======================================================================

    def cmd_eb_run(self, config: RunConfig, manifest: RunManifest) -> int:
        """Эмпирический Байес: гистограмма, сплайн Линдси, оценки и RMSE"""
        kind = config.get_str('eb.kind')
        prior = prior_from_config(config, 'prior') if config.section('prior') else None
        sigma = config.get_float('eb.sigma') if kind in ('gbm', 'bm_log') else None
        n = config.get_int('eb.n', 5000)
        n_bins = config.get_int('eb.bins', 63)
        df = config.get_int('eb.df', 10)
        repetitions = config.get_int('eb.repetitions', 10)

        try:
            report = run_eb_experiment(kind, prior, sigma, n, n_bins, df, self.seed, repetitions)
        except TweedieLabError as e:
            if kind not in ('besq', 'gbm', 'bm_log'):
                raise ConfigError('eb.kind', str(e))
            raise

        lines = config.to_lines()
        write_csv(report.histogram.to_frame(), self._path('eb_histogram.csv'), manifest, lines)
        write_csv(report.curve, self._path('eb_curve.csv'), manifest, lines)
        write_csv(report.estimates, self._path('eb_estimates.csv'), manifest, lines)
        meta = {'kind': kind, 'rmse': report.rmse, 'baseline_rmse': report.baseline_rmse,
                'out_of_range': report.out_of_range}

        if kind != 'besq' and config.get_bool('eb.compare', False):
            comparison = compare_gbm_bm(sigma, n, n_bins, df, self.seed, repetitions, prior)
            write_csv(comparison, self._path('eb_compare.csv'), manifest, lines)
            meta['compare'] = 'eb_compare.csv'

        write_sidecar(self._path('eb_run.meta'), manifest, meta)
        return EXIT_OK
