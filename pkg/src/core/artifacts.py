"""
Запись артефактов: CSV с заголовком-манифестом и файлы key=value
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Union

import pandas as pd

logger = logging.getLogger('TweedieLab.Artifacts')

FLOAT_FORMAT = '%.17g'


@dataclass(frozen=True)
class RunManifest:
    """Описание запуска, повторяемое в заголовке каждого выходного файла"""
    subcommand: str
    config_path: str
    seed: int
    out_dir: str
    version: str

    def header_lines(self) -> List[str]:
        return [
            'tweedie-lab run manifest',
            f'subcommand={self.subcommand}',
            f'config={self.config_path}',
            f'seed={self.seed}',
            f'out={self.out_dir}',
            f'version={self.version}',
        ]


def _header(manifest: RunManifest, extra: Optional[Iterable[str]]) -> str:
    lines = manifest.header_lines()
    if extra:
        lines.append('config:')
        lines.extend(f'  {line}' for line in extra)
    return ''.join(f'# {line}\n' for line in lines)


def write_csv(frame: pd.DataFrame, path: Union[str, Path], manifest: RunManifest,
              config_lines: Optional[Iterable[str]] = None) -> Path:
    """CSV: заголовок-комментарий, затем таблица с 17 значащими цифрами"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(_header(manifest, config_lines))
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.debug(f"Записан {path} ({len(frame)} строк)")
    return path


def write_sidecar(path: Union[str, Path], manifest: RunManifest, values: Mapping[str, object]) -> Path:
    """Файл метаданных key=value в порядке вставки"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(_header(manifest, None))
        for key, value in values.items():
            text = repr(value) if isinstance(value, float) else str(value)
            handle.write(f'{key}={text}\n')
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Чтение CSV, записанного write_csv (строки заголовка пропускаются)"""
    return pd.read_csv(path, comment='#')
