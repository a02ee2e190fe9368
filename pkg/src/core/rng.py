"""
Детерминированные потоки случайных чисел
"""

from typing import List, Optional, Union

import numpy as np

from .errors import DomainError


class RngStream:
    """
    Расщепляемый генератор на основе счётчика (Philox)

    Каждый API, потребляющий случайность, принимает RngStream явно.
    Дочерние потоки, полученные через spawn, независимы и воспроизводимы.
    """

    def __init__(self, seed: Union[int, np.random.SeedSequence] = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._seed_seq = seed
        else:
            if int(seed) < 0:
                raise DomainError(f"seed должен быть неотрицательным: {seed}")
            self._seed_seq = np.random.SeedSequence(int(seed))
        self.generator = np.random.Generator(np.random.Philox(self._seed_seq))

    @property
    def entropy(self):
        return self._seed_seq.entropy

    def spawn(self, n: int) -> List['RngStream']:
        """Создаёт n независимых дочерних потоков"""
        return [RngStream(child) for child in self._seed_seq.spawn(n)]

    def standard_normal(self, size: Optional[Union[int, tuple]] = None):
        return self.generator.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def poisson(self, lam, size=None):
        return self.generator.poisson(lam, size)

    def gamma(self, shape, scale=1.0, size=None):
        return self.generator.gamma(shape, scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def __repr__(self) -> str:
        return f"RngStream(entropy={self._seed_seq.entropy}, spawn_key={self._seed_seq.spawn_key})"
