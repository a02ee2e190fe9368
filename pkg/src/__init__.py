__version__ = '0.1.0'

from .core import setup_logger, Settings, RunConfig

__all__ = ['__version__', 'setup_logger', 'Settings', 'RunConfig']
