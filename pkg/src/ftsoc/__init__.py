"""Cycle-level fault-tolerant micro-SoC simulator with fault-injection campaigns."""

from .config import ALL_CONFIGS, Protection, SocConfig

__version__ = "0.1.0"

__all__ = ["ALL_CONFIGS", "Protection", "SocConfig", "__version__"]
