"""Cultural localization of translated math word problems, plus an
evaluation kit for measuring model robustness to entity swaps."""

__version__ = "0.1.0"
