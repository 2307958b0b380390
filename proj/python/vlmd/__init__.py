"""Variable-length masked diffusion on toy infilling tasks (C++ core)."""

from ._core import (
    ConfigError,
    GenerationAborted,
    augment,
    default_config,
    evaluate,
    gen_corpus,
    normalize_config,
    trace,
    train,
)

__all__ = [
    "ConfigError",
    "GenerationAborted",
    "augment",
    "default_config",
    "evaluate",
    "gen_corpus",
    "normalize_config",
    "trace",
    "train",
]
