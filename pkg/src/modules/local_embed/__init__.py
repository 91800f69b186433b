"""local_embed モジュール"""

from .extension import (
    CONSTRAINT_TOL,
    EmbeddingResult,
    InitialData,
    SeedMetric,
    certify,
    constraint_components,
    extend_iterated,
    extend_metric,
    initial_data_solve,
)

__all__ = [
    "CONSTRAINT_TOL",
    "EmbeddingResult",
    "InitialData",
    "SeedMetric",
    "certify",
    "constraint_components",
    "extend_iterated",
    "extend_metric",
    "initial_data_solve",
]
