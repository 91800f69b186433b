"""chart_geometry モジュール"""

from .curvature import (
    RESIDUAL_TOL,
    BulkChartMetric,
    ChartMetric,
    ChristoffelField,
    RicciField,
    StressEnergy,
    christoffel,
    contracted_bianchi,
    einstein_factor,
    einstein_residual,
    field_equation_residual,
    inverse_metric,
    metric_from_expressions,
    metric_signature,
    residual_norm,
    residual_norm_by_degree,
    ricci,
    scalar_curvature,
    transform_linear,
)
from .oracle import finite_difference_christoffel, finite_difference_ricci, metric_function

__all__ = [
    "RESIDUAL_TOL",
    "BulkChartMetric",
    "ChartMetric",
    "ChristoffelField",
    "RicciField",
    "StressEnergy",
    "christoffel",
    "contracted_bianchi",
    "einstein_factor",
    "einstein_residual",
    "field_equation_residual",
    "finite_difference_christoffel",
    "finite_difference_ricci",
    "inverse_metric",
    "metric_from_expressions",
    "metric_function",
    "metric_signature",
    "residual_norm",
    "residual_norm_by_degree",
    "ricci",
    "scalar_curvature",
    "transform_linear",
]
