"""global_glue モジュール"""

from .glue import (
    GLUE_RESIDUAL_TOL,
    SOLVE_TOL,
    ChartTarget,
    GlobalMetricSpec,
    OverlapSamples,
    OverlapSystem,
    ProductBulk,
    PsiSolution,
    RowTag,
    assemble_metric,
    build_product_bulk,
    build_system,
    certify_glue,
    count_equations,
    export_system_csv,
    fiber_component,
    glue,
    overlap_samples,
    restrict_to_base,
    solve_psi,
    target_components,
)

__all__ = [
    "GLUE_RESIDUAL_TOL",
    "SOLVE_TOL",
    "ChartTarget",
    "GlobalMetricSpec",
    "OverlapSamples",
    "OverlapSystem",
    "ProductBulk",
    "PsiSolution",
    "RowTag",
    "assemble_metric",
    "build_product_bulk",
    "build_system",
    "certify_glue",
    "count_equations",
    "export_system_csv",
    "fiber_component",
    "glue",
    "overlap_samples",
    "restrict_to_base",
    "solve_psi",
    "target_components",
]
