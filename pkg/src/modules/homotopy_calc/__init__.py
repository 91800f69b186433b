"""homotopy_calc モジュール"""

from .catalog import (
    DEFAULT_CATALOG,
    M_MAX,
    CatalogEntry,
    HomotopyCatalog,
    product_table,
    split_product,
)
from .groups import (
    GroupExpr,
    cyclic,
    direct_product,
    direct_sum,
    free_abelian,
    named,
    normalize,
    parse_group,
    trivial,
)

__all__ = [
    "DEFAULT_CATALOG",
    "M_MAX",
    "CatalogEntry",
    "GroupExpr",
    "HomotopyCatalog",
    "cyclic",
    "direct_product",
    "direct_sum",
    "free_abelian",
    "named",
    "normalize",
    "parse_group",
    "product_table",
    "split_product",
    "trivial",
]
