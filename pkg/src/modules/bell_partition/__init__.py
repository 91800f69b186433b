"""bell_partition モジュール"""

from .bells import BellFunction, bell_eval, bell_jet, boundary_difference_quotients
from .cover import (
    BALL_FRACTION,
    AtlasCover,
    CoverElement,
    ball_membership,
    build_cover,
    multiplicity_histogram,
    positivity_check,
)
from .manifolds import (
    CATALOG,
    FIBER_SAMPLE_BAND,
    INTERVAL_HALF_LENGTH,
    Chart,
    ManifoldSpec,
    catalog_manifold,
    circle,
    flat_patch,
    product_with_fiber,
    sphere_patch,
    torus2,
    user_manifold,
)

__all__ = [
    "BALL_FRACTION",
    "CATALOG",
    "FIBER_SAMPLE_BAND",
    "INTERVAL_HALF_LENGTH",
    "AtlasCover",
    "BellFunction",
    "Chart",
    "CoverElement",
    "ManifoldSpec",
    "ball_membership",
    "bell_eval",
    "bell_jet",
    "boundary_difference_quotients",
    "build_cover",
    "catalog_manifold",
    "circle",
    "flat_patch",
    "multiplicity_histogram",
    "positivity_check",
    "product_with_fiber",
    "sphere_patch",
    "torus2",
    "user_manifold",
]
