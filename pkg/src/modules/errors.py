"""
Error hierarchy for einstein-embed.

Every failure raised by a computation module derives from EinsteinEmbedError,
so the pipeline can catch one base class per task and still surface the
failing module in the report.
"""

from typing import Any, Optional, Sequence


class EinsteinEmbedError(Exception):
    """Base class for all einstein-embed errors."""

    module = "core"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        """Convert the error to a JSON-friendly dictionary."""
        data = {
            "type": type(self).__name__,
            "module": self.module,
            "message": self.message,
        }
        for key, value in self.details.items():
            data[key] = _plain(value)
        return data


def _plain(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


# jet_core

class JetError(EinsteinEmbedError):
    module = "jet_core"


class VariableCountMismatch(JetError):
    pass


class ZeroConstantTerm(JetError):
    """Reciprocal of a jet whose constant term vanishes (degenerate metric)."""


class CompositionDomainError(JetError):
    pass


# expr_parser

class ExpressionError(EinsteinEmbedError):
    module = "expr_parser"


class ExpressionSyntaxError(ExpressionError):
    """Malformed expression; ``offset`` is the 1-based character column."""

    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} (offset {offset})", offset=offset, source=source)
        self.offset = offset
        self.source = source


class UnknownSymbol(ExpressionError):
    def __init__(self, name: str, offset: int, source: str = ""):
        super().__init__(
            f"unknown symbol '{name}' (offset {offset})",
            name=name,
            offset=offset,
            source=source,
        )
        self.name = name
        self.offset = offset


class SingularExpansion(ExpressionError):
    pass


# chart_geometry

class GeometryError(EinsteinEmbedError):
    module = "chart_geometry"


class SingularMetric(GeometryError):
    pass


class DimensionTwoWithNonzeroLambda(GeometryError):
    pass


# bell_partition

class PartitionError(EinsteinEmbedError):
    module = "bell_partition"


class ExpansionOutsideSupport(PartitionError):
    pass


class CoverageGap(PartitionError):
    def __init__(self, witness: Sequence[float]):
        super().__init__(f"sample point {list(witness)} lies in no chart", witness=list(witness))
        self.witness = list(witness)


class MultiplicityExceeded(PartitionError):
    def __init__(self, witness: Sequence[float], count: int, bound: int):
        super().__init__(
            f"sample point {list(witness)} lies in {count} charts (bound {bound})",
            witness=list(witness),
            count=count,
            bound=bound,
        )
        self.witness = list(witness)
        self.count = count
        self.bound = bound


# local_embed

class EmbeddingError(EinsteinEmbedError):
    module = "local_embed"


class ConstraintSolveFailed(EmbeddingError):
    def __init__(self, best_residual: float, iterations: int):
        super().__init__(
            f"constraint solve stagnated after {iterations} iterations "
            f"(best residual {best_residual:.3e})",
            best_residual=best_residual,
            iterations=iterations,
        )
        self.best_residual = best_residual
        self.iterations = iterations


class RecursionBreakdown(EmbeddingError):
    def __init__(self, order: int, reason: str):
        super().__init__(f"y-recursion broke down at order {order}: {reason}", order=order)
        self.order = order


# global_glue

class GlueError(EinsteinEmbedError):
    module = "global_glue"


class InconsistentTargets(GlueError):
    def __init__(self, residual: float, tolerance: float):
        super().__init__(
            f"least-squares residual {residual:.3e} exceeds {tolerance:.1e}",
            residual=residual,
            tolerance=tolerance,
        )
        self.residual = residual
        self.tolerance = tolerance


class RankDeficiencyBeyondTolerance(GlueError):
    def __init__(self, rank: int, expected: int):
        super().__init__(
            f"numerical rank {rank} below the {expected} independent rows expected",
            rank=rank,
            expected=expected,
        )
        self.rank = rank
        self.expected = expected


class DegenerateFiberComponent(GlueError):
    def __init__(self, point: Sequence[float]):
        super().__init__(f"bell sum vanishes at {list(point)}", point=list(point))
        self.point = list(point)


class MissingPsiData(GlueError):
    def __init__(self, point: Sequence[float]):
        super().__init__(f"no solved psi data at {list(point)}", point=list(point))
        self.point = list(point)


# homotopy_calc

class HomotopyError(EinsteinEmbedError):
    module = "homotopy_calc"


class UnknownManifold(HomotopyError):
    pass


class LevelOutOfRange(HomotopyError):
    pass


# manifest

class ManifestError(EinsteinEmbedError, ValueError):
    module = "manifest"

    def __init__(self, message: str, path: Optional[str] = None, **details: Any):
        super().__init__(message, path=path, **details)
        self.path = path
