"""
多様体カタログ

多様体はパラメータ空間（座標ごとに周期 2π を持ちうる）上の有限個の箱型チャートで表す。
チャート j の局所座標は u = wrap(p − c_j) で、チャート間の座標変換は平行移動（ヤコビ行列は単位行列）。
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from modules.errors import ManifestError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# 区間ファイバー (−L, L) の半幅
INTERVAL_HALF_LENGTH = 3.2

# 積多様体のファイバー方向のサンプル帯
FIBER_SAMPLE_BAND = (-0.3, 0.3)


@dataclass(frozen=True)
class Chart:
    """箱型チャート（パラメータ空間の中心と各座標の半幅）"""

    chart_id: str
    center: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        half = np.asarray(self.half_widths, dtype=float).reshape(-1)
        if center.shape != half.shape:
            raise ValueError(f"chart {self.chart_id}: center and half_widths differ in length")
        if np.any(half <= 0.0):
            raise ValueError(f"chart {self.chart_id}: half widths must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_widths", half)

    def to_dict(self) -> dict:
        return {"id": self.chart_id, "center": self.center.tolist(), "half_widths": self.half_widths.tolist()}


@dataclass(frozen=True)
class ManifoldSpec:
    """チャートで与えた多様体

    Attributes:
        name: 識別子
        periods: 座標ごとの周期（周期なしは None）
        bounds: 座標ごとのサンプル範囲 (下限, 上限)
        charts: チャートの列
        metric: 計量成分の式の表（パラメータ座標 x1..xd）
        fiber: 積多様体のファイバーの種類（``interval`` / ``circle``、積でなければ None）
    """

    name: str
    periods: tuple
    bounds: np.ndarray
    charts: tuple
    metric: tuple = field(default=())
    fiber: Optional[str] = None

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if bounds.shape[0] != len(self.periods):
            raise ValueError(f"manifold {self.name}: bounds and periods differ in length")
        object.__setattr__(self, "bounds", bounds)
        for chart in self.charts:
            if chart.center.shape[0] != self.dim:
                raise ValueError(f"chart {chart.chart_id} does not have {self.dim} coordinates")

    @property
    def dim(self) -> int:
        return len(self.periods)

    def wrap(self, displacement: np.ndarray) -> np.ndarray:
        """周期座標の変位を (−P/2, P/2] に寄せる"""
        d = np.array(displacement, dtype=float)
        for k, period in enumerate(self.periods):
            if period:
                d[..., k] = (d[..., k] + period / 2) % period - period / 2
        return d

    def local_coordinates(self, chart: Chart, p: Sequence[float]) -> np.ndarray:
        return self.wrap(np.asarray(p, dtype=float) - chart.center)

    def in_chart(self, chart: Chart, p: Sequence[float]) -> bool:
        return bool(np.all(np.abs(self.local_coordinates(chart, p)) < chart.half_widths))

    def sample_grid(self, per_axis: int = 8) -> np.ndarray:
        """サンプル範囲上の格子点（周期座標は右端を含めない）"""
        axes = []
        for (lo, hi), period in zip(self.bounds, self.periods):
            if period:
                axes.append(lo + (hi - lo) * np.arange(per_axis) / per_axis)
            else:
                axes.append(np.linspace(lo, hi, per_axis))
        return np.array(list(itertools.product(*axes)), dtype=float)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "periods": list(self.periods),
            "bounds": self.bounds.tolist(),
            "charts": [c.to_dict() for c in self.charts],
            "metric": [list(row) for row in self.metric],
            "fiber": self.fiber,
        }


def _flat_metric(dim: int) -> tuple:
    return tuple(tuple("1" if a == b else "0" for b in range(dim)) for a in range(dim))


def circle() -> ManifoldSpec:
    """2 本の弧で覆った円周"""
    half = np.array([0.75 * math.pi])
    charts = (Chart("arc0", [0.0], half), Chart("arc1", [math.pi], half))
    return ManifoldSpec("circle", (TWO_PI,), [[0.0, TWO_PI]], charts, _flat_metric(1))


def torus2() -> ManifoldSpec:
    """平坦な 2 次元トーラス。4 枚のチャートを煉瓦積みに並べる"""
    half = np.full(2, 0.78 * math.pi)
    charts = (
        Chart("A0", [0.0, 0.0], half),
        Chart("A1", [math.pi, 0.0], half),
        Chart("B0", [0.5 * math.pi, math.pi], half),
        Chart("B1", [1.5 * math.pi, math.pi], half),
    )
    return ManifoldSpec("torus2", (TWO_PI, TWO_PI), [[0.0, TWO_PI]] * 2, charts, _flat_metric(2))


def flat_patch(dim: int) -> ManifoldSpec:
    """x1 ∈ [−1, 1]、他の座標 ∈ [−0.5, 0.5] の平坦な領域。x1 方向に重なる 2 枚のチャート"""
    if dim not in (1, 2, 3):
        raise ValueError(f"flat_patch supports dimensions 1..3, got {dim}")
    half = np.full(dim, 1.2)
    half[0] = 1.0
    left = np.zeros(dim)
    left[0] = -0.5
    right = np.zeros(dim)
    right[0] = 0.5
    charts = (Chart("left", left, half), Chart("right", right, half))
    bounds = [[-1.0, 1.0]] + [[-0.5, 0.5]] * (dim - 1)
    return ManifoldSpec(f"flat_patch{dim}", (None,) * dim, bounds, charts, _flat_metric(dim))


def sphere_patch() -> ManifoldSpec:
    """赤道付近の単位球面 dθ² + sin²θ dφ²"""
    center = [0.5 * math.pi, 0.0]
    charts = (Chart("equator", center, [0.8, 0.8]),)
    bounds = [[0.5 * math.pi - 0.4, 0.5 * math.pi + 0.4], [-0.4, 0.4]]
    return ManifoldSpec("sphere_patch", (None, None), bounds, charts, (("1", "0"), (None, "sin(x1)^2")))


def user_manifold(data: dict) -> ManifoldSpec:
    """マニフェストのチャート一覧から多様体を作る

    Raises:
        ManifestError: 必須項目の欠落・次元の不一致
    """
    try:
        dim = int(data["dim"])
        periodic = data.get("periodic", [False] * dim)
        periods = tuple(TWO_PI if flag else None for flag in periodic)
        bounds = data.get("bounds") or [[0.0, TWO_PI] if flag else [-1.0, 1.0] for flag in periodic]
        charts = tuple(
            Chart(str(c.get("id", f"chart{k}")), c["center"], c["half_widths"])
            for k, c in enumerate(data["charts"])
        )
        metric = tuple(tuple(row) for row in data.get("metric", _flat_metric(dim)))
        return ManifoldSpec(str(data.get("name", "user")), periods, bounds, charts, metric)
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"invalid chart list: {e}", path="manifold") from e


CATALOG = {
    "circle": circle,
    "torus2": torus2,
    "flat_patch1": lambda: flat_patch(1),
    "flat_patch2": lambda: flat_patch(2),
    "flat_patch3": lambda: flat_patch(3),
    "sphere_patch": sphere_patch,
}


def catalog_manifold(name: str) -> ManifoldSpec:
    if name not in CATALOG:
        raise ManifestError(f"unknown catalog manifold '{name}' (known: {sorted(CATALOG)})", path="manifold")
    return CATALOG[name]()


def product_with_fiber(base: ManifoldSpec, fiber: str = "interval") -> ManifoldSpec:
    """底空間 ``base`` と 1 次元ファイバーの積 E = M × F

    区間ファイバーは 1 枚のチャート、円周ファイバーは底空間のチャートごとに
    弧の位置をずらした（煉瓦積みの）2 枚のチャートを使う。計量は g_M ⊕ dy²。
    """
    charts = []
    if fiber == "interval":
        for chart in base.charts:
            charts.append(
                Chart(
                    f"{chart.chart_id}xI",
                    np.append(chart.center, 0.0),
                    np.append(chart.half_widths, INTERVAL_HALF_LENGTH),
                )
            )
        period, bounds = None, list(FIBER_SAMPLE_BAND)
    elif fiber == "circle":
        half = 0.75 * math.pi
        for k, chart in enumerate(base.charts):
            offset = 0.0 if k % 2 == 0 else 0.5 * math.pi
            for a in range(2):
                charts.append(
                    Chart(
                        f"{chart.chart_id}xS{a}",
                        np.append(chart.center, offset + a * math.pi),
                        np.append(chart.half_widths, half),
                    )
                )
        period, bounds = TWO_PI, [0.0, TWO_PI]
    else:
        raise ManifestError(f"unknown fiber '{fiber}' (expected interval or circle)", path="fiber")

    dim = base.dim
    metric = [list(row) + ["0"] for row in (base.metric or _flat_metric(dim))]
    metric.append(["0"] * dim + ["1"])
    return ManifoldSpec(
        f"{base.name} x {fiber}",
        base.periods + (period,),
        np.vstack([base.bounds, [bounds]]),
        tuple(charts),
        tuple(tuple(row) for row in metric),
        fiber=fiber,
    )

