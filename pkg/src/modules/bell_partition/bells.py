"""
ベル関数

f(x) = exp(1/(‖x − c‖² − r²))  （‖x − c‖ < r）
f(x) = 0                         （それ以外）

閉球の外では 0、内部では解析的な滑らかな山型関数。
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from modules.errors import ExpansionOutsideSupport
from modules.jet_core import Jet, apply_function, jet_reciprocal

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BellFunction:
    """チャート ``chart_id`` の座標で定義したベル関数

    Attributes:
        chart_id: 反転に使う座標チャートの識別子
        center: 球の中心（チャート座標）
        radius: 台の半径 r > 0
    """

    chart_id: str
    center: np.ndarray = field(repr=False)
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if not self.radius > 0.0:
            raise ValueError(f"bell radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def peak(self) -> float:
        """中心での値 e^{−1/r²}"""
        return math.exp(-1.0 / self.radius**2)

    def to_dict(self) -> dict:
        return {"chart_id": self.chart_id, "center": self.center.tolist(), "radius": self.radius}


def _squared_distance(f: BellFunction, p: Sequence[float]) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != f.dim:
        raise ValueError(f"point has {p.shape[0]} coordinates, bell lives in {f.dim}")
    d = p - f.center
    return float(d @ d)


def bell_eval(f: BellFunction, p: Sequence[float]) -> float:
    """点 ``p``（チャート座標）でのベル関数の値"""
    gap = _squared_distance(f, p) - f.radius**2
    if gap >= 0.0:
        return 0.0
    return math.exp(1.0 / gap)


def bell_jet(f: BellFunction, about: Sequence[float], order: int) -> Jet:
    """内部の点 ``about`` のまわりのベル関数のジェット

    ‖about − c + t‖² − r² のジェットの逆数を exp に合成する。

    Raises:
        ExpansionOutsideSupport: ``about`` が開球の外にある場合
    """
    about = np.asarray(about, dtype=float).reshape(-1)
    if _squared_distance(f, about) >= f.radius**2:
        raise ExpansionOutsideSupport(
            f"cannot expand bell of chart {f.chart_id} about {about.tolist()}: outside the open ball"
        )
    dim = f.dim
    offset = about - f.center
    quadratic = Jet.constant(-(f.radius**2), dim, order)
    for k in range(dim):
        shifted = Jet.variable(k, dim, order, value=offset[k])
        quadratic = quadratic + shifted * shifted
    return apply_function("exp", jet_reciprocal(quadratic))


def boundary_difference_quotients(
    f: BellFunction,
    direction: Sequence[float],
    deltas: Sequence[float],
    orders: Sequence[int] = (1, 2, 3, 4),
) -> np.ndarray:
    """台の境界の内側から近づいたときの片側差分商

    中心から ``direction`` 方向に距離 r − δ の点で、刻み δ/4 の前進差分を
    各 δ・各階数について計算する。

    Returns:
        形状 (len(deltas), len(orders)) の配列
    """
    u = np.asarray(direction, dtype=float).reshape(-1)
    u = u / np.linalg.norm(u)
    out = np.zeros((len(deltas), len(orders)))
    for i, delta in enumerate(deltas):
        if not 0.0 < delta <= f.radius:
            raise ValueError(f"delta {delta} outside (0, r]")
        step = delta / 4.0
        base = f.center + (f.radius - delta) * u
        for j, m in enumerate(orders):
            values = np.array([bell_eval(f, base + k * step * u) for k in range(m + 1)])
            weights = np.array([(-1) ** (m - k) * math.comb(m, k) for k in range(m + 1)], dtype=float)
            out[i, j] = abs(float(weights @ values)) / step**m
    logger.debug(f"boundary difference quotients for chart {f.chart_id}: {out[-1].tolist()}")
    return out
