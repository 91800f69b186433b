"""
チャート被覆 Q / W / B の構成

各チャート Q_j に対し、局所座標の原点を中心とする半径 r_j の球 B_j と、
N 個の異なる座標系（線形写像 A_1 = I, A_2, ..., A_N）からなるクラス [W_j] を作る。
被覆の重複度（1 点を含む球の数）は多様体の次元 + 1 以下でなければならない。
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import block_diag

from modules.errors import CoverageGap, MultiplicityExceeded
from .bells import BellFunction, bell_eval
from .manifolds import Chart, ManifoldSpec

logger = logging.getLogger(__name__)

# 球の半径 r_j = BALL_FRACTION × R_j（R_j はチャートに収まる最大半径）
BALL_FRACTION = 0.9

# 座標系の行列式の下限
MIN_ABS_DET = 0.1


@dataclass(frozen=True)
class CoverElement:
    """被覆の 1 要素（チャート Q_j、球 B_j、座標系のクラス [W_j]）"""

    index: int
    chart: Chart
    inscribed_radius: float
    radius: float
    transforms: tuple
    bell: BellFunction

    @property
    def chart_id(self) -> str:
        return self.chart.chart_id

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "chart": self.chart.to_dict(),
            "inscribed_radius": self.inscribed_radius,
            "radius": self.radius,
            "transforms": [a.tolist() for a in self.transforms],
        }


@dataclass(frozen=True)
class AtlasCover:
    manifold: ManifoldSpec
    elements: tuple
    N: int
    overlap_graph: np.ndarray
    multiplicity: dict

    @property
    def dim(self) -> int:
        return self.manifold.dim

    def local_coordinates(self, j: int, p: Sequence[float]) -> np.ndarray:
        return self.manifold.local_coordinates(self.elements[j].chart, p)

    def containing(self, p: Sequence[float]) -> list:
        return ball_membership(self, p)

    def bell_values(self, p: Sequence[float]) -> np.ndarray:
        return np.array([bell_eval(e.bell, self.local_coordinates(e.index, p)) for e in self.elements])

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold.name,
            "dim": self.dim,
            "N": self.N,
            "elements": [e.to_dict() for e in self.elements],
            "overlap_graph": self.overlap_graph.astype(int).tolist(),
            "multiplicity_histogram": {str(k): v for k, v in sorted(self.multiplicity.items())},
        }


def ball_membership(cover: AtlasCover, p: Sequence[float]) -> list:
    """点 ``p`` を含む球 B_j の番号の一覧"""
    members = []
    for e in cover.elements:
        u = cover.local_coordinates(e.index, p)
        if float(u @ u) < e.radius**2:
            members.append(e.index)
    return members


def multiplicity_histogram(cover: AtlasCover, points: np.ndarray) -> dict:
    """{含まれる球の数: 点の数}"""
    return dict(Counter(len(ball_membership(cover, p)) for p in points))


def _inscribed_radius(chart: Chart, rng: np.random.Generator, directions: int = 64) -> float:
    """箱に収まる球の最大半径を二分法で求める"""
    dim = chart.center.shape[0]
    probes = np.vstack([np.eye(dim), -np.eye(dim), rng.standard_normal((directions, dim))])
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    lo, hi = 0.0, float(np.max(chart.half_widths))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.all(np.abs(mid * probes) < chart.half_widths):
            lo = mid
        else:
            hi = mid
    return lo


def _coordinate_systems(N: int, dim: int, product: bool, rng: np.random.Generator) -> tuple:
    """A_1 = I と、直交行列 × diag(σ) の N−1 個の行列（積ならファイバー方向は別ブロック）"""
    base_dim = dim - 1 if product else dim
    systems = [np.eye(dim)]
    while len(systems) < N:
        q, _ = np.linalg.qr(rng.standard_normal((base_dim, base_dim)))
        block = q @ np.diag(rng.uniform(1.0, 1.5, size=base_dim))
        if product:
            scale = rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 1.5)
            a = block_diag(block, [[scale]])
        else:
            a = block
        if abs(np.linalg.det(a)) < MIN_ABS_DET:
            continue
        if min(np.linalg.norm(a - s) for s in systems) < 1e-3:
            continue
        systems.append(a)
    return tuple(systems)


def build_cover(
    manifold: ManifoldSpec,
    N: int,
    sample_points: Optional[np.ndarray] = None,
    seed: int = 0,
) -> AtlasCover:
    """多様体のチャート一覧から被覆を作り、サンプル点で被覆性と重複度を検査する

    Args:
        manifold: 多様体（カタログまたは利用者のチャート一覧）
        N: 各クラスの座標系の数（2 以上）
        sample_points: 検査する点。None ならサンプル範囲の 8 点/軸の格子
        seed: 座標系と二分法の方向を決める乱数の種

    Returns:
        AtlasCover

    Raises:
        CoverageGap: どの球にも含まれないサンプル点がある
        MultiplicityExceeded: 次元 + 1 個より多くの球に含まれるサンプル点がある
    """
    if N < 2:
        raise ValueError(f"each chart class needs N >= 2 coordinate systems, got {N}")
    rng = np.random.default_rng(seed)
    product = manifold.fiber is not None
    elements = []
    for j, chart in enumerate(manifold.charts):
        inscribed = _inscribed_radius(chart, rng)
        radius = BALL_FRACTION * inscribed
        bell = BellFunction(chart.chart_id, np.zeros(manifold.dim), radius)
        transforms = _coordinate_systems(N, manifold.dim, product, rng)
        elements.append(CoverElement(j, chart, inscribed, radius, transforms, bell))

    count = len(elements)
    graph = np.zeros((count, count), dtype=bool)
    for i in range(count):
        for j in range(count):
            gap = manifold.wrap(elements[j].chart.center - elements[i].chart.center)
            graph[i, j] = float(np.linalg.norm(gap)) < elements[i].radius + elements[j].radius

    cover = AtlasCover(manifold, tuple(elements), N, graph, {})
    points = manifold.sample_grid() if sample_points is None else np.asarray(sample_points, dtype=float)
    bound = manifold.dim + 1
    histogram: Counter = Counter()
    for p in points:
        members = ball_membership(cover, p)
        if not members:
            raise CoverageGap(p.tolist())
        if len(members) > bound:
            raise MultiplicityExceeded(p.tolist(), len(members), bound)
        histogram[len(members)] += 1
    object.__setattr__(cover, "multiplicity", dict(histogram))
    logger.info(
        f"Built cover for {manifold.name}: {count} charts, N={N}, "
        f"multiplicity histogram {dict(sorted(histogram.items()))} on {len(points)} samples"
    )
    return cover


def positivity_check(
    cover: AtlasCover, bells: Sequence[BellFunction], sample_points: np.ndarray
) -> dict:
    """サンプル点でのベル関数の和の最小値

    Returns:
        ``min_sum``, ``witness``（最小値を与えた点）, ``passed``（最小値 > 0）を含む辞書。
        和が有限でない点があればそこを witness として不合格にする

    Raises:
        ValueError: サンプル点が空
    """
    points = np.asarray(sample_points, dtype=float)
    if len(points) == 0:
        raise ValueError("positivity check needs at least one sample point")
    charts = {e.chart_id: e.index for e in cover.elements}
    min_sum, witness = np.inf, None
    for p in points:
        total = 0.0
        for bell in bells:
            j = charts[bell.chart_id]
            total += bell_eval(bell, cover.local_coordinates(j, p))
        if not np.isfinite(total):
            min_sum, witness = total, p
            break
        if total < min_sum:
            min_sum, witness = total, p
    passed = bool(np.isfinite(min_sum) and min_sum > 0.0)
    if not passed:
        logger.warning(f"Bell sum vanishes at {witness.tolist()}")
    return {
        "min_sum": float(min_sum),
        "witness": None if witness is None else witness.tolist(),
        "passed": passed,
        "samples": int(len(sample_points)),
    }
