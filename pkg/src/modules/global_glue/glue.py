"""
積多様体 E = M × F 上の大域的な計量の貼り合わせ

各チャート Q_j の局所アインシュタイン拡張のファイバー成分 Φ_(j) を目標にして、

    Φ_(j)(p) = Σ_{i, a} f_i(p) ψ^{(i,a)}(A_a u_i(p)) s_{i,a}²

を重なりのサンプル点 p ごとに（ジェット係数ごとに）課す。ψ^{(i,a)} はクラス [W_i] の a 番目の
座標系 w = A_a u でのジェットで、s_{i,a} はファイバー方向の倍率 ∂w_y/∂y。
得られた ψ から g_E = π*g_M + (Σ f ψ s²) dy² を組み立て、y = 0 で g_M に戻ることを確かめる。
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import lstsq
from scipy.sparse import csgraph
from scipy.stats import qmc

from modules.bell_partition import (
    AtlasCover,
    ManifoldSpec,
    ball_membership,
    bell_jet,
    build_cover,
    positivity_check,
    product_with_fiber,
)
from modules.chart_geometry import ChartMetric, einstein_residual, metric_from_expressions, residual_norm
from modules.errors import (
    DegenerateFiberComponent,
    GlueError,
    InconsistentTargets,
    MissingPsiData,
    RankDeficiencyBeyondTolerance,
)
from modules.jet_core import (
    JET_ATOL,
    Jet,
    basis_size,
    insert_variable,
    jet_mul,
    jet_substitute,
    monomial_basis,
    slice_variable,
    substitution_matrix,
)
from modules.local_embed import EmbeddingResult, SeedMetric, certify, extend_metric

logger = logging.getLogger(__name__)

# ψ の最小二乗解の残差の上限
SOLVE_TOL = 1e-8

# 組み立てた計量のアインシュタイン残差の上限
GLUE_RESIDUAL_TOL = 1e-6

# 組み立てた残差 ≤ LOCALITY_FACTOR × max(チャートごとの残差, LOCALITY_FLOOR)
LOCALITY_FACTOR = 10.0
LOCALITY_FLOOR = 1e-6

# 重なりのパターンを探す Halton 点の数
HALTON_DRAWS = 4096


def count_equations(n: int) -> int:
    """方程式系 (Σ1)…(Σ(n+2)) の方程式の総数 M = 2n + 5 + Σ_{t=2}^{n} (n+3−t)⋯(n+2)/t!"""
    if n < 1:
        raise ValueError(f"base dimension must be >= 1, got {n}")
    total = 2 * n + 5
    for t in range(2, n + 1):
        total += math.prod(range(n + 3 - t, n + 3)) // math.factorial(t)
    return total


@dataclass(frozen=True)
class ProductBulk:
    """底空間 M とファイバー F の積と、その上の被覆

    Attributes:
        base: 底空間
        fiber: ファイバーの種類（``interval`` / ``circle``）
        manifold: 積多様体 E
        atlas: E の被覆
    """

    base: ManifoldSpec
    fiber: str
    manifold: ManifoldSpec
    atlas: AtlasCover

    @property
    def n(self) -> int:
        return self.base.dim

    @property
    def N(self) -> int:
        return self.atlas.N

    def project(self, p: Sequence[float]) -> np.ndarray:
        """π: E → M"""
        return np.asarray(p, dtype=float)[: self.n]

    def fiber_coordinate(self, p: Sequence[float]) -> float:
        """pr_F: E → F"""
        return float(np.asarray(p, dtype=float)[self.n])

    def to_dict(self) -> dict:
        return {
            "base": self.base.name,
            "fiber": self.fiber,
            "n": self.n,
            "N": self.N,
            "equations": count_equations(self.n),
            "cover": self.atlas.to_dict(),
        }


def build_product_bulk(
    base: ManifoldSpec,
    fiber: str = "interval",
    N: Optional[int] = None,
    seed: int = 0,
    sample_points: Optional[np.ndarray] = None,
) -> ProductBulk:
    """積多様体と被覆を作る。N を省略すると M + 1"""
    N = count_equations(base.dim) + 1 if N is None else N
    manifold = product_with_fiber(base, fiber)
    atlas = build_cover(manifold, N, sample_points=sample_points, seed=seed)
    logger.info(f"Product bulk {manifold.name}: {len(atlas.elements)} charts, N={N}")
    return ProductBulk(base, fiber, manifold, atlas)


@dataclass(frozen=True)
class ChartTarget:
    """チャート Q_j の局所拡張とそのファイバー成分 Φ_(j)（チャート中心のまわりのジェット）"""

    index: int
    extension: EmbeddingResult
    phi: Jet
    certificate: dict

    def at(self, displacement: Sequence[float]) -> Jet:
        """チャート中心から ``displacement`` だけずれた点のまわりに Φ を展開し直す"""
        nvars, order = self.phi.nvars, self.phi.order
        inners = [Jet.variable(k, nvars, order, value=float(d)) for k, d in enumerate(displacement)]
        return jet_substitute(self.phi, inners)


def target_components(
    bulk: ProductBulk, lam: float = 0.0, order: int = 4, epsilon: int = 1
) -> dict:
    """各チャートで底空間の計量を拡張し、ファイバー成分 Φ_(j) = εφ² を取り出す

    底空間の中心が同じチャート（円周ファイバーの 2 枚など）は拡張を共有する。

    Returns:
        {チャート番号: ChartTarget}
    """
    n = bulk.n
    cache: dict = {}
    targets = {}
    for element in bulk.atlas.elements:
        center = tuple(float(c) for c in element.chart.center[:n])
        if center not in cache:
            seed = SeedMetric.from_expressions(bulk.base.metric, center, order)
            result = extend_metric(seed, lam, epsilon, order)
            cache[center] = (result, certify(result))
        result, certificate = cache[center]
        targets[element.index] = ChartTarget(element.index, result, result.bulk.fiber_component(), certificate)
    logger.info(f"Chart targets: {len(cache)} distinct extensions for {len(targets)} charts")
    return targets


@dataclass(frozen=True)
class OverlapSamples:
    """サンプル点と、各点を含む球の番号の集合"""

    points: np.ndarray
    patterns: tuple

    def pattern_counts(self) -> dict:
        counts: dict = {}
        for pattern in self.patterns:
            key = ",".join(str(j) for j in sorted(pattern))
            counts[key] = counts.get(key, 0) + 1
        return counts


def overlap_samples(bulk: ProductBulk, per_overlap: int = 8, draws: int = HALTON_DRAWS) -> OverlapSamples:
    """重なりのパターン（球の部分集合）ごとに最大 ``per_overlap`` 点の Halton 点を集める"""
    manifold = bulk.manifold
    sampler = qmc.Halton(d=manifold.dim, scramble=False)
    raw = qmc.scale(sampler.random(draws), manifold.bounds[:, 0], manifold.bounds[:, 1])
    buckets: dict = {}
    for p in raw:
        pattern = frozenset(ball_membership(bulk.atlas, p))
        if not pattern:
            continue
        bucket = buckets.setdefault(pattern, [])
        if len(bucket) < per_overlap:
            bucket.append(p)
    points, patterns = [], []
    for pattern in sorted(buckets, key=lambda s: (len(s), sorted(s))):
        if len(buckets[pattern]) < per_overlap:
            logger.debug(f"pattern {sorted(pattern)} has only {len(buckets[pattern])} samples")
        for p in buckets[pattern]:
            points.append(p)
            patterns.append(pattern)
    return OverlapSamples(np.array(points, dtype=float), tuple(patterns))


@dataclass(frozen=True)
class RowTag:
    """方程式の行の由来

    Attributes:
        point: サンプル点の番号
        chart: 目標 Φ_(j) を与えたチャート
        level: 方程式系 Σk の k（= n + 3 − 点を含むチャートの数）
        compat: 同じ点の 2 枚目以降のチャートの行（両立条件）
        exponent: ジェット係数の指数
    """

    point: int
    chart: int
    level: int
    compat: bool
    exponent: tuple


@dataclass(frozen=True)
class OverlapSystem:
    """ψ のジェット係数についての線形方程式系"""

    matrix: sparse.csr_matrix
    rhs: np.ndarray
    row_tags: tuple
    blocks: dict
    samples: OverlapSamples
    order: int
    N: int
    dim: int
    substitutions: dict = field(repr=False)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[1]

    def level_counts(self) -> dict:
        counts: dict = {}
        for tag in self.row_tags:
            counts[tag.level] = counts.get(tag.level, 0) + 1
        return dict(sorted(counts.items()))

    def to_dict(self) -> dict:
        return {
            "rows": self.n_rows,
            "unknowns": self.n_unknowns,
            "nonzeros": int(self.matrix.nnz),
            "coefficient_order": self.order,
            "N": self.N,
            "sample_points": int(len(self.samples.points)),
            "patterns": self.samples.pattern_counts(),
            "rows_by_level": {str(k): v for k, v in self.level_counts().items()},
            "compatibility_rows": sum(1 for t in self.row_tags if t.compat),
        }


def _w_substitutions(atlas: AtlasCover, order: int) -> dict:
    """座標系 w = A u の代入行列（ψ(w) の係数 @ 行列 = ψ(A u) の係数）"""
    dim = atlas.dim
    units = [tuple(int(k == l) for k in range(dim)) for l in range(dim)]
    out = {}
    for element in atlas.elements:
        for a, A in enumerate(element.transforms):
            inners = [Jet.from_terms(dim, order, {units[l]: A[k, l] for l in range(dim)}) for k in range(dim)]
            out[(element.index, a)] = substitution_matrix(inners, dim, order)[0]
    return out


def _multiplication_matrix(f: Jet) -> np.ndarray:
    """列 c が f × (基底 c の単項式) の係数になる行列"""
    size = basis_size(f.nvars, f.order)
    columns = []
    for c in range(size):
        unit = np.zeros(size)
        unit[c] = 1.0
        columns.append(jet_mul(f, Jet(f.nvars, f.order, unit)).coeffs)
    return np.column_stack(columns)


def build_system(
    bulk: ProductBulk, targets: dict, samples: OverlapSamples, coeff_order: int = 3
) -> OverlapSystem:
    """重なりのサンプル点ごとの方程式を組み立てる

    点 p の未知数は、p を含む球 B_i と座標系 a ごとの ψ^{(i,a)} のジェット係数。
    p を含むすべてのチャート Q_j について同じ未知数で Φ_(j)(p) を表す行を作る。

    Raises:
        GlueError: 未知数が方程式より多くならない場合
    """
    n = bulk.n
    atlas = bulk.atlas
    dim = atlas.dim
    K = coeff_order
    size = basis_size(dim, K)
    basis = monomial_basis(dim, K)
    if bulk.N < count_equations(n) + 1:
        logger.warning(f"N={bulk.N} is below M+1={count_equations(n) + 1}")
    substitutions = _w_substitutions(atlas, K)

    rows, cols, vals, rhs, tags = [], [], [], [], []
    blocks: dict = {}
    next_col = 0
    for p_index, (p, pattern) in enumerate(zip(samples.points, samples.patterns)):
        members = sorted(pattern)
        level = n + 3 - len(members)
        local = []
        for i in members:
            element = atlas.elements[i]
            f = bell_jet(element.bell, atlas.local_coordinates(i, p), K)
            weights = _multiplication_matrix(f)
            for a, A in enumerate(element.transforms):
                blocks[(p_index, i, a)] = next_col
                local.append((next_col, A[n, n] ** 2 * (weights @ substitutions[(i, a)].T)))
                next_col += size

        for position, j in enumerate(members):
            target = targets[j]
            if target.phi.order < K:
                raise ValueError(f"chart target order {target.phi.order} below coefficient order {K}")
            phi = target.at(atlas.local_coordinates(j, p)).truncate(K)
            for r in range(size):
                row = len(rhs)
                for start, block in local:
                    nonzero = np.nonzero(block[r])[0]
                    rows.extend([row] * len(nonzero))
                    cols.extend((start + nonzero).tolist())
                    vals.extend(block[r, nonzero].tolist())
                rhs.append(phi.coeffs[r])
                tags.append(RowTag(p_index, j, level, position > 0, basis[r]))

    matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(len(rhs), next_col))
    if matrix.shape[1] <= matrix.shape[0]:
        raise GlueError(f"system is not underdetermined: {matrix.shape[0]} rows, {matrix.shape[1]} unknowns")
    logger.info(
        f"Overlap system: {matrix.shape[0]} rows, {matrix.shape[1]} unknowns, "
        f"{len(samples.points)} sample points"
    )
    return OverlapSystem(
        matrix, np.array(rhs, dtype=float), tuple(tags), blocks, samples, K, bulk.N, dim, substitutions
    )


@dataclass(frozen=True)
class PsiSolution:
    """最小ノルム解と、連結成分ごとの解の集計"""

    coefficients: np.ndarray
    psis: dict
    residual: float
    rank: int
    expected_rank: int
    components: int

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "residual_tolerance": SOLVE_TOL,
            "rank": self.rank,
            "expected_rank": self.expected_rank,
            "components": self.components,
            "coefficient_norm": float(np.linalg.norm(self.coefficients)),
        }


def solve_psi(system: OverlapSystem) -> PsiSolution:
    """連結成分ごとに最小ノルムの最小二乗解を求める

    Raises:
        RankDeficiencyBeyondTolerance: 数値ランクが両立条件以外の行数に届かない
        InconsistentTargets: 残差が ``SOLVE_TOL`` を超える
    """
    A = system.matrix
    m, k = A.shape
    pattern = (A != 0).astype(np.int8)
    graph = sparse.bmat([[None, pattern], [pattern.T, None]])
    count, labels = csgraph.connected_components(graph, directed=False)
    primary = np.array([not t.compat for t in system.row_tags])

    x = np.zeros(k)
    rank = expected = 0
    worst = 0.0
    deficient = False
    for c in range(count):
        row_ids = np.nonzero(labels[:m] == c)[0]
        col_ids = np.nonzero(labels[m:] == c)[0]
        if row_ids.size == 0:
            continue
        b = system.rhs[row_ids]
        need = int(primary[row_ids].sum())
        expected += need
        if col_ids.size == 0:
            worst = max(worst, float(np.max(np.abs(b))))
            deficient = deficient or need > 0
            continue
        block = A[row_ids][:, col_ids].toarray()
        solution, _, block_rank, _ = lstsq(block, b)
        x[col_ids] = solution
        rank += int(block_rank)
        deficient = deficient or block_rank < need
        worst = max(worst, float(np.max(np.abs(block @ solution - b))))
    logger.info(f"Solved {count} components: rank {rank}/{expected}, residual {worst:.3e}")
    if deficient:
        raise RankDeficiencyBeyondTolerance(rank, expected)
    if worst > SOLVE_TOL:
        raise InconsistentTargets(worst, SOLVE_TOL)

    size = basis_size(system.dim, system.order)
    psis = {key: Jet(system.dim, system.order, x[start : start + size]) for key, start in system.blocks.items()}
    return PsiSolution(x, psis, worst, rank, expected, count)


@dataclass(frozen=True)
class GlobalMetricSpec:
    """貼り合わせた計量の材料

    Attributes:
        bulk: 積多様体と被覆
        lam: 宇宙定数 Λ
        order: ψ のジェットの次数
        samples: ψ を解いたサンプル点
        targets: {チャート番号: ChartTarget}
        psis: {(点, 球, 座標系): W 座標での ψ のジェット}
        substitutions: {(球, 座標系): w = A u の代入行列}
        solution: 解の集計
    """

    bulk: ProductBulk
    lam: float
    order: int
    samples: OverlapSamples
    targets: dict
    psis: dict
    substitutions: dict = field(repr=False)
    solution: Optional[PsiSolution] = field(default=None, repr=False)

    @property
    def bells(self) -> tuple:
        return tuple(e.bell for e in self.bulk.atlas.elements)

    def sample_index(self, p: Sequence[float]) -> Optional[int]:
        p = np.asarray(p, dtype=float)
        if len(self.samples.points) == 0:
            return None
        gaps = np.max(np.abs(self.bulk.manifold.wrap(self.samples.points - p)), axis=1)
        best = int(np.argmin(gaps))
        return best if gaps[best] <= 1e-12 else None


def glue(
    bulk: ProductBulk,
    lam: float = 0.0,
    order: int = 3,
    extension_order: int = 4,
    per_overlap: int = 8,
    epsilon: int = 1,
    samples: Optional[OverlapSamples] = None,
) -> tuple:
    """目標・サンプル点・方程式系・解を順に作る

    Returns:
        (GlobalMetricSpec, OverlapSystem)
    """
    targets = target_components(bulk, lam, max(extension_order, order), epsilon)
    samples = overlap_samples(bulk, per_overlap) if samples is None else samples
    system = build_system(bulk, targets, samples, order)
    solution = solve_psi(system)
    spec = GlobalMetricSpec(
        bulk, lam, order, samples, targets, solution.psis, system.substitutions, solution
    )
    return spec, system


def fiber_component(spec: GlobalMetricSpec, p: Sequence[float]) -> Jet:
    """点 ``p`` のまわりの Σ f ψ s²

    Raises:
        DegenerateFiberComponent: ``p`` がどの球にも含まれない（ベル関数の和が 0）
        MissingPsiData: ``p`` で ψ が解かれていない
    """
    p = np.asarray(p, dtype=float)
    atlas = spec.bulk.atlas
    n = spec.bulk.n
    members = ball_membership(atlas, p)
    if not members:
        raise DegenerateFiberComponent(p.tolist())
    index = spec.sample_index(p)
    if index is None:
        raise MissingPsiData(p.tolist())
    dim, K = atlas.dim, spec.order
    total = Jet.zero(dim, K)
    for i in members:
        element = atlas.elements[i]
        f = bell_jet(element.bell, atlas.local_coordinates(i, p), K)
        for a, A in enumerate(element.transforms):
            psi = spec.psis[(index, i, a)]
            composed = Jet(dim, K, psi.coeffs @ spec.substitutions[(i, a)])
            total = total + A[n, n] ** 2 * (f * composed)
    if abs(total.constant_term) < JET_ATOL:
        raise DegenerateFiberComponent(p.tolist())
    return total


def assemble_metric(spec: GlobalMetricSpec, p: Sequence[float]) -> ChartMetric:
    """点 ``p`` のまわりの g_E = π*g_M + (Σ f ψ s²) dy²

    カタログのチャート間の座標変換は平行移動なので、変位のジェットはどのチャートでも同じになる。
    """
    p = np.asarray(p, dtype=float)
    n = spec.bulk.n
    fiber = fiber_component(spec, p)
    base = metric_from_expressions(spec.bulk.base.metric, spec.bulk.project(p), spec.order)
    comps = np.empty((n + 1, n + 1), dtype=object)
    for a in range(n + 1):
        for b in range(n + 1):
            if a < n and b < n:
                comps[a, b] = insert_variable(base[a, b], n)
            elif a == n and b == n:
                comps[a, b] = fiber
            else:
                comps[a, b] = Jet.zero(n + 1, spec.order)
    return ChartMetric(comps)


def _restrict(g: ChartMetric, n: int) -> ChartMetric:
    comps = np.empty((n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            comps[a, b] = slice_variable(g[a, b], n, 0)
    return ChartMetric(comps)


def restrict_to_base(spec: GlobalMetricSpec, p: Sequence[float]) -> ChartMetric:
    """組み立てた計量の底空間ブロックの y = 0 での係数（g_M に一致する）"""
    return _restrict(assemble_metric(spec, p), spec.bulk.n)


def certify_glue(spec: GlobalMetricSpec, points: Optional[np.ndarray] = None) -> dict:
    """サンプル点で組み立てた計量を検証する

    Returns:
        組み立てた計量の残差の最大値、チャートごとの拡張の残差、局所性の比、
        底空間への制限の係数のずれ、ベル関数の和の正値性、``passed`` を含む辞書
    """
    n = spec.bulk.n
    points = spec.samples.points if points is None else np.asarray(points, dtype=float)
    worst = 0.0
    deviation = 0.0
    for p in points:
        g = assemble_metric(spec, p)
        worst = max(worst, residual_norm(einstein_residual(g, spec.lam)))
        restricted = _restrict(g, n)
        expected = metric_from_expressions(spec.bulk.base.metric, spec.bulk.project(p), spec.order)
        for a in range(n):
            for b in range(n):
                gap = np.abs(restricted[a, b].coeffs - expected[a, b].coeffs)
                deviation = max(deviation, float(np.max(gap)))

    per_chart = max(t.certificate["residual_norm"] for t in spec.targets.values())
    ratio = worst / max(per_chart, LOCALITY_FLOOR)
    positivity = positivity_check(spec.bulk.atlas, spec.bells, points)
    passed = (
        worst <= GLUE_RESIDUAL_TOL
        and deviation == 0.0
        and ratio <= LOCALITY_FACTOR
        and positivity["passed"]
        and all(t.certificate["passed"] for t in spec.targets.values())
    )
    logger.info(f"Glue certificate: residual {worst:.3e}, locality ratio {ratio:.3g}, passed={passed}")
    return {
        "assembled_residual": worst,
        "assembled_tolerance": GLUE_RESIDUAL_TOL,
        "chart_residual": per_chart,
        "locality_ratio": ratio,
        "locality_factor": LOCALITY_FACTOR,
        "restriction_deviation": deviation,
        "bell_sum_min": positivity["min_sum"],
        "points": int(len(points)),
        "passed": bool(passed),
    }


def export_system_csv(system: OverlapSystem, directory) -> list:
    """行列（非零要素）・右辺・行の由来を CSV に書き出す"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    coo = system.matrix.tocoo()
    paths = [directory / "matrix.csv", directory / "rhs.csv", directory / "rows.csv"]

    with paths[0].open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["row", "column", "value"])
        for r, c, v in zip(coo.row, coo.col, coo.data):
            writer.writerow([int(r), int(c), repr(float(v))])
    with paths[1].open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["row", "value"])
        for r, v in enumerate(system.rhs):
            writer.writerow([r, repr(float(v))])
    with paths[2].open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["row", "point", "chart", "level", "compat", "exponent"])
        for r, tag in enumerate(system.row_tags):
            writer.writerow([r, tag.point, tag.chart, tag.level, int(tag.compat), " ".join(map(str, tag.exponent))])
    logger.info(f"System exported to {directory}")
    return [str(p) for p in paths]
