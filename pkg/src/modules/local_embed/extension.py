"""
余次元 1 の局所アインシュタイン拡張

種計量 g_ij(x)（n 次元）から、正規ゲージ φ ≡ 1 のバルク計量

    g̃_ij(x, y) dx^i dx^j + ε dy²,   g̃_ij(x, 0) = g_ij(x)

を y のテイラー級数として作る。手順:

1. 初期データ c⁽¹⁾_ij = ∂_y g̃_ij(x, 0) を、y = 0 での拘束条件
   （場の方程式残差の (A, y) 成分）が消えるように解く
2. ij 成分のアインシュタイン残差の y^k 係数から c⁽ᵏ⁺²⁾ を順に決める
3. 出来上がったバルク計量の残差を chart_geometry だけで測り直す
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import lstsq

from modules.chart_geometry import (
    RESIDUAL_TOL,
    BulkChartMetric,
    ChartMetric,
    RicciField,
    christoffel,
    einstein_factor,
    einstein_residual,
    field_equation_residual,
    inverse_metric,
    metric_from_expressions,
    residual_norm,
    residual_norm_by_degree,
    ricci,
)
from modules.errors import (
    ConstraintSolveFailed,
    RecursionBreakdown,
    SingularMetric,
    ZeroConstantTerm,
)
from modules.jet_core import Jet, basis_size, slice_variable

logger = logging.getLogger(__name__)

# y = 0 での拘束条件の合格基準
CONSTRAINT_TOL = 1e-8

# ガウス・ニュートン法の設定
MAX_ITERATIONS = 100
DAMPING = 0.5
MIN_STEP = 1e-6
KICK_SCALE = 1e-3

# ヤコビ行列の中心差分の刻み（拘束条件は c⁽¹⁾ の 2 次式なので差分は厳密）
JACOBIAN_STEP = 1e-4


@dataclass(frozen=True)
class SeedMetric:
    """拡張する n 次元の種計量（チャート原点のまわりのジェット）"""

    g: ChartMetric

    def __post_init__(self):
        if self.g.nvars != self.g.dim:
            raise ValueError(f"seed metric of dim {self.g.dim} must use {self.g.dim} variables, got {self.g.nvars}")
        # 原点で正則であること
        inverse_metric(self.g)

    @classmethod
    def from_expressions(
        cls, components: Sequence[Sequence[Optional[str]]], center: Sequence[float], order: int
    ) -> "SeedMetric":
        return cls(metric_from_expressions(components, center, order))

    @property
    def n(self) -> int:
        return self.g.dim


@dataclass(frozen=True)
class InitialData:
    """y = 0 での 1 階の係数 c⁽¹⁾ = 2(λ₀ g + s)"""

    c1: np.ndarray
    lambda0: float
    s: np.ndarray
    constraint_norm: float
    iterations: int


@dataclass(frozen=True)
class EmbeddingResult:
    """拡張の結果

    Attributes:
        seed: 種計量
        bulk: バルク計量（最後の変数が y）
        lam: 宇宙定数 Λ
        order: 打ち切り次数 K
        residual_norm: バルクのアインシュタイン残差の係数ノルム（次数 K−2 まで）
        constraint_norm: y = 0 での拘束条件の係数ノルム
        initial: 初期データ
    """

    seed: SeedMetric
    bulk: BulkChartMetric
    lam: float
    order: int
    residual_norm: float
    constraint_norm: float
    initial: Optional[InitialData] = field(default=None, repr=False)

    @property
    def epsilon(self) -> int:
        return self.bulk.epsilon

    def to_dict(self) -> dict:
        n = self.seed.n
        names = [f"x{k + 1}" for k in range(n)] + ["y"]
        block = self.bulk.base
        return {
            "seed_dim": n,
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "order": self.order,
            "lambda0": None if self.initial is None else self.initial.lambda0,
            "residual_norm": self.residual_norm,
            "constraint_norm": self.constraint_norm,
            "bulk_block": [[block[i, j].to_string(names) for j in range(n)] for i in range(n)],
            "fiber_component": self.bulk.fiber_component().to_string(names),
        }


def _assemble_block(layers: Sequence[Optional[np.ndarray]], n: int, order: int) -> ChartMetric:
    """y^m の係数（x のジェットの n×n 配列）から n+1 変数のブロック g̃_ij を作る"""
    comps = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(i, n):
            terms = {}
            for m, layer in enumerate(layers):
                if layer is None:
                    continue
                for mi, c in layer[i, j].terms().items():
                    terms[mi + (m,)] = c
            comps[i, j] = comps[j, i] = Jet.from_terms(n + 1, order, terms)
    return ChartMetric(comps)


def _seed_layer(seed: SeedMetric, order: int) -> np.ndarray:
    n = seed.n
    layer = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            layer[i, j] = seed.g[i, j].truncate(order)
    return layer


def constraint_components(
    seed: SeedMetric, c1: np.ndarray, lam: float, epsilon: int, order: int
) -> list:
    """y = 0 での拘束条件 (Ric − ½Rg + Λg)_{A,y} を x のジェットの列で返す（次数 K−2）"""
    n = seed.n
    block = _assemble_block([_seed_layer(seed, order), c1], n, order)
    bulk = BulkChartMetric(block, epsilon=epsilon).to_chart_metric()
    residual = field_equation_residual(bulk, None, lam)
    return [slice_variable(residual[a, n], n, 0) for a in range(n + 1)]


def _pairs(n: int) -> list:
    return [(i, j) for i in range(n) for j in range(i, n)]


def _c1_from(seed: SeedMetric, lambda0: float, x: np.ndarray, order: int) -> tuple:
    n = seed.n
    size = basis_size(n, order - 1)
    c1 = np.empty((n, n), dtype=object)
    s = np.empty((n, n), dtype=object)
    for k, (i, j) in enumerate(_pairs(n)):
        s[i, j] = s[j, i] = Jet(n, order - 1, x[k * size : (k + 1) * size])
        c1[i, j] = c1[j, i] = 2.0 * (lambda0 * seed.g[i, j].truncate(order - 1) + s[i, j])
    return c1, s


def _pack_guess(s_guess, n: int, order: int) -> np.ndarray:
    size = basis_size(n, order - 1)
    x = np.zeros(len(_pairs(n)) * size)
    if s_guess is None:
        return x
    for k, (i, j) in enumerate(_pairs(n)):
        entry = s_guess[i][j]
        if isinstance(entry, Jet):
            x[k * size : (k + 1) * size] = entry.truncate(order - 1).coeffs
        else:
            x[k * size] = float(entry)
    return x


def _fit_lambda0(seed: SeedMetric, lam: float, epsilon: int, order: int) -> float:
    """臍点的な初期データ c⁽¹⁾ = 2λ₀g について、原点でのハミルトン拘束を λ₀ の 2 次式で当てはめる"""
    n = seed.n
    zero = np.zeros(len(_pairs(n)) * basis_size(n, order - 1))
    q = {}
    for value in (-1.0, 0.0, 1.0):
        c1, _ = _c1_from(seed, value, zero, order)
        q[value] = constraint_components(seed, c1, lam, epsilon, order)[n].constant_term
    gamma = q[0.0]
    alpha = 0.5 * (q[1.0] + q[-1.0]) - gamma
    beta = 0.5 * (q[1.0] - q[-1.0])
    if abs(alpha) < 1e-12:
        return -gamma / beta if abs(beta) > 1e-12 else 0.0
    disc = beta * beta - 4.0 * alpha * gamma
    if disc < 0.0:
        return -beta / (2.0 * alpha)
    root = np.sqrt(disc)
    return float(max((-beta + root) / (2.0 * alpha), (-beta - root) / (2.0 * alpha)))


def initial_data_solve(
    seed: SeedMetric,
    lam: float,
    epsilon: int = 1,
    order: Optional[int] = None,
    initial_guess: Optional[tuple] = None,
    max_iterations: int = MAX_ITERATIONS,
    kick_seed: int = 0,
) -> InitialData:
    """y = 0 の拘束条件を満たす 1 階の係数 c⁽¹⁾ を求める

    c⁽¹⁾ = 2(λ₀ g + s) とおき、λ₀ は原点でのハミルトン拘束の 2 次式の根（実根がなければ頂点）、
    s の各ジェット係数は減衰つきガウス・ニュートン法で決める。

    Args:
        seed: 種計量
        lam: 宇宙定数 Λ
        epsilon: ファイバー方向の符号 ±1
        order: 打ち切り次数 K（省略時は種計量の次数）
        initial_guess: (λ₀, s) の初期値。λ₀ は固定され当てはめを行わない。s は n×n の表（Jet または定数）か None
        max_iterations: 反復の上限
        kick_seed: 探索が進まないときに s に加える摂動の乱数の種

    Returns:
        InitialData

    Raises:
        ConstraintSolveFailed: 反復が停滞した場合（最良の残差を報告）
        DimensionTwoWithNonzeroLambda: n = 1 かつ Λ ≠ 0
    """
    n = seed.n
    order = seed.g.order if order is None else order
    einstein_factor(n + 1, lam)

    if initial_guess is None:
        lambda0 = _fit_lambda0(seed, lam, epsilon, order)
        x = _pack_guess(None, n, order)
    else:
        lambda0 = float(initial_guess[0])
        x = _pack_guess(initial_guess[1] if len(initial_guess) > 1 else None, n, order)
    logger.debug(f"initial data: lambda0={lambda0:.6g} for n={n}, lambda={lam}")

    def residual_vector(v: np.ndarray) -> np.ndarray:
        c1, _ = _c1_from(seed, lambda0, v, order)
        return np.concatenate([c.coeffs for c in constraint_components(seed, c1, lam, epsilon, order)])

    F = residual_vector(x)
    best = float(np.max(np.abs(F))) if F.size else 0.0
    kicked = False
    iterations = 0
    while best > CONSTRAINT_TOL and iterations < max_iterations:
        iterations += 1
        J = np.empty((F.size, x.size))
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = JACOBIAN_STEP
            J[:, k] = (residual_vector(x + e) - residual_vector(x - e)) / (2.0 * JACOBIAN_STEP)
        step = lstsq(J, -F)[0]

        t = 1.0
        current = float(np.linalg.norm(F))
        accepted = False
        while t >= MIN_STEP:
            trial = x + t * step
            F_trial = residual_vector(trial)
            if float(np.linalg.norm(F_trial)) < current:
                x, F = trial, F_trial
                accepted = True
                break
            t *= DAMPING
        if not accepted:
            if kicked:
                break
            # 臍点解が停留点のときは s をずらして探索をやり直す
            kicked = True
            rng = np.random.default_rng(kick_seed)
            x = x + KICK_SCALE * rng.standard_normal(x.size)
            F = residual_vector(x)
        best = min(best, float(np.max(np.abs(F))))
        logger.debug(f"constraint solve iteration {iterations}: residual {np.max(np.abs(F)):.3e}, step {t:.3g}")

    final = float(np.max(np.abs(F))) if F.size else 0.0
    if final > CONSTRAINT_TOL:
        raise ConstraintSolveFailed(best, iterations)
    c1, s = _c1_from(seed, lambda0, x, order)
    logger.info(f"Initial data solved in {iterations} iterations (constraint residual {final:.3e})")
    return InitialData(c1, lambda0, s, final, iterations)


def extend_metric(
    seed: SeedMetric,
    lam: float,
    epsilon: int = 1,
    order: Optional[int] = None,
    initial: Optional[InitialData] = None,
    **solve_options,
) -> EmbeddingResult:
    """種計量をアインシュタイン計量 g̃ + ε dy² に拡張する

    ij 成分の残差は −(ε/2)∂²_y g̃_ij を含むので、y^k 係数を 0 にする条件から
    g̃ の y^{k+2} 係数が a⁽ᵏ⁺²⁾ = 2ε E⁽ᵏ⁾ / ((k+1)(k+2)) と決まる
    （E⁽ᵏ⁾ は a⁽ᵏ⁺²⁾ = 0 として計算した残差の y^k 係数）。

    Args:
        seed: 種計量
        lam: 宇宙定数 Λ
        epsilon: ファイバー方向の符号 ±1
        order: 打ち切り次数 K ≥ 2（省略時は種計量の次数）
        initial: 初期データ（省略時は ``initial_data_solve`` で求める）
        **solve_options: ``initial_data_solve`` に渡すオプション

    Returns:
        EmbeddingResult

    Raises:
        RecursionBreakdown: 再帰の途中で計量が特異になった場合
        ConstraintSolveFailed: 初期データが求まらない場合
    """
    n = seed.n
    order = seed.g.order if order is None else order
    if order < 2:
        raise ValueError(f"extension order must be >= 2, got {order}")
    if seed.g.order < order:
        raise ValueError(f"seed jets have order {seed.g.order}, need {order}")
    if initial is None:
        initial = initial_data_solve(seed, lam, epsilon, order, **solve_options)

    layers: list = [_seed_layer(seed, order), initial.c1] + [None] * (order - 1)
    for k in range(order - 1):
        try:
            bulk = BulkChartMetric(_assemble_block(layers, n, order), epsilon=epsilon).to_chart_metric()
            residual = einstein_residual(bulk, lam)
        except (SingularMetric, ZeroConstantTerm) as e:
            raise RecursionBreakdown(k + 2, str(e)) from e
        layer = np.empty((n, n), dtype=object)
        scale = 2.0 * epsilon / ((k + 1) * (k + 2))
        for i in range(n):
            for j in range(i, n):
                layer[i, j] = layer[j, i] = scale * slice_variable(residual[i, j], n, k)
        layers[k + 2] = layer
        logger.debug(f"y-order {k + 2}: max coefficient {max(np.max(np.abs(c.coeffs)) for c in layer.flat):.3e}")

    bulk = BulkChartMetric(_assemble_block(layers, n, order), epsilon=epsilon)
    report = _measure(bulk, lam, n)
    logger.info(
        f"Extended {n}-dim seed to order {order} (lambda={lam}, epsilon={epsilon}): "
        f"residual {report['residual_norm']:.3e}, constraints {report['constraint_norm']:.3e}"
    )
    return EmbeddingResult(
        seed, bulk, lam, order, report["residual_norm"], report["constraint_norm"], initial
    )


def _measure(bulk: BulkChartMetric, lam: float, n: int) -> dict:
    """完成したバルク計量だけから残差を測る"""
    g = bulk.to_chart_metric()
    ric = ricci(christoffel(g))
    einstein = einstein_residual(g, lam, ric=ric)
    field_eq = field_equation_residual(g, None, lam, ric=ric)
    constraints = [slice_variable(field_eq[a, n], n, 0) for a in range(n + 1)]
    fiber = RicciField(np.array([[einstein[a, n] for a in range(n + 1)]], dtype=object))
    return {
        "residual_by_degree": residual_norm_by_degree(einstein),
        "residual_norm": residual_norm(einstein),
        "constraint_norm": max(float(np.max(np.abs(c.coeffs))) for c in constraints),
        "fiber_residual_by_degree": residual_norm_by_degree(fiber),
    }


def certify(result: EmbeddingResult) -> dict:
    """拡張結果の検証レポート

    Returns:
        ``slice_deviation``（y = 0 の係数と種計量の差の最大値、0 であるべき）、
        ``residual_by_degree``、``constraint_norm``、``fiber_residual_by_degree``（(A, y) 成分）、
        ``block_form``（ファイバーの非対角成分が 0 で ε φ² = ε）、``passed`` を含む辞書
    """
    n = result.seed.n
    order = result.order
    block = result.bulk.base

    deviation = 0.0
    for i in range(n):
        for j in range(n):
            on_slice = slice_variable(block[i, j], n, 0)
            expected = result.seed.g[i, j].truncate(on_slice.order)
            deviation = max(deviation, float(np.max(np.abs(on_slice.coeffs - expected.coeffs))))

    g = result.bulk.to_chart_metric()
    fiber_jet = g[n, n]
    block_form = all(not g[a, n].terms() and not g[n, a].terms() for a in range(n)) and fiber_jet.allclose(
        Jet.constant(float(result.epsilon), n + 1, fiber_jet.order), atol=0.0
    )

    report = _measure(result.bulk, result.lam, n)
    through = order - 2
    residual = float(np.max(report["residual_by_degree"][: through + 1]))
    passed = (
        deviation == 0.0
        and block_form
        and residual <= RESIDUAL_TOL
        and report["constraint_norm"] <= CONSTRAINT_TOL
    )
    if not passed:
        logger.warning(
            f"Extension certificate failed: slice {deviation:.3e}, residual {residual:.3e}, "
            f"constraints {report['constraint_norm']:.3e}, block form {block_form}"
        )
    return {
        "slice_deviation": deviation,
        "residual_by_degree": report["residual_by_degree"].tolist(),
        "residual_norm": residual,
        "residual_tolerance": RESIDUAL_TOL,
        "constraint_norm": report["constraint_norm"],
        "constraint_tolerance": CONSTRAINT_TOL,
        "fiber_residual_by_degree": report["fiber_residual_by_degree"].tolist(),
        "block_form": bool(block_form),
        "passed": bool(passed),
    }


def extend_iterated(
    seed: SeedMetric,
    lam: float,
    epsilon: int = 1,
    order: Optional[int] = None,
    codimension: int = 1,
    **solve_options,
) -> list:
    """余次元 1 の拡張を ``codimension`` 回繰り返す。各段の結果を順に返す"""
    if codimension < 1:
        raise ValueError(f"codimension must be >= 1, got {codimension}")
    order = seed.g.order if order is None else order
    results = []
    current = seed
    for stage in range(codimension):
        result = extend_metric(current, lam, epsilon, order, **solve_options)
        report = certify(result)
        logger.info(f"Stage {stage + 1}/{codimension}: dim {result.bulk.dim}, certified={report['passed']}")
        results.append(result)
        current = SeedMetric(result.bulk.to_chart_metric())
    return results
