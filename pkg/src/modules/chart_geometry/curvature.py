"""
chart_geometry モジュール

一枚のチャート上のテンソル計算。
計量 → クリストッフェル記号 → リッチテンソル → スカラー曲率 → アインシュタイン残差・場の方程式残差
の順にジェットで計算する。成分はすべて jet_core の Jet を要素にもつ numpy の object 配列。
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from modules.errors import DimensionTwoWithNonzeroLambda, GeometryError, SingularMetric
from modules.jet_core import JET_ATOL, Jet, degree_norms, jet_diff, jet_eval, jet_substitute
from modules.expr_parser import expand, parse

logger = logging.getLogger(__name__)

# 定数項行列の条件数がこれを超えたら特異とみなす
SINGULAR_COND = 1.0 / JET_ATOL

# アインシュタイン残差の合格基準（係数の最大絶対値）
RESIDUAL_TOL = 1e-7


def _jet_array(shape: tuple, nvars: int, order: int) -> np.ndarray:
    arr = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        arr[idx] = Jet.zero(nvars, order)
    return arr


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    rows, inner = a.shape
    cols = b.shape[1]
    out = np.empty((rows, cols), dtype=object)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = sum(a[i, k] * b[k, j] for k in range(inner))
    return out


@dataclass(frozen=True)
class ChartMetric:
    """チャート上の計量 g_AB

    Attributes:
        components: D×D の Jet 配列（対称）
        signature: 定数項行列の固有値の符号
    """

    components: np.ndarray
    signature: tuple = field(default=())

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=object)
        if comps.ndim != 2 or comps.shape[0] != comps.shape[1]:
            raise GeometryError(f"metric components must be a square table, got shape {comps.shape}")
        nvars = {c.nvars for c in comps.flat}
        if len(nvars) != 1:
            raise GeometryError(f"metric components use different variable counts {sorted(nvars)}")
        dim = comps.shape[0]
        for a in range(dim):
            for b in range(a + 1, dim):
                if not comps[a, b].allclose(comps[b, a]):
                    raise GeometryError(f"metric is not symmetric in components ({a}, {b})")
        object.__setattr__(self, "components", comps)
        if not self.signature:
            object.__setattr__(self, "signature", metric_signature(self))

    @classmethod
    def from_table(cls, table: Sequence[Sequence[Optional[Jet]]]) -> "ChartMetric":
        """行ごとの表から作る。下三角が None なら上三角を写す"""
        dim = len(table)
        comps = np.empty((dim, dim), dtype=object)
        for a in range(dim):
            for b in range(dim):
                entry = table[a][b] if b < len(table[a]) else None
                comps[a, b] = entry if entry is not None else table[b][a]
        return cls(comps)

    @classmethod
    def diagonal(cls, entries: Sequence[Jet]) -> "ChartMetric":
        dim = len(entries)
        nvars, order = entries[0].nvars, min(e.order for e in entries)
        comps = _jet_array((dim, dim), nvars, order)
        for a, e in enumerate(entries):
            comps[a, a] = e
        return cls(comps)

    @classmethod
    def euclidean(cls, dim: int, order: int, nvars: Optional[int] = None) -> "ChartMetric":
        nvars = dim if nvars is None else nvars
        return cls.diagonal([Jet.constant(1.0, nvars, order) for _ in range(dim)])

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    @property
    def nvars(self) -> int:
        return self.components[0, 0].nvars

    @property
    def order(self) -> int:
        return min(c.order for c in self.components.flat)

    def __getitem__(self, index):
        return self.components[index]

    def constant_matrix(self) -> np.ndarray:
        return np.array([[c.constant_term for c in row] for row in self.components], dtype=float)

    def evaluate(self, point: Sequence[float]) -> np.ndarray:
        """変位 ``point`` での成分行列"""
        return np.array([[jet_eval(c, point) for c in row] for row in self.components], dtype=float)

    def truncate(self, order: int) -> "ChartMetric":
        comps = np.empty_like(self.components)
        for idx in np.ndindex(*comps.shape):
            comps[idx] = self.components[idx].truncate(order)
        return ChartMetric(comps, self.signature)


@dataclass(frozen=True)
class BulkChartMetric:
    """ブロック形式のバルク計量 g̃_ij dx^i dx^j + ε φ² dy²

    ``base`` は n 次元のブロック（n+1 変数、y への依存も許す）、最後の変数が y。
    """

    base: ChartMetric
    epsilon: int = 1
    phi: Optional[Jet] = None

    def __post_init__(self):
        if self.epsilon not in (1, -1):
            raise GeometryError(f"epsilon must be +1 or -1, got {self.epsilon}")
        if self.base.nvars != self.base.dim + 1:
            raise GeometryError(
                f"bulk block of dim {self.base.dim} must live in {self.base.dim + 1} variables, "
                f"got {self.base.nvars}"
            )
        if self.phi is None:
            object.__setattr__(self, "phi", Jet.constant(1.0, self.base.nvars, self.base.order))
        if self.phi.nvars != self.base.nvars:
            raise GeometryError("phi must use the bulk variables")
        if abs(self.phi.constant_term) < JET_ATOL:
            raise GeometryError("phi vanishes at the chart center")

    @property
    def dim(self) -> int:
        return self.base.dim + 1

    def fiber_component(self) -> Jet:
        """ε φ²"""
        return self.epsilon * (self.phi * self.phi)

    def to_chart_metric(self) -> ChartMetric:
        n = self.base.dim
        order = min(self.base.order, self.phi.order)
        comps = _jet_array((n + 1, n + 1), self.base.nvars, order)
        for a in range(n):
            for b in range(n):
                comps[a, b] = self.base[a, b].truncate(order)
        comps[n, n] = self.fiber_component().truncate(order)
        return ChartMetric(comps)


@dataclass(frozen=True)
class ChristoffelField:
    """Γ^C_AB を ``gamma[C, A, B]`` に格納する"""

    gamma: np.ndarray

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    @property
    def order(self) -> int:
        return min(c.order for c in self.gamma.flat)


@dataclass(frozen=True)
class RicciField:
    """対称な 2 階テンソル（リッチテンソルおよび各種残差）"""

    components: np.ndarray

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    @property
    def order(self) -> int:
        return min(c.order for c in self.components.flat)

    def __getitem__(self, index):
        return self.components[index]

    def constant_matrix(self) -> np.ndarray:
        return np.array([[c.constant_term for c in row] for row in self.components], dtype=float)


@dataclass(frozen=True)
class StressEnergy:
    components: np.ndarray
    k: float = 1.0

    @classmethod
    def vacuum(cls, like: ChartMetric) -> "StressEnergy":
        return cls(_jet_array((like.dim, like.dim), like.nvars, like.order), k=0.0)


def metric_signature(g: ChartMetric) -> tuple:
    """定数項行列の固有値の符号（特異なら 0 を含む）"""
    eigenvalues = np.linalg.eigvalsh(g.constant_matrix())
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    return tuple(int(np.sign(v)) if abs(v) > JET_ATOL * scale else 0 for v in eigenvalues)


def inverse_metric(g: ChartMetric) -> np.ndarray:
    """逆計量 g^AB をノイマン級数で求める

    g = G0 + H（H は定数項 0）とすると g⁻¹ = Σ_k (−G0⁻¹ H)^k G0⁻¹ で、
    H^k は次数 k 以上なので K 項で打ち切れる。

    Raises:
        SingularMetric: 定数項行列が特異な場合
    """
    g0 = g.constant_matrix()
    if not np.all(np.isfinite(g0)) or np.linalg.cond(g0) > SINGULAR_COND:
        raise SingularMetric(f"constant-term metric matrix is singular:\n{g0}")
    a0 = np.linalg.inv(g0)
    dim, nvars, order = g.dim, g.nvars, g.order

    step = np.empty((dim, dim), dtype=object)
    term = np.empty((dim, dim), dtype=object)
    for a in range(dim):
        for b in range(dim):
            perturbation = sum(-a0[a, m] * (g[m, b] - g0[m, b]) for m in range(dim))
            step[a, b] = perturbation.truncate(order)
            term[a, b] = Jet.constant(a0[a, b], nvars, order)
    result = term.copy()
    for _ in range(order):
        term = _matmul(step, term)
        result = result + term
    return result


def christoffel(g: ChartMetric, ginv: Optional[np.ndarray] = None) -> ChristoffelField:
    """Γ^C_AB = ½ g^CM (−∂_M g_AB + ∂_A g_BM + ∂_B g_MA)

    結果の次数は計量の次数 − 1。
    """
    if g.nvars != g.dim:
        raise GeometryError(f"curvature needs a chart metric in its own {g.dim} coordinates")
    ginv = inverse_metric(g) if ginv is None else ginv
    dim = g.dim
    dg = np.empty((dim, dim, dim), dtype=object)
    for m in range(dim):
        for a in range(dim):
            for b in range(a, dim):
                dg[m, a, b] = dg[m, b, a] = jet_diff(g[a, b], m)

    gamma = np.empty((dim, dim, dim), dtype=object)
    for c in range(dim):
        for a in range(dim):
            for b in range(a, dim):
                total = sum(
                    ginv[c, m] * (-dg[m, a, b] + dg[a, b, m] + dg[b, m, a]) for m in range(dim)
                )
                gamma[c, a, b] = gamma[c, b, a] = 0.5 * total
    return ChristoffelField(gamma)


def ricci(gamma: ChristoffelField) -> RicciField:
    """R_AB = ∂_M Γ^M_AB + Γ^M_AB Γ^N_MN − ∂_B Γ^M_AM − Γ^M_AN Γ^N_MB

    結果の次数は Γ の次数 − 1。
    """
    G = gamma.gamma
    dim = gamma.dim
    trace = [sum(G[n, m, n] for n in range(dim)) for m in range(dim)]
    ric = np.empty((dim, dim), dtype=object)
    for a in range(dim):
        for b in range(dim):
            ric[a, b] = (
                sum(jet_diff(G[m, a, b], m) for m in range(dim))
                + sum(G[m, a, b] * trace[m] for m in range(dim))
                - sum(jet_diff(G[m, a, m], b) for m in range(dim))
                - sum(G[m, a, n] * G[n, m, b] for m in range(dim) for n in range(dim))
            )
    return RicciField(ric)


def scalar_curvature(g: ChartMetric, ric: RicciField, ginv: Optional[np.ndarray] = None) -> Jet:
    """R = g^AB R_AB"""
    ginv = inverse_metric(g) if ginv is None else ginv
    dim = g.dim
    return sum(ginv[a, b] * ric[a, b] for a in range(dim) for b in range(dim))


def einstein_factor(dim: int, lam: float) -> float:
    """アインシュタイン条件 Ric = (2Λ/(D−2)) g の係数"""
    if lam == 0.0:
        return 0.0
    if dim == 2:
        raise DimensionTwoWithNonzeroLambda(
            "Einstein condition with nonzero lambda is undefined in dimension 2"
        )
    return 2.0 * lam / (dim - 2)


def einstein_residual(g: ChartMetric, lam: float, ric: Optional[RicciField] = None) -> RicciField:
    """Ric(g) − (2Λ/(D−2)) g

    Raises:
        DimensionTwoWithNonzeroLambda: D = 2 かつ Λ ≠ 0
        SingularMetric: 計量が特異
    """
    factor = einstein_factor(g.dim, lam)
    ric = ricci(christoffel(g)) if ric is None else ric
    dim = g.dim
    out = np.empty((dim, dim), dtype=object)
    for a in range(dim):
        for b in range(dim):
            out[a, b] = ric[a, b] - factor * g[a, b]
    logger.debug(f"einstein residual dim={dim} lambda={lam} order={ric.order}")
    return RicciField(out)


def field_equation_residual(
    g: ChartMetric, T: Optional[StressEnergy], lam: float, ric: Optional[RicciField] = None
) -> RicciField:
    """Ric − ½ R g − k T + Λ g（T=None は真空）"""
    ginv = inverse_metric(g)
    ric = ricci(christoffel(g, ginv)) if ric is None else ric
    R = scalar_curvature(g, ric, ginv)
    dim = g.dim
    out = np.empty((dim, dim), dtype=object)
    for a in range(dim):
        for b in range(dim):
            value = ric[a, b] - 0.5 * (R * g[a, b]) + lam * g[a, b]
            if T is not None and T.k != 0.0:
                value = value - T.k * T.components[a, b]
            out[a, b] = value
    return RicciField(out)


def residual_norm_by_degree(residual: RicciField) -> np.ndarray:
    """全成分にわたる次数ごとの係数絶対値の最大値"""
    order = residual.order
    norms = np.zeros(order + 1)
    for c in residual.components.flat:
        norms = np.maximum(norms, degree_norms(c.truncate(order)))
    return norms


def residual_norm(residual: RicciField, through_degree: Optional[int] = None) -> float:
    norms = residual_norm_by_degree(residual)
    if through_degree is not None:
        norms = norms[: max(0, through_degree) + 1]
    return float(np.max(norms)) if norms.size else 0.0


def transform_linear(g: ChartMetric, A: np.ndarray) -> ChartMetric:
    """定数の正則行列 A による座標変換 x = A z で g'(z) = Aᵀ g(Az) A"""
    A = np.asarray(A, dtype=float)
    dim = g.dim
    if A.shape != (dim, dim) or g.nvars != dim:
        raise GeometryError(f"transform matrix shape {A.shape} does not fit a {dim}-dim chart")
    if abs(np.linalg.det(A)) < JET_ATOL:
        raise GeometryError("coordinate transform is not invertible")
    order = g.order
    inners = [
        Jet.from_terms(dim, order, {tuple(int(k == j) for k in range(dim)): A[i, j] for j in range(dim)})
        for i in range(dim)
    ]
    pulled = np.empty((dim, dim), dtype=object)
    for a in range(dim):
        for b in range(dim):
            pulled[a, b] = jet_substitute(g[a, b].truncate(order), inners)
    comps = np.empty((dim, dim), dtype=object)
    for a in range(dim):
        for b in range(a, dim):
            comps[a, b] = comps[b, a] = sum(
                A[m, a] * A[p, b] * pulled[m, p] for m in range(dim) for p in range(dim)
            )
    return ChartMetric(comps)


def contracted_bianchi(g: ChartMetric) -> np.ndarray:
    """チャート中心での ∇^A G_AB（ジェットの次数は 3 以上が必要）"""
    if g.order < 3:
        raise GeometryError(f"contracted Bianchi check needs order >= 3, got {g.order}")
    ginv = inverse_metric(g)
    gamma = christoffel(g, ginv)
    G = field_equation_residual(g, None, 0.0, ric=ricci(gamma))
    dim = g.dim
    div = np.zeros(dim)
    for b in range(dim):
        total = 0.0
        for a in range(dim):
            for c in range(dim):
                cov = jet_diff(G[a, b], c).constant_term
                cov -= sum(gamma.gamma[d, c, a].constant_term * G[d, b].constant_term for d in range(dim))
                cov -= sum(gamma.gamma[d, c, b].constant_term * G[a, d].constant_term for d in range(dim))
                total += ginv[a, c].constant_term * cov
        div[b] = total
    return div


def metric_from_expressions(
    components: Sequence[Sequence[Optional[str]]],
    center: Sequence[float],
    order: int,
) -> ChartMetric:
    """成分式の表から ChartMetric を作る

    Args:
        components: D×D（または上三角）の式の表。下三角の None/空文字は上三角を写す
        center: 展開点
        order: 打ち切り次数

    Returns:
        ``center`` のまわりで展開した計量
    """
    dim = len(center)
    if len(components) != dim:
        raise GeometryError(f"metric table has {len(components)} rows for a {dim}-dim chart")

    def _entry(a, b):
        row = components[a]
        if len(row) == dim - a and b >= a:
            return row[b - a]
        if len(row) == dim:
            return row[b]
        return None

    table = [[None] * dim for _ in range(dim)]
    for a in range(dim):
        for b in range(dim):
            src = _entry(a, b)
            if src in (None, "") and b < a:
                continue
            if src in (None, ""):
                raise GeometryError(f"metric component ({a + 1}, {b + 1}) is missing")
            table[a][b] = expand(parse(str(src), dim=dim), center, order)
    return ChartMetric.from_table(table)
