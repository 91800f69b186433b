"""
差分による曲率の検算

ジェットを使わず、成分式を直接評価して中心差分（4 次精度）で
クリストッフェル記号とリッチテンソルを求める。ジェット計算の独立な照合に使う。
"""

import logging
from typing import Callable, Optional, Sequence

import numpy as np

from modules.expr_parser import evaluate, parse

logger = logging.getLogger(__name__)

MetricFunction = Callable[[np.ndarray], np.ndarray]


def metric_function(components: Sequence[Sequence[Optional[str]]]) -> MetricFunction:
    """成分式の表から、点 → 成分行列 の関数を作る（下三角の空欄は上三角を写す）"""
    dim = len(components)
    asts = [[None] * dim for _ in range(dim)]
    for a in range(dim):
        row = components[a]
        for b in range(dim):
            if len(row) == dim:
                src = row[b]
            else:
                src = row[b - a] if b >= a else None
            if src not in (None, ""):
                asts[a][b] = parse(str(src), dim=dim)
    for a in range(dim):
        for b in range(dim):
            if asts[a][b] is None:
                asts[a][b] = asts[b][a]

    def _fn(x: np.ndarray) -> np.ndarray:
        return np.array([[evaluate(asts[a][b], x) for b in range(dim)] for a in range(dim)])

    return _fn


def _stencil(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, direction: int, h: float) -> np.ndarray:
    e = np.zeros_like(x)
    e[direction] = h
    return (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)


def finite_difference_christoffel(fn: MetricFunction, point: Sequence[float], h: float = 1e-3) -> np.ndarray:
    """Γ^C_AB を ``[C, A, B]`` の配列で返す"""
    x = np.asarray(point, dtype=float)
    dim = x.shape[0]
    ginv = np.linalg.inv(fn(x))
    dg = np.array([_stencil(fn, x, m, h) for m in range(dim)])  # dg[m, a, b] = ∂_m g_ab
    bracket = -dg + np.einsum("abm->mab", dg) + np.einsum("bma->mab", dg)
    return 0.5 * np.einsum("cm,mab->cab", ginv, bracket)


def finite_difference_ricci(
    fn: MetricFunction, point: Sequence[float], h: float = 1e-2, inner_h: float = 1e-3
) -> np.ndarray:
    """R_AB = ∂_M Γ^M_AB + Γ^M_AB Γ^N_MN − ∂_B Γ^M_AM − Γ^M_AN Γ^N_MB を差分で評価する"""
    x = np.asarray(point, dtype=float)
    dim = x.shape[0]

    def gamma_at(p):
        return finite_difference_christoffel(fn, p, inner_h)

    gamma = gamma_at(x)
    dgamma = np.array([_stencil(gamma_at, x, m, h) for m in range(dim)])  # dgamma[m, c, a, b]
    return (
        np.einsum("mmab->ab", dgamma)
        + np.einsum("mab,nmn->ab", gamma, gamma)
        - np.einsum("bmam->ab", dgamma)
        - np.einsum("man,nmb->ab", gamma, gamma)
    )
