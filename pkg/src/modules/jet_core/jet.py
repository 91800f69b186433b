"""
jet_core モジュール

打ち切り多変数テイラー級数（ジェット）の演算を提供する。
係数は次数順（graded）に並べた密な配列で保持するため、
低い次数への打ち切りは配列の先頭を切り出すだけで済む。
"""

import logging
import math
from functools import lru_cache
from numbers import Real
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.special import binom

from modules.errors import (
    CompositionDomainError,
    VariableCountMismatch,
    ZeroConstantTerm,
)

logger = logging.getLogger(__name__)

# 係数比較の絶対許容誤差
JET_ATOL = 1e-10

# 積の全ペア表を事前計算する上限（nvars=4, K=8 の基底数）
DENSE_BASIS_LIMIT = 495

MultiIndex = tuple[int, ...]


def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def monomial_basis(nvars: int, order: int) -> tuple[MultiIndex, ...]:
    """次数 ``order`` 以下の単項式の指数を次数順に列挙する

    Args:
        nvars: 変数の数
        order: 打ち切り次数 K

    Returns:
        指数タプルのタプル。次数 0, 1, ..., K の順で、各次数内は辞書式降順
    """
    basis: list[MultiIndex] = []
    for degree in range(order + 1):
        basis.extend(_compositions(degree, nvars))
    return tuple(basis)


def basis_size(nvars: int, order: int) -> int:
    if order < 0:
        return 0
    return math.comb(order + nvars, nvars)


@lru_cache(maxsize=None)
def _basis_index(nvars: int, order: int) -> dict:
    return {mi: i for i, mi in enumerate(monomial_basis(nvars, order))}


@lru_cache(maxsize=None)
def _basis_exponents(nvars: int, order: int) -> np.ndarray:
    return np.array(monomial_basis(nvars, order), dtype=int).reshape(-1, nvars)


@lru_cache(maxsize=None)
def _basis_degrees(nvars: int, order: int) -> np.ndarray:
    return _basis_exponents(nvars, order).sum(axis=1)


@lru_cache(maxsize=None)
def _product_table(nvars: int, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    basis = monomial_basis(nvars, order)
    index = _basis_index(nvars, order)
    left, right, target = [], [], []
    for i, a in enumerate(basis):
        room = order - sum(a)
        for j in range(basis_size(nvars, room)):
            b = basis[j]
            left.append(i)
            right.append(j)
            target.append(index[tuple(x + y for x, y in zip(a, b))])
    logger.debug(f"product table nvars={nvars} order={order}: {len(target)} pairs")
    return np.array(left), np.array(right), np.array(target)


@lru_cache(maxsize=None)
def _diff_table(nvars: int, order: int, var: int) -> tuple[np.ndarray, np.ndarray]:
    index = _basis_index(nvars, order)
    sources, factors = [], []
    for mi in monomial_basis(nvars, order - 1):
        raised = list(mi)
        raised[var] += 1
        sources.append(index[tuple(raised)])
        factors.append(raised[var])
    return np.array(sources, dtype=int), np.array(factors, dtype=float)


@lru_cache(maxsize=None)
def _insert_table(nvars: int, order: int, position: int) -> np.ndarray:
    target_index = _basis_index(nvars + 1, order)
    return np.array(
        [target_index[mi[:position] + (0,) + mi[position:]] for mi in monomial_basis(nvars, order)],
        dtype=int,
    )


@lru_cache(maxsize=None)
def _slice_table(nvars: int, order: int, var: int, power: int) -> np.ndarray:
    source_index = _basis_index(nvars, order)
    return np.array(
        [
            source_index[mi[:var] + (power,) + mi[var:]]
            for mi in monomial_basis(nvars - 1, order - power)
        ],
        dtype=int,
    )


class Jet:
    """打ち切り多変数テイラー級数

    ``coeffs[i]`` は ``monomial_basis(nvars, order)[i]`` の単項式の係数。
    変数は展開点からの変位を表す。生成後は変更しない値オブジェクトとして扱う。
    """

    __slots__ = ("nvars", "order", "coeffs")

    # numpy のスカラー・配列との演算で Jet 側の演算子を使わせる
    __array_ufunc__ = None

    def __init__(self, nvars: int, order: int, coeffs: Sequence[float] | np.ndarray | None = None):
        if nvars < 1:
            raise ValueError(f"nvars must be >= 1, got {nvars}")
        if order < 0:
            raise ValueError(f"order must be >= 0, got {order}")
        size = basis_size(nvars, order)
        if coeffs is None:
            data = np.zeros(size)
        else:
            data = np.array(coeffs, dtype=float)
            if data.shape != (size,):
                raise ValueError(
                    f"expected {size} coefficients for nvars={nvars}, order={order}, got shape {data.shape}"
                )
            if not np.all(np.isfinite(data)):
                raise ValueError("jet coefficients must be finite")
        data.setflags(write=False)
        self.nvars = nvars
        self.order = order
        self.coeffs = data

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, value: float, nvars: int, order: int) -> "Jet":
        coeffs = np.zeros(basis_size(nvars, order))
        coeffs[0] = value
        return cls(nvars, order, coeffs)

    @classmethod
    def zero(cls, nvars: int, order: int) -> "Jet":
        return cls(nvars, order)

    @classmethod
    def variable(cls, var: int, nvars: int, order: int, value: float = 0.0) -> "Jet":
        """座標変数 ``value + t_var`` のジェットを作る"""
        if not 0 <= var < nvars:
            raise ValueError(f"variable index {var} outside 0..{nvars - 1}")
        coeffs = np.zeros(basis_size(nvars, order))
        coeffs[0] = value
        if order >= 1:
            unit = tuple(1 if k == var else 0 for k in range(nvars))
            coeffs[_basis_index(nvars, order)[unit]] = 1.0
        return cls(nvars, order, coeffs)

    @classmethod
    def from_terms(cls, nvars: int, order: int, terms: Mapping[MultiIndex, float]) -> "Jet":
        """``{指数: 係数}`` からジェットを作る。次数 K を超える項は捨てる"""
        index = _basis_index(nvars, order)
        coeffs = np.zeros(basis_size(nvars, order))
        for mi, value in terms.items():
            mi = tuple(int(e) for e in mi)
            if len(mi) != nvars:
                raise VariableCountMismatch(f"multi-index {mi} does not have {nvars} entries")
            if min(mi) < 0:
                raise ValueError(f"negative exponent in {mi}")
            if sum(mi) <= order:
                coeffs[index[mi]] += value
        return cls(nvars, order, coeffs)

    # -- accessors --------------------------------------------------------

    @property
    def constant_term(self) -> float:
        return float(self.coeffs[0])

    def coefficient(self, mi: MultiIndex) -> float:
        mi = tuple(mi)
        if len(mi) != self.nvars:
            raise VariableCountMismatch(f"multi-index {mi} does not have {self.nvars} entries")
        if sum(mi) > self.order:
            return 0.0
        return float(self.coeffs[_basis_index(self.nvars, self.order)[mi]])

    def terms(self) -> dict:
        """非零係数を ``{指数: 係数}`` で返す"""
        basis = monomial_basis(self.nvars, self.order)
        return {basis[i]: float(c) for i, c in enumerate(self.coeffs) if c != 0.0}

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"cannot raise order {self.order} to {order}")
        return Jet(self.nvars, order, self.coeffs[: basis_size(self.nvars, order)])

    def allclose(self, other: "Jet", atol: float = JET_ATOL) -> bool:
        a, b = _align(self, other)
        return bool(np.all(np.abs(a.coeffs - b.coeffs) <= atol))

    # -- operators --------------------------------------------------------

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        if isinstance(other, Real):
            return Jet.constant(float(other), self.nvars, self.order)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else jet_add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else jet_sub(self, other)

    def __rsub__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else jet_sub(other, self)

    def __mul__(self, other):
        if isinstance(other, Real):
            return jet_scale(self, float(other))
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else jet_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Real):
            return jet_scale(self, 1.0 / float(other))
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else jet_mul(self, jet_reciprocal(other))

    def __rtruediv__(self, other):
        other = self._coerce(other)
        return NotImplemented if other is NotImplemented else jet_mul(other, jet_reciprocal(self))

    def __neg__(self):
        return jet_scale(self, -1.0)

    def __pow__(self, exponent: int):
        return jet_power(self, exponent)

    def __repr__(self) -> str:
        return f"Jet(nvars={self.nvars}, order={self.order}, {self.to_string()})"

    def to_string(self, names: Sequence[str] | None = None, digits: int = 6) -> str:
        names = names or [f"t{k + 1}" for k in range(self.nvars)]
        parts = []
        for mi, c in self.terms().items():
            factors = [
                names[v] if e == 1 else f"{names[v]}^{e}" for v, e in enumerate(mi) if e > 0
            ]
            parts.append("*".join([f"{c:.{digits}g}"] + factors))
        return " + ".join(parts) if parts else "0"


def _align(a: Jet, b: Jet) -> tuple[Jet, Jet]:
    if a.nvars != b.nvars:
        raise VariableCountMismatch(f"jets have {a.nvars} and {b.nvars} variables")
    order = min(a.order, b.order)
    if a.order != order:
        a = a.truncate(order)
    if b.order != order:
        b = b.truncate(order)
    return a, b


def jet_add(a: Jet, b: Jet) -> Jet:
    """係数ごとの和。次数は小さい方に打ち切る"""
    a, b = _align(a, b)
    return Jet(a.nvars, a.order, a.coeffs + b.coeffs)


def jet_sub(a: Jet, b: Jet) -> Jet:
    a, b = _align(a, b)
    return Jet(a.nvars, a.order, a.coeffs - b.coeffs)


def jet_scale(a: Jet, factor: float) -> Jet:
    return Jet(a.nvars, a.order, a.coeffs * factor)


def jet_neg(a: Jet) -> Jet:
    return jet_scale(a, -1.0)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """コーシー積を小さい方の次数で打ち切る

    Args:
        a: 左オペランド
        b: 右オペランド（変数の数は ``a`` と一致すること）

    Returns:
        積のジェット

    Raises:
        VariableCountMismatch: 変数の数が異なる場合
    """
    a, b = _align(a, b)
    size = basis_size(a.nvars, a.order)
    if size > DENSE_BASIS_LIMIT:
        return _mul_sparse(a, b)
    left, right, target = _product_table(a.nvars, a.order)
    coeffs = np.bincount(target, weights=a.coeffs[left] * b.coeffs[right], minlength=size)
    return Jet(a.nvars, a.order, coeffs)


def _mul_sparse(a: Jet, b: Jet) -> Jet:
    basis = monomial_basis(a.nvars, a.order)
    index = _basis_index(a.nvars, a.order)
    degrees = _basis_degrees(a.nvars, a.order)
    coeffs = np.zeros(len(basis))
    nz_b = np.flatnonzero(b.coeffs)
    for i in np.flatnonzero(a.coeffs):
        room = a.order - degrees[i]
        for j in nz_b:
            if degrees[j] <= room:
                k = index[tuple(x + y for x, y in zip(basis[i], basis[j]))]
                coeffs[k] += a.coeffs[i] * b.coeffs[j]
    return Jet(a.nvars, a.order, coeffs)


def jet_power(a: Jet, exponent: int) -> Jet:
    """整数べき。負のべきは逆数を経由する"""
    if not isinstance(exponent, (int, np.integer)):
        raise TypeError(f"jet exponent must be an integer, got {exponent!r}")
    base = a if exponent >= 0 else jet_reciprocal(a)
    result = Jet.constant(1.0, a.nvars, a.order)
    square = base
    n = abs(int(exponent))
    while n:
        if n & 1:
            result = jet_mul(result, square)
        n >>= 1
        if n:
            square = jet_mul(square, square)
    return result


def _univariate_coefficients(name: str, center: float, order: int) -> np.ndarray:
    k = np.arange(order + 1)
    if name == "exp":
        return math.exp(center) / np.array([math.factorial(i) for i in k], dtype=float)
    if name in ("sin", "cos"):
        cycle = (
            [math.sin(center), math.cos(center), -math.sin(center), -math.cos(center)]
            if name == "sin"
            else [math.cos(center), -math.sin(center), -math.cos(center), math.sin(center)]
        )
        return np.array([cycle[i % 4] / math.factorial(i) for i in k], dtype=float)
    if name == "sqrt":
        if center <= 0.0:
            raise CompositionDomainError(f"sqrt expanded about non-positive value {center}")
        return math.sqrt(center) * binom(0.5, k) / center**k
    if name == "log":
        if center <= 0.0:
            raise CompositionDomainError(f"log expanded about non-positive value {center}")
        coeffs = np.empty(order + 1)
        coeffs[0] = math.log(center)
        for i in range(1, order + 1):
            coeffs[i] = (-1) ** (i + 1) / (i * center**i)
        return coeffs
    if name == "reciprocal":
        if abs(center) < JET_ATOL:
            raise ZeroConstantTerm(f"reciprocal of a jet with constant term {center:.3e}")
        return np.array([(-1) ** i / center ** (i + 1) for i in k], dtype=float)
    raise ValueError(f"unknown intrinsic function '{name}'")


INTRINSICS = ("exp", "sin", "cos", "sqrt", "log", "reciprocal")


def jet_compose(outer: Jet, inner: Jet, about: float = 0.0) -> Jet:
    """一変数ジェット ``outer`` に ``inner`` を代入する

    ``outer`` は点 ``about`` のまわりの展開とみなし、``inner`` の定数項は
    ``about`` と一致していなければならない。

    Args:
        outer: 一変数ジェット（点 ``about`` での f の展開）
        inner: 代入する多変数ジェット
        about: ``outer`` の展開点

    Returns:
        f(inner) のジェット。次数は min(outer.order, inner.order)

    Raises:
        CompositionDomainError: ``inner`` の定数項が展開点と異なる場合
    """
    if outer.nvars != 1:
        raise VariableCountMismatch(f"outer jet must be univariate, got {outer.nvars} variables")
    if abs(inner.constant_term - about) > JET_ATOL * max(1.0, abs(about)):
        raise CompositionDomainError(
            f"outer series is expanded about {about}, inner starts at {inner.constant_term}"
        )
    order = min(outer.order, inner.order)
    shifted = inner.truncate(order) if inner.order != order else inner
    increment = Jet(shifted.nvars, order, np.concatenate(([0.0], shifted.coeffs[1:])))
    result = Jet.constant(outer.coeffs[order], shifted.nvars, order)
    for k in range(order - 1, -1, -1):
        result = jet_mul(result, increment) + float(outer.coeffs[k])
    return result


def apply_function(name: str, a: Jet) -> Jet:
    """組み込み関数を ``a`` の定数項のまわりで展開して合成する"""
    center = a.constant_term
    outer = Jet(1, a.order, _univariate_coefficients(name, center, a.order))
    return jet_compose(outer, a, about=center)


def jet_reciprocal(a: Jet) -> Jet:
    """1/a のジェット

    Raises:
        ZeroConstantTerm: 定数項の絶対値が ``JET_ATOL`` 未満の場合（退化した計量）
    """
    return apply_function("reciprocal", a)


def jet_diff(a: Jet, var: int) -> Jet:
    """変数 ``var`` による形式的偏微分。次数は 1 下がる（次数 0 なら零ジェット）"""
    if not 0 <= var < a.nvars:
        raise ValueError(f"variable index {var} outside 0..{a.nvars - 1}")
    if a.order == 0:
        return Jet.zero(a.nvars, 0)
    sources, factors = _diff_table(a.nvars, a.order, var)
    return Jet(a.nvars, a.order - 1, a.coeffs[sources] * factors)


def jet_eval(a: Jet, point: Sequence[float]) -> float:
    """打ち切り多項式を変位 ``point`` で評価する"""
    point = np.asarray(point, dtype=float).reshape(-1)
    if point.shape[0] != a.nvars:
        raise VariableCountMismatch(f"point has {point.shape[0]} entries, jet has {a.nvars} variables")
    exponents = _basis_exponents(a.nvars, a.order)
    monomials = np.prod(point[np.newaxis, :] ** exponents, axis=1)
    return float(a.coeffs @ monomials)


def substitution_matrix(inners: Sequence[Jet], nvars: int, order: int) -> tuple[np.ndarray, int, int]:
    """``nvars`` 変数・次数 ``order`` の単項式に ``inners`` を代入した結果を行列にまとめる

    Returns:
        (行列, 結果の変数の数, 結果の次数)。行 i は基底 i の単項式を代入したジェット係数
    """
    if len(inners) != nvars:
        raise VariableCountMismatch(f"{len(inners)} substitutes for {nvars} variables")
    out_vars = inners[0].nvars
    if any(j.nvars != out_vars for j in inners):
        raise VariableCountMismatch("substituted jets must share one variable count")
    out_order = min([order] + [j.order for j in inners])
    inners = [j.truncate(out_order) if j.order != out_order else j for j in inners]
    basis = monomial_basis(nvars, order)
    index = _basis_index(nvars, order)
    rows: list[Jet] = [Jet.constant(1.0, out_vars, out_order)]
    for mi in basis[1:]:
        last = max(v for v, e in enumerate(mi) if e > 0)
        lowered = list(mi)
        lowered[last] -= 1
        rows.append(jet_mul(rows[index[tuple(lowered)]], inners[last]))
    matrix = np.array([r.coeffs for r in rows])
    return matrix, out_vars, out_order


def jet_substitute(outer: Jet, inners: Sequence[Jet]) -> Jet:
    """多変数ジェット ``outer`` の各変数にジェットを代入して再展開する

    ``inners`` に定数項があると、打ち切り多項式を新しい点のまわりで展開し直すことになる。
    """
    matrix, out_vars, out_order = substitution_matrix(inners, outer.nvars, outer.order)
    return Jet(out_vars, out_order, outer.coeffs @ matrix)


def insert_variable(a: Jet, position: int) -> Jet:
    """位置 ``position`` に新しい変数を挿入して ``nvars + 1`` 変数のジェットにする"""
    if not 0 <= position <= a.nvars:
        raise ValueError(f"insert position {position} outside 0..{a.nvars}")
    coeffs = np.zeros(basis_size(a.nvars + 1, a.order))
    coeffs[_insert_table(a.nvars, a.order, position)] = a.coeffs
    return Jet(a.nvars + 1, a.order, coeffs)


def slice_variable(a: Jet, var: int, power: int = 0) -> Jet:
    """``var`` の ``power`` 乗の係数を残りの変数のジェットとして取り出す"""
    if a.nvars < 2:
        raise ValueError("slicing needs at least two variables")
    if not 0 <= var < a.nvars:
        raise ValueError(f"variable index {var} outside 0..{a.nvars - 1}")
    if not 0 <= power <= a.order:
        raise ValueError(f"power {power} outside 0..{a.order}")
    return Jet(a.nvars - 1, a.order - power, a.coeffs[_slice_table(a.nvars, a.order, var, power)])


def degree_norms(a: Jet) -> np.ndarray:
    """次数ごとの係数絶対値の最大値（係数減衰の診断用）"""
    degrees = _basis_degrees(a.nvars, a.order)
    norms = np.zeros(a.order + 1)
    np.maximum.at(norms, degrees, np.abs(a.coeffs))
    return norms
