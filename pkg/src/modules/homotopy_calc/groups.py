"""
有限生成群の記述子

ホモトピー群 π_m を ``GroupExpr`` で表し、直和（m ≥ 2）と直積（m = 1）を正規形にそろえる。
文字列表記は ``0``、``Z``、``Z^2``、``Z_2``、名前トークン（非可換な π₁ 用、例: ``pi1(Sigma2)``）、
直和は ``+``、直積は ``×``（入力では ``*`` も可）。
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable

import pyparsing as pp

from modules.errors import ManifestError

logger = logging.getLogger(__name__)

TRIVIAL = "trivial"
FREE_ABELIAN = "free_abelian"
CYCLIC = "cyclic"
DIRECT_SUM = "direct_sum"
NAMED = "named_nonabelian"
DIRECT_PRODUCT = "direct_product"

_FREE = re.compile(r"^Z(?:\^(\d+))?$")
_CYCLIC = re.compile(r"^Z_(\d+)$")


@dataclass(frozen=True)
class GroupExpr:
    """群の記述子

    Attributes:
        kind: trivial / free_abelian / cyclic / direct_sum / named_nonabelian / direct_product
        rank: free_abelian の階数
        order: cyclic の位数
        token: named_nonabelian の名前
        factors: direct_sum / direct_product の因子
    """

    kind: str
    rank: int = 0
    order: int = 0
    token: str = ""
    factors: tuple = field(default=())

    @property
    def is_trivial(self) -> bool:
        return self.kind == TRIVIAL

    @property
    def is_abelian(self) -> bool:
        if self.kind == NAMED:
            return False
        if self.kind in (DIRECT_SUM, DIRECT_PRODUCT):
            return all(f.is_abelian for f in self.factors)
        return True

    def __str__(self) -> str:
        if self.kind == TRIVIAL:
            return "0"
        if self.kind == FREE_ABELIAN:
            return "Z" if self.rank == 1 else f"Z^{self.rank}"
        if self.kind == CYCLIC:
            return f"Z_{self.order}"
        if self.kind == NAMED:
            return self.token
        if self.kind == DIRECT_SUM:
            return " + ".join(str(f) for f in self.factors)
        return " × ".join(f"({f})" if f.kind == DIRECT_SUM else str(f) for f in self.factors)

    def to_dict(self) -> dict:
        data = {"kind": self.kind, "text": str(self)}
        if self.kind == FREE_ABELIAN:
            data["rank"] = self.rank
        elif self.kind == CYCLIC:
            data["order"] = self.order
        elif self.kind == NAMED:
            data["token"] = self.token
        elif self.factors:
            data["factors"] = [f.to_dict() for f in self.factors]
        return data


def trivial() -> GroupExpr:
    return GroupExpr(TRIVIAL)


def free_abelian(rank: int) -> GroupExpr:
    if rank < 0:
        raise ValueError(f"rank must be >= 0, got {rank}")
    return GroupExpr(FREE_ABELIAN, rank=rank)


def cyclic(order: int) -> GroupExpr:
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    return GroupExpr(CYCLIC, order=order)


def named(token: str) -> GroupExpr:
    return GroupExpr(NAMED, token=token)


def direct_sum(*parts: GroupExpr) -> GroupExpr:
    return GroupExpr(DIRECT_SUM, factors=tuple(parts))


def direct_product(*parts: GroupExpr) -> GroupExpr:
    return GroupExpr(DIRECT_PRODUCT, factors=tuple(parts))


def _flatten(kind: str, parts: Iterable[GroupExpr]) -> list:
    out = []
    for part in parts:
        if part.kind == kind:
            out.extend(part.factors)
        else:
            out.append(part)
    return out


def _normalize_sum(parts: list) -> GroupExpr:
    if any(not p.is_abelian for p in parts):
        # 非可換な因子を含む和は直積として扱う
        return _normalize_product(parts)
    rank = 0
    orders = []
    for part in _flatten(DIRECT_SUM, parts):
        if part.kind == FREE_ABELIAN:
            rank += part.rank
        elif part.kind == CYCLIC:
            orders.append(part.order)
    factors = ([free_abelian(rank)] if rank else []) + [cyclic(k) for k in sorted(orders)]
    if not factors:
        return trivial()
    if len(factors) == 1:
        return factors[0]
    return direct_sum(*factors)


def _normalize_product(parts: list) -> GroupExpr:
    abelian, others = [], []
    for part in _flatten(DIRECT_PRODUCT, parts):
        (abelian if part.is_abelian else others).append(part)
    rest = _normalize_sum(abelian) if abelian else trivial()
    if not others:
        return rest
    factors = sorted(others, key=str) + ([] if rest.is_trivial else [rest])
    if len(factors) == 1:
        return factors[0]
    return direct_product(*factors)


def normalize(g: GroupExpr) -> GroupExpr:
    """正規形にする（冪等）

    直和は平坦化して自明な因子を落とし、自由部分の階数をまとめ、巡回群を位数順に並べる。
    直積は非可換な因子を名前順に並べ、可換な因子を 1 つの直和にまとめる。
    """
    if g.kind == TRIVIAL:
        return g
    if g.kind == FREE_ABELIAN:
        return trivial() if g.rank == 0 else g
    if g.kind == CYCLIC:
        if g.order == 1:
            return trivial()
        return free_abelian(1) if g.order == 0 else g
    if g.kind == NAMED:
        return g
    parts = [normalize(f) for f in g.factors]
    if g.kind == DIRECT_SUM:
        return _normalize_sum(parts)
    if g.kind == DIRECT_PRODUCT:
        return _normalize_product(parts)
    raise ValueError(f"unknown group kind: {g.kind}")


def _term_to_group(s, loc, toks) -> GroupExpr:
    text = toks[0]
    if text == "0":
        return trivial()
    match = _FREE.match(text)
    if match:
        return free_abelian(int(match.group(1) or 1))
    match = _CYCLIC.match(text)
    if match:
        return cyclic(int(match.group(1)))
    return named(text)


def _build_grammar() -> pp.ParserElement:
    term = pp.Regex(r"0|Z(\^\d+|_\d+)?(?![A-Za-z0-9_(])|[A-Za-z][A-Za-z0-9_]*(\([A-Za-z0-9_,]*\))?")
    term.set_name("group")
    term.set_parse_action(_term_to_group)

    expr = pp.Forward()
    summand = (pp.Suppress("(") - expr - pp.Suppress(")")) | term

    sum_expr = summand + pp.ZeroOrMore(pp.Suppress(pp.one_of("+ ⊕")) - summand)
    sum_expr.set_parse_action(lambda t: t[0] if len(t) == 1 else direct_sum(*t))
    expr <<= sum_expr + pp.ZeroOrMore(pp.Suppress(pp.one_of("× *")) - sum_expr)
    expr.set_parse_action(lambda t: t[0] if len(t) == 1 else direct_product(*t))
    return expr


_GRAMMAR = _build_grammar()


def parse_group(text: str) -> GroupExpr:
    """文字列表記を正規形の記述子にする

    Raises:
        ManifestError: 表記が読めない
    """
    try:
        g = _GRAMMAR.parse_string(str(text), parse_all=True)[0]
    except pp.ParseBaseException as exc:
        raise ManifestError(f"invalid group descriptor {text!r}: {exc.msg}", column=exc.loc + 1) from None
    return normalize(g)
