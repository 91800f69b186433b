"""
expr_parser モジュール

計量成分の式（文字列）を構文木に変換し、チャート上の点のまわりでジェットに展開する。

文法（優先順位の高い順）::

    atom    :: number | fn '(' expr ')' | '(' expr ')' | symbol
    power   :: atom [ '^' integer ]*
    unary   :: ('+' | '-') unary | power
    term    :: unary [ ('*' | '/') unary ]*
    expr    :: term [ ('+' | '-') term ]*

記号は x1 ... xd と、最後の座標（ファイバー座標）の別名 y。
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pyparsing as pp

from modules.errors import (
    CompositionDomainError,
    ExpressionSyntaxError,
    SingularExpansion,
    UnknownSymbol,
    ZeroConstantTerm,
)
from modules.jet_core import Jet, apply_function, jet_power, jet_reciprocal

logger = logging.getLogger(__name__)

FUNCTIONS = ("sin", "cos", "exp", "sqrt")

_SYMBOL = re.compile(r"^x([1-9][0-9]*)$")


@dataclass(frozen=True)
class Num:
    value: float
    pos: int

    def to_sexpr(self) -> str:
        return f"{self.value:g}"


@dataclass(frozen=True)
class Sym:
    name: str
    pos: int

    def to_sexpr(self) -> str:
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"
    pos: int

    def to_sexpr(self) -> str:
        return f"Neg({self.operand.to_sexpr()})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ExprAst"
    right: "ExprAst"
    pos: int

    _NAMES = {"+": "Add", "-": "Sub", "*": "Mul", "/": "Div"}

    def to_sexpr(self) -> str:
        return f"{self._NAMES[self.op]}({self.left.to_sexpr()}, {self.right.to_sexpr()})"


@dataclass(frozen=True)
class Pow:
    base: "ExprAst"
    exponent: int
    pos: int

    def to_sexpr(self) -> str:
        return f"Pow({self.base.to_sexpr()}, {self.exponent})"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "ExprAst"
    pos: int

    def to_sexpr(self) -> str:
        return f"{self.func.capitalize()}({self.arg.to_sexpr()})"


ExprAst = Union[Num, Sym, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class _Op:
    """演算子とその位置（構文木には残らない）"""

    symbol: str
    pos: int


def _operator(s, loc, toks):
    return _Op(toks[0], loc)


def _fold_binary(s, loc, toks):
    node = toks[0]
    for i in range(1, len(toks), 2):
        node = BinOp(toks[i].symbol, node, toks[i + 1], toks[i].pos)
    return node


def _fold_power(s, loc, toks):
    node = toks[0]
    for i in range(1, len(toks), 2):
        node = Pow(node, toks[i + 1], toks[i].pos)
    return node


def _number(s, loc, toks):
    value = float(toks[0])
    if not math.isfinite(value):
        raise pp.ParseFatalException(s, loc, f"number literal {toks[0]} is out of range")
    return Num(value, loc)


def _make_unary(s, loc, toks):
    sign, operand = toks[0], toks[1]
    return Neg(operand, loc) if sign == "-" else operand


def _build_grammar() -> pp.ParserElement:
    lpar = pp.Suppress("(")
    rpar = pp.Suppress(")")

    number = pp.Regex(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?").set_name("number")
    number.set_parse_action(_number)

    integer = pp.Regex(r"[+-]?\d+").set_name("integer exponent")
    integer.set_parse_action(lambda s, loc, t: int(t[0]))

    symbol = pp.Regex(r"[A-Za-z_][A-Za-z0-9_]*").set_name("symbol")
    symbol.set_parse_action(lambda s, loc, t: Sym(t[0], loc))

    fn_name = pp.MatchFirst([pp.Keyword(name) for name in FUNCTIONS])

    expr = pp.Forward().set_name("expression")

    # '(' を読んだ後の失敗はバックトラックせずにその位置で報告する
    call = fn_name + lpar - expr - rpar
    call.set_parse_action(lambda s, loc, t: Call(t[0], t[1], loc))
    group = lpar - expr - rpar

    atom = number | call | group | symbol
    caret = pp.Literal("^").set_parse_action(_operator)
    power = atom + pp.ZeroOrMore(caret - integer)
    power.set_parse_action(_fold_power)

    unary = pp.Forward()
    signed = pp.one_of("+ -") + unary
    signed.set_parse_action(_make_unary)
    unary <<= signed | power

    mul_op = pp.one_of("* /").set_parse_action(_operator)
    term = unary + pp.ZeroOrMore(mul_op - unary)
    term.set_parse_action(_fold_binary)

    add_op = pp.one_of("+ -").set_parse_action(_operator)
    expr <<= term + pp.ZeroOrMore(add_op - term)
    expr.set_parse_action(_fold_binary)
    return expr


_GRAMMAR = _build_grammar()


def _walk(node: ExprAst):
    yield node
    if isinstance(node, (Neg,)):
        yield from _walk(node.operand)
    elif isinstance(node, BinOp):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, Pow):
        yield from _walk(node.base)
    elif isinstance(node, Call):
        yield from _walk(node.arg)


def symbol_index(name: str, dim: Optional[int]) -> Optional[int]:
    """記号名を 0 始まりの座標番号に変換する。``y`` は最後の座標（dim が必要）"""
    if name == "y":
        return None if dim is None else dim - 1
    match = _SYMBOL.match(name)
    if match is None:
        raise KeyError(name)
    index = int(match.group(1)) - 1
    if dim is not None and index >= dim:
        raise KeyError(name)
    return index


def parse(src: str, dim: Optional[int] = None) -> ExprAst:
    """式を構文木に変換する

    Args:
        src: 式の文字列（例: ``"1 + x1^2"``）
        dim: チャートの次元。指定すると記号の番号を検査する

    Returns:
        構文木

    Raises:
        ExpressionSyntaxError: 構文エラー（offset は 1 始まりの文字位置）
        UnknownSymbol: x1..xd, y 以外の記号
    """
    try:
        ast = _GRAMMAR.parse_string(src, parse_all=True)[0]
    except pp.ParseBaseException as exc:
        raise ExpressionSyntaxError(exc.msg, offset=exc.loc + 1, source=src) from None
    except RecursionError:
        raise ExpressionSyntaxError("expression nested too deeply", offset=1, source=src) from None
    if dim is not None and dim < 1:
        raise ValueError(f"chart dimension must be >= 1, got {dim}")
    for node in _walk(ast):
        if isinstance(node, Sym):
            try:
                symbol_index(node.name, dim)
            except KeyError:
                raise UnknownSymbol(node.name, offset=node.pos + 1, source=src) from None
    return ast


def expand(ast: ExprAst, center: Sequence[float], order: int) -> Jet:
    """構文木を ``center`` のまわりで ``order`` 次までのジェットに展開する

    ジェットの変数は center からの変位。

    Raises:
        SingularExpansion: 展開点で 0 除算、または sqrt の引数が非正になる場合
        UnknownSymbol: 記号の番号がチャートの次元を超える場合
    """
    center = [float(c) for c in center]
    nvars = len(center)
    if nvars < 1:
        raise ValueError("expansion center needs at least one coordinate")

    def _expand(node: ExprAst) -> Jet:
        if isinstance(node, Num):
            return Jet.constant(node.value, nvars, order)
        if isinstance(node, Sym):
            try:
                index = symbol_index(node.name, nvars)
            except KeyError:
                raise UnknownSymbol(node.name, offset=node.pos + 1) from None
            return Jet.variable(index, nvars, order, value=center[index])
        if isinstance(node, Neg):
            return -_expand(node.operand)
        if isinstance(node, BinOp):
            left, right = _expand(node.left), _expand(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            try:
                return left * jet_reciprocal(right)
            except ZeroConstantTerm:
                raise SingularExpansion(
                    f"division by an expression vanishing at the center (offset {node.pos + 1})"
                ) from None
        if isinstance(node, Pow):
            try:
                return jet_power(_expand(node.base), node.exponent)
            except ZeroConstantTerm:
                raise SingularExpansion(
                    f"negative power of an expression vanishing at the center (offset {node.pos + 1})"
                ) from None
        if isinstance(node, Call):
            try:
                return apply_function(node.func, _expand(node.arg))
            except CompositionDomainError as exc:
                raise SingularExpansion(f"{exc.message} (offset {node.pos + 1})") from None
        raise TypeError(f"unexpected node {node!r}")

    with np.errstate(over="ignore", invalid="ignore"):
        try:
            return _expand(ast)
        except ValueError as exc:
            # 展開の途中で係数があふれた
            raise SingularExpansion(f"expansion is not finite at the center: {exc}") from None


def evaluate(ast: ExprAst, point: Sequence[float]) -> float:
    """構文木を点 ``point``（絶対座標）で直接評価する"""
    point = [float(p) for p in point]

    def _eval(node: ExprAst) -> float:
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Sym):
            return point[symbol_index(node.name, len(point))]
        if isinstance(node, Neg):
            return -_eval(node.operand)
        if isinstance(node, BinOp):
            left, right = _eval(node.left), _eval(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if right == 0.0:
                raise SingularExpansion(f"division by zero (offset {node.pos + 1})")
            return left / right
        if isinstance(node, Pow):
            base = _eval(node.base)
            if base == 0.0 and node.exponent < 0:
                raise SingularExpansion(f"negative power of zero (offset {node.pos + 1})")
            return base**node.exponent
        if isinstance(node, Call):
            arg = _eval(node.arg)
            if node.func == "sqrt" and arg < 0.0:
                raise SingularExpansion(f"sqrt of negative value (offset {node.pos + 1})")
            return getattr(math, node.func)(arg)
        raise TypeError(f"unexpected node {node!r}")

    return _eval(ast)
