"""expr_parser モジュール"""

from .parser import (
    FUNCTIONS,
    BinOp,
    Call,
    ExprAst,
    Neg,
    Num,
    Pow,
    Sym,
    evaluate,
    expand,
    parse,
    symbol_index,
)

__all__ = [
    "FUNCTIONS",
    "BinOp",
    "Call",
    "ExprAst",
    "Neg",
    "Num",
    "Pow",
    "Sym",
    "evaluate",
    "expand",
    "parse",
    "symbol_index",
]
