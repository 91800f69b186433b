"""Tests for the metric-expression parser."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from modules.errors import ExpressionSyntaxError, SingularExpansion, UnknownSymbol
from modules.expr_parser import evaluate, expand, parse
from modules.jet_core import jet_eval


class TestParse:
    @pytest.mark.parametrize(
        "src,expected",
        [
            ("1 + x1^2", "Add(1, Pow(x1, 2))"),
            ("sin(x1)*cos(x2)", "Mul(Sin(x1), Cos(x2))"),
            ("1 - x1 - x2", "Sub(Sub(1, x1), x2)"),
            ("x1/x2*x3", "Mul(Div(x1, x2), x3)"),
            ("-x1^2", "Neg(Pow(x1, 2))"),
            ("2*-x1", "Mul(2, Neg(x1))"),
            ("exp(y)", "Exp(y)"),
            ("x1^-1", "Pow(x1, -1)"),
        ],
    )
    def test_precedence_and_associativity(self, src, expected):
        assert parse(src).to_sexpr() == expected

    def test_unbalanced_paren_offset(self):
        with pytest.raises(ExpressionSyntaxError) as info:
            parse("1/(x1")
        assert info.value.offset == 6

    @pytest.mark.parametrize("src", ["", "1 +", "x1 ^ 1.5", "sin x1", "2 x1", "(("])
    def test_malformed(self, src):
        with pytest.raises(ExpressionSyntaxError):
            parse(src)

    def test_unknown_symbol_position(self):
        with pytest.raises(UnknownSymbol) as info:
            parse("1 + z")
        assert info.value.name == "z"
        assert info.value.offset == 5

    def test_symbol_beyond_dimension(self):
        parse("x3", dim=3)
        with pytest.raises(UnknownSymbol):
            parse("x4", dim=3)

    def test_deep_nesting_is_an_error_not_a_crash(self):
        with pytest.raises(ExpressionSyntaxError):
            parse("(" * 5000 + "x1" + ")" * 4999)

    def test_operator_positions(self):
        ast = parse("x1 + x2*x3^2")
        assert ast.pos == 3
        assert ast.right.pos == 7
        assert ast.right.right.pos == 10

    def test_overflowing_literal(self):
        with pytest.raises(ExpressionSyntaxError) as info:
            parse("2 + 1e999*x1")
        assert info.value.offset == 5


class TestExpand:
    def test_exp_series(self):
        jet = expand(parse("exp(x1)"), [0.0], 2)
        npt.assert_allclose(jet.coeffs, [1.0, 1.0, 0.5])

    def test_geometric_series(self):
        jet = expand(parse("1/(1-x1)"), [0.0], 3)
        npt.assert_allclose(jet.coeffs, [1.0, 1.0, 1.0, 1.0], atol=1e-15)

    def test_sin_about_half_pi(self):
        jet = expand(parse("sin(x1)"), [math.pi / 2], 2)
        npt.assert_allclose(jet.coeffs, [1.0, 0.0, -0.5], atol=1e-15)
        for t in (1e-3, -2e-3):
            assert abs(jet_eval(jet, [t]) - math.sin(math.pi / 2 + t)) <= abs(t) ** 3

    def test_alias_y_is_last_coordinate(self):
        jet = expand(parse("y"), [0.0, 0.0, 2.0], 1)
        assert jet.constant_term == 2.0
        assert jet.coefficient((0, 0, 1)) == 1.0

    @pytest.mark.parametrize("src,center", [("1/x1", [0.0]), ("sqrt(x1)", [0.0]), ("x1^-2", [0.0]), ("sqrt(-1-x1^2)", [0.5])])
    def test_singular_points(self, src, center):
        with pytest.raises(SingularExpansion):
            expand(parse(src), center, 3)

    def test_singular_offset_is_the_operator(self):
        with pytest.raises(SingularExpansion, match="offset 6"):
            expand(parse("1 + 1/x1"), [0.0], 2)

    def test_overflow_during_expansion(self):
        with pytest.raises(SingularExpansion):
            expand(parse("1e300*1e300*x1"), [0.0], 3)


class TestRoundTrip:
    EXPRESSIONS = [
        "1 + x1^2 - x1*x2",
        "exp(x1)*cos(x2) + 2",
        "1/(2 + sin(x1 - x2))",
        "sqrt(3 + x1^2 + x2^2)",
        "(1 + x1)^3 / (4 - x2)",
    ]

    @pytest.mark.parametrize("src", EXPRESSIONS)
    def test_expansion_matches_direct_evaluation(self, src, rng):
        ast = parse(src, dim=2)
        center = np.array([0.3, -0.2])
        order = 6
        jet = expand(ast, center, order)
        for _ in range(100):
            offset = rng.uniform(-0.01, 0.01, size=2)
            direct = evaluate(ast, center + offset)
            bound = 1e3 * np.max(np.abs(offset)) ** (order + 1)
            assert abs(jet_eval(jet, offset) - direct) <= bound + 1e-13, src


class TestFuzz:
    ALPHABET = list("x1y2()+-*/^ .e") + ["sin", "cos", "exp", "sqrt", "x3", "3"]

    def test_parser_is_total(self, rng):
        for _ in range(500):
            length = int(rng.integers(1, 16))
            src = "".join(rng.choice(self.ALPHABET, size=length))
            try:
                ast = parse(src, dim=3)
            except (ExpressionSyntaxError, UnknownSymbol) as exc:
                assert exc.offset >= 1
            else:
                assert ast.to_sexpr()
