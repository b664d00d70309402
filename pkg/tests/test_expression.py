"""Tests for the strength and load expression language"""

import math

import numpy as np
import pytest

from platelimit.exceptions import ExpressionError
from platelimit.expression import evaluate_checked, parse_expression, tokenize

POINT = np.array([[0.5, 0.25]])


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("2^-1", 0.5),
        ("8 / 4 / 2", 1.0),
        ("1.5e1 - .5", 14.5),
        ("pi", math.pi),
        ("cos(0) + sin(0) + exp(0)", 2.0),
        ("x1 + 10 * x2", 3.0),
        ("1 + 0.5*cos(pi*x1)*cos(pi*x2)", 1.0 + 0.5 * math.cos(math.pi / 2) * math.cos(math.pi / 4)),
    ],
)
def test_evaluation(text, expected):
    assert parse_expression(text)(POINT)[0] == pytest.approx(expected)


@pytest.mark.parametrize(
    "text, position",
    [
        ("1+", 2),
        ("2 $ 3", 2),
        ("(1 + 2", 6),
        ("1 2", 2),
        ("foo(1)", 0),
        ("sin 1", 4),
        ("", 0),
        ("   ", 0),
    ],
)
def test_syntax_errors_report_position(text, position):
    with pytest.raises(ExpressionError) as excinfo:
        parse_expression(text)
    assert excinfo.value.position == position
    assert excinfo.value.expression == text
    assert f"position {position}" in str(excinfo.value)


def test_uses_coordinates():
    assert parse_expression("x1 * 2").uses_coordinates
    assert not parse_expression("2 * pi").uses_coordinates


def test_expressions_compare_by_text():
    assert parse_expression("1 + x1") == parse_expression("1 + x1")
    assert str(parse_expression("1 + x1")) == "1 + x1"


def test_vectorised_evaluation():
    points = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]])
    np.testing.assert_allclose(parse_expression("x1 * x2 + 1")(points), [1.0, 3.0, -2.0])
    np.testing.assert_allclose(parse_expression("4")(points), [4.0, 4.0, 4.0])


def test_tokenize():
    tokens = tokenize("2*x1 ")
    assert [(t.kind, t.text, t.position) for t in tokens] == [
        ("number", "2", 0),
        ("op", "*", 1),
        ("name", "x1", 2),
        ("end", "", 5),
    ]


def test_evaluate_checked_rejects_non_finite():
    expression = parse_expression("1 / (x1 - 0.5)")
    points = np.array([[0.0, 0.0], [0.5, 0.3]])
    with pytest.raises(ExpressionError, match="x1=0.5, x2=0.3"):
        evaluate_checked(expression, points, "load density")
    np.testing.assert_allclose(evaluate_checked(expression, points[:1]), [-2.0])
