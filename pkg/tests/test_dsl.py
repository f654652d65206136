"""Parsing, printing and evaluating immersion specs."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affinelab.dsl import (BinOp, Call, Neg, Num, Pow, Var, ambient_map, eval_jet, eval_point,
                           evaluate_float, parse_expression, parse_immersion, reparametrize, spec_to_text,
                           to_text)
from affinelab.errors import EvaluationError, ParseError, SemanticError
from affinelab.families import FAMILY_IDS, builtin

PARABOLOID = "n=3; F = (u1, u2, u3, (u1^2+u2^2+u3^2)/2)"
CALABI = "n=3; F = (exp(u1), exp(u2), exp(u3), exp(-u1-u2-u3))"


def test_paraboloid_parses():
    spec = parse_immersion(PARABOLOID)
    assert spec.chart_dim == 3 and spec.ambient_dim == 4
    assert evaluate_float(spec.components[3], {"u1": 1, "u2": 2, "u3": 3}, {}) == pytest.approx(7.0)


def test_component_count_is_semantic_error():
    with pytest.raises(SemanticError) as err:
        parse_immersion("n=2; F = (u1, u2)")
    assert err.value.line == 1 and err.value.column is not None


@pytest.mark.parametrize("text, line, col", [
    ("n=2;\nF = (u1, u2, u1 +* u2)", 2, 18),
    ("n=2;\nF = (u1, u2, u3)", 2, 14),
    ("n=2;\nF = (u1, u2, foo(u1))", 2, 14),
    ("n=2; F = (u1, u2, u1^u2)", 1, None),
])
def test_errors_carry_positions(text, line, col):
    with pytest.raises(ParseError) as err:
        parse_immersion(text)
    assert err.value.line == line
    if col is not None:
        assert err.value.column == col


def test_unknown_function_and_arity():
    with pytest.raises(ParseError):
        parse_immersion("n=1; F = (u1, tan(u1))")
    with pytest.raises(ParseError):
        parse_immersion("n=1; F = (u1, exp(u1, u1))")


def test_power_binds_tighter_than_unary_minus():
    node = parse_expression("-u1^2", ["u1"])
    assert evaluate_float(node, {"u1": 3.0}, {}) == -9.0
    assert evaluate_float(parse_expression("2^3^2"), {}, {}) == 2.0 ** 9


def test_calabi_chart_first_order():
    spec = parse_immersion(CALABI)
    jet = eval_jet(spec, [0, 0, 0], 1)
    assert np.allclose(jet.value, [1, 1, 1, 1])
    grads = jet.first_derivatives()  # grads[a, i]
    assert np.allclose(grads[:3], np.eye(3))
    assert np.allclose(grads[3], [-1, -1, -1])


def test_paraboloid_jet_is_exact():
    jet = eval_jet(parse_immersion(PARABOLOID), [0, 0, 0], 2)
    assert jet[3].coefficient((2, 0, 0)) == pytest.approx(0.5)
    assert jet[3].coefficient((1, 1, 0)) == 0.0
    assert np.allclose(jet[0].first_derivatives(), [1, 0, 0])


def test_log_of_zero_names_subexpression():
    spec = parse_immersion("n=1; F = (u1, 1 + log(u1))")
    with pytest.raises(EvaluationError) as err:
        eval_jet(spec, [0.0], 3)
    assert "log(u1)" in str(err.value)


def test_rational_power_needs_positive_base():
    spec = parse_immersion("n=1; F = (u1, (u1 - 1)^(1/3))")
    with pytest.raises(EvaluationError):
        eval_point(spec, [0.5])
    assert eval_point(spec, [9.0])[1] == pytest.approx(2.0)


def test_helpers_and_metadata():
    text = """n = 2;  # comment
    name = "demo";
    domain u1 = [0.5, 2];
    let g(s) = s^2 + 1;
    let G(s) = integral(g(s), 1);
    let k(s) = linode(0, -1, 0, 1, 0);
    F = (G(u1), g(u1)*u2, k(u1));"""
    spec = parse_immersion(text)
    assert spec.name == "demo"
    assert np.allclose(spec.box(), [[0.5, 2], [-0.5, 0.5]])
    v = eval_point(spec, [1.5, 0.2])
    assert v[0] == pytest.approx((1.5 ** 3 / 3 + 1.5) - (1 / 3 + 1), rel=1e-12)
    assert v[2] == pytest.approx(math.cos(1.5), rel=1e-10)
    jet = eval_jet(spec, [1.5, 0.2], 3)
    assert jet[2].partial((2, 0)) == pytest.approx(-math.cos(1.5), rel=1e-9)


# ---------------------------------------------------------------- printing

names = st.sampled_from(["u1", "u2"])
leaves = st.one_of(names.map(Var), st.floats(0.0, 10.0, allow_nan=False).map(Num),
                   st.floats(-10.0, -0.001).map(Num))


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(children, st.integers(-3, 3).map(float).map(Num)).map(lambda t: Pow(*t)),
        st.tuples(st.sampled_from(["exp", "log", "sin", "cos", "sqrt"]), children).map(lambda t: Call(*t)),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(trees)
def test_print_parse_is_a_fixed_point(tree):
    first = parse_expression(to_text(tree), ["u1", "u2"])
    second = parse_expression(to_text(first), ["u1", "u2"])
    assert second == first
    assert to_text(second) == to_text(first)


@pytest.mark.parametrize("fid", FAMILY_IDS)
def test_builtin_text_round_trip(fid):
    spec = builtin(fid, 3)
    text = spec_to_text(spec)
    again = parse_immersion(text)
    assert spec_to_text(again) == text
    p = spec.box().mean(axis=1) + 0.1
    assert np.allclose(eval_point(again, p), eval_point(spec, p), rtol=1e-13)


@pytest.mark.parametrize("fid", FAMILY_IDS)
def test_jets_match_finite_differences_on_builtins(fid):
    spec = builtin(fid, 3)
    p = spec.box().mean(axis=1) + np.array([0.13, -0.07, 0.11])
    jet = eval_jet(spec, p, 2)
    assert np.allclose(jet.value, eval_point(spec, p), rtol=1e-13)
    h = 1e-4
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (eval_point(spec, p + e) - eval_point(spec, p - e)) / (2 * h)
        ad = jet.first_derivatives()[:, i]
        assert np.allclose(ad, fd, rtol=1e-6, atol=1e-8)


def test_reparametrize_and_ambient_map():
    spec = parse_immersion(PARABOLOID)
    A = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    b = np.array([0.1, -0.2, 0.3])
    re = reparametrize(spec, A, b)
    v = np.array([0.2, 0.1, -0.4])
    assert np.allclose(eval_point(re, v), eval_point(spec, A @ v + b))
    B = np.eye(4) + np.diag([0.5, 0, 0], 1)
    d = np.array([1.0, 0, 0, -2])
    am = ambient_map(spec, B, d)
    assert np.allclose(eval_point(am, v), B @ eval_point(spec, v) + d)
