import pytest

from fermatlab.services.expr_core import Finite, Z, evaluate, exp, log, root
from fermatlab.utils.sexpr import SExprError, parse_sexpr, to_sexpr


def _value(expr, z):
    result = evaluate(expr, z)
    assert isinstance(result, Finite)
    return result.value


@pytest.mark.parametrize(
    "text, z, expected",
    [
        ("z", 0.5, 0.5),
        ("(+ z 1)", 0.5, 1.5),
        ("(* 2 z z)", 3.0, 18.0),
        ("(- z 1)", 0.25, -0.75),
        ("(/ 1 z)", 4.0, 0.25),
        ("(pow z 3)", 2.0, 8.0),
        ("(pow z 0)", 7.0, 1.0),
        ("(root z 2)", 4.0, 2.0),
        ("(const 0 1)", 0.0, 1j),
        ("(neg (recip z))", 2.0, -0.5),
        ("(compose (exp z) (* 2 z))", 0.0, 1.0),
    ],
)
def test_parse_and_evaluate(text, z, expected):
    assert _value(parse_sexpr(text), z) == pytest.approx(expected)


def test_serialized_expression_evaluates_the_same():
    f = exp(Z * 0.5) + root(1 - Z ** 2, 3) * log(Z + 2) - 1j
    g = parse_sexpr(to_sexpr(f))
    for z in (0.1, 0.3 - 0.2j, -0.4j):
        assert _value(g, z) == pytest.approx(_value(f, z), rel=1e-14)


def test_shared_nodes_serialize_at_each_occurrence():
    e = exp(Z)
    text = to_sexpr(e * e)
    assert text == "(* (exp z) (exp z))"


def test_wp_binds_to_context(elliptic_context):
    expr = parse_sexpr("(wp)", elliptic_context)
    p = elliptic_context.wp(0.3)
    assert _value(expr, 0.3) == pytest.approx(p.value)


@pytest.mark.parametrize(
    "text",
    ["", "(", ")", "(+ z", "(foo z)", "(pow z x)", "(root z 0)", "(exp z z)", "z z", "(const 1)", "bogus"],
)
def test_malformed_input_raises(text):
    with pytest.raises(SExprError):
        parse_sexpr(text)
