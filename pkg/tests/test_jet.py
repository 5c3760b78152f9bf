import mpmath
import pytest
from hypothesis import given, strategies as st

from paraclass.errors import OrderExceeded, UnboundParameter
from paraclass.expr import Point, evaluate, parse
from paraclass.jet import MAX_ORDER, derivative, jet_eval

from strategies import exprs, points

TOL = mpmath.mpf(10) ** -25


def close(a, b, tol=TOL):
    with mpmath.workdps(60):
        return abs(a - b) <= tol * max(1, abs(a), abs(b))


def pt(p):
    return Point.of(p[0], p[1])


def partial(e, i, k):
    for _ in range(i):
        e = e.d("t")
    for _ in range(k):
        e = e.d("x")
    return e


@given(exprs, points, st.integers(0, 4), st.integers(0, 4))
def test_jet_coefficients_match_symbolic_partials(e, p, i, k):
    j = jet_eval(e, pt(p), i + k)
    assert close(derivative(j, i, k), evaluate(partial(e, i, k), pt(p)))


@given(exprs, exprs, points)
def test_jet_arithmetic_matches_expression_arithmetic(a, b, p):
    d = 3
    ja, jb = jet_eval(a, pt(p), d), jet_eval(b, pt(p), d)
    for combined, jet in ((a + b, ja + jb), (a * b, ja * jb), (a - b, ja - jb)):
        ref = jet_eval(combined, pt(p), d)
        for i in range(d + 1):
            for k in range(d + 1 - i):
                assert close(derivative(jet, i, k), derivative(ref, i, k))


@given(exprs, points)
def test_jet_d_shifts_coefficients(e, p):
    j = jet_eval(e, pt(p), 4)
    jt, jx = j.d("t"), j.d("x")
    assert jt.order == 3 and jx.order == 3
    for i in range(4):
        for k in range(4 - i):
            assert close(derivative(jt, i, k), derivative(j, i + 1, k))
            assert close(derivative(jx, i, k), derivative(j, i, k + 1))


@pytest.mark.parametrize(
    "text, i, k, expected",
    [
        ("exp(t + 2*x)", 2, 3, lambda t, x: 8 * mpmath.exp(t + 2 * x)),
        ("x^5", 0, 5, lambda t, x: 120),
        ("x^5", 0, 6, lambda t, x: 0),
        ("sin(t*x)", 1, 1, lambda t, x: mpmath.cos(t * x) - t * x * mpmath.sin(t * x)),
        ("ln(x)", 0, 3, lambda t, x: 2 / x**3),
        ("root5(x)", 0, 2, lambda t, x: -mpmath.mpf(4) / 25 * x ** (-mpmath.mpf(9) / 5)),
        ("1/x", 0, 4, lambda t, x: 24 / x**5),
    ],
)
def test_closed_form_derivatives(text, i, k, expected):
    p = Point.of(mpmath.mpf(3) / 2, mpmath.mpf(5) / 4)
    j = jet_eval(parse(text), p, i + k)
    with mpmath.workdps(40):
        assert close(derivative(j, i, k), expected(p.t, p.x), mpmath.mpf(10) ** -35)


def test_root5_of_negative_base():
    j = jet_eval(parse("root5(x)"), Point.of(1, -32), 1)
    assert close(j.value, -2)
    with mpmath.workdps(40):
        assert close(derivative(j, 0, 1), mpmath.mpf(1) / 80)


def test_order_limits():
    e = parse("x^3")
    with pytest.raises(ValueError):
        jet_eval(e, Point.of(1, 1), MAX_ORDER + 1)
    j = jet_eval(e, Point.of(1, 1), 2)
    with pytest.raises(OrderExceeded):
        derivative(j, 1, 2)


def test_parameters_bind_in_jets():
    e = parse("K*x^2")
    with pytest.raises(UnboundParameter):
        jet_eval(e, Point.of(1, 1), 2)
    j = jet_eval(e, Point.of(1, 1), 2, params={"K": 3})
    assert derivative(j, 0, 2) == 6


def test_high_order_jets_stay_accurate():
    p = Point.of(1, mpmath.mpf(3) / 2)
    j = jet_eval(parse("exp(x)*sin(t)"), p, MAX_ORDER)
    with mpmath.workdps(40):
        ref = mpmath.exp(p.x) * mpmath.sin(p.t + 4 * mpmath.pi / 2)
        assert close(derivative(j, 4, MAX_ORDER - 4), ref, mpmath.mpf(10) ** -30)
