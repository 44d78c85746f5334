import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from discerr import (ClampError, DomainError, GEvalConfig, InvalidArgumentError, Model, Payoff,
                     RngStream, apply_A, eval_dG, eval_G, pde_residual, sample_path, state_expectation)
from discerr.model import Grid
from conftest import mean_and_se, within_se

QUAD = GEvalConfig(force_quadrature=True, quad_nodes=128)

CLOSED = [
    (Payoff.binary(0.0), "B"), (Payoff.binary(1.0), "S"), (Payoff.binary(1.3), "S"),
    (Payoff.call(1.0), "S"), (Payoff.call(0.2), "B"), (Payoff.linear(2.0, -1.0), "S"),
    (Payoff.hermite(2), "B"), (Payoff.hermite(5), "B"),
]


def _xs(kind):
    return np.array([-1.5, -0.2, 0.0, 0.4, 1.7]) if kind == "B" else np.array([0.3, 0.9, 1.0, 1.2, 2.5])


def test_binary_at_strike():
    assert eval_G(Payoff.binary(0.0), Model("B"), 0.0, 0.0) == 0.5
    assert eval_dG(Payoff.binary(0.0), Model("B"), 0.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


def test_black_scholes_reference():
    # unit volatility, zero rate, at the money, one year
    want = stats.norm.cdf(0.5) - stats.norm.cdf(-0.5)
    assert eval_G(Payoff.call(1.0), Model("S"), 0.0, 1.0) == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("payoff, kind", CLOSED, ids=str)
@pytest.mark.parametrize("t", [0.0, 0.5, 0.97])
def test_closed_form_matches_quadrature(payoff, kind, t):
    m = Model(kind)
    x = _xs(kind)
    for order in (0, 1, 2):
        if order == 0:
            a, b = eval_G(payoff, m, t, x), eval_G(payoff, m, t, x, QUAD)
        else:
            a, b = eval_dG(payoff, m, t, x, order), eval_dG(payoff, m, t, x, order, QUAD)
        scale = max(1.0, float(np.max(np.abs(a))))
        assert np.max(np.abs(a - b)) <= 1e-10 * scale, order


@pytest.mark.parametrize("payoff, kind", [(Payoff.binary(1.0), "S"), (Payoff.call(0.0), "B"),
                                          (Payoff.hermite(3), "B"), (Payoff.holder(0.0, 0.5), "B")], ids=str)
def test_terminal_value_is_payoff(payoff, kind):
    m = Model(kind)
    x = _xs(kind)
    assert np.array_equal(eval_G(payoff, m, 1.0, x), payoff.g(x))


@pytest.mark.parametrize("payoff, kind", [(Payoff.binary(0.0), "B"), (Payoff.call(1.0), "S")], ids=str)
def test_boundary_limit_away_from_kink(payoff, kind):
    m = Model(kind)
    x = _xs(kind)
    x = x[np.abs(x - payoff.kink()) > 0.1]
    assert np.allclose(eval_G(payoff, m, 1 - 1e-6, x), payoff.g(x), atol=1e-8)


@pytest.mark.parametrize("payoff, kind, x", [
    (Payoff.binary(0.0), "B", 0.3), (Payoff.binary(1.0), "S", 1.1), (Payoff.call(1.0), "S", 0.8),
    (Payoff.hermite(3), "B", -0.4), (Payoff.holder(0.0, 0.5), "B", 0.2)], ids=str)
def test_heat_equation_second_order(payoff, kind, x):
    m = Model(kind)
    hs = [0.04, 0.02, 0.01]
    r = [abs(pde_residual(payoff, m, 0.4, x, h, QUAD if payoff.kind == "holder" else GEvalConfig())) for h in hs]
    if r[0] < 1e-11:
        return  # polynomial in x and t: differences are exact
    order = np.log2(r[:-1]) - np.log2(r[1:])
    assert np.all(order >= 1.8), r


def test_pde_one_sided_near_start():
    r = pde_residual(Payoff.call(1.0), Model("S"), 0.001, 1.0, 0.01)
    assert abs(r) < 1e-2


@pytest.mark.parametrize("payoff, kind", CLOSED[:5], ids=str)
def test_derivative_matches_difference(payoff, kind):
    m = Model(kind)
    x = _xs(kind)
    h = 1e-4
    fd1 = (eval_G(payoff, m, 0.3, x + h) - eval_G(payoff, m, 0.3, x - h)) / (2 * h)
    fd2 = (eval_G(payoff, m, 0.3, x + h) - 2 * eval_G(payoff, m, 0.3, x) + eval_G(payoff, m, 0.3, x - h)) / h ** 2
    assert np.allclose(eval_dG(payoff, m, 0.3, x, 1), fd1, rtol=1e-6, atol=1e-7)
    assert np.allclose(eval_dG(payoff, m, 0.3, x, 2), fd2, rtol=1e-3, atol=1e-3)


@pytest.mark.parametrize("payoff, kind", [(Payoff.binary(1.0), "S"), (Payoff.call(1.0), "S"),
                                          (Payoff.binary(0.0), "B")], ids=str)
def test_martingale_property(payoff, kind):
    m = Model(kind)
    p = sample_path(m, Grid([0.0, 0.6]), RngStream(17), 100000)
    v, se = mean_and_se(eval_G(payoff, m, 0.6, p.values[:, 1]))
    assert within_se(v, float(eval_G(payoff, m, 0.0, m.x0)), se)


def test_state_expectation_matches_martingale():
    m = Model("S")
    pay = Payoff.call(1.0)
    for tau in (0.9, 0.1, 1e-6):
        v = state_expectation(pay, m, tau, lambda x: eval_G(pay, m, 1 - tau, x))
        assert v == pytest.approx(float(eval_G(pay, m, 0.0, 1.0)), rel=1e-9)


def test_operator_A():
    b, s = Model("B"), Model("S")
    x = np.array([0.5, 1.0, 2.0])
    pay = Payoff.call(1.0)
    assert np.allclose(apply_A(pay, b, 0.2, x), eval_dG(pay, b, 0.2, x))
    want = x * eval_dG(pay, s, 0.2, x) - eval_G(pay, s, 0.2, x)
    assert np.allclose(apply_A(pay, s, 0.2, x), want)
    # linear payoff c0 x: A G vanishes for the geometric model
    assert np.allclose(apply_A(Payoff.linear(3.0, 0.0), s, 0.5, x), 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.99), st.floats(-3, 3), st.floats(-1, 1))
def test_binary_G_bounded_and_monotone(t, x, K):
    pay, m = Payoff.binary(K), Model("B")
    a, b = eval_G(pay, m, t, x), eval_G(pay, m, t, x + 0.1)
    assert 0 <= a <= b <= 1


def test_errors():
    m = Model("S")
    with pytest.raises(ClampError):
        eval_dG(Payoff.call(1.0), m, 1.0, 1.0)
    with pytest.raises(DomainError):
        eval_G(Payoff.call(1.0), m, 0.5, -1.0)
    with pytest.raises(InvalidArgumentError):
        eval_G(Payoff.call(1.0), m, 1.5, 1.0)
    with pytest.raises(InvalidArgumentError):
        Payoff.parse("asian(1)")
    with pytest.raises(InvalidArgumentError):
        Payoff.hermite(-1)


def test_parse_round_trip():
    for text in ("binary(0)", "call(1.5)", "linear(2,1)", "hermite(3)", "holder(0,0.5)", "power_singular(0.3)"):
        assert str(Payoff.parse(text)) == text
    assert Payoff.parse("hermite:2") == Payoff.hermite(2)
    assert Payoff.parse("binary") == Payoff.binary(1.0)


def test_l2_check():
    b, s = Model("B"), Model("S")
    for eta, finite in ((0.3, True), (0.45, True), (0.5, False), (0.6, False)):
        assert Payoff.power_singular(eta).l2_ok(b) is finite
        assert Payoff.power_singular(eta).l2_ok(s)  # the pole is never reached
    assert Payoff.binary(0.0).l2_ok(b) and Payoff.call(1.0).l2_ok(s)
