import math

import numpy as np
import pytest
from scipy import stats

from discerr import (GridMismatchError, InvalidArgumentError, Model, Payoff, RngStream, bracket_psi,
                     clock, clock_mean, nu_beta, refine_path, sample_path, sample_Z)
from discerr.estimators import ks_band
from discerr.timenet import build_net
from discerr.weaklimit import bracket_integral, clock_grid, gamma_process, nu_integral
from conftest import mean_and_se, within_se

B, S = Model("B"), Model("S")


def test_nu_beta():
    assert np.all(nu_beta(1.0, [0.0, 0.3, 0.99]) == 1.0)
    assert nu_beta(0.5, 0.0) == 2.0
    v = nu_beta(0.4, np.linspace(0, 0.999, 50))
    assert np.all(np.diff(v) < 0)
    with pytest.raises(InvalidArgumentError):
        nu_beta(0.5, 1.0)
    assert nu_integral(0.5, 1.0) == pytest.approx(4 / 3)


def clock_paths(beta, n_paths, seed=1, n_intervals=256, extra=()):
    return sample_path(B if True else S, clock_grid(beta, n_intervals, extra=extra), RngStream(seed), n_paths)


@pytest.mark.parametrize("beta", [1.0, 0.5, 0.4])
def test_hermite2_clock_is_deterministic(beta):
    p = sample_path(B, clock_grid(beta, 256), RngStream(2), 20)
    c = clock(Payoff.hermite(2), B, p, beta)
    assert np.allclose(c.a_terminal, 1 / (beta * (2 - beta)), rtol=2e-3)
    if beta == 1.0:
        assert np.allclose(c.a_terminal, 1.0, rtol=1e-9)


def test_linear_clock_vanishes():
    p = sample_path(S, clock_grid(0.5, 128), RngStream(3), 10)
    c = clock(Payoff.linear(1.0, 2.0), S, p, 0.5)
    assert np.all(c.a_values == 0.0)


@pytest.mark.parametrize("payoff, model, beta", [(Payoff.binary(0.0), B, 0.4), (Payoff.call(1.0), S, 1.0),
                                                 (Payoff.binary(1.0), S, 0.7)], ids=str)
def test_clock_monotone_and_starts_at_zero(payoff, model, beta):
    p = sample_path(model, clock_grid(beta, 128), RngStream(4), 50)
    c = clock(payoff, model, p, beta)
    assert np.all(c.a_values[:, 0] == 0.0)
    assert np.all(np.diff(c.a_values, axis=1) >= 0.0)


def test_clock_rejects_bad_grids():
    with pytest.raises(GridMismatchError):
        clock(Payoff.binary(0.0), B, sample_path(B, clock_grid(0.5, 64), RngStream(1), 2), 0.5, t_grid=[0.1234567])
    from discerr.model import Grid
    with pytest.raises(GridMismatchError):
        clock(Payoff.binary(0.0), B, sample_path(B, Grid([0, 0.5]), RngStream(1), 2), 0.5)


def test_clock_mean_closed_forms():
    assert clock_mean(Payoff.hermite(2), B, 0.5) == pytest.approx(4 / 3, rel=1e-10)
    assert clock_mean(Payoff.linear(1.0, 0.0), S, 0.5) == 0.0


def test_fubini_anchor_call():
    T = [0.5, 0.9, 1.0]
    ls = sample_Z(Payoff.call(1.0), S, 1.0, T, RngStream(5), RngStream(5, 1), n_paths=2000,
                  n_intervals=256)
    m, se = mean_and_se(ls.a_terminal)
    assert within_se(m, clock_mean(Payoff.call(1.0), S, 1.0), se)


def test_fubini_anchor_binary_truncated():
    beta = 0.4
    T = [0.9, 0.99, 0.999]
    pay = Payoff.binary(0.0)
    p = sample_path(B, clock_grid(beta, 512, extra=T), RngStream(6), 2000)
    a = clock(pay, B, p, beta, T).a_values
    for j, t in enumerate(T):
        m, se = mean_and_se(a[:, j])
        assert within_se(m, clock_mean(pay, B, beta, t), se)


@pytest.mark.slow
def test_fubini_anchor_binary_terminal():
    # infinite variance: the standard error is itself noisy, see the README
    pay = Payoff.binary(0.0)
    ls = sample_Z(pay, B, 0.4, [1.0], RngStream(21), RngStream(21, 1), n_paths=10000)
    m, se = mean_and_se(ls.a_terminal)
    assert within_se(m, clock_mean(pay, B, 0.4), se)


def test_sample_Z_requires_distinct_streams():
    with pytest.raises(InvalidArgumentError):
        sample_Z(Payoff.binary(0.0), B, 0.5, [1.0], RngStream(1), RngStream(1))


def test_sample_Z_linear_is_zero():
    ls = sample_Z(Payoff.linear(2.0, 0.0), S, 0.5, [0.5, 1.0], RngStream(1), RngStream(2), n_paths=20,
                  n_intervals=64)
    assert np.all(ls.z_values == 0.0)


def test_sample_Z_hermite2_is_standard_normal():
    ls = sample_Z(Payoff.hermite(2), B, 1.0, [1.0], RngStream(7), RngStream(7, 1), n_paths=100000,
                  n_intervals=16, chunk=20000, max_levels=0)
    z = ls.z_values[:, 0]
    assert stats.kstest(z, "norm").statistic <= 0.006


def test_sample_Z_variance_matches_clock():
    T = [0.5, 0.9, 1.0]
    ls = sample_Z(Payoff.call(1.0), S, 1.0, T, RngStream(8), RngStream(8, 1), n_paths=2000,
                  n_intervals=128)
    z2 = ls.z_values[:, -1] ** 2
    m, se = mean_and_se(z2 - ls.a_terminal)
    assert within_se(m, 0.0, se)
    # sup_t E Z_t**2 is attained at t = 1
    ez2 = np.mean(ls.z_values ** 2, axis=0)
    assert np.argmax(ez2) == len(T) - 1


def test_conditional_gaussian_law():
    ls = sample_Z(Payoff.call(1.0), S, 1.0, [1.0], RngStream(9), RngStream(9, 1), n_paths=3000,
                  n_intervals=128)
    a, z = ls.a_terminal, ls.z_values[:, 0]
    for stratum in np.array_split(np.argsort(a), 3):
        u = z[stratum] / np.sqrt(a[stratum])
        assert stats.kstest(u, "norm").pvalue > 1e-3


def fine_path(n, beta, factor, n_paths, seed):
    s = RngStream(seed)
    coarse = sample_path(B, build_net(n, beta).grid, s, n_paths)
    return refine_path(B, coarse, factor, s.spawn(1))


def test_bracket_trivial_and_errors():
    p = fine_path(16, 0.5, 32, 5, 1)
    assert np.all(bracket_psi(B, 0.0, 2, 16, 0.5, 1.0, p) == bracket_psi(B, 0.0, 1, 16, 0.5, 1.0, p) * 0)
    with pytest.raises(GridMismatchError):
        bracket_psi(B, 1.0, 2, 16, 0.5, 1.0, fine_path(16, 0.5, 8, 5, 1))
    with pytest.raises(InvalidArgumentError):
        bracket_psi(B, 1.0, 3, 16, 0.5, 1.0, p)


def test_bracket_zero_weight_is_zero():
    p = fine_path(16, 0.5, 32, 5, 1)
    assert np.all(bracket_psi(B, 0.0, 1, 16, 0.5, 1.0, p) == 0.0)
    a, target = bracket_integral(B, 0.0, 2, 16, 0.5, 1.0, p)
    assert np.all(a == 0.0) and np.all(target == 0.0)


def test_bracket_second_order_target():
    n = 256
    a, target = bracket_integral(B, 1.0, 2, n, 0.5, 1.0, fine_path(n, 0.5, 32, 200, 10))
    assert np.allclose(target, 2 / 3, rtol=1e-3)
    m, se = mean_and_se(a)
    assert abs(m - 2 / 3) < 0.05


def test_bracket_first_order_decreases():
    sups = [np.mean(bracket_psi(B, 1.0, 1, n, 0.5, 1.0, fine_path(n, 0.5, 32, 50, 11)))
            for n in (16, 64, 256)]
    assert sups[0] > sups[1] > sups[2]


def test_gamma_process_weight():
    a = gamma_process(Payoff.hermite(2), B)
    assert np.allclose(a(0.5, np.array([0.1, 2.0])), math.sqrt(2))
    a2 = gamma_process(Payoff.hermite(2), B, power=2)
    assert np.allclose(a2(0.5, np.array([0.1])), 2.0)
