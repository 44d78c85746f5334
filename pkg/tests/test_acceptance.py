"""Acceptance suite: one test per criterion at its stated tolerance and budget.

Each test prints a single ``CRITERION k PASS|FAIL`` line; the lines are
repeated in the pytest terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` to get just the lines.
"""

from functools import lru_cache
import math

import numpy as np
import pytest
from scipy import stats

from discerr import (Model, Payoff, RngStream, besov_norm, bracket_psi, build_net, check_conditions,
                     clock, decompose_error, error_at, hermite_coeffs, ks_distance, mesh_stats, osc,
                     pde_residual, rate_fit, refine_path, sample_path, sample_Z, singularity_exponent,
                     terminal_error)
from discerr.estimators import collect_samples, error_moments, lp_moment, terminal_error_sampler, trend_test
from discerr.payoff import hermite_normalized
from discerr.quadrature import gauss_hermite
from discerr.smoothness import MEMBER, NON_MEMBER, integrability_cap
from discerr.weaklimit import bracket_integral, clock_grid

pytestmark = pytest.mark.acceptance

B, S = Model("B"), Model("S")
N_LIST = [8, 16, 32, 64, 128, 256, 512]
BASE = RngStream(20260601)
RESULTS = []


def report(number, title, ok, detail):
    line = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def binary_rate(beta):
    mom = error_moments(Payoff.binary(1.0), S, beta, N_LIST, [2.0], 200000, BASE.spawn(1),
                        bootstrap=False)
    return rate_fit([(n, mom[(n, 2.0)]) for n in N_LIST])


def test_criterion_01_equidistant_rate():
    fit = binary_rate(1.0)
    report(1, "binary/S equidistant L2 rate", 0.20 <= fit.theta_hat <= 0.30,
           f"theta_hat={fit.theta_hat:.4f} (stderr {fit.stderr:.4f}, r2 {fit.r2:.4f}), want [0.20, 0.30]")


def test_criterion_02_adapted_rate():
    fit = binary_rate(0.4)
    report(2, "binary/S beta=0.4 L2 rate", 0.45 <= fit.theta_hat <= 0.55,
           f"theta_hat={fit.theta_hat:.4f} (stderr {fit.stderr:.4f}, r2 {fit.r2:.4f}), want [0.45, 0.55]")


def test_criterion_03_exact_anchor():
    pay = Payoff.hermite(2)
    parts, ok = [], True
    for n in (4, 64, 1024):
        x = n * collect_samples(terminal_error_sampler(pay, B, build_net(n, 1.0)), 200000,
                                BASE.spawn(300 + n)) ** 2
        m, se = x.mean(), x.std(ddof=1) / math.sqrt(x.size)
        ok &= abs(m - 1.0) <= 3 * se
        parts.append(f"n={n}: {m:.4f}+-{se:.4f}")
    n = 256
    z = collect_samples(terminal_error_sampler(pay, B, build_net(n, 1.0), scale=math.sqrt(n)), 100000,
                        BASE.spawn(3256))
    ks = ks_distance(z, stats.norm.cdf)
    ok &= ks <= 0.02
    report(3, "hermite(2)/B exact anchor", ok, "n E C_1^2 " + ", ".join(parts) + f"; KS(n=256)={ks:.4f} <= 0.02")


def test_criterion_04_two_sample_limit():
    pay, n, m = Payoff.call(1.0), 256, 100000
    err = collect_samples(terminal_error_sampler(pay, S, build_net(n, 1.0), scale=math.sqrt(n)), m,
                          BASE.spawn(4))
    ls = sample_Z(pay, S, 1.0, [1.0], BASE.spawn(41), BASE.spawn(42), n_paths=m)
    z = np.asarray(ls.z_values)[:, -1]
    ks = ks_distance(err, z)
    report(4, "call/S sqrt(n) C_1 vs Z(1)", ks <= 0.03,
           f"KS={ks:.4f} <= 0.03 (E C^2 n={np.mean(err ** 2):.4f}, E Z^2={np.mean(z ** 2):.4f})")


@lru_cache(maxsize=None)
def scaled_binary_moments(beta):
    return error_moments(Payoff.binary(0.0), B, beta, N_LIST, [2.0, 4.0], 200000, BASE.spawn(5),
                         bootstrap=False, scaled=True)


def _trend(beta, p):
    mom = scaled_binary_moments(beta)
    vals = [mom[(n, p)].value for n in N_LIST]
    return vals, trend_test(N_LIST, vals)


def test_criterion_05_besov_dichotomy():
    pay = Payoff.binary(0.0)
    exp = hermite_coeffs((pay, B))
    v = {b: (besov_norm(exp, b).verdict, check_conditions(pay, B, b).verdict) for b in (0.4, 0.6)}
    verdicts_ok = v[0.4] == (MEMBER, MEMBER) and v[0.6] == (NON_MEMBER, NON_MEMBER)
    vals4, tr4 = _trend(0.4, 2.0)
    vals6, tr6 = _trend(0.6, 2.0)
    ok = verdicts_ok and not tr4.grows and tr6.grows
    report(5, "binary/B smoothness 1/2 dichotomy", ok,
           f"verdicts(besov, conditions) 0.4={v[0.4]}, 0.6={v[0.6]}; sqrt(n) L2 slope "
           f"beta=0.4 {tr4.slope:.4f} (t={tr4.tstat:.1f}, grows={tr4.grows}, want stable), "
           f"beta=0.6 {tr6.slope:.4f} (t={tr6.tstat:.1f}, grows={tr6.grows}, want growth); "
           f"beta=0.4 values {np.round(vals4, 4).tolist()}")


def test_criterion_06_singularity_exponents():
    got = {p: singularity_exponent(Payoff.binary(0.0), B, p) for p in (2, 3, 4)}
    ok = all(abs(got[p] - (1 / (2 * p) - 0.5)) <= 0.01 for p in got)
    report(6, "binary/B delta singularity exponents", ok,
           ", ".join(f"p={p}: {v:.5f} (want {1 / (2 * p) - 0.5:.5f})" for p, v in got.items()))


def test_criterion_07_lp_threshold():
    v2, tr2 = _trend(0.4, 2.0)
    v4, tr4 = _trend(0.4, 4.0)
    ok = not tr2.grows and tr4.grows and tr4.tstat > 3
    report(7, "binary/B beta=0.4 L_p threshold", ok,
           f"p=2 slope {tr2.slope:.4f} (t={tr2.tstat:.1f}, want stable); "
           f"p=4 slope {tr4.slope:.4f} (t={tr4.tstat:.1f}, want growth); "
           f"p=4 values {np.round(v4, 4).tolist()}")


def _bracket_fine(n, n_paths, stream):
    coarse = sample_path(B, build_net(n, 0.5).grid, stream, n_paths)
    return refine_path(B, coarse, 32, stream.spawn(1))


def test_criterion_08_bracket():
    n = 2048
    vals = []
    for start in range(0, 100, 10):
        st = BASE.spawn(8).spawn(start)
        a, target = bracket_integral(B, 1.0, 2, n, 0.5, 1.0, _bracket_fine(n, 10, st))
        vals.append(a)
    mean2 = float(np.mean(np.concatenate(vals)))
    sups = [float(np.mean(bracket_psi(B, 1.0, 1, k, 0.5, 1.0, _bracket_fine(k, 100, BASE.spawn(80 + k)))))
            for k in (64, 256, 1024)]
    ok = abs(mean2 - 2 / 3) <= 0.02 * 2 / 3 and sups[0] > sups[1] > sups[2]
    report(8, "Riemann brackets, a=1, beta=1/2", ok,
           f"int psi^2 at n=2048: {mean2:.4f} (2/3 +- 2%); k=1 mean sup n=64,256,1024: "
           f"{', '.join(f'{s:.4f}' for s in sups)} (decreasing)")


def test_criterion_09_decomposition():
    pay, m, factor = Payoff.call(1.0), 100000, 64
    rows = []
    for n in (8, 32, 128):
        net = build_net(n, 1.0)
        st = BASE.spawn(900 + n)
        i1, i2 = [], []
        chunk = 2 ** 21 // (n * factor)
        for s in range(0, m, chunk):
            c = min(chunk, m - s)
            fine = refine_path(S, sample_path(S, net.grid, st, c, s), factor, st.spawn(1))
            d = decompose_error(pay, S, net, fine)
            i1.append(d.i1)
            i2.append(d.i2)
        rows.append((n, n * math.fsum(np.concatenate(i1) ** 2) / m, n * math.fsum(np.concatenate(i2) ** 2) / m))
    dec1 = rows[0][1] > rows[1][1] > rows[2][1]
    dec2 = rows[0][2] > rows[1][2] > rows[2][2]
    net = build_net(16, 1.0)
    fine = refine_path(B, sample_path(B, net.grid, BASE.spawn(99), 1000), 16, BASE.spawn(98))
    zero = bool(np.all(decompose_error(Payoff.call(0.0), B, net, fine).i2 == 0.0))
    report(9, "decomposition diagnostics", dec1 and dec2 and zero,
           "call/S n E I1^2 " + ", ".join(f"n={n}: {a:.5f}" for n, a, _ in rows)
           + "; n E I2^2 " + ", ".join(f"n={n}: {b:.6f}" for n, _, b in rows)
           + f"; I2 == 0 for X=B: {zero}")


def test_criterion_10_osc():
    step = Payoff.binary(0.0)
    v = osc(step, 2, 0.0, 0.5)
    ok = abs(v - math.sqrt(2) / 2) <= 1e-6
    eps = 2.0 ** -np.arange(1, 9)
    slopes = {}
    for eta in (0.1, 0.2, 0.4):
        vals = [osc(Payoff.power_singular(eta), 2, 0.0, e) for e in eps]
        slopes[eta] = float(np.polyfit(np.log(eps), np.log(vals), 1)[0])
        ok &= abs(slopes[eta] + eta) <= 0.02
    # measured singularity of the step (flat OSC) and measured Besov members
    step_vals = [osc(step, 2, 0.0, e) for e in eps]
    eta_step = -float(np.polyfit(np.log(eps), np.log(step_vals), 1)[0])
    exp = hermite_coeffs((step, B))
    members = [float(b) for b in np.round(np.arange(0.1, 0.65, 0.05), 2) if besov_norm(exp, b).verdict == MEMBER]
    cap_ok = all(2 <= integrability_cap(b, max(eta_step, 0.0)) for b in members)
    ok &= cap_ok and len(members) > 0
    report(10, "OSC suite", ok,
           f"step OSC={v:.9f}; slopes " + ", ".join(f"eta={k}: {s:.4f}" for k, s in slopes.items())
           + f"; step eta={eta_step:.1e}, member betas {members}, p=2 <= 1/(beta+eta) for all: {cap_ok}")


def test_criterion_11_property_suites():
    checks = {}
    worst = 0.0
    for beta in np.round(np.arange(1, 11) / 10, 1):
        for n in range(1, 1025):
            ms = mesh_stats(build_net(n, beta))
            worst = max(worst, ms.max_weighted_ratio / ms.bound)
    checks["time-net inequality"] = worst <= 1 + 1e-12
    orders = []
    for pay, model, x in ((Payoff.binary(0.0), B, 0.3), (Payoff.call(1.0), S, 0.8), (Payoff.binary(1.0), S, 1.1)):
        r = [abs(pde_residual(pay, model, 0.4, x, h)) for h in (0.04, 0.02, 0.01)]
        orders.append(min(np.log2(r[0] / r[1]), np.log2(r[1] / r[2])))
    checks["PDE residual order"] = min(orders) >= 1.8
    z, w = gauss_hermite(64)
    h = np.array([hermite_normalized(k, z) for k in range(11)])
    checks["Hermite orthonormality"] = np.max(np.abs((h * w) @ h.T - np.eye(11))) <= 1e-10
    net = build_net(32, 0.5)
    lin = max(float(np.max(np.abs(terminal_error(Payoff.linear(2.0, 1.0), m, net, BASE.spawn(11), 1000))))
              for m in (B, S))
    checks["linear zero error"] = lin <= 1e-12
    p = sample_path(B, clock_grid(0.4, 256), BASE.spawn(12), 200)
    a = clock(Payoff.binary(0.0), B, p, 0.4).a_values
    checks["clock monotonicity"] = bool(np.all(np.diff(a, axis=1) >= 0) and np.all(a[:, 0] == 0))
    f = terminal_error_sampler(Payoff.binary(1.0), S, build_net(16, 0.4))
    vals = {lp_moment(f, 2, 5000, BASE.spawn(13), chunk=c, workers=w, bootstrap=False).value
            for c, w in ((5000, 1), (333, 1), (1024, 3))}
    checks["reduction-order determinism"] = len(vals) == 1
    report(11, "property suites", all(checks.values()),
           ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items())
           + f" (worst net ratio/bound {worst:.15f}, min PDE order {min(orders):.3f})")


if __name__ == "__main__":
    for name, func in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                func()
            except AssertionError:
                pass
