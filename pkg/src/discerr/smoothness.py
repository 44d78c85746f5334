"""Fractional-smoothness diagnostics.

Everything here is deterministic quadrature: Hermite coefficients of the
payoff, weighted Hermite (Besov-type) norms, the curve
H(t) = ||sigma**2 d2G/dx2 (t, X_t)||_2 and the integrability conditions built
from it, moments of Gaussian pairs, the fractionally integrated A G process
along a simulated path, and the local oscillation OSC_p.

Divergence can never be proven by a finite computation, so the
``verdict`` fields are operational: stability under doubling of the
truncation (or quadrature depth) says "member", clear growth says
"non-member", anything in between is "inconclusive".
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import AccuracyError, InvalidArgumentError
from .model import graded_grid
from .payoff import (DEFAULT_CFG, Payoff, apply_A_tau, eval_dG_tau, eval_G_tau,
                     state_expectation, terminal_payoff)
from .quadrature import (gauss_hermite, gauss_legendre01, gaussian_pdf, panel_rule,
                         split_expectation)

MEMBER = "member"
NON_MEMBER = "non-member"
INCONCLUSIVE = "inconclusive"

# stability thresholds under doubling
FINITE_RTOL = 0.01
DIVERGE_GROWTH = 0.10


def _check_beta(beta):
    if not 0.0 < beta <= 1.0:
        raise InvalidArgumentError("beta must lie in (0, 1]")


# ---------------------------------------------------------------------------
# Hermite expansions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermiteExpansion:
    k_max: int
    alpha: np.ndarray
    l2_mass: float
    f_l2: float
    source: str

    def __post_init__(self):
        self.alpha.setflags(write=False)


def hermite_functions(k_max, x):
    """Rows k = 0..k_max of h_k(x) * sqrt(phi(x)).

    The product is built by the normalized three-term recursion started
    from sqrt(phi), so neither factorials nor large polynomial values ever
    appear.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((k_max + 1,) + x.shape)
    out[0] = np.exp(-0.25 * x * x) / (2.0 * math.pi) ** 0.25
    if k_max >= 1:
        out[1] = x * out[0]
    for k in range(1, k_max):
        out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out


def expansion_target(payoff, model):
    """The function expanded in Hermite polynomials and its kinks.

    For X = B this is g itself; for X = S it is f(x) = g(exp(x - 1/2)), so
    that f(B_1) = g(S_1).
    """
    k = payoff.kink()
    if model.kind == "B":
        return payoff.g, (() if k is None else (k,))
    f = lambda x: payoff.g(np.exp(np.asarray(x) - 0.5))
    if k is None or k <= 0:
        return f, ()
    return f, (math.log(k) + 0.5,)


def _coeff_pass(f, k_max, kinks, q, half_width, spacing):
    x, w = panel_rule(-half_width, half_width, kinks, 0.0, q, spacing)
    fx = f(x)
    if not np.all(np.isfinite(fx)):
        raise AccuracyError("target function is not finite on the quadrature nodes")
    # sqrt(phi) is absorbed into the Hermite functions, the other half here
    wf = w * fx * np.exp(-0.25 * x * x) / (2.0 * math.pi) ** 0.25
    alpha = hermite_functions(k_max, x) @ wf
    f_l2 = float(np.sum(w * fx * fx * gaussian_pdf(x)))
    return alpha, f_l2


def hermite_coeffs(f, k_max=512, quad_nodes=16, kinks=(), source="function"):
    """Coefficients alpha_k = int f h_k dgamma, k = 0..k_max.

    ``f`` may be a callable or a ``(payoff, model)`` pair; in the latter case
    the X = S transform and the kink location are taken care of.  Panels of
    width 1/4 on [-14, 14] are split at ``kinks``; the rule with
    ``quad_nodes`` points per panel is checked against one with twice as
    many.
    """
    if not 0 <= k_max <= 512:
        raise InvalidArgumentError("k_max must lie in [0, 512]")
    if isinstance(f, tuple):
        payoff, model = f
        source = f"{payoff}/{model.kind}" + ("" if model.kind == "B" else " via g(exp(x-1/2))")
        f, kinks = expansion_target(payoff, model)
    # h_512 oscillates on |x| < 2 sqrt(512) ~ 45 but sqrt(phi) kills it past 14
    a1, l1 = _coeff_pass(f, k_max, kinks, quad_nodes, 14.0, 0.25)
    a2, l2 = _coeff_pass(f, k_max, kinks, 2 * quad_nodes, 14.0, 0.25)
    scale = math.sqrt(max(l2, 1e-300))
    if np.max(np.abs(a1 - a2)) > 1e-10 * max(scale, 1.0) or abs(l1 - l2) > 1e-10 * max(l2, 1.0):
        raise AccuracyError("Hermite coefficient quadrature did not converge")
    a2 = np.where(np.abs(a2) < 1e-15 * max(scale, 1.0), 0.0, a2)
    return HermiteExpansion(k_max, a2, float(np.sum(a2 * a2)), l2, source)


# ---------------------------------------------------------------------------
# Besov norm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BesovResult:
    beta: float
    norm: float
    truncations: tuple
    partial_sums: tuple
    increment_ratio: float
    tail_term: float
    verdict: str


def besov_norm(exp, beta):
    """(sum_k (k+1)**beta alpha_k**2)**(1/2) with a divergence diagnosis.

    Partial norms are reported at k_max/8, k_max/4, k_max/2, k_max.  For
    coefficients with alpha_k**2 ~ k**(-s) the dyadic increments of the
    squared sum shrink by 2**(beta + 1 - s) per doubling, so their ratio
    tells convergent from divergent series.  The tail term is the largest
    summand in the last dyadic block.
    """
    _check_beta(beta)
    k = np.arange(exp.k_max + 1)
    terms = (k + 1.0) ** beta * exp.alpha ** 2
    csum = np.cumsum(terms)
    truncs = tuple(int(exp.k_max // d) for d in (8, 4, 2, 1))
    partial = tuple(float(math.sqrt(csum[t])) for t in truncs)
    sq = [csum[t] for t in truncs]
    inc = np.diff(sq)
    total = sq[-1]
    tail = float(np.max(terms[truncs[-2] + 1:], initial=0.0))
    if inc[-1] <= 1e-12 * max(total, 1e-300):
        ratio = 0.0
    elif inc[-2] <= 0:
        ratio = math.inf
    else:
        ratio = float(inc[-1] / inc[-2])
    last_norm_inc = partial[-1] - partial[-2]
    if ratio < 0.97 and tail < 1e-3:
        verdict = MEMBER
    elif ratio > 1.03 and last_norm_inc > 1e-2:
        verdict = NON_MEMBER
    else:
        verdict = INCONCLUSIVE
    return BesovResult(float(beta), partial[-1], truncs, partial, ratio, tail, verdict)


# ---------------------------------------------------------------------------
# H(t) and the integral conditions
# ---------------------------------------------------------------------------

def _h_sq_tau(payoff, model, tau, cfg):
    if tau == 1.0:
        x0 = np.array([model.x0])
        return float((model.sigma(x0) ** 2 * eval_dG_tau(payoff, model, 1.0, x0, 2, cfg))[0] ** 2)

    def func(x):
        return (model.sigma(x) ** 2 * eval_dG_tau(payoff, model, tau, x, 2, cfg)) ** 2

    return state_expectation(payoff, model, tau, func)


def h_curve(payoff, model, t_grid, cfg=DEFAULT_CFG, tau=None):
    """H(t) on ``t_grid``; pass ``tau`` (= 1 - t) instead for times near 1."""
    if tau is None:
        t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
        if np.any((t_grid < 0) | (t_grid >= 1)):
            raise InvalidArgumentError("t_grid must lie in [0, 1)")
        tau = 1.0 - t_grid
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    return np.sqrt([_h_sq_tau(payoff, model, float(s), cfg) for s in tau])


def h_series(exp, t):
    """H(t) for X = B from the Hermite coefficients of g."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.arange(2, exp.k_max + 1)
    w = k * (k - 1.0) * exp.alpha[2:] ** 2
    return np.sqrt(np.array([np.sum(w * s ** (k - 2.0)) for s in t]))


@dataclass(frozen=True)
class SmoothnessReport:
    beta: float
    besov_partial_sums: tuple
    besov_verdict: str
    cond5_integral: float
    cond5_verdict: str
    cond6_sup: float
    cond6_verdict: str
    verdict: str
    details: dict = field(default_factory=dict, repr=False)


def _dyadic_panels(payoff, model, depth, cfg, q=8):
    """Per dyadic panel s in [2**-(j+1), 2**-j] (s = 1 - u) of H(1 - s)**2:
    Gauss-Legendre nodes in log s, returned as (s nodes, weights ds, H^2)."""
    v, wv = gauss_legendre01(q)
    out = []
    for j in range(depth):
        lo, hi = math.log(2.0 ** -(j + 1)), math.log(2.0 ** -j)
        s = np.exp(lo + (hi - lo) * v)
        w = (hi - lo) * wv * s
        h2 = np.array([_h_sq_tau(payoff, model, float(si), cfg) for si in s])
        out.append((s, w, h2))
    return out


def _geometric_total(contrib):
    """Total of a series whose trailing terms decay geometrically.

    Returns (extrapolated total, fitted ratio of the last six terms).
    """
    c = np.asarray(contrib, dtype=float)
    tail = c[-6:]
    if np.all(tail <= 1e-300):
        return float(c.sum()), 0.0
    lt = np.log(np.maximum(tail, 1e-300))
    r = float(math.exp(np.polyfit(np.arange(lt.size), lt, 1)[0]))
    if r >= 1.0:
        return math.inf, r
    return float(c.sum() + c[-1] * r / (1.0 - r)), r


def _stability_verdict(v1, v2, grow):
    if math.isfinite(v1) and math.isfinite(v2) and abs(v2 - v1) <= FINITE_RTOL * abs(v2) and not grow:
        return MEMBER
    if grow:
        return NON_MEMBER
    return INCONCLUSIVE


def check_conditions(payoff, model, beta, cfg=DEFAULT_CFG, depth=18, k_max=512):
    """Integral conditions on H for smoothness beta, plus the Besov check.

    The first condition is int_0^1 (1-u)**(1-beta) H(u)**2 du, the second
    sup_t (1-t)**(1-beta) int_0^t H(u)**2 du.  Both are computed on dyadic
    panels in 1 - u down to 2**-depth and again to 2**-(2 depth); the
    geometric tail of the panel contributions is extrapolated.  A value is
    finite when it moves by < 1% between the two depths and divergent when
    the panel contributions stop decaying and the truncated value grows by
    more than 10%.
    """
    _check_beta(beta)
    panels = _dyadic_panels(payoff, model, 2 * depth, cfg)
    c5 = np.array([np.sum(w * s ** (1.0 - beta) * h2) for s, w, h2 in panels])
    mass = np.array([np.sum(w * h2) for s, w, h2 in panels])
    cum = np.cumsum(mass)
    edges = 2.0 ** -np.arange(1, 2 * depth + 1)
    sup6 = edges ** (1.0 - beta) * cum
    sup6_run = np.maximum.accumulate(sup6)

    t5_short, r5_short = _geometric_total(c5[:depth])
    t5_long, r5_long = _geometric_total(c5)
    trunc_growth5 = c5.sum() / c5[:depth].sum() - 1.0 if c5[:depth].sum() > 0 else 0.0
    grow5 = r5_long > 1.02 and trunc_growth5 > DIVERGE_GROWTH
    v5 = _stability_verdict(t5_short, t5_long, grow5)
    if r5_long >= 0.98 and v5 == MEMBER:
        v5 = INCONCLUSIVE

    s6_short, s6_long = float(sup6_run[depth - 1]), float(sup6_run[-1])
    grow6 = s6_long > (1.0 + DIVERGE_GROWTH) * s6_short and sup6[-1] >= sup6_run[-1] * 0.999
    v6 = _stability_verdict(s6_short, s6_long, grow6)

    besov = besov_norm(hermite_coeffs((payoff, model), k_max), beta)
    verdict = v5 if besov.verdict == v5 else INCONCLUSIVE
    details = {
        "cond5_panels": c5, "cond5_ratio": r5_long, "cond5_truncated": float(c5.sum()),
        "cond5_short": t5_short, "cond6_profile": sup6, "besov": besov,
    }
    return SmoothnessReport(float(beta), besov.partial_sums, besov.verdict,
                            t5_long, v5, s6_long if v6 != NON_MEMBER else math.inf, v6,
                            verdict, details)


# ---------------------------------------------------------------------------
# Gaussian pairs
# ---------------------------------------------------------------------------

def gaussian_pair_moment(h, p, t, kinks=(), q=16):
    """E|h(Y) - h(Z)|**p for standard Gaussians with cov(Y, Z) = t.

    Z = t Y + sqrt(1 - t**2) W.  The outer integral over Y uses panels
    graded around each kink at the scale sqrt(1 - t) on which the pair
    separates; the inner Gaussian integral is split at the kink.
    """
    if p < 1:
        raise InvalidArgumentError("p must be >= 1")
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError("t must lie in [0, 1]")
    if t == 1.0:
        return 0.0
    if isinstance(h, Payoff):
        k = h.kink()
        kinks = kinks or (() if k is None else (k,))
        h = h.g
    if len(kinks) > 1:
        raise InvalidArgumentError("at most one kink is supported")
    c = math.sqrt(1.0 - t * t)

    def run(qq):
        width = min(math.sqrt(1.0 - t), 1.0)
        y, wy = panel_rule(-12.0, 12.0, kinks, width, qq)
        wy = wy * gaussian_pdf(y)
        hy = h(y)[:, None]
        f = lambda w: np.abs(hy - h(t * y[:, None] + c * w)) ** p
        if kinks:
            inner = split_expectation(f, (kinks[0] - t * y) / c, 4 * qq)
        else:
            zz, wz = gauss_hermite(8 * qq)
            inner = f(zz[None, :]) @ wz
        return float(np.sum(wy * inner))

    a, b = run(q), run(2 * q)
    if abs(a - b) > 1e-8 * max(abs(b), 1e-300) + 1e-14:
        raise AccuracyError("pair-moment quadrature did not converge")
    return b


def pair_indicator_oracle(t):
    """P(Y >= 0 > Z) + P(Z >= 0 > Y) = arccos(t)/pi for the centred step."""
    return math.acos(t) / math.pi


# ---------------------------------------------------------------------------
# Fractionally integrated A G along a path
# ---------------------------------------------------------------------------

def fractional_grid(t, N=4096):
    """Grid 1 - (1 - j/N)**4 with the point t added."""
    g = graded_grid(N, 4.0)
    return g if g.contains(t) else g.union([t])


def fractional_D(payoff, model, path, t, beta, cfg=DEFAULT_CFG):
    """D_t = (1-beta)/2 int_0^1 (1-u)**(-(1+beta)/2) [AG(u ^ t) - AG(0)] du.

    The integral over [0, t] uses the trapezoid rule on the path grid
    (which should be graded towards 1, see ``fractional_grid``); the
    integrand is constant on [t, 1] where the weight integrates to
    (2/(1-beta)) (1-t)**((1-beta)/2).  For beta = 1, D_t = AG(t) - AG(0).
    """
    _check_beta(beta)
    if not 0.0 <= t < 1.0:
        raise InvalidArgumentError("t must lie in [0, 1)")
    times = path.grid.times
    upto = times[times <= t]
    if upto[-1] != t:
        raise InvalidArgumentError("t is not on the path grid")
    x = path.values[..., : upto.size]
    ag = apply_A_tau(payoff, model, 1.0 - upto, x, cfg)
    ag0 = float(apply_A_tau(payoff, model, 1.0, np.array(model.x0), cfg))
    diff = ag - ag0
    if beta == 1.0:
        out = diff[..., -1]
    else:
        w = (1.0 - upto) ** (-(1.0 + beta) / 2.0)
        f = w * diff
        head = np.sum(0.5 * (f[..., 1:] + f[..., :-1]) * np.diff(upto), axis=-1)
        out = 0.5 * (1.0 - beta) * head + (1.0 - t) ** ((1.0 - beta) / 2.0) * diff[..., -1]
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Quantities of the L_p characterization
# ---------------------------------------------------------------------------

def ag_norm(payoff, model, tau, p, cfg=DEFAULT_CFG):
    """||AG(t, X_t)||_p, t = 1 - tau."""
    f = lambda x: np.abs(apply_A_tau(payoff, model, tau, x, cfg)) ** p
    return state_expectation(payoff, model, tau, f) ** (1.0 / p)


def conditional_residual_norm(payoff, model, tau, p, cfg=DEFAULT_CFG):
    """||g(X_1) - G(t, X_t)||_p, t = 1 - tau, by nested quadrature."""
    rt = math.sqrt(tau)
    k = payoff.kink()

    def func(x):
        gx = eval_G_tau(payoff, model, tau, x, cfg)[:, None]
        if model.kind == "B":
            br = None if k is None else (k - x) / rt
        else:
            br = None if k is None or k <= 0 else (np.log(k / x) + 0.5 * tau) / rt
        f = lambda z: np.abs(terminal_payoff(payoff, model, x[:, None], tau, z, br) - gx) ** p
        if br is None:
            zz, wz = gauss_hermite(256)
            return f(zz[None, :]) @ wz
        return split_expectation(f, br, 128)

    return state_expectation(payoff, model, tau, func) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Local oscillation
# ---------------------------------------------------------------------------

def _graded_rule(breaks, q, depth):
    """Gauss-Legendre panels on the sorted ``breaks`` intervals, graded
    geometrically (ratio 1/4) towards both ends down to 2**-depth of the
    interval length."""
    v, wv = gauss_legendre01(q)
    frac = 4.0 ** -np.arange(1, depth // 2 + 1)
    unit = np.unique(np.concatenate([[0.0, 1.0], frac, 1.0 - frac]))
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        e = a + (b - a) * unit
        h = np.diff(e)
        xs.append((e[:-1, None] + h[:, None] * v).ravel())
        ws.append((h[:, None] * wv).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def _osc_integral(g, p, lo, hi, kinks, q, depth):
    outer = np.unique(np.concatenate([[lo, hi], [k for k in kinks if lo < k < hi]]))
    y, wy = _graded_rule(outer, q, depth)
    gy = g(y)
    total = 0.0
    for yi, wi, gi in zip(y, wy, gy):
        inner = np.unique(np.append(outer, yi))
        z, wz = _graded_rule(inner, q, depth)
        total += wi * np.sum(wz * np.abs(g(z) - gi) ** p)
    return total


def osc(g, p, x0, eps, kinks=(), q=12, depth=60):
    """OSC_p(g, x0, eps) = ((2 eps)**-2 int_Q |g(y) - g(z)|**p dy dz)**(1/p).

    Q is the square [x0 - eps, x0 + eps]**2.  Tensor Gauss-Legendre with
    splits at the kinks and at the diagonal y = z, graded geometrically
    towards all of them.  The value is recomputed with grading twice as
    deep; a relative change above 1e-3 means that the singularity is not
    integrable at this p.
    """
    if p < 1:
        raise InvalidArgumentError("p must be >= 1")
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive")
    if isinstance(g, Payoff):
        k = g.kink()
        kinks = kinks or (() if k is None else (k,))
        g = g.g
    lo, hi = x0 - eps, x0 + eps
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = _osc_integral(g, p, lo, hi, kinks, q, depth)
        b = _osc_integral(g, p, lo, hi, kinks, q, 2 * depth)
    if not (math.isfinite(a) and math.isfinite(b)) or abs(a - b) > 1e-3 * abs(b):
        if not (a == 0.0 and b == 0.0):
            raise AccuracyError("oscillation integral does not converge", divergent=True)
    return (b / (4.0 * eps * eps)) ** (1.0 / p)


def integrability_cap(beta, eta):
    """Largest p compatible with smoothness beta and local singularity eta."""
    return 1.0 / (beta + eta)
