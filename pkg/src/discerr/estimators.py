"""Monte Carlo moments, rate fits and distributional checks.

Samplers are called as ``sampler(stream, path_offset, count)`` and return
one value per path.  Paths are addressed by index within ``base_stream``,
so chunking and worker count never change the sample set, and moments are
reduced with ``math.fsum`` (correctly rounded) so they do not depend on the
reduction order either.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os

import numpy as np
from scipy import stats

from .discretize import tail_sup_error, terminal_error
from .errors import DataError, InvalidArgumentError, PrecisionError
from .model import Grid, sample_path
from .payoff import DEFAULT_CFG, eval_dG_tau, state_expectation
from .timenet import build_net

BOOTSTRAP_RESAMPLES = 1000
# label of the child stream that drives bootstrap resampling
BOOTSTRAP_LABEL = 7919


def default_workers():
    return os.cpu_count() or 1


@dataclass(frozen=True)
class MomentEstimate:
    p: float
    value: float
    ci_low: float
    ci_high: float
    m: int
    seed_layout: dict = field(default_factory=dict)
    moment_stderr: float = 0.0

    def scaled(self, factor):
        """The same estimate for factor * samples (factor > 0)."""
        return MomentEstimate(self.p, self.value * factor, self.ci_low * factor,
                              self.ci_high * factor, self.m, self.seed_layout,
                              self.moment_stderr * factor ** self.p)


def collect_samples(sampler, m, base_stream, chunk=20000, workers=1, path_offset=0):
    """Per-path sampler values for paths path_offset .. path_offset + m - 1."""
    starts = list(range(0, m, chunk))
    job = lambda s: np.asarray(sampler(base_stream, path_offset + s, min(chunk, m - s)),
                               dtype=float).ravel()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, starts))
    else:
        parts = [job(s) for s in starts]
    out = np.concatenate(parts)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        ids = (bad + path_offset).tolist()
        raise DataError(f"{bad.size} non-finite sample values", ids)
    return out


def _bootstrap_means(v, stream, resamples=BOOTSTRAP_RESAMPLES, batch=50):
    m = v.size
    rng = np.random.Generator(np.random.Philox(key=[stream.seed, stream.stream_id]))
    means = np.empty(resamples)
    for s in range(0, resamples, batch):
        b = min(batch, resamples - s)
        idx = rng.integers(0, m, size=(b, m))
        means[s:s + b] = v[idx].mean(axis=1)
    return means


def moment_from_samples(x, p, stream=None, layout=None, bootstrap=True):
    """(mean |x|**p)**(1/p) with a percentile bootstrap 95% interval."""
    if p < 1:
        raise InvalidArgumentError("p must be >= 1")
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise InvalidArgumentError("no samples")
    v = np.abs(x) ** p
    mean = math.fsum(v) / v.size
    value = mean ** (1.0 / p)
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    lo = hi = value
    if bootstrap and v.size > 1 and mean > 0:
        from .rng import RngStream
        bs = (stream or RngStream(0)).spawn(BOOTSTRAP_LABEL)
        means = _bootstrap_means(v, bs)
        lo, hi = np.quantile(means, [0.025, 0.975]) ** (1.0 / p)
        lo, hi = min(float(lo), value), max(float(hi), value)
    return MomentEstimate(float(p), value, lo, hi, int(x.size), dict(layout or {}), se)


def lp_moments(sampler, p_list, m, base_stream, chunk=20000, workers=1, path_offset=0,
               bootstrap=True):
    """One ``MomentEstimate`` per p in ``p_list`` from a single sample set."""
    if m < 100:
        raise InvalidArgumentError("need at least 100 paths")
    x = collect_samples(sampler, m, base_stream, chunk, workers, path_offset)
    layout = {"seed": base_stream.seed, "stream_id": base_stream.stream_id,
              "path_offset": path_offset, "m": m}
    return [moment_from_samples(x, p, base_stream, layout, bootstrap) for p in p_list]


def lp_moment(sampler, p, m, base_stream, chunk=20000, workers=1, path_offset=0,
              bootstrap=True):
    """(E|sampler|**p)**(1/p) over ``m`` paths of ``base_stream``."""
    return lp_moments(sampler, [p], m, base_stream, chunk, workers, path_offset, bootstrap)[0]


def terminal_error_sampler(payoff, model, net, cfg=DEFAULT_CFG, scale=1.0):
    """Sampler of scale * C_1 along ``net``."""
    def sampler(stream, offset, count):
        return scale * terminal_error(payoff, model, net, stream, count, offset, cfg)
    return sampler


def tail_sup_sampler(payoff, model, net, T, points=256, cfg=DEFAULT_CFG, scale=1.0):
    """Sampler of scale * sup_{t in [T, 1]} |C_t - C_T|.

    Paths live on the net knots merged with ``points`` uniform steps on
    [T, 1], so the supremum is taken over that window grid.
    """
    window = np.linspace(T, 1.0, points + 1)
    grid = Grid(np.union1d(net.knots, window))

    def sampler(stream, offset, count):
        path = sample_path(model, grid, stream, count, offset)
        return scale * tail_sup_error(payoff, model, net, path, T, cfg)
    return sampler


def error_net_stream(base_stream, n):
    """Stream used for the C_1 samples at net size n; distinct per n."""
    return base_stream.spawn(int(n))


def error_moments(payoff, model, beta, n_list, p_list, m, base_stream, cfg=DEFAULT_CFG,
                  chunk=20000, workers=1, bootstrap=True, scaled=False):
    """{(n, p): MomentEstimate} of C_1 (or sqrt(n) C_1) along the beta-nets."""
    out = {}
    for n in n_list:
        net = build_net(n, beta)
        scale = math.sqrt(n) if scaled else 1.0
        ests = lp_moments(terminal_error_sampler(payoff, model, net, cfg, scale), p_list, m,
                          error_net_stream(base_stream, n), chunk, workers, 0, bootstrap)
        for p, e in zip(p_list, ests):
            out[(n, p)] = e
    return out


# ---------------------------------------------------------------------------
# Regression on log scales
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    theta_hat: float
    stderr: float
    n_range: tuple
    r2: float
    flagged: str = ""
    first_fit: object = None


def _values(points):
    ns, vals = [], []
    for n, v in points:
        ns.append(float(n))
        vals.append(float(getattr(v, "value", v)))
    return np.array(ns), np.array(vals)


def _loglog(ns, vals):
    """Least-squares slope of log vals on log ns, its standard error and r2.

    The standard error comes from the residuals directly; the r-based
    formula loses everything below ~1e-8 on exact power laws.
    """
    x, y = np.log(ns), np.log(vals)
    xc, yc = x - x.mean(), y - y.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, yc) / sxx)
    resid = yc - slope * xc
    ss_res, ss_tot = float(np.dot(resid, resid)), float(np.dot(yc, yc))
    stderr = math.sqrt(ss_res / (x.size - 2) / sxx) if x.size > 2 else math.nan
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, stderr, r2


def rate_fit(points):
    """theta in value ~ c n**(-theta) by least squares on log-log scale.

    With r2 < 0.95 the smallest n is dropped and the fit repeated once; the
    first fit is kept in ``first_fit``.
    """
    ns, vals = _values(points)
    if np.unique(ns).size < 4:
        raise InvalidArgumentError("rate fit needs at least 4 distinct n")
    order = np.argsort(ns)
    ns, vals = ns[order], vals[order]
    if np.all(vals == 0):
        return RateFit(math.nan, math.nan, tuple(ns.astype(int)), math.nan,
                       "degenerate: zero error")
    if np.any(vals <= 0):
        raise InvalidArgumentError("moments must be positive for a log-log fit")

    def fit(nn, vv):
        slope, stderr, r2 = _loglog(nn, vv)
        return RateFit(-slope, stderr, tuple(int(n) for n in nn), r2)

    first = fit(ns, vals)
    if first.r2 >= 0.95:
        return first
    if ns.size > 4:
        second = fit(ns[1:], vals[1:])
        flag = "" if second.r2 >= 0.95 else "poor fit: r2 < 0.95"
        return RateFit(second.theta_hat, second.stderr, second.n_range, second.r2, flag, first)
    return RateFit(first.theta_hat, first.stderr, first.n_range, first.r2, "poor fit: r2 < 0.95")


@dataclass(frozen=True)
class Trend:
    slope: float
    stderr: float
    tstat: float
    grows: bool


def trend_test(ns, values):
    """Slope of log value against log n; the sequence grows when the slope
    exceeds 0.05 with t-statistic above 3."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray([getattr(v, "value", v) for v in values], dtype=float)
    if ns.size < 3:
        raise InvalidArgumentError("trend test needs at least 3 points")
    slope, stderr, _ = _loglog(ns, values)
    t = slope / stderr if stderr > 0 else (math.inf if slope > 0 else 0.0)
    return Trend(slope, stderr, float(t), bool(slope > 0.05 and t > 3))


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------

def ks_distance(samples_a, reference):
    """Kolmogorov-Smirnov statistic against samples or a CDF callable."""
    a = np.asarray(samples_a, dtype=float).ravel()
    if a.size == 0:
        raise InvalidArgumentError("empty sample")
    if callable(reference):
        return float(stats.kstest(a, reference).statistic)
    b = np.asarray(reference, dtype=float).ravel()
    if b.size == 0:
        raise InvalidArgumentError("empty reference sample")
    return float(stats.ks_2samp(a, b).statistic)


def ks_band(m1, m2=None, level=0.99):
    """Critical KS distance at the given level (asymptotic)."""
    c = math.sqrt(-0.5 * math.log((1.0 - level) / 2.0))
    eff = m1 if m2 is None else m1 * m2 / (m1 + m2)
    return c / math.sqrt(eff)


def default_singular_taus():
    return 10.0 ** -np.linspace(2.0, 6.0, 17)


def delta_norms(payoff, model, p, tau, cfg=DEFAULT_CFG):
    """||(sigma dG/dx)(t, X_t)||_p at t = 1 - tau by quadrature."""
    out = []
    for s in np.atleast_1d(tau):
        s = float(s)
        f = lambda x: np.abs(model.sigma(x) * eval_dG_tau(payoff, model, s, x, 1, cfg)) ** p
        out.append(state_expectation(payoff, model, s, f) ** (1.0 / p))
    return np.array(out)


def singularity_exponent(payoff, model, p, t_grid=None, cfg=DEFAULT_CFG, tau=None):
    """Slope of log ||sigma dG/dx (t, X_t)||_p against log(1 - t).

    Pass ``tau`` (= 1 - t) to avoid rounding near t = 1; the default grid
    is 1 - t = 10**-2 .. 10**-6.
    """
    if tau is None:
        tau = default_singular_taus() if t_grid is None else 1.0 - np.asarray(t_grid, dtype=float)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    norms = delta_norms(payoff, model, p, tau, cfg)
    if np.allclose(norms, norms[0], rtol=1e-12, atol=0):
        return 0.0
    return float(np.polyfit(np.log(tau), np.log(norms), 1)[0])


def shortfall_capital(limit_samples, eps, n):
    """Extra initial capital q / sqrt(n), q the minimal level with
    empirical P(|Z| > q) <= eps."""
    if not 0.0 < eps <= 1.0:
        raise InvalidArgumentError("eps must lie in (0, 1]")
    if n < 1:
        raise InvalidArgumentError("n must be positive")
    a = np.sort(np.abs(np.asarray(limit_samples, dtype=float).ravel()))
    if eps == 1.0:
        return 0.0
    if a.size < 10.0 / eps:
        raise PrecisionError(f"need at least {math.ceil(10.0 / eps)} samples for eps={eps:g}")
    j = math.ceil(a.size * (1.0 - eps) - 1e-9)
    q = 0.0 if j == 0 else a[j - 1]
    return float(q / math.sqrt(n))


@dataclass(frozen=True)
class TailFit:
    r: float
    c_hat: float
    p_grid: tuple
    sequence: tuple
    flagged: bool


def tail_fit(samples, r, p_grid=(1, 2, 4, 8, 16)):
    """p**(-1/r) ||Z||_p over ``p_grid``; growth (consecutive ratio > 1.1)
    contradicts tails of order exp(-lambda**r)."""
    if not r > 0:
        raise InvalidArgumentError("r must be positive")
    z = np.abs(np.asarray(samples, dtype=float).ravel())
    if z.size == 0:
        raise InvalidArgumentError("empty sample")
    seq = []
    for p in p_grid:
        mean = math.fsum(z ** p) / z.size
        seq.append(p ** (-1.0 / r) * mean ** (1.0 / p))
    seq = np.array(seq)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = seq[1:] / seq[:-1]
    flagged = bool(np.any(ratios > 1.1))
    c_hat = float(max(seq.max(), np.finfo(float).tiny))
    return TailFit(float(r), c_hat, tuple(p_grid), tuple(seq.tolist()), flagged)
