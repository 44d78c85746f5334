"""Limit objects of the renormalized error: the clock A_beta, the
time-changed Brownian motion Z = W_A, and the Riemann brackets whose
limits drive the weak convergence of sqrt(n) C.

A_beta(t) = 1/2 int_0^t nu_beta(u) [(sigma**2 d2G/dx2)(u, X_u)]**2 du with
nu_beta(u) = (1 - u)**(1 - beta) / beta.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import GridMismatchError, InvalidArgumentError
from .model import Grid, PathSample, refine_path, sample_path
from .payoff import DEFAULT_CFG, eval_dG_tau
from .quadrature import gauss_legendre01
from .smoothness import _geometric_total, _h_sq_tau
from .timenet import build_net

DIVERGENCE_CAP = 1e9
SLIVER = 1e-10
SLIVER_SHARE = 0.05
CLOCK_RTOL = 1e-3
# child-stream labels used for the bisection points of the clock quadrature
CLOCK_LABEL = 1000


def nu_beta(beta, t):
    if not 0.0 < beta <= 1.0:
        raise InvalidArgumentError("beta must lie in (0, 1]")
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t >= 1)):
        raise InvalidArgumentError("t must lie in [0, 1)")
    out = (1.0 - t) ** (1.0 - beta) / beta
    return out[()] if out.ndim == 0 else out


def _nu_tau(beta, tau):
    return tau ** (1.0 - beta) / beta


def gamma_process(payoff, model, power=1, cfg=DEFAULT_CFG):
    """a(tau, x) = [(sigma**2 d2G/dx2)(1 - tau, x)]**power as a callable."""
    def a(tau, x):
        v = model.sigma(x) ** 2 * eval_dG_tau(payoff, model, tau, x, 2, cfg)
        return v ** power
    return a


def clock_grid(beta, n_intervals=1024, delta=SLIVER, extra=()):
    """Grid 1 - (1 - j/N)**(2/beta), continued geometrically (ratio 1/2) in
    1 - t down to 1 - delta, plus t = 1.

    The grading exponent 2/beta keeps the quadrature resolved where
    nu_beta times the squared gamma is steep; the geometric continuation
    resolves paths that end close to the kink, whose integrand only decays
    once 1 - t drops below the squared distance to it.
    """
    j = np.arange(n_intervals)
    tau = (1.0 - j / n_intervals) ** (2.0 / beta)
    tau = tau[tau > delta]
    steps = max(int(math.ceil(math.log2(tau[-1] / delta))), 1)
    tail = np.geomspace(tau[-1], delta, steps + 1)[1:]
    t = np.concatenate([1.0 - tau, 1.0 - tail, [1.0], np.asarray(extra, dtype=float)])
    t[0] = 0.0
    return Grid(np.unique(t))


@dataclass(frozen=True)
class Clock:
    """A_beta along paths at ``t_grid`` (rows are paths for a batch).

    ``sliver`` is the power-law extrapolated share of [1 - delta, 1];
    ``inconclusive`` marks paths where it exceeds 5% of A(1); ``divergent``
    marks paths whose A(1) exceeded the cap.
    """

    beta: float
    t_grid: np.ndarray
    a_values: np.ndarray
    divergent: np.ndarray
    path_ref: PathSample = field(repr=False)
    sliver: np.ndarray = None
    inconclusive: np.ndarray = None
    converged: np.ndarray = None
    levels: int = 0

    @property
    def a_terminal(self):
        return self.a_values[..., -1]


def _integrand(payoff, model, beta, tau, x, cfg):
    gam = model.sigma(x) ** 2 * eval_dG_tau(payoff, model, tau, x, 2, cfg)
    return 0.5 * _nu_tau(beta, tau) * gam * gam


def _sliver(beta, tau_tail, f_tail, delta):
    """int_0^delta c tau**a dtau for c tau**a fitted to the last integrand values."""
    m = f_tail.shape[0]
    out = np.zeros(m)
    lt = np.log(tau_tail)
    good = np.all(f_tail > 1e-300, axis=1)
    if np.any(good):
        lf = np.log(f_tail[good])
        A = np.vstack([lt, np.ones_like(lt)]).T
        coef, *_ = np.linalg.lstsq(A, lf.T, rcond=None)
        a, logc = coef
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            logv = logc + (a + 1.0) * math.log(delta) - np.log(a + 1.0)
            val = np.where(a > -1.0, np.exp(logv), np.inf)
        out[good] = val
    return out


def clock(payoff, model, path, beta, t_grid=None, cfg=DEFAULT_CFG, max_levels=4,
          cap=DIVERGENCE_CAP, tail_points=8):
    """A_beta at ``t_grid`` (default: the whole path grid) along ``path``.

    The path grid should come from ``clock_grid``.  On each interval of the
    path grid the integrand is sampled at a Brownian-bridge midpoint
    (composite midpoint rule); the rule is refined by bisection until the
    terminal value of every path moves by less than 1e-3 or ``max_levels``
    is reached.  The last interval, which ends at maturity, is not sampled
    but extrapolated by a power law fitted to the preceding integrand
    values.
    """
    if not 0.0 < beta <= 1.0:
        raise InvalidArgumentError("beta must lie in (0, 1]")
    times = path.grid.times
    if times[-1] != 1.0 or times.size < tail_points + 2:
        raise GridMismatchError("clock path grid must end at 1 and be reasonably fine")
    t_grid = times if t_grid is None else np.atleast_1d(np.asarray(t_grid, dtype=float))
    gidx = path.grid.index_of(t_grid)
    if np.any(gidx < 0):
        raise GridMismatchError("t_grid is not contained in the path grid")
    single = path.values.ndim == 1
    m = path.n_paths
    delta = 1.0 - times[-2]
    n_int = times.size - 2  # intervals before the sliver

    level_path = path
    interval_sums = None
    prev_total = None
    converged = np.zeros(m, dtype=bool)
    levels = 0
    stream = path.stream
    for level in range(max_levels + 1):
        f = 2 ** (level + 1)
        refine_stream = stream.spawn(CLOCK_LABEL + level)
        # the refinement reuses the finer path of the previous level
        level_path = refine_path(model, level_path, 2, refine_stream)
        lt = level_path.grid.times
        x = np.atleast_2d(level_path.values)
        mids = np.arange(1, lt.size - 2, 2)  # midpoints of the non-sliver intervals
        mids = mids[lt[mids] < times[-2]]
        tau_m = 1.0 - lt[mids]
        # keep full precision of 1 - t inside the original intervals
        h = lt[mids + 1] - lt[mids - 1]
        vals = _integrand(payoff, model, beta, tau_m, x[:, mids], cfg) * h
        per = vals.reshape(m, n_int, f // 2).sum(axis=2)
        total = per.sum(axis=1)
        if prev_total is not None:
            with np.errstate(invalid="ignore", divide="ignore"):
                rel = np.abs(total - prev_total) / np.abs(total)
            converged = (rel < CLOCK_RTOL) | (total == prev_total)
        interval_sums, prev_total, levels = per, total, level
        if np.all(converged):
            break

    # power-law extrapolation of the sliver from the last midpoints
    tail_tau = tau_m[-tail_points:]
    tail_f = (vals[:, -tail_points:] / h[-tail_points:])
    sliver = _sliver(beta, tail_tau, tail_f, delta)

    cum = np.concatenate([np.zeros((m, 1)), np.cumsum(interval_sums, axis=1)], axis=1)
    cum = np.concatenate([cum, (cum[:, -1] + sliver)[:, None]], axis=1)
    a_vals = cum[:, gidx]
    a_term = cum[:, -1]
    divergent = ~np.isfinite(a_term) | (a_term > cap)
    with np.errstate(invalid="ignore"):
        inconclusive = ~divergent & (sliver > SLIVER_SHARE * a_term)
    if single:
        a_vals, divergent, sliver = a_vals[0], divergent[0], sliver[0]
        inconclusive, converged = inconclusive[0], converged[0]
    return Clock(float(beta), t_grid, a_vals, divergent, path, sliver, inconclusive,
                 converged, levels)


def clock_mean(payoff, model, beta, t=1.0, cfg=DEFAULT_CFG, depth=36, q=8):
    """E A_beta(t) = 1/2 int_0^t nu_beta(u) H(u)**2 du by quadrature.

    Gauss-Legendre in log(1 - u) on dyadic panels; for t = 1 the geometric
    tail of the panel contributions past 2**-depth is added.  This is the
    path-free reference for the Monte Carlo mean of the clock.
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError("t must lie in [0, 1]")
    v, wv = gauss_legendre01(q)
    stop = 1.0 - t
    contrib = []
    for j in range(depth):
        hi, lo = 2.0 ** -j, max(2.0 ** -(j + 1), stop)
        if hi <= stop:
            break
        a, b = math.log(lo), math.log(hi)
        tau = np.exp(a + (b - a) * v)
        w = (b - a) * wv * tau
        h2 = np.array([_h_sq_tau(payoff, model, float(s), cfg) for s in tau])
        contrib.append(float(np.sum(w * 0.5 * _nu_tau(beta, tau) * h2)))
    if stop > 0.0 or len(contrib) < 6:
        return math.fsum(contrib)
    return _geometric_total(contrib)[0]


@dataclass(frozen=True)
class LimitSample:
    a_terminal: np.ndarray
    z_values: np.ndarray
    auxiliary_stream: object
    times: np.ndarray = None
    clock: Clock = field(default=None, repr=False)


def sample_Z(payoff, model, beta, times, path_stream, aux_stream, cfg=DEFAULT_CFG,
             n_paths=None, path_offset=0, n_intervals=1024, chunk=512, max_levels=4):
    """Z_beta = W_{A_beta} at ``times`` for one path (or a batch).

    X is simulated from ``path_stream`` on ``clock_grid``; W increments with
    variances equal to the clock increments come from ``aux_stream``, which
    must be a different stream.  Paths whose clock diverges give Z = 0.
    """
    if path_stream.same_key(aux_stream):
        raise InvalidArgumentError("path and auxiliary streams must differ")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any((times < 0) | (times > 1)) or np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("times must be increasing within [0, 1]")
    grid = clock_grid(beta, n_intervals, extra=times)
    m = 1 if n_paths is None else int(n_paths)
    a_out, z_out, clocks = [], [], []
    for start in range(0, m, chunk):
        k = min(chunk, m - start)
        off = path_offset + start
        path = sample_path(model, grid, path_stream, k, off)
        clk = clock(payoff, model, path, beta, times, cfg, max_levels=max_levels)
        a = np.atleast_2d(clk.a_values)
        da = np.diff(np.concatenate([np.zeros((k, 1)), a], axis=1), axis=1)
        w = aux_stream.path_normals(k, times.size, off)
        z = np.cumsum(np.sqrt(np.maximum(da, 0.0)) * w, axis=1)
        z[clk.divergent] = 0.0
        a_out.append(a[:, -1])
        z_out.append(z)
        clocks.append(clk)
    a_term = np.concatenate(a_out)
    z = np.concatenate(z_out, axis=0)
    clk = clocks[0] if len(clocks) == 1 else None
    if n_paths is None:
        a_term, z = a_term[0], z[0]
    return LimitSample(a_term, z, aux_stream, times, clk)


# ---------------------------------------------------------------------------
# Riemann brackets
# ---------------------------------------------------------------------------

def _a_values(a_spec, tau, x):
    if callable(a_spec):
        return np.asarray(a_spec(tau, x), dtype=float)
    return np.full(np.broadcast(tau, x).shape, float(a_spec))


def _bracket_parts(model, a_spec, k, n, beta, T, path_fine, cfg):
    if k not in (1, 2):
        raise InvalidArgumentError("k must be 1 or 2")
    if not 0.0 < T <= 1.0:
        raise InvalidArgumentError("T must lie in (0, 1]")
    net = build_net(n, beta)
    grid = path_fine.grid
    t = grid.times
    t_end = grid.index_of([T])[0]
    if t_end < 0:
        raise GridMismatchError("T is not on the fine grid")
    n_knots = int(np.searchsorted(net.knots, T, side="left"))  # knots t_i < T
    kidx = grid.index_of(net.knots[:n_knots])
    if np.any(kidx < 0):
        raise GridMismatchError("fine grid does not contain the net knots")
    ends = np.append(kidx[1:], t_end)
    if np.any(ends - kidx < 32):
        raise GridMismatchError("fine grid needs at least 32 points per net interval")
    x = np.atleast_2d(path_fine.values)[:, : t_end + 1]
    tt = t[: t_end + 1]
    owner = np.searchsorted(kidx, np.arange(t_end + 1), side="right") - 1
    xi = x[:, kidx]
    a_i = _a_values(a_spec, net.to_maturity[:n_knots], xi)
    ratio = (x - xi[:, owner]) / model.sigma(xi)[:, owner]
    psi = n ** (k / 2.0) * a_i[:, owner] * ratio ** k
    # psi jumps at the knots; the value just left of a knot comes from the
    # previous interval
    psi_left = psi[:, 1:].copy()
    at_knot = np.isin(np.arange(1, t_end + 1), kidx)
    prev = owner[1:] - 1
    pk = np.flatnonzero(at_knot)
    psi_left[:, pk] = (n ** (k / 2.0) * a_i[:, prev[pk]]
                       * ((x[:, 1:][:, pk] - xi[:, prev[pk]]) / model.sigma(xi[:, prev[pk]])) ** k)
    dt = np.diff(tt)
    cum = np.concatenate([np.zeros((x.shape[0], 1)),
                          np.cumsum(0.5 * (psi[:, :-1] + psi_left) * dt, axis=1)], axis=1)
    if k == 1:
        return cum, np.zeros_like(cum)
    # target 1/2 int nu_beta a ds; a at maturity is replaced by its last value
    tau = 1.0 - tt
    safe = np.maximum(tau, tau[tau > 0].min() if np.any(tau > 0) else 1.0)
    a_s = _a_values(a_spec, safe, x)
    f = 0.5 * _nu_tau(beta, tau) * a_s
    target = np.concatenate([np.zeros((x.shape[0], 1)),
                             np.cumsum(0.5 * (f[:, 1:] + f[:, :-1]) * dt, axis=1)], axis=1)
    return cum, target


def bracket_psi(model, a_spec, k, n, beta, T, path_fine, cfg=DEFAULT_CFG):
    """sup over fine-grid t <= T of |int_0^t psi^{n,k}(a) ds - target(t)|.

    psi^{n,k}_s(a) = n**(k/2) a_{t_i} ((X_s - X_{t_i})/sigma(X_{t_i}))**k on
    [t_i, t_{i+1}) of the beta-net with n intervals; the target is 0 for
    k = 1 and 1/2 int_0^t nu_beta(s) a_s ds for k = 2.  Time integrals use
    the trapezoid rule within each net interval of the fine grid.
    ``a_spec`` is a constant or a callable ``a(tau, x)`` (see
    ``gamma_process``).
    """
    cum, target = _bracket_parts(model, a_spec, k, n, beta, T, path_fine, cfg)
    out = np.max(np.abs(cum - target), axis=1)
    return out[0] if np.ndim(path_fine.values) == 1 else out


def bracket_integral(model, a_spec, k, n, beta, T, path_fine, cfg=DEFAULT_CFG):
    """int_0^T psi^{n,k}(a) ds and its target at T."""
    cum, target = _bracket_parts(model, a_spec, k, n, beta, T, path_fine, cfg)
    if np.ndim(path_fine.values) == 1:
        return cum[0, -1], target[0, -1]
    return cum[:, -1], target[:, -1]


def nu_integral(beta, t):
    """int_0^t nu_beta(s) ds in closed form."""
    return (1.0 - (1.0 - np.asarray(t, dtype=float)) ** (2.0 - beta)) / (beta * (2.0 - beta))
