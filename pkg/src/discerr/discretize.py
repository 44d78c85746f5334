"""Riemann-discretization error of the stochastic integral of dG/dx.

The reference integral is never simulated: by Ito's formula
int_0^t dG/dx(u, X_u) dX_u = G(t, X_t) - G(0, X_0), so

    C_t = G(t, X_t) - G(0, X_0) - sum_i dG/dx(t_i, X_{t_i}) (X_{t_{i+1} ^ t} - X_{t_i ^ t})

is exact on any path that contains the knots.  Fine grids only appear in
``decompose_error``, which splits C_1 into the three pieces I1 + I2 + I3.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import GridMismatchError, InvalidArgumentError
from .model import PathSample, sample_path
from .payoff import DEFAULT_CFG, eval_dG_tau, eval_G_tau


@dataclass(frozen=True)
class ErrorSample:
    net: object
    eval_times: np.ndarray
    c_values: np.ndarray
    path_ref: PathSample


@dataclass(frozen=True)
class Decomposition:
    i1: np.ndarray
    i2: np.ndarray
    i3: np.ndarray
    c1: np.ndarray
    refinement_factor: int

    @property
    def residual(self):
        return np.abs(self.i1 + self.i2 + self.i3 - self.c1)


def _knot_index(net, path, upto):
    """Path-grid indices of the knots t_0 .. t_i with t_i <= upto."""
    n_need = int(np.searchsorted(net.knots, upto, side="right"))
    idx = path.grid.index_of(net.knots[:n_need])
    if np.any(idx < 0):
        raise GridMismatchError("path grid is missing net knots")
    return idx


class _Hedge:
    """Knot values, deltas and cumulative Riemann sums for one batch of paths."""

    def __init__(self, payoff, model, net, path, upto, cfg):
        idx = _knot_index(net, path, upto)
        self.k = idx.size
        self.xk = path.values[..., idx]
        nd = min(self.k, net.n)
        self.delta = eval_dG_tau(payoff, model, net.to_maturity[:nd],
                                 self.xk[..., :nd], 1, cfg)
        incr = self.delta[..., : self.k - 1] * np.diff(self.xk, axis=-1)
        zero = np.zeros(incr.shape[:-1] + (1,))
        self.cum = np.concatenate([zero, np.cumsum(incr, axis=-1)], axis=-1)
        self.g0 = float(eval_G_tau(payoff, model, 1.0, model.x0, cfg))


def error_path(payoff, model, net, path, eval_times, cfg=DEFAULT_CFG):
    """C_t at each of ``eval_times`` (all must be points of the path grid)."""
    eval_times = np.atleast_1d(np.asarray(eval_times, dtype=float))
    if eval_times.size == 0:
        raise InvalidArgumentError("no evaluation times")
    if np.any(np.diff(eval_times) <= 0):
        raise InvalidArgumentError("eval_times must be strictly increasing")
    pidx = path.grid.index_of(eval_times)
    if np.any(pidx < 0):
        raise GridMismatchError("evaluation times are not on the path grid")
    hedge = _Hedge(payoff, model, net, path, eval_times[-1], cfg)
    xt = path.values[..., pidx]
    i = np.minimum(np.searchsorted(net.knots, eval_times, side="right") - 1, net.n - 1)
    partial = hedge.delta[..., i] * (xt - hedge.xk[..., i])
    c = eval_G_tau(payoff, model, 1.0 - eval_times, xt, cfg) - hedge.g0
    c = c - hedge.cum[..., i] - partial
    c[..., eval_times == 0.0] = 0.0
    return ErrorSample(net, eval_times, c, path)


def error_at(payoff, model, net, path, t, cfg=DEFAULT_CFG):
    """C_t for a single time t on the path grid (per path for a batch)."""
    out = error_path(payoff, model, net, path, [t], cfg).c_values[..., 0]
    return out[()] if np.ndim(out) == 0 else out


def terminal_error(payoff, model, net, stream, n_paths, path_offset=0, cfg=DEFAULT_CFG):
    """C_1 for a batch of paths simulated on the net knots only."""
    path = sample_path(model, net.grid, stream, n_paths, path_offset)
    return error_at(payoff, model, net, path, 1.0, cfg)


def decompose_error(payoff, model, net, path_fine, cfg=DEFAULT_CFG):
    """Terminal values of I1, I2, I3 by left-point sums on the fine grid."""
    kidx = path_fine.grid.index_of(net.knots)
    if np.any(kidx < 0):
        raise GridMismatchError("fine path is not a refinement of the net")
    t = path_fine.grid.times
    x = np.atleast_2d(path_fine.values)
    b = np.atleast_2d(path_fine.brownian)
    # net interval of each left point
    owner = np.searchsorted(kidx, np.arange(t.size - 1), side="right") - 1
    ti_tau = net.to_maturity[owner]
    xi = x[:, kidx[owner]]
    xu = x[:, :-1]
    tau_u = np.where(np.arange(t.size - 1) == kidx[owner], ti_tau, 1.0 - t[:-1])
    gx_u = eval_dG_tau(payoff, model, tau_u, xu, 1, cfg)
    gx_i = eval_dG_tau(payoff, model, net.to_maturity[:-1], x[:, kidx[:-1]], 1, cfg)[:, owner]
    gxx_i = eval_dG_tau(payoff, model, net.to_maturity[:-1], x[:, kidx[:-1]], 2, cfg)[:, owner]
    dx = np.diff(x, axis=1)
    db = np.diff(b, axis=1)
    lin = gxx_i * (xu - xi)
    sig_u = model.sigma(xu)
    sig_i = model.sigma(xi)
    i1 = np.sum((gx_u - gx_i - lin) * dx, axis=1)
    i2 = np.sum((sig_u - sig_i) * lin * db, axis=1)
    i3 = np.sum(sig_i * lin * db, axis=1)
    c1 = np.atleast_1d(error_at(payoff, model, net, path_fine, 1.0, cfg))
    factor = (t.size - 1) // net.n
    if path_fine.values.ndim == 1:
        i1, i2, i3, c1 = i1[0], i2[0], i3[0], c1[0]
    return Decomposition(i1, i2, i3, c1, factor)


def tail_sup_error(payoff, model, net, path, T, cfg=DEFAULT_CFG):
    """sup over path-grid times t in [T, 1] of |C_t - C_T|."""
    if not 0.0 < T <= 1.0:
        raise InvalidArgumentError("T must lie in (0, 1]")
    times = path.grid.times
    window = times[times >= T]
    if window.size == 0 or window[0] != T:
        raise GridMismatchError("T is not on the path grid")
    c = error_path(payoff, model, net, path, window, cfg).c_values
    return np.max(np.abs(c - c[..., :1]), axis=-1)


def error_second_moment(payoff, model, net, cfg=DEFAULT_CFG, u_nodes=8, z_nodes=64):
    """E C_1**2 by deterministic quadrature (no simulation).

    By the Ito isometry
        E C_1**2 = sum_i int_{t_i}^{t_{i+1}} E[sigma(X_u)**2 (dG/dx(u, X_u) - dG/dx(t_i, X_{t_i}))**2] du.
    The inner expectation integrates X_u over its law and X_{t_i} given X_u
    over the backward Brownian bridge; in u, Gauss-Legendre in
    v = sqrt((1 - u)/(1 - t_i)) absorbs the (1 - u)**(-1/2) blow-up at
    maturity.
    """
    from .payoff import state_expectation
    from .quadrature import gauss_hermite, gauss_legendre01

    v, wv = gauss_legendre01(u_nodes)
    zq, wz = gauss_hermite(z_nodes)
    total = 0.0
    for i in range(net.n):
        tau_i, tau_next = net.to_maturity[i], net.to_maturity[i + 1]
        t_i = net.knots[i]
        for vj, wj in zip(v, wv):
            # u runs from t_i to t_{i+1}; 1 - u = tau_i * s**2 with s in [r, 1]
            r = math.sqrt(tau_next / tau_i)
            s = r + (1.0 - r) * vj
            tau_u = tau_i * s * s
            du = tau_i * 2.0 * s * (1.0 - r) * wj
            u = 1.0 - tau_u
            if t_i == 0.0:
                x_i = np.array([model.x0])

                def func(x, tau_u=tau_u):
                    d = eval_dG_tau(payoff, model, tau_u, x, 1, cfg) - eval_dG_tau(
                        payoff, model, tau_i, x_i, 1, cfg)
                    return (model.sigma(x) * d) ** 2
            else:
                def func(x, tau_u=tau_u, u=u, t_i=t_i, tau_i=tau_i):
                    b_u = model.to_brownian(u, x)[:, None]
                    sd = math.sqrt(t_i * (u - t_i) / u)
                    b_i = (t_i / u) * b_u + sd * zq[None, :]
                    x_i = model.from_brownian(t_i, b_i)
                    g_u = eval_dG_tau(payoff, model, tau_u, x, 1, cfg)[:, None]
                    g_i = eval_dG_tau(payoff, model, tau_i, x_i, 1, cfg)
                    return model.sigma(x) ** 2 * (((g_u - g_i) ** 2) @ wz)
            total += du * state_expectation(payoff, model, tau_u, func)
    return total
