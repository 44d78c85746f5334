"""Payoff catalog and the conditional expectation surface G(t, x) = E(g(X_1) | X_t = x).

Closed forms (tau = 1 - t, Phi/phi the standard normal cdf/pdf):

binary(K), X = B
    G = Phi(d), d = (x - K)/sqrt(tau)
binary(K), X = S
    G = Phi(d2), d2 = (log(x/K) - tau/2)/sqrt(tau)
call(K), X = S
    Black-Scholes with unit volatility and zero rate,
    G = x Phi(d1) - K Phi(d1 - sqrt(tau)), d1 = (log(x/K) + tau/2)/sqrt(tau)
call(K), X = B
    Bachelier, G = (x - K) Phi(d) + sqrt(tau) phi(d)
linear(c0, c1)
    G = c0 x + c1 for both models (g(X_t) is already a martingale)
hermite(k), X = B
    G(t, x) = t**(k/2) He_k(x/sqrt(t)) / sqrt(k!), evaluated through the
    recursion P_{j+1} = x P_j - j t P_{j-1} so that t = 0 is covered.

Everything else goes through Gaussian quadrature, split at the kink of g.
Derivatives then use the integration-by-parts kernels

    X = B:  dG/dx = E[g Z] / sqrt(tau),   d2G/dx2 = E[g (Z^2 - 1)] / tau
    X = S:  x dG/dx = E[g Z] / sqrt(tau), x^2 d2G/dx2 = E[g ((Z^2 - 1)/tau - Z/sqrt(tau))]

with g evaluated at x + sqrt(tau) Z, resp. x exp(sqrt(tau) Z - tau/2).
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import ndtr

from .errors import ClampError, DomainError, InvalidArgumentError
from .quadrature import (gauss_hermite, gauss_legendre01, gaussian_panel_rule, gaussian_pdf,
                         hermite_expectation, split_expectation)


@dataclass(frozen=True)
class GEvalConfig:
    quad_nodes: int = 128
    t_clamp: float = 1e-12
    force_quadrature: bool = False

    def __post_init__(self):
        if self.quad_nodes < 16:
            raise InvalidArgumentError("quad_nodes must be >= 16")
        if not self.t_clamp > 0:
            raise InvalidArgumentError("t_clamp must be positive")


DEFAULT_CFG = GEvalConfig()

_KINDS = ("binary", "call", "linear", "hermite", "holder", "power_singular")


def hermite_normalized(k, x):
    """h_k(x) = He_k(x)/sqrt(k!) by the normalized three-term recursion."""
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if k == 0:
        return h_prev
    h = x.copy()
    for j in range(1, k):
        h, h_prev = (x * h - math.sqrt(j) * h_prev) / math.sqrt(j + 1), h
    return h


def _heat_hermite(k, a, x):
    """a**(k/2) He_k(x/sqrt(a)) and its first two x-derivatives, divided by sqrt(k!)."""
    polys = [np.ones_like(x), x]
    for j in range(1, k):
        polys.append(x * polys[j] - j * a * polys[j - 1])
    norm = math.sqrt(math.factorial(k))
    p = polys[k] / norm
    d1 = k * polys[k - 1] / norm if k >= 1 else np.zeros_like(x)
    d2 = k * (k - 1) * polys[k - 2] / norm if k >= 2 else np.zeros_like(x)
    return p, d1, d2


@dataclass(frozen=True)
class Payoff:
    """A payoff g from the catalog.

    ``params`` holds, per kind: binary/call ``(K,)``, linear ``(c0, c1)``,
    hermite ``(k,)``, holder ``(K, eta)``, power_singular ``(eta,)``.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidArgumentError(f"unknown payoff {self.kind!r}")
        need = {"binary": 1, "call": 1, "linear": 2, "hermite": 1,
                "holder": 2, "power_singular": 1}[self.kind]
        if len(self.params) != need:
            raise InvalidArgumentError(f"{self.kind} takes {need} parameter(s)")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "hermite" and (self.params[0] < 0 or self.params[0] != int(self.params[0])):
            raise InvalidArgumentError("hermite order must be a non-negative integer")

    # constructors -----------------------------------------------------

    @classmethod
    def binary(cls, K=1.0):
        return cls("binary", (K,))

    @classmethod
    def call(cls, K=1.0):
        return cls("call", (K,))

    @classmethod
    def linear(cls, c0, c1=0.0):
        return cls("linear", (c0, c1))

    @classmethod
    def hermite(cls, k):
        return cls("hermite", (k,))

    @classmethod
    def holder(cls, K, eta):
        return cls("holder", (K, eta))

    @classmethod
    def power_singular(cls, eta):
        return cls("power_singular", (eta,))

    @classmethod
    def parse(cls, text):
        """Parse ``"binary(1)"``, ``"linear(2,1)"``, ``"hermite:2"`` and the like."""
        s = str(text).strip().replace(" ", "")
        for sep in ("(", ":"):
            if sep in s:
                name, rest = s.split(sep, 1)
                rest = rest.rstrip(")")
                args = tuple(float(a) for a in rest.split(",") if a)
                break
        else:
            name, args = s, ()
        name = {"step": "binary", "digital": "binary", "power": "power_singular"}.get(name, name)
        if not args and name in ("binary", "call"):
            args = (1.0,)
        if name == "linear" and len(args) == 1:
            args = args + (0.0,)
        return cls(name, args)

    def __str__(self):
        args = ",".join(f"{p:g}" for p in self.params)
        return f"{self.kind}({args})"

    # properties -------------------------------------------------------

    @property
    def zero_error(self):
        """Affine payoffs are hedged exactly by the Riemann sum."""
        return self.kind == "linear"

    def kink(self):
        """Location in x-space where g is not smooth, or None."""
        if self.kind in ("binary", "call", "holder"):
            return self.params[0]
        if self.kind == "power_singular":
            return 0.0
        return None

    def has_closed_G(self, model):
        if self.kind in ("binary", "call", "linear"):
            return True
        return self.kind == "hermite" and model.kind == "B"

    def g(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "binary":
            return (x >= self.params[0]).astype(float)
        if self.kind == "call":
            return np.maximum(x - self.params[0], 0.0)
        if self.kind == "linear":
            c0, c1 = self.params
            return c0 * x + c1
        if self.kind == "hermite":
            return hermite_normalized(int(self.params[0]), x)
        if self.kind == "holder":
            K, eta = self.params
            return np.abs(x - K) ** eta
        eta = self.params[0]
        with np.errstate(divide="ignore"):
            return np.where(x > 0, np.abs(x) ** -eta, 0.0)

    def l2_ok(self, model, depth=40):
        """Whether E g(X_1)**2 is finite, judged by quadrature.

        Around the kink the rule uses dyadic panels in |z - kink| whose
        contributions are extrapolated geometrically; the total has to be
        finite and agree at ``depth`` and ``2 depth`` levels.  Smooth payoffs
        compare Gauss-Hermite rules of 128 and 256 nodes.
        """
        x0 = np.array([model.x0])
        br = _z_break(self, model, x0, 1.0)
        sq = lambda z: self.g(_terminal(model, model.x0, 1.0, z)) ** 2
        with np.errstate(all="ignore"):
            if br is None:
                a, b = (float(np.sum(sq(z) * w)) for z, w in (gauss_hermite(128), gauss_hermite(256)))
            else:
                a, b = (_second_moment_near(sq, float(br[0]), d) for d in (depth, 2 * depth))
        return bool(np.isfinite(a) and np.isfinite(b) and abs(a - b) <= 1e-6 * abs(b))

    # closed forms ---------------------------------------------------------

    def _closed(self, model, tau, x):
        """(G, dG/dx, d2G/dx2) for tau > 0, or None if not in closed form."""
        kind, prm = self.kind, self.params
        if kind == "linear":
            c0, c1 = prm
            return c0 * x + c1, np.full_like(x, c0), np.zeros_like(x)
        if kind == "hermite":
            if model.kind != "B":
                return None
            return _heat_hermite(int(prm[0]), 1.0 - tau, x)
        rt = np.sqrt(tau)
        K = prm[0] if kind in ("binary", "call") else None
        if kind == "binary" and model.kind == "B":
            d = (x - K) / rt
            pd = gaussian_pdf(d)
            return ndtr(d), pd / rt, -d * pd / tau
        if kind == "binary":
            d2 = (np.log(x / K) - 0.5 * tau) / rt
            pd = gaussian_pdf(d2)
            return ndtr(d2), pd / (x * rt), -pd * (1.0 + d2 / rt) / (x * x * rt)
        if kind == "call" and model.kind == "B":
            d = (x - K) / rt
            pd = gaussian_pdf(d)
            return (x - K) * ndtr(d) + rt * pd, ndtr(d), pd / rt
        if kind == "call":
            d1 = (np.log(x / K) + 0.5 * tau) / rt
            pd = gaussian_pdf(d1)
            return x * ndtr(d1) - K * ndtr(d1 - rt), ndtr(d1), pd / (x * rt)
        return None


def _terminal(model, x, tau, z):
    if model.kind == "B":
        return x + np.sqrt(tau) * z
    return x * np.exp(np.sqrt(tau) * z - 0.5 * tau)


def terminal_payoff(payoff, model, x, tau, z, br=None):
    """g(X_1) for X_1 = X_t moved by sqrt(tau) z.

    With the break ``br`` (the z image of the strike) given, the step is
    decided on the z side of the break; mapping nodes next to the break
    back to x can land on the wrong side of the strike by rounding.
    """
    if payoff.kind == "binary" and br is not None:
        return (z >= np.asarray(br)[..., None]).astype(float)
    return payoff.g(_terminal(model, x, tau, z))


def _z_break(payoff, model, x, tau):
    k = payoff.kink()
    if k is None:
        return None
    if model.kind == "B":
        return (k - x) / np.sqrt(tau)
    if k <= 0:
        return None
    return (np.log(k / x) + 0.5 * tau) / np.sqrt(tau)


def _second_moment_near(sq, br, depth, q=16, reach=12.0):
    """int sq(z) phi(z) dz with dyadic panels shrinking onto ``br``."""
    v, wv = gauss_legendre01(q)
    far = np.arange(1.0, reach + 0.5, 0.5)
    total = 0.0
    for sign in (-1.0, 1.0):
        e = br + sign * far
        lo, hi = np.minimum(e[:-1], e[1:]), np.maximum(e[:-1], e[1:])
        z = lo[:, None] + (hi - lo)[:, None] * v
        total += float(np.sum(sq(z) * gaussian_pdf(z) * (hi - lo)[:, None] * wv))
        levels = []
        for j in range(depth):
            a, b = 2.0 ** -(j + 1), 2.0 ** -j
            z = br + sign * (a + (b - a) * v)
            levels.append(float(np.sum(sq(z) * gaussian_pdf(z) * (b - a) * wv)))
        c = np.abs(np.array(levels[-6:]))
        if not np.all(np.isfinite(levels)):
            return math.inf
        if np.all(c <= 1e-300):
            total += sum(levels)
            continue
        r = math.exp(np.polyfit(np.arange(c.size), np.log(np.maximum(c, 1e-300)), 1)[0])
        if r >= 1.0:
            return math.inf
        total += sum(levels) + levels[-1] * r / (1.0 - r)
    return total


def _quad(payoff, model, tau, x, order, cfg):
    """Quadrature value of the order-th x-derivative of G for tau > 0."""
    shape = np.broadcast(tau, x).shape
    tau_f = np.broadcast_to(tau, shape).ravel()[:, None]
    x_f = np.broadcast_to(x, shape).ravel()[:, None]
    rt = np.sqrt(tau_f)

    def integrand(z):
        gz = terminal_payoff(payoff, model, x_f, tau_f, z, br)
        if order == 0:
            return gz
        if order == 1:
            return gz * z / rt
        if model.kind == "B":
            return gz * (z * z - 1.0) / tau_f
        return gz * ((z * z - 1.0) / tau_f - z / rt)

    br = _z_break(payoff, model, x_f[:, 0], tau_f[:, 0])
    if br is None:
        out = hermite_expectation(integrand, cfg.quad_nodes)
    else:
        out = split_expectation(integrand, br, cfg.quad_nodes)
    if model.kind == "S" and order:
        out = out / x_f[:, 0] ** order
    return out.reshape(shape)


def _as_arrays(model, t, x):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise InvalidArgumentError("t must lie in [0, 1]")
    model.check_domain(x)
    return t, x


def eval_G_tau(payoff, model, tau, x, cfg=DEFAULT_CFG):
    """G at time-to-maturity ``tau`` (> 0 elementwise, or exactly 0)."""
    tau = np.asarray(tau, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.all(tau == 0):
        return np.broadcast_to(payoff.g(x), np.broadcast(tau, x).shape).copy()
    if np.any(tau == 0):
        shape = np.broadcast(tau, x).shape
        tb, xb = np.broadcast_to(tau, shape), np.broadcast_to(x, shape)
        out = payoff.g(xb).astype(float)
        live = tb > 0
        out[live] = eval_G_tau(payoff, model, tb[live], xb[live], cfg)
        return out
    if not cfg.force_quadrature:
        closed = payoff._closed(model, tau, x)
        if closed is not None:
            return np.broadcast_to(closed[0], np.broadcast(tau, x).shape).copy()
    return _quad(payoff, model, tau, x, 0, cfg)


def eval_G(payoff, model, t, x, cfg=DEFAULT_CFG):
    """G(t, x); equals g(x) exactly at t = 1."""
    t, x = _as_arrays(model, t, x)
    out = eval_G_tau(payoff, model, 1.0 - t, x, cfg)
    if np.any(t == 1.0):
        shape = out.shape
        g = np.broadcast_to(payoff.g(x), shape)
        out = np.where(np.broadcast_to(t, shape) == 1.0, g, out)
    return out[()] if out.ndim == 0 else out


def eval_dG_tau(payoff, model, tau, x, order, cfg=DEFAULT_CFG):
    if order not in (1, 2):
        raise InvalidArgumentError("order must be 1 or 2")
    tau = np.asarray(tau, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(tau < cfg.t_clamp):
        raise ClampError(f"derivative requested within {cfg.t_clamp:g} of maturity")
    if not cfg.force_quadrature:
        closed = payoff._closed(model, tau, x)
        if closed is not None:
            return np.broadcast_to(closed[order], np.broadcast(tau, x).shape).copy()
    return _quad(payoff, model, tau, x, order, cfg)


def eval_dG(payoff, model, t, x, order=1, cfg=DEFAULT_CFG):
    """x-derivative of G of the given order (1 or 2) for t < 1 - t_clamp."""
    t, x = _as_arrays(model, t, x)
    out = eval_dG_tau(payoff, model, 1.0 - t, x, order, cfg)
    return out[()] if out.ndim == 0 else out


def apply_A_tau(payoff, model, tau, x, cfg=DEFAULT_CFG):
    x = np.asarray(x, dtype=float)
    g1 = eval_dG_tau(payoff, model, tau, x, 1, cfg)
    if model.kind == "B":
        return g1
    return x * g1 - eval_G_tau(payoff, model, tau, x, cfg)


def apply_A(payoff, model, t, x, cfg=DEFAULT_CFG):
    """(A G)(t, x) = sigma(x) dG/dx - sigma'(x) G."""
    t, x = _as_arrays(model, t, x)
    out = apply_A_tau(payoff, model, 1.0 - t, x, cfg)
    return out[()] if np.ndim(out) == 0 else out


def pde_residual(payoff, model, t, x, h, cfg=DEFAULT_CFG):
    """Finite-difference dG/dt + sigma(x)**2/2 d2G/dx2 at (t, x).

    Central differences in both variables, one-sided (second order) in t
    when t < h.
    """
    if not (h > 0 and t + h < 1):
        raise InvalidArgumentError("need h > 0 and t + h < 1")
    if model.kind == "S" and x - h <= 0:
        raise DomainError("finite-difference stencil leaves E")
    G = lambda tt, xx: float(eval_G(payoff, model, tt, xx, cfg))
    if t - h >= 0:
        g_t = (G(t + h, x) - G(t - h, x)) / (2 * h)
    else:
        g_t = (-3 * G(t, x) + 4 * G(t + h, x) - G(t + 2 * h, x)) / (2 * h)
    g_xx = (G(t, x + h) - 2 * G(t, x) + G(t, x - h)) / (h * h)
    sig = float(model.sigma(x))
    return g_t + 0.5 * sig * sig * g_xx


def state_expectation(payoff, model, tau, func, q=16):
    """E func(X_t), t = 1 - tau, over the law of X_t by panel quadrature.

    Panels are graded around the Brownian-layer image of the payoff kink at
    the scale sqrt(tau/t) on which dG/dx and d2G/dx2 vary there.  The time is
    passed as time-to-maturity so that precision survives close to t = 1.
    """
    t = 1.0 - tau
    if t == 0.0:
        return float(func(np.array([model.x0]))[0])
    rt = math.sqrt(t)
    k = payoff.kink()
    if model.kind == "S" and k is not None and k <= 0:
        k = None
    if k is None:
        z, w = gauss_hermite(256)
    else:
        kb = float(model.to_brownian(t, k)) / rt
        z, w = gaussian_panel_rule([kb], min(math.sqrt(tau / t), 1.0), q)
    x = model.from_brownian(t, rt * z)
    return float(np.sum(func(x) * w))
